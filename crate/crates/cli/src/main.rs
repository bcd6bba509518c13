//! `resumeflow`: run the tailoring pipeline, or any single stage of it, from
//! the shell. Artifacts go to stdout or the output directory; everything else
//! goes to stderr.

mod failure;

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use resumeflow_core::ingest::{ingest_bytes, normalize_text};
use resumeflow_core::metrics::{score, Embedder, HallucinationThresholds};
use resumeflow_core::render::{render_artifacts, LatexEngine, RenderError, DEFAULT_TEMPLATE, TEMPLATES};
use resumeflow_core::schema::{validate_resume, FlaggedEntry, ResumeDocument, TailoredResume};
use resumeflow_core::{
    LlmGateway, ModelSpec, Pipeline, Provider, ScoreReport, SourceDocument, TailorOptions, DEFAULT_MAX_UPLOAD_BYTES,
};
use resumeflow_service::{ArtifactKind, ServiceConfig};
use serde_json::{json, Value};

use failure::Failure;

#[derive(Parser)]
#[command(name = "resumeflow", version, about = "Tailor a resume to a job posting with an LLM pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and write every artifact to a directory.
    Tailor(TailorArgs),
    /// Print the structured resume as JSON.
    ExtractUser {
        /// Resume as PDF or plain text.
        #[arg(long)]
        resume: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Print the structured job posting as JSON.
    ExtractJob {
        /// Job posting as text; `-` reads stdin.
        #[arg(long)]
        job: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Score a generated resume against the original and the posting.
    Score {
        /// Original resume, PDF or text.
        #[arg(long)]
        original: PathBuf,
        /// Generated resume JSON (a resume document or a tailored resume).
        #[arg(long)]
        generated: PathBuf,
        /// Job posting as text; `-` reads stdin.
        #[arg(long)]
        job: PathBuf,
        /// Also compute embedding scores with this provider's embedder.
        #[arg(long, value_parser = parse_provider)]
        embedder: Option<Provider>,
    },
    /// Run the HTTP job service.
    Serve {
        #[arg(long)]
        port: Option<u16>,
        /// Address to bind, default 127.0.0.1:8087.
        #[arg(long)]
        bind: Option<std::net::SocketAddr>,
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        /// Directory of built web UI assets to serve under /ui.
        #[arg(long)]
        ui_dir: Option<PathBuf>,
        #[arg(long, default_value = DEFAULT_TEMPLATE, value_parser = TEMPLATES)]
        template: String,
    },
}

#[derive(Args)]
struct ModelArgs {
    /// openai, gemini or mock. Default: the first provider with credentials, else mock.
    #[arg(long, value_parser = parse_provider)]
    provider: Option<Provider>,
    /// Model id; the provider's default when omitted.
    #[arg(long)]
    model: Option<String>,
}

#[derive(Args)]
struct TailorArgs {
    #[arg(long)]
    resume: PathBuf,
    /// Job posting as text; `-` reads stdin.
    #[arg(long)]
    job: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    cover_letter: bool,
    #[arg(long, default_value = "resumeflow-out")]
    out: PathBuf,
    #[arg(long, default_value = DEFAULT_TEMPLATE, value_parser = TEMPLATES)]
    template: String,
    /// Add embedding-based scores.
    #[arg(long)]
    latent: bool,
    /// Remove entries that match nothing in the original resume.
    #[arg(long)]
    drop_unmatched: bool,
    /// Sections tailored concurrently.
    #[arg(long, default_value_t = resumeflow_core::pipeline::DEFAULT_SECTION_PARALLELISM)]
    parallelism: usize,
    /// Skip PDF compilation even when a LaTeX engine is available.
    #[arg(long)]
    no_pdf: bool,
}

fn parse_provider(s: &str) -> Result<Provider, String> {
    s.parse()
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Tailor(args) => tailor(args).await,
        Command::ExtractUser { resume, model } => extract_user(&resume, model).await,
        Command::ExtractJob { job, model } => extract_job(&job, model).await,
        Command::Score {
            original,
            generated,
            job,
            embedder,
        } => score_cmd(&original, &generated, &job, embedder).await,
        Command::Serve {
            port,
            bind,
            data_dir,
            workers,
            ui_dir,
            template,
        } => serve(port, bind, data_dir, workers, ui_dir, template).await,
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}

fn read_resume(path: &Path) -> Result<SourceDocument, Failure> {
    let bytes = std::fs::read(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    ingest_bytes(&bytes, DEFAULT_MAX_UPLOAD_BYTES).map_err(Failure::from)
}

fn read_text(path: &Path) -> Result<String, Failure> {
    if path == Path::new("-") {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| Failure::Usage(format!("cannot read stdin: {e}")))?;
        return Ok(s);
    }
    std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn model_spec(gateway: &LlmGateway, args: &ModelArgs) -> ModelSpec {
    let provider = args.provider.unwrap_or_else(|| {
        let p = resumeflow_service::default_provider(gateway);
        eprintln!("using provider {p}");
        p
    });
    let spec = ModelSpec::default_for(provider);
    match &args.model {
        Some(m) => spec.with_model_id(m),
        None => spec,
    }
}

fn print_json(v: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

async fn extract_user(resume: &Path, model: ModelArgs) -> Result<(), Failure> {
    let source = read_resume(resume)?;
    let gateway = LlmGateway::from_env();
    let spec = model_spec(&gateway, &model);
    let doc = Pipeline::new(gateway).extract_user_data(&source, &spec).await?;
    print_json(&doc);
    Ok(())
}

async fn extract_job(job: &Path, model: ModelArgs) -> Result<(), Failure> {
    let text = read_text(job)?;
    let gateway = LlmGateway::from_env();
    let spec = model_spec(&gateway, &model);
    let details = Pipeline::new(gateway).extract_job_details(&text, &spec).await?;
    print_json(&details);
    Ok(())
}

/// A resume document, or a tailored resume whose flags are kept.
fn read_generated(path: &Path) -> Result<(ResumeDocument, Vec<FlaggedEntry>), Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{} is not JSON: {e}", path.display())))?;
    if value.get("resume").is_some() {
        let t: TailoredResume = serde_json::from_value(value)
            .map_err(|e| Failure::Usage(format!("{} is not a tailored resume: {e}", path.display())))?;
        return Ok((t.resume, t.flagged_entries));
    }
    let doc = validate_resume(&value).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    Ok((doc.value, Vec::new()))
}

async fn scores(
    source: &SourceDocument,
    generated: &ResumeDocument,
    job_text: &str,
    flags: &[FlaggedEntry],
    embedder: Option<Embedder>,
    warnings: &mut Vec<String>,
) -> Result<ScoreReport, Failure> {
    let job = normalize_text(job_text);
    let thresholds = HallucinationThresholds::default();
    match score(&source.raw_text, generated, &job, embedder.as_ref(), flags, &thresholds).await {
        Ok(r) => Ok(r),
        Err(e) if embedder.is_some() => {
            warnings.push(format!("latent scores unavailable: {e}"));
            Ok(score(&source.raw_text, generated, &job, None, flags, &thresholds).await?)
        }
        Err(e) => Err(e.into()),
    }
}

async fn score_cmd(original: &Path, generated: &Path, job: &Path, embedder: Option<Provider>) -> Result<(), Failure> {
    let source = read_resume(original)?;
    let (doc, flags) = read_generated(generated)?;
    let job_text = read_text(job)?;
    let embedder = embedder.map(|p| Embedder {
        gateway: LlmGateway::from_env(),
        model: ModelSpec::default_embedder(p),
    });
    let job = normalize_text(&job_text);
    // no silent fallback here: the caller asked for latent scores
    let report = score(
        &source.raw_text,
        &doc,
        &job,
        embedder.as_ref(),
        &flags,
        &HallucinationThresholds::default(),
    )
    .await?;
    print_json(&report);
    Ok(())
}

fn write(dir: &Path, name: &str, bytes: impl AsRef<[u8]>) -> Result<(), Failure> {
    let path = dir.join(name);
    std::fs::write(&path, bytes).map_err(|e| Failure::Other(format!("cannot write {}: {e}", path.display())))
}

fn json_bytes(v: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

async fn tailor(args: TailorArgs) -> Result<(), Failure> {
    let source = read_resume(&args.resume)?;
    let job_text = read_text(&args.job)?;
    let gateway = LlmGateway::from_env();
    let spec = model_spec(&gateway, &args.model);
    let mut options = TailorOptions::new(spec.clone()).with_cover_letter(args.cover_letter);
    options.drop_unmatched_entries = args.drop_unmatched;
    options.section_parallelism = args.parallelism;
    options.validate()?;

    let pipeline = Pipeline::new(gateway.clone());
    let out = pipeline.tailor_resume(&source, &job_text, &options).await?;
    let mut warnings = out.warnings.clone();
    let embedder = args.latent.then(|| Embedder {
        gateway,
        model: ModelSpec::default_embedder(spec.provider),
    });
    let report = scores(
        &source,
        &out.tailored.resume,
        &job_text,
        &out.tailored.flagged_entries,
        embedder,
        &mut warnings,
    )
    .await?;

    let engine = if args.no_pdf { None } else { LatexEngine::discover() };
    let rendered = render_artifacts(&out.tailored, out.cover_letter.as_deref(), &args.template, engine.as_ref())?;

    let dir = &args.out;
    std::fs::create_dir_all(dir).map_err(|e| Failure::Other(format!("cannot create {}: {e}", dir.display())))?;
    write(dir, ArtifactKind::UserDataJson.file_name(), json_bytes(&out.user_data))?;
    write(dir, ArtifactKind::JobDetailsJson.file_name(), json_bytes(&out.job))?;
    write(dir, ArtifactKind::TailoredJson.file_name(), json_bytes(&out.tailored.resume))?;
    write(dir, ArtifactKind::ScoreJson.file_name(), json_bytes(&report))?;
    write(dir, ArtifactKind::Tex.file_name(), &rendered.tex)?;
    write(dir, ArtifactKind::Md.file_name(), &rendered.md)?;
    match rendered.pdf {
        Ok(pdf) => write(dir, ArtifactKind::Pdf.file_name(), pdf)?,
        Err(RenderError::EngineNotFound) if !args.no_pdf => {
            eprintln!("note: no LaTeX engine found, skipping the PDF");
        }
        Err(RenderError::EngineNotFound) => {}
        Err(e) => warnings.push(format!("PDF not produced: {e}")),
    }
    if let Some(letter) = &rendered.cover_letter_md {
        write(dir, ArtifactKind::CoverLetterMd.file_name(), letter)?;
    }
    let provenance = json!({
        "model": spec,
        "sections": out.tailored.provenance,
        "flagged_entries": out.tailored.flagged_entries,
        "warnings": warnings,
    });
    write(dir, "provenance.json", json_bytes(&provenance))?;

    for w in &warnings {
        eprintln!("warning: {w}");
    }
    if report.hallucination_risk {
        eprintln!(
            "warning: hallucination risk ({} flagged entries); review the tailored resume",
            report.flagged_entries.len()
        );
    }
    eprintln!("wrote artifacts to {}", dir.display());
    print_json(&report);
    Ok(())
}

async fn serve(
    port: Option<u16>,
    bind: Option<std::net::SocketAddr>,
    data_dir: Option<PathBuf>,
    workers: Option<usize>,
    ui_dir: Option<PathBuf>,
    template: String,
) -> Result<(), Failure> {
    let mut config = ServiceConfig::from_env().map_err(Failure::Usage)?;
    if let Some(b) = bind {
        config.bind = b;
    }
    if let Some(p) = port {
        config.bind.set_port(p);
    }
    if data_dir.is_some() {
        config.data_dir = data_dir;
    }
    if let Some(w) = workers {
        if w == 0 {
            return Err(Failure::Usage("--workers must be at least 1".into()));
        }
        config.workers = w;
    }
    if ui_dir.is_some() {
        config.ui_dir = ui_dir;
    }
    config.template = template;
    resumeflow_service::serve(config)
        .await
        .map_err(|e| Failure::Other(format!("service stopped: {e}")))
}
