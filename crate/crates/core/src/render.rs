//! LaTeX, PDF and Markdown output for tailored resumes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::Duration;

use thiserror::Error;
use wait_timeout::ChildExt;

use crate::schema::{ResumeDocument, SectionKind, TailoredResume};

pub const TEMPLATES: [&str; 2] = ["classic", "compact"];
pub const DEFAULT_TEMPLATE: &str = "classic";

/// Env var naming the LaTeX engine (name on `PATH` or a path).
pub const ENGINE_ENV: &str = "RESUMEFLOW_LATEX_ENGINE";

const COMPILE_TIMEOUT: Duration = Duration::from_secs(120);

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum RenderError {
    #[error("unknown resume template `{0}` (available: classic, compact)")]
    UnknownTemplate(String),
    #[error("no LaTeX engine found (looked for tectonic, latexmk, pdflatex)")]
    EngineNotFound,
    #[error("LaTeX compilation failed:\n{0}")]
    CompileError(String),
    #[error("LaTeX compilation timed out")]
    Timeout,
    #[error("i/o error during compilation: {0}")]
    Io(String),
}

/// Escapes text for LaTeX. Callers escape every user string exactly once.
pub fn escape_latex(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 8);
    for c in text.chars() {
        match c {
            '\\' => out.push_str("\\textbackslash{}"),
            '{' => out.push_str("\\{"),
            '}' => out.push_str("\\}"),
            '$' => out.push_str("\\$"),
            '&' => out.push_str("\\&"),
            '#' => out.push_str("\\#"),
            '%' => out.push_str("\\%"),
            '_' => out.push_str("\\_"),
            '~' => out.push_str("\\textasciitilde{}"),
            '^' => out.push_str("\\textasciicircum{}"),
            // not special, but OT1/T1 glyph slots differ from ASCII
            '<' => out.push_str("\\textless{}"),
            '>' => out.push_str("\\textgreater{}"),
            '|' => out.push_str("\\textbar{}"),
            '\n' | '\r' | '\t' => out.push(' '),
            _ => out.push(c),
        }
    }
    out
}

struct Style {
    class_options: &'static str,
    margin: &'static str,
    name_size: &'static str,
    section_cmd: &'static str,
    item_sep: &'static str,
    inline_skills: bool,
}

fn style(template: &str) -> Result<Style, RenderError> {
    match template {
        "classic" => Ok(Style {
            class_options: "11pt,letterpaper",
            margin: "0.75in",
            name_size: "\\LARGE",
            section_cmd: "\\newcommand{\\resumesection}[1]{\\vspace{8pt}{\\large\\bfseries #1}\\par\\vspace{2pt}\\hrule\\vspace{4pt}}",
            item_sep: "1pt",
            inline_skills: false,
        }),
        "compact" => Ok(Style {
            class_options: "10pt,letterpaper",
            margin: "0.5in",
            name_size: "\\Large",
            section_cmd: "\\newcommand{\\resumesection}[1]{\\vspace{5pt}{\\bfseries\\MakeUppercase{#1}}\\par\\vspace{1pt}\\hrule\\vspace{2pt}}",
            item_sep: "0pt",
            inline_skills: true,
        }),
        other => Err(RenderError::UnknownTemplate(other.to_owned())),
    }
}

fn date_range(start: &str, end: Option<&str>, open_ended: bool) -> String {
    match (start.is_empty(), end) {
        (true, None) => String::new(),
        (true, Some(e)) => e.to_owned(),
        (false, Some(e)) => format!("{start} -- {e}"),
        (false, None) if open_ended => format!("{start} -- Present"),
        (false, None) => start.to_owned(),
    }
}

fn date_range_escaped(start: &str, end: Option<&str>, open_ended: bool) -> String {
    let start = escape_latex(start);
    let end = end.map(escape_latex);
    date_range(&start, end.as_deref(), open_ended)
}

fn items(out: &mut String, bullets: &[String]) {
    if bullets.is_empty() {
        return;
    }
    out.push_str("\\begin{itemize}\n");
    for b in bullets {
        // `\item{}` keeps a leading `[` from being read as an optional label
        let _ = writeln!(out, "  \\item{{}} {}", escape_latex(b));
    }
    out.push_str("\\end{itemize}\n");
}

fn join_escaped<'a>(parts: impl IntoIterator<Item = &'a str>, sep: &str) -> String {
    parts
        .into_iter()
        .filter(|s| !s.is_empty())
        .map(escape_latex)
        .collect::<Vec<_>>()
        .join(sep)
}

/// Renders LaTeX source with the named template.
pub fn to_latex(resume: &TailoredResume, template_name: &str) -> Result<String, RenderError> {
    let st = style(template_name)?;
    let doc = &resume.resume;
    let mut out = String::new();
    let _ = writeln!(out, "\\documentclass[{}]{{article}}", st.class_options);
    out.push_str("\\usepackage[T1]{fontenc}\n\\usepackage[utf8]{inputenc}\n\\usepackage{lmodern}\n\\usepackage{textcomp}\n");
    let _ = writeln!(out, "\\usepackage[margin={}]{{geometry}}", st.margin);
    out.push_str("\\usepackage{enumitem}\n");
    let _ = writeln!(out, "\\setlist[itemize]{{leftmargin=1.2em,itemsep={},topsep=2pt,parsep=0pt}}", st.item_sep);
    out.push_str("\\pagestyle{empty}\n\\setlength{\\parindent}{0pt}\n");
    out.push_str(st.section_cmd);
    out.push('\n');
    out.push_str("\\newcommand{\\entryhead}[2]{\\textbf{#1}\\hfill #2\\par}\n");
    out.push_str("\\newcommand{\\entrysub}[2]{\\textit{#1}\\hfill\\textit{#2}\\par}\n");
    out.push_str("\\begin{document}\n\n");

    let p = &doc.personal;
    out.push_str("\\begin{center}\n");
    let _ = writeln!(out, "{{{}\\bfseries {}}}\\par\\vspace{{4pt}}", st.name_size, escape_latex(&p.full_name));
    let mut contact: Vec<String> = [&p.email, &p.phone, &p.location]
        .into_iter()
        .flatten()
        .map(|s| escape_latex(s))
        .collect();
    contact.extend(
        p.links
            .iter()
            .map(|l| format!("{}: \\texttt{{{}}}", escape_latex(&l.label), escape_latex(&l.url))),
    );
    if !contact.is_empty() {
        let _ = writeln!(out, "{}\\par", contact.join(" \\textbar{} "));
    }
    out.push_str("\\end{center}\n");

    for kind in SectionKind::ALL {
        if doc.is_section_empty(kind) {
            continue;
        }
        if kind == SectionKind::ExtraSections {
            for s in &doc.extra_sections {
                let _ = writeln!(out, "\n\\resumesection{{{}}}", escape_latex(&s.title));
                items(&mut out, &s.bullets);
            }
            continue;
        }
        let _ = writeln!(out, "\n\\resumesection{{{}}}", kind.title());
        latex_section(&mut out, doc, kind, &st);
    }
    out.push_str("\n\\end{document}\n");
    Ok(out)
}

fn latex_section(out: &mut String, doc: &ResumeDocument, kind: SectionKind, st: &Style) {
    match kind {
        SectionKind::Summary => {
            if let Some(s) = &doc.summary {
                let _ = writeln!(out, "{}\\par", escape_latex(s));
            }
        }
        SectionKind::Education => {
            for e in &doc.education {
                let dates = date_range_escaped(&e.start_date, e.end_date.as_deref(), false);
                let _ = writeln!(out, "\\entryhead{{{}}}{{{}}}", escape_latex(&e.institution), dates);
                let degree = match &e.field_of_study {
                    Some(f) => format!("{} in {}", escape_latex(&e.degree), escape_latex(f)),
                    None => escape_latex(&e.degree),
                };
                let gpa = e.gpa.as_deref().map(|g| format!("GPA: {}", escape_latex(g))).unwrap_or_default();
                let _ = writeln!(out, "\\entrysub{{{degree}}}{{{gpa}}}");
                if !e.coursework.is_empty() {
                    let _ = writeln!(
                        out,
                        "\\textit{{Coursework:}} {}\\par",
                        join_escaped(e.coursework.iter().map(String::as_str), ", ")
                    );
                }
                out.push_str("\\vspace{3pt}\n");
            }
        }
        SectionKind::WorkExperience => {
            for e in &doc.work_experience {
                let dates = date_range_escaped(&e.start_date, e.end_date.as_deref(), true);
                let _ = writeln!(out, "\\entryhead{{{}}}{{{}}}", escape_latex(&e.role), dates);
                let loc = e.location.as_deref().map(escape_latex).unwrap_or_default();
                let _ = writeln!(out, "\\entrysub{{{}}}{{{}}}", escape_latex(&e.employer), loc);
                items(out, &e.bullets);
                out.push_str("\\vspace{3pt}\n");
            }
        }
        SectionKind::Projects => {
            for e in &doc.projects {
                let date = e.date_range.as_deref().map(escape_latex).unwrap_or_default();
                let _ = writeln!(out, "\\entryhead{{{}}}{{{}}}", escape_latex(&e.name), date);
                let tech = join_escaped(e.technologies.iter().map(String::as_str), ", ");
                let link = e
                    .link
                    .as_deref()
                    .map(|l| format!("\\texttt{{{}}}", escape_latex(l)))
                    .unwrap_or_default();
                if !tech.is_empty() || !link.is_empty() {
                    let _ = writeln!(out, "\\entrysub{{{tech}}}{{{link}}}");
                }
                items(out, &e.bullets);
                out.push_str("\\vspace{3pt}\n");
            }
        }
        SectionKind::SkillGroups => {
            if st.inline_skills {
                let groups: Vec<String> = doc
                    .skill_groups
                    .iter()
                    .map(|g| {
                        format!(
                            "\\textbf{{{}:}} {}",
                            escape_latex(&g.category),
                            join_escaped(g.skills.iter().map(String::as_str), ", ")
                        )
                    })
                    .collect();
                let _ = writeln!(out, "{}\\par", groups.join(" \\quad "));
            } else {
                for g in &doc.skill_groups {
                    let _ = writeln!(
                        out,
                        "\\textbf{{{}:}} {}\\par",
                        escape_latex(&g.category),
                        join_escaped(g.skills.iter().map(String::as_str), ", ")
                    );
                }
            }
        }
        SectionKind::Achievements => items(out, &doc.achievements),
        SectionKind::Certifications => {
            let lines: Vec<String> = doc
                .certifications
                .iter()
                .map(|c| {
                    let mut s = escape_latex(&c.name);
                    if let Some(i) = &c.issuer {
                        let _ = write!(s, ", {}", escape_latex(i));
                    }
                    if let Some(d) = &c.date {
                        let _ = write!(s, " ({})", escape_latex(d));
                    }
                    s
                })
                .collect();
            out.push_str("\\begin{itemize}\n");
            for l in lines {
                let _ = writeln!(out, "  \\item{{}} {l}");
            }
            out.push_str("\\end{itemize}\n");
        }
        SectionKind::ExtraSections => {}
    }
}

/// Renders Markdown with section headings in schema order.
pub fn to_markdown(resume: &TailoredResume) -> String {
    let doc = &resume.resume;
    let p = &doc.personal;
    let mut out = format!("# {}\n", p.full_name);
    let mut contact: Vec<String> = [&p.email, &p.phone, &p.location]
        .into_iter()
        .flatten()
        .cloned()
        .collect();
    contact.extend(p.links.iter().map(|l| format!("[{}]({})", l.label, l.url)));
    if !contact.is_empty() {
        let _ = writeln!(out, "\n{}", contact.join(" · "));
    }
    let bullets = |out: &mut String, items: &[String]| {
        for b in items {
            let _ = writeln!(out, "- {b}");
        }
    };
    for kind in SectionKind::ALL {
        if doc.is_section_empty(kind) {
            continue;
        }
        if kind != SectionKind::ExtraSections {
            let _ = writeln!(out, "\n## {}\n", kind.title());
        }
        match kind {
            SectionKind::Summary => {
                let _ = writeln!(out, "{}", doc.summary.as_deref().unwrap_or_default());
            }
            SectionKind::Education => {
                for e in &doc.education {
                    let degree = match &e.field_of_study {
                        Some(f) => format!("{} in {f}", e.degree),
                        None => e.degree.clone(),
                    };
                    let mut lines = vec![format!("**{}**, {degree}", e.institution)];
                    let dates = date_range(&e.start_date, e.end_date.as_deref(), false);
                    if !dates.is_empty() {
                        lines[0].push_str(&format!(" ({})", dates.replace("--", "–")));
                    }
                    if let Some(g) = &e.gpa {
                        lines.push(format!("GPA: {g}"));
                    }
                    if !e.coursework.is_empty() {
                        lines.push(format!("Coursework: {}", e.coursework.join(", ")));
                    }
                    // two trailing spaces make a Markdown line break
                    let _ = writeln!(out, "{}\n", lines.join("  \n"));
                }
            }
            SectionKind::WorkExperience => {
                for e in &doc.work_experience {
                    let _ = writeln!(out, "### {}, {}\n", e.role, e.employer);
                    let dates = date_range(&e.start_date, e.end_date.as_deref(), true).replace("--", "–");
                    let meta: Vec<&str> = [e.location.as_deref().unwrap_or_default(), dates.as_str()]
                        .into_iter()
                        .filter(|s| !s.is_empty())
                        .collect();
                    if !meta.is_empty() {
                        let _ = writeln!(out, "*{}*\n", meta.join(" | "));
                    }
                    bullets(&mut out, &e.bullets);
                    out.push('\n');
                }
            }
            SectionKind::Projects => {
                for e in &doc.projects {
                    let _ = write!(out, "### {}", e.name);
                    if let Some(d) = &e.date_range {
                        let _ = write!(out, " ({d})");
                    }
                    out.push_str("\n\n");
                    if !e.technologies.is_empty() {
                        let _ = writeln!(out, "*{}*", e.technologies.join(", "));
                    }
                    if let Some(l) = &e.link {
                        let _ = writeln!(out, "<{l}>");
                    }
                    if !e.technologies.is_empty() || e.link.is_some() {
                        out.push('\n');
                    }
                    bullets(&mut out, &e.bullets);
                    out.push('\n');
                }
            }
            SectionKind::SkillGroups => {
                for g in &doc.skill_groups {
                    let _ = writeln!(out, "- **{}:** {}", g.category, g.skills.join(", "));
                }
            }
            SectionKind::Achievements => bullets(&mut out, &doc.achievements),
            SectionKind::Certifications => {
                for c in &doc.certifications {
                    let _ = write!(out, "- {}", c.name);
                    if let Some(i) = &c.issuer {
                        let _ = write!(out, ", {i}");
                    }
                    if let Some(d) = &c.date {
                        let _ = write!(out, " ({d})");
                    }
                    out.push('\n');
                }
            }
            SectionKind::ExtraSections => {
                for s in &doc.extra_sections {
                    let _ = writeln!(out, "\n## {}\n", s.title);
                    bullets(&mut out, &s.bullets);
                }
            }
        }
    }
    while out.contains("\n\n\n") {
        out = out.replace("\n\n\n", "\n\n");
    }
    let trimmed = out.trim_end().len();
    out.truncate(trimmed);
    out.push('\n');
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineKind {
    Tectonic,
    Latexmk,
    Pdflatex,
}

impl EngineKind {
    const DISCOVERY_ORDER: [EngineKind; 3] = [EngineKind::Tectonic, EngineKind::Latexmk, EngineKind::Pdflatex];

    fn binary(self) -> &'static str {
        match self {
            EngineKind::Tectonic => "tectonic",
            EngineKind::Latexmk => "latexmk",
            EngineKind::Pdflatex => "pdflatex",
        }
    }

    fn args(self) -> &'static [&'static str] {
        match self {
            // tectonic never enables shell escape unless asked to
            EngineKind::Tectonic => &["--outdir", ".", "--keep-logs", "resume.tex"],
            EngineKind::Latexmk => &[
                "-pdf",
                "-no-shell-escape",
                "-interaction=nonstopmode",
                "-halt-on-error",
                "resume.tex",
            ],
            EngineKind::Pdflatex => &["-no-shell-escape", "-interaction=nonstopmode", "-halt-on-error", "resume.tex"],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatexEngine {
    pub kind: EngineKind,
    pub path: PathBuf,
}

fn find_on_path(name: &str) -> Option<PathBuf> {
    let paths = std::env::var_os("PATH").unwrap_or_default();
    std::env::split_paths(&paths)
        .map(|dir| dir.join(name))
        .find(|p| is_executable(p))
}

#[cfg(unix)]
fn is_executable(p: &Path) -> bool {
    use std::os::unix::fs::PermissionsExt;
    p.metadata().is_ok_and(|m| m.is_file() && m.permissions().mode() & 0o111 != 0)
}

#[cfg(not(unix))]
fn is_executable(p: &Path) -> bool {
    p.is_file()
}

impl LatexEngine {
    /// Engine for an explicit path; the argument style follows the file name
    /// and defaults to pdflatex's.
    pub fn from_path(path: impl Into<PathBuf>) -> Self {
        let path = path.into();
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().to_lowercase())
            .unwrap_or_default();
        let kind = EngineKind::DISCOVERY_ORDER
            .into_iter()
            .find(|k| stem == k.binary())
            .unwrap_or(EngineKind::Pdflatex);
        LatexEngine { kind, path }
    }

    /// `RESUMEFLOW_LATEX_ENGINE` if set, else the first of tectonic,
    /// latexmk, pdflatex found on `PATH`.
    pub fn discover() -> Option<Self> {
        match std::env::var(ENGINE_ENV) {
            Ok(v) if !v.trim().is_empty() => {
                let v = v.trim();
                let candidate = if v.contains(std::path::MAIN_SEPARATOR) {
                    Some(PathBuf::from(v)).filter(|p| is_executable(p))
                } else {
                    find_on_path(v)
                };
                candidate.map(LatexEngine::from_path)
            }
            _ => EngineKind::DISCOVERY_ORDER.into_iter().find_map(|k| {
                find_on_path(k.binary()).map(|path| LatexEngine { kind: k, path })
            }),
        }
    }

    /// Compiles in a fresh temporary directory with shell escape disabled.
    pub fn compile(&self, latex_source: &str) -> Result<Vec<u8>, RenderError> {
        let io = |e: std::io::Error| RenderError::Io(e.to_string());
        let dir = tempfile::tempdir().map_err(io)?;
        std::fs::write(dir.path().join("resume.tex"), latex_source).map_err(io)?;
        let mut child = Command::new(&self.path)
            .args(self.kind.args())
            .current_dir(dir.path())
            // kpathsea-level guards on top of the command-line flags
            .env("shell_escape", "f")
            .env("openout_any", "p")
            .env("openin_any", "p")
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(io)?;
        let status = match child.wait_timeout(COMPILE_TIMEOUT).map_err(io)? {
            Some(s) => s,
            None => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(RenderError::Timeout);
            }
        };
        let output = child.wait_with_output().map_err(io)?;
        let pdf_path = dir.path().join("resume.pdf");
        if status.success() {
            if let Ok(bytes) = std::fs::read(&pdf_path) {
                if bytes.starts_with(b"%PDF") {
                    return Ok(bytes);
                }
            }
        }
        let log = std::fs::read_to_string(dir.path().join("resume.log")).unwrap_or_else(|_| {
            format!(
                "{}{}",
                String::from_utf8_lossy(&output.stdout),
                String::from_utf8_lossy(&output.stderr)
            )
        });
        Err(RenderError::CompileError(log_excerpt(&log)))
    }
}

/// Error lines (`! ...`) with a little context, or the log tail.
fn log_excerpt(log: &str) -> String {
    let lines: Vec<&str> = log.lines().collect();
    let mut picked = Vec::new();
    for (i, l) in lines.iter().enumerate() {
        if l.starts_with('!') {
            picked.extend(lines[i..(i + 3).min(lines.len())].iter().copied());
        }
    }
    if picked.is_empty() {
        picked = lines[lines.len().saturating_sub(20)..].to_vec();
    }
    picked.join("\n")
}

/// Compiles with the discovered engine.
pub fn compile_pdf(latex_source: &str) -> Result<Vec<u8>, RenderError> {
    LatexEngine::discover()
        .ok_or(RenderError::EngineNotFound)?
        .compile(latex_source)
}

/// Everything produced for one tailored resume.
#[derive(Debug, Clone)]
pub struct RenderedArtifacts {
    pub tex: String,
    pub md: String,
    pub pdf: Result<Vec<u8>, RenderError>,
    pub cover_letter_md: Option<String>,
}

/// Renders .tex and .md always, and a PDF when `engine` is available.
pub fn render_artifacts(
    resume: &TailoredResume,
    cover_letter: Option<&str>,
    template_name: &str,
    engine: Option<&LatexEngine>,
) -> Result<RenderedArtifacts, RenderError> {
    let tex = to_latex(resume, template_name)?;
    let md = to_markdown(resume);
    let pdf = match engine {
        Some(e) => e.compile(&tex),
        None => Err(RenderError::EngineNotFound),
    };
    let cover_letter_md = cover_letter.map(|c| format!("{}\n", c.trim_end()));
    Ok(RenderedArtifacts {
        tex,
        md,
        pdf,
        cover_letter_md,
    })
}
