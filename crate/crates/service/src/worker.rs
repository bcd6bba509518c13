//! Executes queued jobs: pipeline, scoring, rendering, artifact storage.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::Ordering;
use std::sync::Arc;

use resumeflow_core::ingest::normalize_text;
use resumeflow_core::metrics::{score, Embedder, HallucinationThresholds};
use resumeflow_core::pipeline::Progress;
use resumeflow_core::render::{render_artifacts, RenderError};
use resumeflow_core::{ModelSpec, SourceDocument, TailorOptions};
use serde::Serialize;
use tokio::sync::{mpsc, Mutex};
use uuid::Uuid;

use crate::jobs::{ArtifactKind, JobState};
use crate::Inner;

pub(crate) struct Task {
    pub id: Uuid,
    pub source: SourceDocument,
    pub job_text: String,
    pub options: TailorOptions,
    pub latent_scores: bool,
}

pub(crate) async fn worker_loop(rx: Arc<Mutex<mpsc::Receiver<Task>>>, inner: Arc<Inner>) {
    loop {
        // holding the lock while waiting hands out tasks strictly in order
        let task = rx.lock().await.recv().await;
        let Some(task) = task else { break };
        inner.queue_depth.fetch_sub(1, Ordering::SeqCst);
        let id = task.id;
        let run = tokio::spawn(run(inner.clone(), task));
        match run.await {
            Ok(Ok(())) => {}
            Ok(Err(message)) => inner.store.fail(id, message),
            Err(e) => inner.store.fail(id, format!("internal error: {e}")),
        }
    }
}

fn json_bytes(v: &impl Serialize) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

async fn run(inner: Arc<Inner>, task: Task) -> Result<(), String> {
    let store = &inner.store;
    let id = task.id;
    let out = inner
        .pipeline
        .tailor_resume_with_progress(&task.source, &task.job_text, &task.options, |p| {
            store.advance(
                id,
                match p {
                    Progress::ExtractingUser => JobState::ExtractingUser,
                    Progress::ExtractingJob => JobState::ExtractingJob,
                    Progress::Tailoring => JobState::Tailoring,
                },
            )
        })
        .await
        .map_err(|e| e.to_string())?;

    store.advance(id, JobState::Scoring);
    let job_text = normalize_text(&task.job_text);
    let flags = &out.tailored.flagged_entries;
    let thresholds = HallucinationThresholds::default();
    let mut warnings = out.warnings.clone();
    let embedder = task.latent_scores.then(|| Embedder {
        gateway: inner.pipeline.gateway().clone(),
        model: ModelSpec::default_embedder(task.options.model.provider),
    });
    let report = match score(&task.source.raw_text, &out.tailored.resume, &job_text, embedder.as_ref(), flags, &thresholds).await {
        Ok(r) => r,
        Err(e) if embedder.is_some() => {
            warnings.push(format!("latent scores unavailable: {e}"));
            score(&task.source.raw_text, &out.tailored.resume, &job_text, None, flags, &thresholds)
                .await
                .map_err(|e| e.to_string())?
        }
        Err(e) => return Err(e.to_string()),
    };

    store.advance(id, JobState::Rendering);
    let engine = inner.engine.clone();
    let template = inner.config.template.clone();
    let tailored = out.tailored.clone();
    let letter = out.cover_letter.clone();
    let rendered = tokio::task::spawn_blocking(move || {
        render_artifacts(&tailored, letter.as_deref(), &template, engine.as_ref())
    })
    .await
    .map_err(|e| format!("rendering aborted: {e}"))?
    .map_err(|e| e.to_string())?;

    let mut files: Vec<(ArtifactKind, Vec<u8>)> = vec![
        (ArtifactKind::UserDataJson, json_bytes(&out.user_data)),
        (ArtifactKind::JobDetailsJson, json_bytes(&out.job)),
        (ArtifactKind::TailoredJson, json_bytes(&out.tailored.resume)),
        (ArtifactKind::ScoreJson, json_bytes(&report)),
        (ArtifactKind::Tex, rendered.tex.into_bytes()),
        (ArtifactKind::Md, rendered.md.into_bytes()),
    ];
    let mut missing = BTreeMap::new();
    match rendered.pdf {
        Ok(pdf) => files.push((ArtifactKind::Pdf, pdf)),
        Err(RenderError::EngineNotFound) => {
            missing.insert(ArtifactKind::Pdf, "latex_engine_absent".to_owned());
        }
        Err(e) => {
            warnings.push(e.to_string());
            missing.insert(ArtifactKind::Pdf, "latex_compile_failed".to_owned());
        }
    }
    match rendered.cover_letter_md {
        Some(letter) => files.push((ArtifactKind::CoverLetterMd, letter.into_bytes())),
        None => {
            missing.insert(ArtifactKind::CoverLetterMd, "not_generated".to_owned());
        }
    }

    let dir = store.artifact_dir(id);
    tokio::fs::create_dir_all(&dir)
        .await
        .map_err(|e| format!("cannot create artifact directory: {e}"))?;
    let mut artifacts: BTreeMap<ArtifactKind, PathBuf> = BTreeMap::new();
    for (kind, bytes) in files {
        let path = dir.join(kind.file_name());
        tokio::fs::write(&path, bytes)
            .await
            .map_err(|e| format!("cannot write {}: {e}", kind.file_name()))?;
        artifacts.insert(kind, path);
    }

    store.update(id, |j| {
        j.artifacts = artifacts;
        j.missing_artifacts = missing;
        j.score = Some(report);
        j.provenance = out.tailored.provenance;
        j.warnings = warnings;
        j.state = JobState::Done;
    });
    Ok(())
}
