//! End-to-end tailoring: extract the resume and the job, tailor each section,
//! check the result against the source, optionally write a cover letter.

use std::collections::HashMap;
use std::sync::Arc;

use chrono::Utc;
use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::ingest::{normalize_text, SourceDocument};
use crate::llm::{ChatRequest, LlmError, LlmGateway, ModelSpec};
use crate::prompts::{self, PromptError, PromptRegistry};
use crate::schema::{
    validate_job_details, validate_resume, validate_section, FlaggedEntry, JobDetails, ResumeDocument,
    SectionKind, SectionOutcome, SectionProvenance, SectionValue, TailoredResume,
};

pub const DEFAULT_SECTION_PARALLELISM: usize = 4;
pub const MAX_SECTION_PARALLELISM: usize = 16;

pub const UNMATCHED_REASON: &str = "no matching source entry";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailorOptions {
    pub model: ModelSpec,
    pub generate_cover_letter: bool,
    pub section_parallelism: usize,
    /// Remove flagged entries from the output instead of only flagging them.
    pub drop_unmatched_entries: bool,
}

impl TailorOptions {
    pub fn new(model: ModelSpec) -> Self {
        TailorOptions {
            model,
            generate_cover_letter: false,
            section_parallelism: DEFAULT_SECTION_PARALLELISM,
            drop_unmatched_entries: false,
        }
    }

    pub fn with_cover_letter(mut self, yes: bool) -> Self {
        self.generate_cover_letter = yes;
        self
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(1..=MAX_SECTION_PARALLELISM).contains(&self.section_parallelism) {
            return Err(PipelineError::InvalidInput(format!(
                "section_parallelism must be between 1 and {MAX_SECTION_PARALLELISM}, got {}",
                self.section_parallelism
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionStage {
    UserData,
    JobDetails,
}

impl std::fmt::Display for ExtractionStage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ExtractionStage::UserData => "user_data",
            ExtractionStage::JobDetails => "job_details",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("{stage} extraction failed: {source}")]
    ExtractionFailed {
        stage: ExtractionStage,
        #[source]
        source: LlmError,
    },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

impl PipelineError {
    /// The provider error behind a failure, if any.
    pub fn llm_error(&self) -> Option<&LlmError> {
        match self {
            PipelineError::ExtractionFailed { source, .. } => Some(source),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("tailoring section `{section}` failed: {reason}")]
pub struct SectionTailorFailed {
    pub section: SectionKind,
    pub reason: String,
}

/// Coarse progress of a run, reported as each stage starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Progress {
    ExtractingUser,
    ExtractingJob,
    Tailoring,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailorOutput {
    pub tailored: TailoredResume,
    pub user_data: ResumeDocument,
    pub job: JobDetails,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cover_letter: Option<String>,
    /// Non-fatal problems, e.g. a cover letter that could not be generated.
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// The tailoring pipeline over one gateway and prompt registry. Cheap to
/// clone; runs share no mutable state.
#[derive(Clone)]
pub struct Pipeline {
    gateway: LlmGateway,
    prompts: Arc<PromptRegistry>,
}

fn pretty(v: &impl Serialize) -> String {
    serde_json::to_string_pretty(v).expect("schema types always serialize")
}

/// Lowercased with whitespace runs collapsed.
fn anchor(s: &str) -> String {
    s.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

fn unmatched<T>(
    section: SectionKind,
    original: &[T],
    generated: &[T],
    key: impl Fn(&T) -> &str,
    flags: &mut Vec<FlaggedEntry>,
) {
    let known: Vec<String> = original.iter().map(|e| anchor(key(e))).collect();
    for (i, e) in generated.iter().enumerate() {
        if !known.contains(&anchor(key(e))) {
            flags.push(FlaggedEntry {
                section,
                entry_index: i,
                reason: UNMATCHED_REASON.to_owned(),
            });
        }
    }
}

/// Flags generated education, work, project and certification entries whose
/// anchor field (institution, employer, name, name) has no counterpart in the
/// original.
pub fn verify_entries(original: &ResumeDocument, generated: &ResumeDocument) -> Vec<FlaggedEntry> {
    let mut flags = Vec::new();
    unmatched(
        SectionKind::Education,
        &original.education,
        &generated.education,
        |e| &e.institution,
        &mut flags,
    );
    unmatched(
        SectionKind::WorkExperience,
        &original.work_experience,
        &generated.work_experience,
        |e| &e.employer,
        &mut flags,
    );
    unmatched(
        SectionKind::Projects,
        &original.projects,
        &generated.projects,
        |e| &e.name,
        &mut flags,
    );
    unmatched(
        SectionKind::Certifications,
        &original.certifications,
        &generated.certifications,
        |e| &e.name,
        &mut flags,
    );
    flags
}

/// Removes flagged entries from `doc`.
pub fn drop_flagged(doc: &mut ResumeDocument, flags: &[FlaggedEntry]) {
    fn retain<T>(v: &mut Vec<T>, section: SectionKind, flags: &[FlaggedEntry]) {
        let mut i = 0;
        v.retain(|_| {
            let keep = !flags.iter().any(|f| f.section == section && f.entry_index == i);
            i += 1;
            keep
        });
    }
    retain(&mut doc.education, SectionKind::Education, flags);
    retain(&mut doc.work_experience, SectionKind::WorkExperience, flags);
    retain(&mut doc.projects, SectionKind::Projects, flags);
    retain(&mut doc.certifications, SectionKind::Certifications, flags);
}

fn validated_section(kind: SectionKind, v: &Value) -> Result<SectionValue, String> {
    validate_section(kind, v).map(|s| s.value).map_err(|e| e.to_string())
}

fn cover_letter_text(v: &Value) -> Result<String, String> {
    match v.get("cover_letter") {
        Some(Value::String(s)) if !s.trim().is_empty() => Ok(s.trim().to_owned()),
        Some(Value::String(_)) => Err("`cover_letter` must not be empty".into()),
        Some(_) => Err("`cover_letter` must be a string".into()),
        None => Err("missing required field `cover_letter`".into()),
    }
}

impl Pipeline {
    pub fn new(gateway: LlmGateway) -> Self {
        Pipeline {
            gateway,
            prompts: Arc::new(PromptRegistry::builtin()),
        }
    }

    pub fn with_prompts(mut self, prompts: PromptRegistry) -> Self {
        self.prompts = Arc::new(prompts);
        self
    }

    pub fn gateway(&self) -> &LlmGateway {
        &self.gateway
    }

    fn request(&self, template: &str, bindings: &[(&str, &str)], model: ModelSpec) -> Result<ChatRequest, PromptError> {
        let bindings: HashMap<&str, &str> = bindings.iter().copied().collect();
        let rendered = self.prompts.render(template, &bindings)?;
        Ok(ChatRequest::json(rendered.system, rendered.user, model).with_template_id(rendered.template_id))
    }

    /// Structures the resume text with the chosen model.
    pub async fn extract_user_data(
        &self,
        source: &SourceDocument,
        model: &ModelSpec,
    ) -> Result<ResumeDocument, PipelineError> {
        if source.raw_text.trim().is_empty() {
            return Err(PipelineError::InvalidInput("resume text is empty".into()));
        }
        let req = self.request(
            prompts::RESUME_PARSE,
            &[("resume_text", &source.raw_text)],
            model.for_extraction(),
        )?;
        let validated = self
            .gateway
            .complete_structured(&req, |v| validate_resume(v).map_err(|e| e.to_string()))
            .await
            .map_err(|source| PipelineError::ExtractionFailed {
                stage: ExtractionStage::UserData,
                source,
            })?;
        for w in &validated.warnings {
            tracing::warn!(warning = %w, "resume extraction");
        }
        Ok(validated.value)
    }

    pub async fn extract_job_details(&self, job_text: &str, model: &ModelSpec) -> Result<JobDetails, PipelineError> {
        let text = normalize_text(job_text);
        if text.trim().is_empty() {
            return Err(PipelineError::InvalidInput("job description is empty".into()));
        }
        let req = self.request(prompts::JOB_EXTRACT, &[("job_description", text.trim())], model.for_extraction())?;
        let validated = self
            .gateway
            .complete_structured(&req, |v| validate_job_details(v).map_err(|e| e.to_string()))
            .await
            .map_err(|source| PipelineError::ExtractionFailed {
                stage: ExtractionStage::JobDetails,
                source,
            })?;
        for w in &validated.warnings {
            tracing::warn!(warning = %w, "job extraction");
        }
        Ok(validated.value)
    }

    /// Tailors one section. The prompt carries only this section and the job.
    pub async fn tailor_section(
        &self,
        section: &SectionValue,
        job: &JobDetails,
        model: &ModelSpec,
    ) -> Result<SectionValue, SectionTailorFailed> {
        let kind = section.kind();
        let fail = |reason: String| SectionTailorFailed { section: kind, reason };
        let section_json = pretty(&section.to_wrapped_json());
        let job_json = pretty(job);
        let req = self
            .request(
                prompts::SECTION_TAILOR,
                &[
                    ("section_name", kind.key()),
                    ("section_json", &section_json),
                    ("job_details_json", &job_json),
                ],
                model.for_generation(),
            )
            .map_err(|e| fail(e.to_string()))?;
        self.gateway
            .complete_structured(&req, |v| validated_section(kind, v))
            .await
            .map_err(|e| fail(e.to_string()))
    }

    async fn tailor_sections(
        &self,
        user_data: &ResumeDocument,
        job: &JobDetails,
        opts: &TailorOptions,
    ) -> (ResumeDocument, Vec<SectionProvenance>) {
        // personal details are copied, never sent
        let mut doc = ResumeDocument::new(user_data.personal.clone());
        let sections: Vec<SectionValue> = SectionKind::ALL
            .into_iter()
            .filter(|k| !user_data.is_section_empty(*k))
            .map(|k| user_data.section(k))
            .collect();
        let results: Vec<(SectionValue, Result<SectionValue, SectionTailorFailed>)> = stream::iter(sections)
            .map(|original| async move {
                let result = self.tailor_section(&original, job, &opts.model).await;
                (original, result)
            })
            .buffered(opts.section_parallelism)
            .collect()
            .await;

        let mut provenance = Vec::with_capacity(results.len());
        for (original, result) in results {
            let kind = original.kind();
            let (value, outcome, note) = match result {
                Ok(v) if v.is_empty() => (v, SectionOutcome::Tailored, Some("model removed all content".to_owned())),
                Ok(v) => (v, SectionOutcome::Tailored, None),
                Err(e) => {
                    tracing::warn!(section = %kind, error = %e.reason, "section tailoring failed, keeping original");
                    (original, SectionOutcome::FallbackToOriginal, Some(e.reason))
                }
            };
            doc.set_section(value);
            provenance.push(SectionProvenance {
                section: kind,
                model_id: opts.model.model_id.clone(),
                prompt_id: prompts::SECTION_TAILOR.to_owned(),
                timestamp: Utc::now(),
                outcome,
                note,
            });
        }
        (doc, provenance)
    }

    pub async fn generate_cover_letter(
        &self,
        resume: &ResumeDocument,
        job: &JobDetails,
        model: &ModelSpec,
    ) -> Result<String, LlmError> {
        let user_json = pretty(resume);
        let job_json = pretty(job);
        let req = self
            .request(
                prompts::COVER_LETTER,
                &[("user_data_json", &user_json), ("job_details_json", &job_json)],
                model.for_generation(),
            )
            .map_err(|e| LlmError::InvalidRequest(e.to_string()))?;
        self.gateway.complete_structured(&req, cover_letter_text).await
    }

    pub async fn tailor_resume(
        &self,
        source: &SourceDocument,
        job_text: &str,
        opts: &TailorOptions,
    ) -> Result<TailorOutput, PipelineError> {
        self.tailor_resume_with_progress(source, job_text, opts, |_| {}).await
    }

    pub async fn tailor_resume_with_progress(
        &self,
        source: &SourceDocument,
        job_text: &str,
        opts: &TailorOptions,
        on_progress: impl Fn(Progress) + Send + Sync,
    ) -> Result<TailorOutput, PipelineError> {
        opts.validate()?;
        if job_text.trim().is_empty() {
            return Err(PipelineError::InvalidInput("job description is empty".into()));
        }
        on_progress(Progress::ExtractingUser);
        let user_data = self.extract_user_data(source, &opts.model).await?;
        on_progress(Progress::ExtractingJob);
        let job = self.extract_job_details(job_text, &opts.model).await?;
        on_progress(Progress::Tailoring);
        let (mut resume, provenance) = self.tailor_sections(&user_data, &job, opts).await;
        let flagged_entries = verify_entries(&user_data, &resume);
        if opts.drop_unmatched_entries {
            drop_flagged(&mut resume, &flagged_entries);
        }
        let tailored = TailoredResume {
            resume,
            provenance,
            flagged_entries,
        };
        let mut warnings = Vec::new();
        let cover_letter = if opts.generate_cover_letter {
            match self.generate_cover_letter(&tailored.resume, &job, &opts.model).await {
                Ok(letter) => Some(letter),
                Err(e) => {
                    warnings.push(format!("cover letter not generated: {e}"));
                    None
                }
            }
        } else {
            None
        };
        Ok(TailorOutput {
            tailored,
            user_data,
            job,
            cover_letter,
            warnings,
        })
    }
}
