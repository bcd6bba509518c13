//! Resume tailoring: turn a resume and a job posting into a job-specific
//! resume with a structured LLM pipeline, then render and score it.

pub mod ingest;
pub mod llm;
pub mod metrics;
pub mod pipeline;
pub mod prompts;
pub mod render;
pub mod schema;

pub use ingest::{SourceDocument, DEFAULT_MAX_UPLOAD_BYTES};
pub use llm::{LlmError, LlmGateway, ModelSpec, Provider};
pub use pipeline::{Pipeline, PipelineError, TailorOptions, TailorOutput};
pub use schema::{JobDetails, ResumeDocument, ScoreReport, TailoredResume};
