use std::fmt;

use resumeflow_core::ingest::IngestError;
use resumeflow_core::metrics::MetricError;
use resumeflow_core::render::RenderError;
use resumeflow_core::PipelineError;

/// A failed command, classified by exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad arguments or unreadable inputs: exit 2.
    Usage(String),
    /// Text or structure could not be extracted: exit 3.
    Extraction(String),
    /// The provider could not be reached or refused us: exit 4.
    Provider(String),
    Other(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Extraction(_) => 3,
            Failure::Provider(_) => 4,
            Failure::Other(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Extraction(m) | Failure::Provider(m) | Failure::Other(m) => f.write_str(m),
        }
    }
}

impl From<IngestError> for Failure {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::EmptyInput | IngestError::TooLarge { .. } => Failure::Usage(e.to_string()),
            _ => Failure::Extraction(e.to_string()),
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match (&e, e.llm_error()) {
            (_, Some(l)) if l.is_provider_failure() => Failure::Provider(e.to_string()),
            (_, Some(_)) => Failure::Extraction(e.to_string()),
            (PipelineError::InvalidInput(_), None) => Failure::Usage(e.to_string()),
            _ => Failure::Other(e.to_string()),
        }
    }
}

impl From<MetricError> for Failure {
    fn from(e: MetricError) -> Self {
        match e {
            MetricError::Embedding(l) if l.is_provider_failure() => Failure::Provider(format!("embedding failed: {l}")),
            e => Failure::Other(e.to_string()),
        }
    }
}

impl From<RenderError> for Failure {
    fn from(e: RenderError) -> Self {
        match e {
            RenderError::UnknownTemplate(_) => Failure::Usage(e.to_string()),
            e => Failure::Other(e.to_string()),
        }
    }
}
