//! Canonical data model: resumes, job details, tailored output and scores.
//!
//! The serde representation of these types is the JSON wire contract shared
//! by the pipeline, the HTTP service and the CLI.

mod flatten;
mod types;
mod validate;

pub use flatten::{canonical_flatten, flatten_job};
pub use types::*;
pub use validate::{validate_job_details, validate_resume, validate_section, SchemaError, Validated};
