//! Job-alignment and content-preservation scores.
//!
//! Token-space scores are the overlap coefficient of unique-word sets,
//! `|A ∩ B| / min(|A|, |B|)`. Latent-space scores are cosine similarities of
//! provider embeddings. Generated resumes are measured through
//! [`canonical_flatten`], never through rendered markup.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::llm::{LlmError, LlmGateway, ModelSpec};
use crate::schema::{canonical_flatten, FlaggedEntry, ResumeDocument, ScoreReport};

/// Identifies the tokenization rule recorded in every [`ScoreReport`].
pub const TOKENIZER_VERSION: &str = "nfc-lower-alnum-runs/1";

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("word set of the {0} text is empty; the overlap coefficient is undefined")]
    EmptyWordSet(&'static str),
    #[error("embedding dimensions differ ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("cannot compare an all-zero embedding")]
    ZeroVector,
    #[error("embeddings come from different models (`{0}` vs `{1}`)")]
    ModelMismatch(String, String),
    #[error("embedding is empty or contains non-finite values")]
    InvalidEmbedding,
    #[error("embedding failed: {0}")]
    Embedding(#[from] LlmError),
}

/// Unique lowercase words of a text.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WordSet {
    pub words: BTreeSet<String>,
    /// Number of tokens before deduplication.
    pub source_token_count: usize,
}

impl WordSet {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }
}

impl<S: Into<String>> FromIterator<S> for WordSet {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        let mut count = 0;
        let words = iter
            .into_iter()
            .inspect(|_| count += 1)
            .map(Into::into)
            .collect();
        WordSet {
            words,
            source_token_count: count,
        }
    }
}

/// NFC, lowercase, split on every run of characters that are neither
/// letters nor digits, deduplicate. No stopwords, no stemming.
pub fn tokenize_unique(text: &str) -> WordSet {
    let lowered: String = text.nfc().collect::<String>().to_lowercase();
    lowered
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .collect()
}

/// `|a ∩ b| / min(|a|, |b|)`.
pub fn overlap_coefficient(a: &WordSet, b: &WordSet) -> Result<f64, MetricError> {
    if a.is_empty() {
        return Err(MetricError::EmptyWordSet("first"));
    }
    if b.is_empty() {
        return Err(MetricError::EmptyWordSet("second"));
    }
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let shared = small.iter().filter(|w| large.contains(w)).count();
    Ok(shared as f64 / small.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub model_id: String,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>, model_id: impl Into<String>) -> Result<Self, MetricError> {
        if values.is_empty() || values.iter().any(|x| !x.is_finite()) {
            return Err(MetricError::InvalidEmbedding);
        }
        Ok(EmbeddingVector {
            values,
            model_id: model_id.into(),
        })
    }
}

pub fn cosine_similarity(v: &EmbeddingVector, w: &EmbeddingVector) -> Result<f64, MetricError> {
    if v.model_id != w.model_id {
        return Err(MetricError::ModelMismatch(v.model_id.clone(), w.model_id.clone()));
    }
    if v.values.len() != w.values.len() {
        return Err(MetricError::DimensionMismatch(v.values.len(), w.values.len()));
    }
    let dot: f64 = v.values.iter().zip(&w.values).map(|(a, b)| a * b).sum();
    let nv = v.values.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nw = w.values.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nv == 0.0 || nw == 0.0 {
        return Err(MetricError::ZeroVector);
    }
    Ok((dot / (nv * nw)).clamp(-1.0, 1.0))
}

/// Embeds `text` with the given embedding model.
pub async fn embed(gateway: &LlmGateway, text: &str, model: &ModelSpec) -> Result<EmbeddingVector, MetricError> {
    let values = gateway.embed(text, model).await?;
    EmbeddingVector::new(values, model.model_id.clone())
}

/// Thresholds of the low-preservation / high-alignment warning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HallucinationThresholds {
    /// Risk when content preservation falls below this...
    pub max_content_preservation: f64,
    /// ...while job alignment exceeds this.
    pub min_job_alignment: f64,
}

impl Default for HallucinationThresholds {
    fn default() -> Self {
        HallucinationThresholds {
            max_content_preservation: 0.5,
            min_job_alignment: 0.8,
        }
    }
}

impl HallucinationThresholds {
    pub fn at_risk(&self, content_preservation: f64, job_alignment: f64, flags: &[FlaggedEntry]) -> bool {
        (content_preservation < self.max_content_preservation && job_alignment > self.min_job_alignment)
            || !flags.is_empty()
    }
}

/// Embedding backend for latent-space scores.
#[derive(Debug, Clone)]
pub struct Embedder {
    pub gateway: LlmGateway,
    pub model: ModelSpec,
}

/// Token-space scores only; needs no provider.
pub fn score_tokens(
    user_text: &str,
    generated: &ResumeDocument,
    job_text: &str,
    flags: &[FlaggedEntry],
    thresholds: &HallucinationThresholds,
) -> Result<ScoreReport, MetricError> {
    let gen = tokenize_unique(&canonical_flatten(generated));
    let user = tokenize_unique(user_text);
    let job = tokenize_unique(job_text);
    if gen.is_empty() {
        return Err(MetricError::EmptyWordSet("generated resume"));
    }
    if user.is_empty() {
        return Err(MetricError::EmptyWordSet("original resume"));
    }
    if job.is_empty() {
        return Err(MetricError::EmptyWordSet("job description"));
    }
    let job_alignment_token = overlap_coefficient(&gen, &job)?;
    let content_preservation_token = overlap_coefficient(&gen, &user)?;
    Ok(ScoreReport {
        job_alignment_token,
        content_preservation_token,
        job_alignment_latent: None,
        content_preservation_latent: None,
        embedder_id: None,
        tokenizer_version: TOKENIZER_VERSION.to_owned(),
        hallucination_risk: thresholds.at_risk(content_preservation_token, job_alignment_token, flags),
        flagged_entries: flags.to_vec(),
    })
}

/// All scores; latent ones only when an embedder is supplied.
pub async fn score(
    user_text: &str,
    generated: &ResumeDocument,
    job_text: &str,
    embedder: Option<&Embedder>,
    flags: &[FlaggedEntry],
    thresholds: &HallucinationThresholds,
) -> Result<ScoreReport, MetricError> {
    let mut report = score_tokens(user_text, generated, job_text, flags, thresholds)?;
    if let Some(e) = embedder {
        let gen = embed(&e.gateway, &canonical_flatten(generated), &e.model).await?;
        let user = embed(&e.gateway, user_text, &e.model).await?;
        let job = embed(&e.gateway, job_text, &e.model).await?;
        report.job_alignment_latent = Some(cosine_similarity(&gen, &job)?);
        report.content_preservation_latent = Some(cosine_similarity(&gen, &user)?);
        report.embedder_id = Some(e.model.model_id.clone());
    }
    Ok(report)
}
