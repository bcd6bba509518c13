use std::str::FromStr;
use std::sync::atomic::Ordering;
use std::sync::Arc;

use axum::extract::multipart::{Field, MultipartError};
use axum::extract::{DefaultBodyLimit, Multipart, Path, Request, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use resumeflow_core::ingest::{extract_pdf_text, from_plain_text, is_pdf, IngestError};
use resumeflow_core::llm::{
    DEFAULT_GEMINI_MODEL, DEFAULT_MOCK_MODEL, DEFAULT_OPENAI_MODEL,
};
use resumeflow_core::{ModelSpec, Provider, SourceDocument, TailorOptions};
use serde::Serialize;
use serde_json::json;
use tower_http::services::ServeDir;
use uuid::Uuid;

use crate::jobs::{ArtifactKind, JobState, PipelineJob};
use crate::worker::Task;
use crate::Inner;

/// Models offered per provider; any other id is accepted as well.
const CATALOG: &[(Provider, &[&str])] = &[
    (
        Provider::OpenAiCompatible,
        &[DEFAULT_OPENAI_MODEL, "gpt-4o", "gpt-4o-mini", "gpt-3.5-turbo"],
    ),
    (Provider::Gemini, &[DEFAULT_GEMINI_MODEL, "gemini-1.5-pro", "gemini-1.5-flash"]),
    (Provider::Mock, &[DEFAULT_MOCK_MODEL]),
];

#[derive(Debug)]
pub(crate) struct ApiError {
    status: StatusCode,
    reason: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, reason: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            reason,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "invalid_input", message)
    }

    fn not_found(reason: &'static str, message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, reason, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"error": self.message, "reason": self.reason}))).into_response()
    }
}

impl From<MultipartError> for ApiError {
    fn from(e: MultipartError) -> Self {
        let status = e.status();
        let reason = if status == StatusCode::PAYLOAD_TOO_LARGE {
            "payload_too_large"
        } else {
            "invalid_input"
        };
        ApiError::new(status, reason, e.body_text())
    }
}

impl From<IngestError> for ApiError {
    fn from(e: IngestError) -> Self {
        let (status, reason) = match &e {
            IngestError::NotAPdf => (StatusCode::UNPROCESSABLE_ENTITY, "not_a_pdf"),
            IngestError::EncryptedPdf => (StatusCode::UNPROCESSABLE_ENTITY, "encrypted_pdf"),
            IngestError::NoExtractableText => (StatusCode::UNPROCESSABLE_ENTITY, "no_extractable_text"),
            IngestError::MalformedPdf(_) => (StatusCode::UNPROCESSABLE_ENTITY, "malformed_pdf"),
            IngestError::NotUtf8 => (StatusCode::UNPROCESSABLE_ENTITY, "not_utf8"),
            IngestError::EmptyInput => (StatusCode::BAD_REQUEST, "invalid_input"),
            IngestError::TooLarge { .. } => (StatusCode::PAYLOAD_TOO_LARGE, "payload_too_large"),
        };
        ApiError::new(status, reason, e.to_string())
    }
}

pub(crate) fn router(inner: Arc<Inner>) -> Router {
    let body_limit = inner.config.max_upload_bytes + (1 << 20);
    let protected = Router::new()
        .route("/v1/tailor", post(submit))
        .route("/v1/jobs/{id}", get(get_job))
        .route("/v1/jobs/{id}/artifacts/{kind}", get(get_artifact))
        .route("/v1/models", get(models))
        .route_layer(middleware::from_fn_with_state(inner.clone(), require_token));
    let mut app = Router::new()
        .merge(protected)
        .route("/v1/health", get(health))
        .layer(DefaultBodyLimit::max(body_limit))
        .with_state(inner.clone());
    if let Some(dir) = &inner.config.ui_dir {
        app = app.nest_service("/ui", ServeDir::new(dir).append_index_html_on_directories(true));
    }
    app
}

async fn require_token(State(inner): State<Arc<Inner>>, req: Request, next: Next) -> Response {
    if let Some(token) = &inner.config.api_token {
        let expected = format!("Bearer {token}");
        let given = req.headers().get(header::AUTHORIZATION).and_then(|v| v.to_str().ok());
        if given != Some(expected.as_str()) {
            return ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or invalid bearer token")
                .into_response();
        }
    }
    next.run(req).await
}

struct Upload {
    bytes: Vec<u8>,
    content_type: Option<String>,
    file_name: Option<String>,
}

async fn read_file(mut field: Field<'_>, limit: usize) -> Result<Upload, ApiError> {
    let content_type = field.content_type().map(str::to_owned);
    let file_name = field.file_name().map(str::to_owned);
    let mut bytes = Vec::new();
    while let Some(chunk) = field.chunk().await? {
        bytes.extend_from_slice(&chunk);
        if bytes.len() > limit {
            return Err(IngestError::TooLarge {
                size: bytes.len(),
                limit,
            }
            .into());
        }
    }
    Ok(Upload {
        bytes,
        content_type,
        file_name,
    })
}

fn parse_bool(name: &str, v: &str) -> Result<bool, ApiError> {
    match v.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "on" | "yes" => Ok(true),
        "false" | "0" | "off" | "no" | "" => Ok(false),
        other => Err(ApiError::bad_request(format!("`{name}` must be a boolean, got `{other}`"))),
    }
}

/// PDF by magic number; text when declared as text; anything else is rejected.
fn ingest_upload(upload: Upload) -> Result<SourceDocument, IngestError> {
    if upload.bytes.is_empty() {
        return Err(IngestError::EmptyInput);
    }
    if is_pdf(&upload.bytes) {
        return extract_pdf_text(&upload.bytes);
    }
    let declared_text = upload.content_type.as_deref().is_some_and(|c| c.starts_with("text/"))
        || upload
            .file_name
            .as_deref()
            .is_some_and(|n| [".txt", ".md", ".text"].iter().any(|ext| n.to_ascii_lowercase().ends_with(ext)));
    if !declared_text {
        return Err(IngestError::NotAPdf);
    }
    let text = std::str::from_utf8(&upload.bytes).map_err(|_| IngestError::NotUtf8)?;
    let mut doc = from_plain_text(text)?;
    doc.byte_size = upload.bytes.len();
    Ok(doc)
}

async fn submit(State(inner): State<Arc<Inner>>, mut form: Multipart) -> Result<Response, ApiError> {
    let limit = inner.config.max_upload_bytes;
    let mut upload = None;
    let mut resume_text: Option<String> = None;
    let mut job_text: Option<String> = None;
    let mut provider: Option<String> = None;
    let mut model: Option<String> = None;
    let mut cover_letter = false;
    let mut latent = false;
    while let Some(field) = form.next_field().await? {
        let name = field.name().unwrap_or_default().to_owned();
        match name.as_str() {
            "resume" | "resume_file" => {
                if upload.is_some() {
                    return Err(ApiError::bad_request("more than one resume file"));
                }
                upload = Some(read_file(field, limit).await?);
            }
            "resume_text" => resume_text = Some(field.text().await?),
            "job_description" => job_text = Some(field.text().await?),
            "provider" => provider = Some(field.text().await?),
            "model" => model = Some(field.text().await?),
            "generate_cover_letter" => cover_letter = parse_bool(&name, &field.text().await?)?,
            "latent_scores" => latent = parse_bool(&name, &field.text().await?)?,
            other => tracing::debug!(field = other, "ignoring unknown form field"),
        }
    }

    let resume_text = resume_text.filter(|t| !t.trim().is_empty());
    let source = match (upload, resume_text) {
        (Some(_), Some(_)) => {
            return Err(ApiError::bad_request("send either a resume file or resume_text, not both"))
        }
        (None, None) => return Err(ApiError::bad_request("a resume file or resume_text is required")),
        (None, Some(text)) => from_plain_text(&text)?,
        (Some(upload), None) => tokio::task::spawn_blocking(move || ingest_upload(upload))
            .await
            .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??,
    };
    let job_text = job_text
        .filter(|t| !t.trim().is_empty())
        .ok_or_else(|| ApiError::bad_request("job_description is required"))?;

    let provider = match provider.as_deref().map(str::trim).filter(|p| !p.is_empty()) {
        Some(p) => Provider::from_str(p).map_err(ApiError::bad_request)?,
        None => inner.default_provider,
    };
    if inner.pipeline.gateway().provider(provider).is_none() {
        return Err(ApiError::bad_request(format!("provider `{}` is not available", provider.name())));
    }
    let mut spec = ModelSpec::default_for(provider);
    if let Some(m) = model.as_deref().map(str::trim).filter(|m| !m.is_empty()) {
        spec = spec.with_model_id(m);
    }
    let options = TailorOptions::new(spec).with_cover_letter(cover_letter);

    let permit = inner.queue.try_reserve().map_err(|_| {
        ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "queue_full", "job queue is full, retry later")
    })?;
    let job = PipelineJob::queued(options.clone());
    let id = job.id;
    inner.store.insert(job);
    inner.queue_depth.fetch_add(1, Ordering::SeqCst);
    permit.send(Task {
        id,
        source,
        job_text,
        options,
        latent_scores: latent,
    });
    tracing::info!(job = %id, provider = provider.name(), "job queued");
    Ok((
        StatusCode::ACCEPTED,
        Json(json!({"job_id": id, "status_url": format!("/v1/jobs/{id}")})),
    )
        .into_response())
}

fn lookup(inner: &Inner, id: &str) -> Result<PipelineJob, ApiError> {
    Uuid::parse_str(id)
        .ok()
        .and_then(|id| inner.store.get(id))
        .ok_or_else(|| ApiError::not_found("job_not_found", format!("no job `{id}`")))
}

async fn get_job(State(inner): State<Arc<Inner>>, Path(id): Path<String>) -> Result<Json<PipelineJob>, ApiError> {
    lookup(&inner, &id).map(Json)
}

async fn get_artifact(
    State(inner): State<Arc<Inner>>,
    Path((id, kind)): Path<(String, String)>,
) -> Result<Response, ApiError> {
    let job = lookup(&inner, &id)?;
    let kind = ArtifactKind::from_str(&kind)
        .map_err(|_| ApiError::not_found("unknown_artifact_kind", format!("no artifact kind `{kind}`")))?;
    if job.state != JobState::Done {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "job_not_done",
            format!("job is {:?}; artifacts are available once it is Done", job.state),
        ));
    }
    let Some(path) = job.artifacts.get(&kind) else {
        let reason = match job.missing_artifacts.get(&kind).map(String::as_str) {
            Some("latex_engine_absent") => "latex_engine_absent",
            Some("latex_compile_failed") => "latex_compile_failed",
            Some("not_generated") => "not_generated",
            _ => "artifact_not_found",
        };
        return Err(ApiError::not_found(reason, format!("artifact `{}` is not available", kind.key())));
    };
    let bytes = tokio::fs::read(path)
        .await
        .map_err(|e| ApiError::not_found("artifact_not_found", format!("artifact file unreadable: {e}")))?;
    let disposition = format!("attachment; filename=\"{}\"", kind.file_name());
    Ok((
        [
            (header::CONTENT_TYPE, HeaderValue::from_static(kind.content_type())),
            (
                header::CONTENT_DISPOSITION,
                HeaderValue::from_str(&disposition).expect("ascii file name"),
            ),
        ],
        bytes,
    )
        .into_response())
}

#[derive(Serialize)]
struct ModelInfo {
    provider: &'static str,
    model_id: &'static str,
    is_default: bool,
    requires_credentials_present: bool,
}

async fn models(State(inner): State<Arc<Inner>>) -> Json<Vec<ModelInfo>> {
    let gateway = inner.pipeline.gateway();
    let default = ModelSpec::default_for(inner.default_provider);
    let list = CATALOG
        .iter()
        .filter_map(|(p, ids)| gateway.provider(*p).map(|c| (*p, *ids, c.credentials_present())))
        .flat_map(|(p, ids, creds)| {
            let default = default.clone();
            ids.iter().map(move |id| ModelInfo {
                provider: p.name(),
                model_id: id,
                is_default: p == default.provider && *id == default.model_id,
                requires_credentials_present: creds,
            })
        })
        .collect();
    Json(list)
}

async fn health(State(inner): State<Arc<Inner>>) -> Json<serde_json::Value> {
    Json(json!({
        "status": "ok",
        "queue_depth": inner.queue_depth.load(Ordering::SeqCst),
        "latex_engine_present": inner.engine.is_some(),
    }))
}
