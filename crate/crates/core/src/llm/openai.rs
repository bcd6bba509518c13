//! OpenAI-compatible `/chat/completions` and `/embeddings` client.
//!
//! Works against any server speaking the open chat-completions wire shape.

use std::time::Duration;

use async_trait::async_trait;
use serde_json::{json, Value};

use super::{excerpt, ChatProvider, ChatRequest, ChatResponse, FinishReason, LlmError, Provider, ResponseFormat};

pub const OPENAI_DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";

#[derive(Debug, Clone)]
pub struct OpenAiProvider {
    http: reqwest::Client,
    base_url: String,
    api_key: Option<String>,
    custom_base: bool,
}

impl OpenAiProvider {
    pub fn new(base_url: Option<String>, api_key: Option<String>) -> Self {
        let custom_base = base_url.is_some();
        let base_url = base_url
            .unwrap_or_else(|| OPENAI_DEFAULT_BASE_URL.to_owned())
            .trim_end_matches('/')
            .to_owned();
        OpenAiProvider {
            http: reqwest::Client::builder()
                .timeout(Duration::from_secs(180))
                .build()
                .expect("http client"),
            base_url,
            api_key: api_key.filter(|k| !k.trim().is_empty()),
            custom_base,
        }
    }

    /// Reads `OPENAI_API_KEY` and `OPENAI_BASE_URL`.
    pub fn from_env() -> Self {
        OpenAiProvider::new(
            std::env::var("OPENAI_BASE_URL").ok().filter(|s| !s.is_empty()),
            std::env::var("OPENAI_API_KEY").ok(),
        )
    }

    fn authorize(&self, rb: reqwest::RequestBuilder) -> Result<reqwest::RequestBuilder, LlmError> {
        match &self.api_key {
            Some(key) => Ok(rb.bearer_auth(key)),
            // local compatible servers usually need no key
            None if self.custom_base => Ok(rb),
            None => Err(LlmError::AuthError("OPENAI_API_KEY is not set".into())),
        }
    }

    async fn post(&self, path: &str, body: &Value) -> Result<Value, LlmError> {
        let rb = self.authorize(self.http.post(format!("{}{path}", self.base_url)))?;
        let resp = rb.json(body).send().await.map_err(transport)?;
        let status = resp.status();
        let retry_after = resp
            .headers()
            .get(reqwest::header::RETRY_AFTER)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<u64>().ok())
            .map(Duration::from_secs);
        let text = resp.text().await.map_err(transport)?;
        if !status.is_success() {
            return Err(status_error(status.as_u16(), retry_after, &text));
        }
        serde_json::from_str(&text).map_err(|e| LlmError::TransportError(format!("malformed provider response: {e}")))
    }
}

pub(super) fn transport(e: reqwest::Error) -> LlmError {
    LlmError::TransportError(e.to_string())
}

pub(super) fn status_error(status: u16, retry_after: Option<Duration>, body: &str) -> LlmError {
    let message = serde_json::from_str::<Value>(body)
        .ok()
        .and_then(|v| {
            v.pointer("/error/message")
                .and_then(Value::as_str)
                .map(str::to_owned)
        })
        .unwrap_or_else(|| excerpt(body, 200));
    match status {
        401 | 403 => LlmError::AuthError(message),
        429 => LlmError::RateLimited { retry_after },
        408 | 500..=599 => LlmError::TransportError(format!("HTTP {status}: {message}")),
        _ => LlmError::ProviderRefusal(format!("HTTP {status}: {message}")),
    }
}

#[async_trait]
impl ChatProvider for OpenAiProvider {
    fn provider(&self) -> Provider {
        Provider::OpenAiCompatible
    }

    async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let mut body = json!({
            "model": request.model.model_id,
            "messages": [
                {"role": "system", "content": request.system_prompt},
                {"role": "user", "content": request.user_prompt},
            ],
            "temperature": request.model.temperature,
            "max_tokens": request.model.max_output_tokens,
        });
        if request.response_format == ResponseFormat::JsonObject && request.model.supports_native_json {
            body["response_format"] = json!({"type": "json_object"});
        }
        let v = self.post("/chat/completions", &body).await?;
        let choice = v
            .pointer("/choices/0")
            .ok_or_else(|| LlmError::TransportError("response has no choices".into()))?;
        let finish_reason = match choice.get("finish_reason").and_then(Value::as_str) {
            Some("stop") => FinishReason::Stop,
            Some("length") => FinishReason::Length,
            Some("content_filter") => FinishReason::ContentFilter,
            _ => FinishReason::Other,
        };
        if let Some(refusal) = choice.pointer("/message/refusal").and_then(Value::as_str) {
            return Err(LlmError::ProviderRefusal(refusal.to_owned()));
        }
        let text = choice
            .pointer("/message/content")
            .and_then(Value::as_str)
            .unwrap_or_default()
            .to_owned();
        if finish_reason == FinishReason::ContentFilter && text.is_empty() {
            return Err(LlmError::ProviderRefusal("content filtered".into()));
        }
        let tokens = |p: &str| v.pointer(p).and_then(Value::as_u64).unwrap_or(0) as u32;
        Ok(ChatResponse {
            text,
            finish_reason,
            input_tokens: tokens("/usage/prompt_tokens"),
            output_tokens: tokens("/usage/completion_tokens"),
        })
    }

    async fn embed(&self, text: &str, model_id: &str) -> Result<Vec<f64>, LlmError> {
        let v = self
            .post("/embeddings", &json!({"model": model_id, "input": text}))
            .await?;
        v.pointer("/data/0/embedding")
            .and_then(Value::as_array)
            .map(|a| a.iter().filter_map(Value::as_f64).collect())
            .ok_or_else(|| LlmError::TransportError("embedding response missing data".into()))
    }

    fn credentials_present(&self) -> bool {
        self.api_key.is_some() || self.custom_base
    }

    fn embed_input_limit(&self) -> usize {
        // ~8k tokens
        24_000
    }
}
