//! Google Gemini `generateContent` / `embedContent` client.

use std::time::Duration;

use async_trait::async_trait;
use serde_json::{json, Value};

use super::openai::{status_error, transport};
use super::{ChatProvider, ChatRequest, ChatResponse, FinishReason, LlmError, Provider, ResponseFormat};

pub const GEMINI_DEFAULT_BASE_URL: &str = "https://generativelanguage.googleapis.com/v1beta";

#[derive(Debug, Clone)]
pub struct GeminiProvider {
    http: reqwest::Client,
    base_url: String,
    api_key: Option<String>,
}

impl GeminiProvider {
    pub fn new(base_url: Option<String>, api_key: Option<String>) -> Self {
        GeminiProvider {
            http: reqwest::Client::builder()
                .timeout(Duration::from_secs(180))
                .build()
                .expect("http client"),
            base_url: base_url
                .unwrap_or_else(|| GEMINI_DEFAULT_BASE_URL.to_owned())
                .trim_end_matches('/')
                .to_owned(),
            api_key: api_key.filter(|k| !k.trim().is_empty()),
        }
    }

    /// Reads `GEMINI_API_KEY` and `GEMINI_BASE_URL`.
    pub fn from_env() -> Self {
        GeminiProvider::new(
            std::env::var("GEMINI_BASE_URL").ok().filter(|s| !s.is_empty()),
            std::env::var("GEMINI_API_KEY").ok(),
        )
    }

    async fn post(&self, model: &str, method: &str, body: &Value) -> Result<Value, LlmError> {
        let key = self
            .api_key
            .as_deref()
            .ok_or_else(|| LlmError::AuthError("GEMINI_API_KEY is not set".into()))?;
        let model = model.strip_prefix("models/").unwrap_or(model);
        let url = format!("{}/models/{model}:{method}", self.base_url);
        let resp = self
            .http
            .post(url)
            .header("x-goog-api-key", key)
            .json(body)
            .send()
            .await
            .map_err(transport)?;
        let status = resp.status();
        let text = resp.text().await.map_err(transport)?;
        if !status.is_success() {
            // Gemini reports bad keys as 400 INVALID_ARGUMENT
            if status.as_u16() == 400 && text.contains("API_KEY_INVALID") {
                return Err(LlmError::AuthError("API key not valid".into()));
            }
            return Err(status_error(status.as_u16(), None, &text));
        }
        serde_json::from_str(&text).map_err(|e| LlmError::TransportError(format!("malformed provider response: {e}")))
    }
}

#[async_trait]
impl ChatProvider for GeminiProvider {
    fn provider(&self) -> Provider {
        Provider::Gemini
    }

    async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let mut generation = json!({
            "temperature": request.model.temperature,
            "maxOutputTokens": request.model.max_output_tokens,
        });
        if request.response_format == ResponseFormat::JsonObject && request.model.supports_native_json {
            generation["responseMimeType"] = json!("application/json");
        }
        let body = json!({
            "systemInstruction": {"parts": [{"text": request.system_prompt}]},
            "contents": [{"role": "user", "parts": [{"text": request.user_prompt}]}],
            "generationConfig": generation,
        });
        let v = self.post(&request.model.model_id, "generateContent", &body).await?;
        if let Some(reason) = v.pointer("/promptFeedback/blockReason").and_then(Value::as_str) {
            return Err(LlmError::ProviderRefusal(format!("prompt blocked: {reason}")));
        }
        let candidate = v
            .pointer("/candidates/0")
            .ok_or_else(|| LlmError::ProviderRefusal("no candidates returned".into()))?;
        let finish_reason = match candidate.get("finishReason").and_then(Value::as_str) {
            Some("STOP") => FinishReason::Stop,
            Some("MAX_TOKENS") => FinishReason::Length,
            Some("SAFETY") | Some("RECITATION") | Some("BLOCKLIST") | Some("PROHIBITED_CONTENT") => {
                FinishReason::ContentFilter
            }
            _ => FinishReason::Other,
        };
        let text: String = candidate
            .pointer("/content/parts")
            .and_then(Value::as_array)
            .map(|parts| parts.iter().filter_map(|p| p.get("text").and_then(Value::as_str)).collect())
            .unwrap_or_default();
        if finish_reason == FinishReason::ContentFilter && text.is_empty() {
            return Err(LlmError::ProviderRefusal("response blocked by safety filters".into()));
        }
        let tokens = |p: &str| v.pointer(p).and_then(Value::as_u64).unwrap_or(0) as u32;
        Ok(ChatResponse {
            text,
            finish_reason,
            input_tokens: tokens("/usageMetadata/promptTokenCount"),
            output_tokens: tokens("/usageMetadata/candidatesTokenCount"),
        })
    }

    async fn embed(&self, text: &str, model_id: &str) -> Result<Vec<f64>, LlmError> {
        let full = if model_id.starts_with("models/") {
            model_id.to_owned()
        } else {
            format!("models/{model_id}")
        };
        let body = json!({"model": full, "content": {"parts": [{"text": text}]}});
        let v = self.post(model_id, "embedContent", &body).await?;
        v.pointer("/embedding/values")
            .and_then(Value::as_array)
            .map(|a| a.iter().filter_map(Value::as_f64).collect())
            .ok_or_else(|| LlmError::TransportError("embedding response missing values".into()))
    }

    fn credentials_present(&self) -> bool {
        self.api_key.is_some()
    }

    fn embed_input_limit(&self) -> usize {
        // ~2k tokens
        6_000
    }
}
