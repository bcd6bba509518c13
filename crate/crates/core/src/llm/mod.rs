//! Provider-agnostic chat completion with structured-output handling.
//!
//! [`LlmGateway`] routes a [`ChatRequest`] to the provider named by its
//! [`ModelSpec`], retries transport failures with exponential backoff and,
//! through [`LlmGateway::complete_structured`], turns free-form model output
//! into validated values.

mod gemini;
mod mock;
pub mod offline;
mod openai;
mod repair;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::Mutex;
use tokio::time::Instant;

pub use gemini::GeminiProvider;
pub use mock::{prompt_key, MockProvider, MockReply};
pub use openai::OpenAiProvider;
pub use repair::repair_json;

pub const DEFAULT_OPENAI_MODEL: &str = "gpt-4-1106-preview";
pub const DEFAULT_GEMINI_MODEL: &str = "gemini-pro";
pub const DEFAULT_MOCK_MODEL: &str = "mock-offline";

pub const OPENAI_EMBEDDING_MODEL: &str = "text-embedding-ada-002";
pub const GEMINI_EMBEDDING_MODEL: &str = "models/embedding-001";
pub const MOCK_EMBEDDING_MODEL: &str = "mock-hash-embedding-v1";

pub const EXTRACTION_TEMPERATURE: f64 = 0.0;
pub const GENERATION_TEMPERATURE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provider {
    OpenAiCompatible,
    Gemini,
    Mock,
}

impl Provider {
    pub const ALL: [Provider; 3] = [Provider::OpenAiCompatible, Provider::Gemini, Provider::Mock];

    pub fn name(self) -> &'static str {
        match self {
            Provider::OpenAiCompatible => "openai",
            Provider::Gemini => "gemini",
            Provider::Mock => "mock",
        }
    }
}

impl fmt::Display for Provider {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Provider {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "openai" | "openai_compatible" | "openai-compatible" => Ok(Provider::OpenAiCompatible),
            "gemini" => Ok(Provider::Gemini),
            "mock" => Ok(Provider::Mock),
            other => Err(format!("unknown provider `{other}` (expected openai, gemini or mock)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub provider: Provider,
    pub model_id: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub supports_native_json: bool,
}

impl ModelSpec {
    /// The default chat model of a provider.
    pub fn default_for(provider: Provider) -> Self {
        let (model_id, native_json) = match provider {
            Provider::OpenAiCompatible => (DEFAULT_OPENAI_MODEL, true),
            Provider::Gemini => (DEFAULT_GEMINI_MODEL, false),
            Provider::Mock => (DEFAULT_MOCK_MODEL, false),
        };
        ModelSpec {
            provider,
            model_id: model_id.to_owned(),
            temperature: EXTRACTION_TEMPERATURE,
            max_output_tokens: 4096,
            supports_native_json: native_json,
        }
    }

    /// The embedding model used for latent-space metrics.
    pub fn default_embedder(provider: Provider) -> Self {
        let model_id = match provider {
            Provider::OpenAiCompatible => OPENAI_EMBEDDING_MODEL,
            Provider::Gemini => GEMINI_EMBEDDING_MODEL,
            Provider::Mock => MOCK_EMBEDDING_MODEL,
        };
        ModelSpec {
            model_id: model_id.to_owned(),
            ..ModelSpec::default_for(provider)
        }
    }

    pub fn with_model_id(mut self, model_id: impl Into<String>) -> Self {
        self.model_id = model_id.into();
        self
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature.max(0.0);
        self
    }

    pub fn for_extraction(&self) -> Self {
        self.clone().with_temperature(EXTRACTION_TEMPERATURE)
    }

    pub fn for_generation(&self) -> Self {
        self.clone().with_temperature(GENERATION_TEMPERATURE)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseFormat {
    FreeText,
    JsonObject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system_prompt: String,
    pub user_prompt: String,
    pub response_format: ResponseFormat,
    pub model: ModelSpec,
    /// Id of the prompt template the request was rendered from, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template_id: Option<String>,
}

impl ChatRequest {
    pub fn json(system: impl Into<String>, user: impl Into<String>, model: ModelSpec) -> Self {
        ChatRequest {
            system_prompt: system.into(),
            user_prompt: user.into(),
            response_format: ResponseFormat::JsonObject,
            model,
            template_id: None,
        }
    }

    pub fn with_template_id(mut self, id: impl Into<String>) -> Self {
        self.template_id = Some(id.into());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishReason {
    Stop,
    /// Output hit the token limit and must be treated as truncated.
    Length,
    ContentFilter,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub finish_reason: FinishReason,
    pub input_tokens: u32,
    pub output_tokens: u32,
}

impl ChatResponse {
    pub fn stop(text: impl Into<String>) -> Self {
        ChatResponse {
            text: text.into(),
            finish_reason: FinishReason::Stop,
            input_tokens: 0,
            output_tokens: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LlmError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("authentication failed: {0}")]
    AuthError(String),
    #[error("rate limited by provider{}", .retry_after.map(|d| format!(" (retry after {}s)", d.as_secs())).unwrap_or_default())]
    RateLimited { retry_after: Option<Duration> },
    #[error("transport error: {0}")]
    TransportError(String),
    #[error("provider refused the request: {0}")]
    ProviderRefusal(String),
    #[error("no provider registered for `{0}`")]
    ProviderUnavailable(Provider),
    #[error("could not repair model output into JSON: {0}")]
    Unrepairable(String),
    #[error("structured output failed after {attempts} attempts: {last_error}")]
    StructuredOutputFailed { attempts: u32, last_error: String },
}

impl LlmError {
    pub fn is_transient(&self) -> bool {
        matches!(self, LlmError::TransportError(_))
    }

    /// Errors that come from talking to the provider, as opposed to bad output.
    pub fn is_provider_failure(&self) -> bool {
        matches!(
            self,
            LlmError::AuthError(_)
                | LlmError::RateLimited { .. }
                | LlmError::TransportError(_)
                | LlmError::ProviderRefusal(_)
                | LlmError::ProviderUnavailable(_)
        )
    }
}

#[async_trait]
pub trait ChatProvider: Send + Sync {
    fn provider(&self) -> Provider;

    async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError>;

    async fn embed(&self, text: &str, model_id: &str) -> Result<Vec<f64>, LlmError>;

    /// Whether credentials required by this provider are configured.
    fn credentials_present(&self) -> bool {
        true
    }

    /// Longest input, in characters, accepted by the embedding endpoint.
    fn embed_input_limit(&self) -> usize {
        usize::MAX
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
    pub factor: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_delay: Duration::from_secs(1),
            factor: 2,
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (0-based).
    pub fn delay(&self, retry: u32) -> Duration {
        self.base_delay * self.factor.saturating_pow(retry)
    }
}

/// Wording appended to the user prompt when a structured reply failed validation.
pub fn validation_feedback(error: &str) -> String {
    format!("Your previous output failed validation: {error}. Emit only corrected JSON.")
}

const STRUCTURED_ATTEMPTS: u32 = 2;

struct Registered {
    client: Arc<dyn ChatProvider>,
    blocked_until: Mutex<Option<Instant>>,
}

/// Routes requests to registered providers.
#[derive(Clone)]
pub struct LlmGateway {
    providers: Arc<HashMap<Provider, Registered>>,
    retry: RetryPolicy,
}

impl fmt::Debug for LlmGateway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LlmGateway")
            .field("providers", &self.providers.keys().collect::<Vec<_>>())
            .field("retry", &self.retry)
            .finish()
    }
}

#[derive(Default)]
pub struct GatewayBuilder {
    providers: HashMap<Provider, Registered>,
    retry: RetryPolicy,
}

impl GatewayBuilder {
    pub fn with_provider(mut self, client: Arc<dyn ChatProvider>) -> Self {
        self.providers.insert(
            client.provider(),
            Registered {
                client,
                blocked_until: Mutex::new(None),
            },
        );
        self
    }

    pub fn retry_policy(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn build(self) -> LlmGateway {
        LlmGateway {
            providers: Arc::new(self.providers),
            retry: self.retry,
        }
    }
}

impl LlmGateway {
    pub fn builder() -> GatewayBuilder {
        GatewayBuilder::default()
    }

    /// Gateway with the real providers configured from the environment plus
    /// the offline mock.
    pub fn from_env() -> Self {
        LlmGateway::builder()
            .with_provider(Arc::new(OpenAiProvider::from_env()))
            .with_provider(Arc::new(GeminiProvider::from_env()))
            .with_provider(Arc::new(MockProvider::offline()))
            .build()
    }

    pub fn provider(&self, provider: Provider) -> Option<Arc<dyn ChatProvider>> {
        self.providers.get(&provider).map(|r| r.client.clone())
    }

    pub fn providers(&self) -> Vec<Provider> {
        Provider::ALL
            .into_iter()
            .filter(|p| self.providers.contains_key(p))
            .collect()
    }

    fn registered(&self, provider: Provider) -> Result<&Registered, LlmError> {
        self.providers
            .get(&provider)
            .ok_or(LlmError::ProviderUnavailable(provider))
    }

    async fn wait_for_rate_limit(reg: &Registered) {
        let until = *reg.blocked_until.lock().await;
        if let Some(until) = until {
            tokio::time::sleep_until(until).await;
        }
    }

    async fn note_rate_limit(reg: &Registered, err: &LlmError) {
        if let LlmError::RateLimited {
            retry_after: Some(after),
        } = err
        {
            *reg.blocked_until.lock().await = Some(Instant::now() + *after);
        }
    }

    async fn with_retries<T, F, Fut>(&self, reg: &Registered, mut call: F) -> Result<T, LlmError>
    where
        F: FnMut() -> Fut,
        Fut: std::future::Future<Output = Result<T, LlmError>>,
    {
        let mut retry = 0;
        loop {
            Self::wait_for_rate_limit(reg).await;
            match call().await {
                Ok(v) => return Ok(v),
                Err(e) if e.is_transient() && retry < self.retry.max_retries => {
                    let delay = self.retry.delay(retry);
                    tracing::warn!(error = %e, attempt = retry + 1, ?delay, "transient provider failure, retrying");
                    tokio::time::sleep(delay).await;
                    retry += 1;
                }
                Err(e) => {
                    Self::note_rate_limit(reg, &e).await;
                    return Err(e);
                }
            }
        }
    }

    /// Sends one chat request, retrying transport failures.
    pub async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        if request.user_prompt.trim().is_empty() {
            return Err(LlmError::InvalidRequest("user_prompt must not be empty".into()));
        }
        let reg = self.registered(request.model.provider)?;
        self.with_retries(reg, || reg.client.complete(request)).await
    }

    /// Requests JSON, repairs it, and validates it; one corrective retry.
    pub async fn complete_structured<T, V>(&self, request: &ChatRequest, validator: V) -> Result<T, LlmError>
    where
        V: Fn(&serde_json::Value) -> Result<T, String>,
    {
        if request.response_format != ResponseFormat::JsonObject {
            return Err(LlmError::InvalidRequest(
                "structured completion requires response_format=json_object".into(),
            ));
        }
        let mut current = request.clone();
        let mut last_error = String::new();
        for attempt in 1..=STRUCTURED_ATTEMPTS {
            let response = self.complete(&current).await?;
            let outcome = if response.finish_reason == FinishReason::Length {
                Err("output was truncated at the token limit".to_owned())
            } else {
                repair_json(&response.text)
                    .map_err(|e| e.to_string())
                    .and_then(|v| validator(&v))
            };
            match outcome {
                Ok(value) => return Ok(value),
                Err(e) => {
                    tracing::debug!(attempt, error = %e, "structured output rejected");
                    current.user_prompt = format!("{}\n\n{}", request.user_prompt, validation_feedback(&e));
                    last_error = e;
                }
            }
        }
        Err(LlmError::StructuredOutputFailed {
            attempts: STRUCTURED_ATTEMPTS,
            last_error,
        })
    }

    /// Embeds `text`, truncating it to the provider's input limit.
    pub async fn embed(&self, text: &str, model: &ModelSpec) -> Result<Vec<f64>, LlmError> {
        if text.trim().is_empty() {
            return Err(LlmError::InvalidRequest("cannot embed empty text".into()));
        }
        let reg = self.registered(model.provider)?;
        let limit = reg.client.embed_input_limit();
        let input = match text.char_indices().nth(limit) {
            Some((cut, _)) => {
                tracing::warn!(limit, chars = text.chars().count(), "embedding input truncated");
                &text[..cut]
            }
            None => text,
        };
        self.with_retries(reg, || reg.client.embed(input, &model.model_id)).await
    }
}

pub(crate) fn excerpt(s: &str, max: usize) -> String {
    match s.char_indices().nth(max) {
        Some((cut, _)) => format!("{}…", &s[..cut]),
        None => s.to_owned(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicU32, Ordering};

    struct Flaky {
        failures: u32,
        calls: AtomicU32,
    }

    #[async_trait]
    impl ChatProvider for Flaky {
        fn provider(&self) -> Provider {
            Provider::Mock
        }

        async fn complete(&self, _req: &ChatRequest) -> Result<ChatResponse, LlmError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.failures {
                Err(LlmError::TransportError("connection reset".into()))
            } else {
                Ok(ChatResponse::stop("ok"))
            }
        }

        async fn embed(&self, _text: &str, _model: &str) -> Result<Vec<f64>, LlmError> {
            Ok(vec![1.0])
        }
    }

    fn req() -> ChatRequest {
        ChatRequest::json("sys", "user", ModelSpec::default_for(Provider::Mock))
    }

    #[tokio::test(start_paused = true)]
    async fn two_transport_failures_then_success() {
        let flaky = Arc::new(Flaky { failures: 2, calls: AtomicU32::new(0) });
        let gw = LlmGateway::builder().with_provider(flaky.clone()).build();
        let start = Instant::now();
        let resp = gw.complete(&req()).await.unwrap();
        assert_eq!(resp.text, "ok");
        assert_eq!(flaky.calls.load(Ordering::SeqCst), 3);
        // 1 s + 2 s of backoff
        assert_eq!(start.elapsed(), Duration::from_secs(3));
    }

    #[tokio::test(start_paused = true)]
    async fn gives_up_after_three_retries() {
        let flaky = Arc::new(Flaky { failures: 10, calls: AtomicU32::new(0) });
        let gw = LlmGateway::builder().with_provider(flaky.clone()).build();
        let start = Instant::now();
        let err = gw.complete(&req()).await.unwrap_err();
        assert!(matches!(err, LlmError::TransportError(_)));
        assert_eq!(flaky.calls.load(Ordering::SeqCst), 4);
        assert_eq!(start.elapsed(), Duration::from_secs(1 + 2 + 4));
    }

    #[tokio::test]
    async fn empty_user_prompt_rejected() {
        let gw = LlmGateway::builder().with_provider(Arc::new(MockProvider::new())).build();
        let mut r = req();
        r.user_prompt = "  ".into();
        assert!(matches!(gw.complete(&r).await, Err(LlmError::InvalidRequest(_))));
    }

    #[tokio::test]
    async fn unregistered_provider() {
        let gw = LlmGateway::builder().build();
        assert_eq!(
            gw.complete(&req()).await.unwrap_err(),
            LlmError::ProviderUnavailable(Provider::Mock)
        );
    }

    #[test]
    fn model_defaults() {
        assert_eq!(ModelSpec::default_for(Provider::OpenAiCompatible).model_id, "gpt-4-1106-preview");
        assert_eq!(ModelSpec::default_for(Provider::Gemini).model_id, "gemini-pro");
        assert_eq!(ModelSpec::default_embedder(Provider::Gemini).model_id, "models/embedding-001");
        assert_eq!(
            ModelSpec::default_embedder(Provider::OpenAiCompatible).model_id,
            "text-embedding-ada-002"
        );
        let m = ModelSpec::default_for(Provider::Mock);
        assert_eq!(m.for_extraction().temperature, 0.0);
        assert_eq!(m.for_generation().temperature, 0.2);
        assert_eq!("OpenAI".parse::<Provider>().unwrap(), Provider::OpenAiCompatible);
        assert!("claude".parse::<Provider>().is_err());
    }
}
