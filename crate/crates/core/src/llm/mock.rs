//! Deterministic in-process provider for tests and offline runs.

use std::collections::{HashMap, VecDeque};
use std::sync::{Arc, Mutex};

use async_trait::async_trait;
use sha2::{Digest, Sha256};

use super::offline::OfflineResponder;
use super::{ChatProvider, ChatRequest, ChatResponse, FinishReason, LlmError, Provider};

/// Key under which scripted replies are stored: SHA-256 over the system and
/// user prompt, separated by a NUL byte.
pub fn prompt_key(system_prompt: &str, user_prompt: &str) -> String {
    let mut h = Sha256::new();
    h.update(system_prompt.as_bytes());
    h.update([0u8]);
    h.update(user_prompt.as_bytes());
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq)]
pub enum MockReply {
    Text(String),
    /// Reply cut off at the token limit.
    Truncated(String),
    Fail(LlmError),
}

impl MockReply {
    pub fn text(s: impl Into<String>) -> Self {
        MockReply::Text(s.into())
    }

    fn into_response(self) -> Result<ChatResponse, LlmError> {
        match self {
            MockReply::Text(t) => Ok(ChatResponse::stop(t)),
            MockReply::Truncated(t) => Ok(ChatResponse {
                finish_reason: FinishReason::Length,
                ..ChatResponse::stop(t)
            }),
            MockReply::Fail(e) => Err(e),
        }
    }
}

type Responder = Arc<dyn Fn(&ChatRequest) -> MockReply + Send + Sync>;

/// Scripted replies keyed by [`prompt_key`], with an optional fallback
/// responder for unscripted prompts. Every request is recorded.
#[derive(Default)]
pub struct MockProvider {
    scripts: Mutex<HashMap<String, VecDeque<MockReply>>>,
    responder: Option<Responder>,
    calls: Mutex<Vec<ChatRequest>>,
}

pub const MOCK_EMBEDDING_DIM: usize = 256;

impl MockProvider {
    pub fn new() -> Self {
        MockProvider::default()
    }

    /// Mock backed by [`OfflineResponder`]: heuristic extraction, echoed
    /// sections. Needs no network and no credentials.
    pub fn offline() -> Self {
        let responder = OfflineResponder;
        MockProvider::with_responder(move |req| responder.respond(req))
    }

    pub fn with_responder(f: impl Fn(&ChatRequest) -> MockReply + Send + Sync + 'static) -> Self {
        MockProvider {
            responder: Some(Arc::new(f)),
            ..MockProvider::default()
        }
    }

    /// Queues replies for one exact prompt pair. The last queued reply repeats
    /// once the queue is down to it.
    pub fn script(&self, system_prompt: &str, user_prompt: &str, replies: impl IntoIterator<Item = MockReply>) {
        self.script_key(prompt_key(system_prompt, user_prompt), replies);
    }

    pub fn script_key(&self, key: String, replies: impl IntoIterator<Item = MockReply>) {
        self.scripts
            .lock()
            .unwrap()
            .entry(key)
            .or_default()
            .extend(replies);
    }

    pub fn calls(&self) -> Vec<ChatRequest> {
        self.calls.lock().unwrap().clone()
    }

    pub fn call_count(&self) -> usize {
        self.calls.lock().unwrap().len()
    }

    fn scripted(&self, key: &str) -> Option<MockReply> {
        let mut scripts = self.scripts.lock().unwrap();
        let queue = scripts.get_mut(key)?;
        if queue.len() > 1 {
            queue.pop_front()
        } else {
            queue.front().cloned()
        }
    }
}

/// Feature-hashed bag of words, L2-normalized. Similar texts get similar vectors.
pub(crate) fn hash_embedding(text: &str) -> Vec<f64> {
    let mut v = vec![0.0; MOCK_EMBEDDING_DIM];
    let words = crate::metrics::tokenize_unique(text);
    let mut add = |token: &str| {
        let digest = Sha256::digest(token.as_bytes());
        let idx = u16::from_le_bytes([digest[0], digest[1]]) as usize % MOCK_EMBEDDING_DIM;
        let sign = if digest[2] & 1 == 0 { 1.0 } else { -1.0 };
        v[idx] += sign;
    };
    if words.is_empty() {
        add(text);
    } else {
        for w in words.iter() {
            add(w);
        }
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

#[async_trait]
impl ChatProvider for MockProvider {
    fn provider(&self) -> Provider {
        Provider::Mock
    }

    async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        self.calls.lock().unwrap().push(request.clone());
        let key = prompt_key(&request.system_prompt, &request.user_prompt);
        let reply = match (self.scripted(&key), &self.responder) {
            (Some(r), _) => r,
            (None, Some(f)) => f(request),
            (None, None) => MockReply::Fail(LlmError::ProviderRefusal(format!(
                "mock has no scripted reply for prompt {}",
                &key[..12]
            ))),
        };
        reply.into_response()
    }

    async fn embed(&self, text: &str, _model_id: &str) -> Result<Vec<f64>, LlmError> {
        Ok(hash_embedding(text))
    }
}
