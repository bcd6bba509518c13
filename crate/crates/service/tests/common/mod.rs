#![allow(dead_code)]

use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use async_trait::async_trait;
use resumeflow_core::llm::offline::OfflineResponder;
use resumeflow_core::llm::{ChatProvider, ChatRequest, ChatResponse, LlmError, MockProvider, MockReply, Provider};
use resumeflow_core::LlmGateway;
use resumeflow_service::{Service, ServiceConfig};
use serde_json::Value;
use tokio::sync::watch;

pub const RESUME: &str = "Jane Doe
jane.doe@example.com | +1 555 010 0100 | Tempe, AZ

SUMMARY
Backend engineer focused on reliable data systems.

EDUCATION
Arizona State University | M.S. in Computer Science | Aug 2021 - May 2023

WORK EXPERIENCE
ACME Inc. | Software Engineer | Phoenix, AZ | Jun 2023 - Present
- Built a Rust ingestion service processing 2M events per day
- Cut p99 latency by 40%

SKILLS
Languages: Rust, Python, SQL
Tools: Docker, Kubernetes
";

pub const JOB: &str = "Senior Backend Engineer
Company: Globex

We are building the future of logistics.

Requirements
- 5+ years with Rust
- Experience with Kubernetes
";

pub const CANONICAL: [&str; 7] = [
    "Queued",
    "ExtractingUser",
    "ExtractingJob",
    "Tailoring",
    "Scoring",
    "Rendering",
    "Done",
];

/// Offline responder behind a gate: calls block while the gate is closed and
/// take `delay` each once it opens. The first line of every resume it parses
/// is recorded, so tests can see the order jobs started in.
pub struct GatedProvider {
    gate: watch::Receiver<bool>,
    delay: Duration,
    pub started: Mutex<Vec<String>>,
}

pub struct Gate(watch::Sender<bool>);

impl Gate {
    pub fn open(&self) {
        self.0.send_replace(true);
    }
}

impl GatedProvider {
    pub fn new(open: bool, delay: Duration) -> (Arc<Self>, Gate) {
        let (tx, rx) = watch::channel(open);
        let p = GatedProvider {
            gate: rx,
            delay,
            started: Mutex::new(Vec::new()),
        };
        (Arc::new(p), Gate(tx))
    }
}

#[async_trait]
impl ChatProvider for GatedProvider {
    fn provider(&self) -> Provider {
        Provider::Mock
    }

    async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        if let Some(rest) = request.user_prompt.split("<resume_text>").nth(1) {
            let name = rest.trim_start().lines().next().unwrap_or_default().to_owned();
            self.started.lock().unwrap().push(name);
        }
        let mut gate = self.gate.clone();
        gate.wait_for(|open| *open).await.map_err(|e| LlmError::TransportError(e.to_string()))?;
        tokio::time::sleep(self.delay).await;
        match OfflineResponder.respond(request) {
            MockReply::Text(t) => Ok(ChatResponse::stop(t)),
            other => Err(LlmError::ProviderRefusal(format!("{other:?}"))),
        }
    }

    async fn embed(&self, text: &str, model_id: &str) -> Result<Vec<f64>, LlmError> {
        MockProvider::offline().embed(text, model_id).await
    }
}

pub fn mock_gateway() -> LlmGateway {
    LlmGateway::builder().with_provider(Arc::new(MockProvider::offline())).build()
}

pub struct TestServer {
    pub base: String,
    pub service: Service,
    pub client: reqwest::Client,
}

impl TestServer {
    pub async fn start(config: ServiceConfig, gateway: LlmGateway) -> Self {
        let service = Service::start(config, gateway).expect("service starts");
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let router = service.router();
        tokio::spawn(async move { axum::serve(listener, router).await.unwrap() });
        TestServer {
            base,
            service,
            client: reqwest::Client::new(),
        }
    }

    pub async fn mock() -> Self {
        TestServer::start(ServiceConfig::default(), mock_gateway()).await
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    pub async fn submit(&self, form: reqwest::multipart::Form) -> reqwest::Response {
        self.client.post(self.url("/v1/tailor")).multipart(form).send().await.unwrap()
    }

    /// Submits a text resume and returns the job id.
    pub async fn submit_text(&self, resume: &str, job: &str) -> String {
        let resp = self.submit(text_form(resume, job)).await;
        assert_eq!(resp.status(), 202, "{}", resp.text().await.unwrap());
        let body: Value = resp.json().await.unwrap();
        body["job_id"].as_str().unwrap().to_owned()
    }

    pub async fn job(&self, id: &str) -> Value {
        let resp = self.client.get(self.url(&format!("/v1/jobs/{id}"))).send().await.unwrap();
        assert_eq!(resp.status(), 200);
        resp.json().await.unwrap()
    }

    /// Polls until the job is terminal, returning the distinct states seen in
    /// order and the final body.
    pub async fn wait(&self, id: &str, timeout: Duration) -> (Vec<String>, Value) {
        let deadline = Instant::now() + timeout;
        let mut trace: Vec<String> = Vec::new();
        loop {
            let job = self.job(id).await;
            let state = job["state"].as_str().unwrap().to_owned();
            if trace.last() != Some(&state) {
                trace.push(state.clone());
            }
            if state == "Done" || state == "Failed" {
                return (trace, job);
            }
            assert!(Instant::now() < deadline, "job {id} stuck in {state}");
            tokio::time::sleep(Duration::from_millis(2)).await;
        }
    }

    pub async fn artifact(&self, id: &str, kind: &str) -> reqwest::Response {
        self.client
            .get(self.url(&format!("/v1/jobs/{id}/artifacts/{kind}")))
            .send()
            .await
            .unwrap()
    }
}

pub fn text_form(resume: &str, job: &str) -> reqwest::multipart::Form {
    reqwest::multipart::Form::new()
        .text("resume_text", resume.to_owned())
        .text("job_description", job.to_owned())
}

pub fn is_subsequence(trace: &[String], order: &[&str]) -> bool {
    let mut it = order.iter();
    trace.iter().all(|s| it.any(|o| o == s))
}
