//! HTTP job service: submit a resume and a job posting, poll the job, download
//! the tailored artifacts.

mod api;
pub mod config;
pub mod jobs;
mod worker;

use std::io;
use std::sync::atomic::AtomicUsize;
use std::sync::Arc;

use axum::Router;
use resumeflow_core::llm::{LlmGateway, ModelSpec, Provider};
use resumeflow_core::render::LatexEngine;
use resumeflow_core::Pipeline;
use tokio::sync::{mpsc, Mutex};

pub use config::ServiceConfig;
pub use jobs::{ArtifactKind, JobState, JobStore, PipelineJob};

pub(crate) struct Inner {
    pub store: JobStore,
    pub pipeline: Pipeline,
    pub queue: mpsc::Sender<worker::Task>,
    pub queue_depth: AtomicUsize,
    pub engine: Option<LatexEngine>,
    pub config: ServiceConfig,
    pub default_provider: Provider,
    _tmp: Option<tempfile::TempDir>,
}

/// A running job service. Cloning shares the same queue and store.
#[derive(Clone)]
pub struct Service {
    inner: Arc<Inner>,
}

/// First provider with credentials, in the order OpenAI, Gemini; the mock
/// otherwise. `RESUMEFLOW_DEFAULT_PROVIDER` overrides.
pub fn default_provider(gateway: &LlmGateway) -> Provider {
    if let Some(p) = std::env::var("RESUMEFLOW_DEFAULT_PROVIDER")
        .ok()
        .and_then(|v| v.parse::<Provider>().ok())
        .filter(|p| gateway.provider(*p).is_some())
    {
        return p;
    }
    [Provider::OpenAiCompatible, Provider::Gemini]
        .into_iter()
        .find(|p| gateway.provider(*p).is_some_and(|c| c.credentials_present()))
        .unwrap_or(Provider::Mock)
}

impl Service {
    /// Opens the store and starts the worker pool. Must run inside a Tokio runtime.
    pub fn start(config: ServiceConfig, gateway: LlmGateway) -> io::Result<Self> {
        let (data_dir, tmp) = match &config.data_dir {
            Some(d) => (d.clone(), None),
            None => {
                let t = tempfile::Builder::new().prefix("resumeflow-").tempdir()?;
                (t.path().to_owned(), Some(t))
            }
        };
        let store = JobStore::open(&data_dir)?;
        let (tx, rx) = mpsc::channel(config.queue_capacity.max(1));
        let engine = LatexEngine::discover();
        match &engine {
            Some(e) => tracing::info!(engine = %e.path.display(), "LaTeX engine found"),
            None => tracing::info!("no LaTeX engine found; PDFs will not be produced"),
        }
        let inner = Arc::new(Inner {
            store,
            default_provider: default_provider(&gateway),
            pipeline: Pipeline::new(gateway),
            queue: tx,
            queue_depth: AtomicUsize::new(0),
            engine,
            config,
            _tmp: tmp,
        });
        let rx = Arc::new(Mutex::new(rx));
        for _ in 0..inner.config.workers {
            tokio::spawn(worker::worker_loop(rx.clone(), inner.clone()));
        }
        Ok(Service { inner })
    }

    pub fn router(&self) -> Router {
        api::router(self.inner.clone())
    }

    pub fn store(&self) -> &JobStore {
        &self.inner.store
    }

    pub fn default_model(&self) -> ModelSpec {
        ModelSpec::default_for(self.inner.default_provider)
    }
}

/// Serves on `config.bind` until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> io::Result<()> {
    let bind = config.bind;
    let service = Service::start(config, LlmGateway::from_env())?;
    let listener = tokio::net::TcpListener::bind(bind).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, service.router())
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
