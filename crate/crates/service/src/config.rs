use std::net::SocketAddr;
use std::path::PathBuf;

use resumeflow_core::render::DEFAULT_TEMPLATE;
use resumeflow_core::DEFAULT_MAX_UPLOAD_BYTES;

pub const DEFAULT_BIND: &str = "127.0.0.1:8087";
pub const DEFAULT_WORKERS: usize = 2;
pub const DEFAULT_QUEUE_CAPACITY: usize = 64;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub bind: SocketAddr,
    /// Journal and artifacts live here; a temporary directory when `None`.
    pub data_dir: Option<PathBuf>,
    pub workers: usize,
    pub queue_capacity: usize,
    /// Bearer token required on `/v1/*` (except health) when set.
    pub api_token: Option<String>,
    pub max_upload_bytes: usize,
    /// Static web UI assets, served under `/ui/`.
    pub ui_dir: Option<PathBuf>,
    pub template: String,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: DEFAULT_BIND.parse().expect("valid default bind"),
            data_dir: None,
            workers: DEFAULT_WORKERS,
            queue_capacity: DEFAULT_QUEUE_CAPACITY,
            api_token: None,
            max_upload_bytes: DEFAULT_MAX_UPLOAD_BYTES,
            ui_dir: None,
            template: DEFAULT_TEMPLATE.to_owned(),
        }
    }
}

fn env(name: &str) -> Option<String> {
    std::env::var(name).ok().filter(|v| !v.trim().is_empty())
}

impl ServiceConfig {
    /// Reads `RESUMEFLOW_DATA_DIR`, `RESUMEFLOW_WORKERS`, `RESUMEFLOW_API_TOKEN`
    /// and `RESUMEFLOW_UI_DIR` over the defaults.
    pub fn from_env() -> Result<Self, String> {
        let mut c = ServiceConfig {
            data_dir: env("RESUMEFLOW_DATA_DIR").map(PathBuf::from),
            api_token: env("RESUMEFLOW_API_TOKEN"),
            ui_dir: env("RESUMEFLOW_UI_DIR").map(PathBuf::from),
            ..ServiceConfig::default()
        };
        if let Some(w) = env("RESUMEFLOW_WORKERS") {
            c.workers = w
                .trim()
                .parse()
                .ok()
                .filter(|n| *n >= 1)
                .ok_or_else(|| format!("RESUMEFLOW_WORKERS must be a positive integer, got `{w}`"))?;
        }
        Ok(c)
    }
}
