//! Slice management service: the orchestration pipeline behind the
//! northbound API, its event log, notifications and the HTTP front end.

pub mod api;
pub mod error;
pub mod notify;
pub mod orchestrator;
pub mod requests;
pub mod store;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

pub use api::{router, AppState};
pub use error::{ApiError, ErrorBody, Stage};
pub use orchestrator::{Orchestrator, RecoveryError};

use s3_core::config::ServiceConfig;

/// Runtime settings taken from the environment.
#[derive(Debug, Clone)]
pub struct Settings {
    pub config: Option<PathBuf>,
    pub data_dir: PathBuf,
    pub listen: SocketAddr,
}

impl Settings {
    pub const DEFAULT_LISTEN: &'static str = "127.0.0.1:8080";

    pub fn from_env() -> Result<Self, String> {
        let listen = std::env::var("S3_LISTEN").unwrap_or_else(|_| Self::DEFAULT_LISTEN.to_string());
        Ok(Settings {
            config: std::env::var_os("S3_CONFIG").map(PathBuf::from),
            data_dir: std::env::var_os("S3_DATA_DIR")
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("s3-data")),
            listen: listen.parse().map_err(|e| format!("S3_LISTEN {listen:?}: {e}"))?,
        })
    }

    pub fn load_config(&self) -> Result<ServiceConfig, s3_core::config::ConfigError> {
        match &self.config {
            Some(path) => ServiceConfig::load(path),
            None => Ok(ServiceConfig::default()),
        }
    }
}

/// Serves the API on `listener` until `shutdown` resolves, then writes a
/// final snapshot.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: Arc<AppState>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let writer = state.writer();
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await?;
    let mut o = writer.lock().unwrap_or_else(|p| p.into_inner());
    o.checkpoint()
}
