use std::process::ExitCode;

use s3_service::{serve, AppState, Orchestrator, Settings};
use tracing_subscriber::EnvFilter;

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .init();

    let settings = match Settings::from_env() {
        Ok(s) => s,
        Err(e) => {
            eprintln!("s3d: {e}");
            return ExitCode::FAILURE;
        }
    };
    let config = match settings.load_config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("s3d: {e}");
            return ExitCode::FAILURE;
        }
    };
    let orchestrator = match Orchestrator::open(config, &settings.data_dir) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("s3d: recovery from {} failed: {e}", settings.data_dir.display());
            return ExitCode::FAILURE;
        }
    };
    tracing::info!(slices = orchestrator.slices().len(), dir = %settings.data_dir.display(), "inventory recovered");

    let listener = match tokio::net::TcpListener::bind(settings.listen).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("s3d: bind {}: {e}", settings.listen);
            return ExitCode::FAILURE;
        }
    };
    tracing::info!(addr = %settings.listen, "listening");
    let shutdown = async {
        let _ = tokio::signal::ctrl_c().await;
        tracing::info!("shutting down");
    };
    match serve(listener, AppState::new(orchestrator), shutdown).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("s3d: {e}");
            ExitCode::FAILURE
        }
    }
}
