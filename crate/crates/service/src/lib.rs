//! The sitebench back end: SQLite persistence, the scan job orchestrator
//! and the `/api/v1` REST service.

pub mod api;
pub mod config;
pub mod openapi;
pub mod orchestrator;
pub mod setup;
pub mod store;
pub mod token;
pub mod views;

use std::sync::Arc;

use tokio::net::TcpListener;
use tokio::sync::watch;

pub use config::Config;
pub use orchestrator::Orchestrator;
pub use store::Store;

/// Serves the API on `listener` and runs the worker pool until `shutdown`
/// flips to true.
pub async fn serve(orch: Arc<Orchestrator>, listener: TcpListener, shutdown: watch::Receiver<bool>) -> std::io::Result<()> {
    let workers = tokio::spawn(orch.clone().run_workers(shutdown.clone()));
    let app = api::router(api::AppState { orch });
    let mut stop = shutdown.clone();
    let result = axum::serve(listener, app)
        .with_graceful_shutdown(async move {
            while !*stop.borrow() {
                if stop.changed().await.is_err() {
                    break;
                }
            }
        })
        .await;
    let _ = workers.await;
    result
}
