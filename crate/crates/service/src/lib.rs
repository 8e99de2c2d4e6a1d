//! HTTP survey service running recall sessions in the handcoded or
//! generated prompting arm and logging every prompt for evaluation.

pub mod app;
pub mod error;
pub mod policy;
pub mod search;
pub mod session;
pub mod store;

use std::net::SocketAddr;
use std::sync::Arc;

pub use app::{router, AppState, ServiceConfig, Snapshot, DEFAULT_SESSION_TTL};
pub use error::ServiceError;
pub use policy::{ArmAssigner, ArmPolicy};

/// Binds `addr` and returns the bound address with the server future.
pub async fn bind(
    state: Arc<AppState>,
    addr: SocketAddr,
) -> std::io::Result<(SocketAddr, impl std::future::Future<Output = std::io::Result<()>>)> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    tracing::info!(%local, "survey service listening");
    let app = router(state);
    Ok((local, async move { axum::serve(listener, app).await }))
}
