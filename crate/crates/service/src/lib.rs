//! HTTP lobby service hosting games with human and agent seats.
//!
//! Endpoints:
//!
//! | method | path | purpose |
//! |---|---|---|
//! | POST | `/lobbies` | create a lobby from a seat plan |
//! | POST | `/lobbies/{id}/join` | claim a human seat, returns its token |
//! | GET | `/lobbies/{id}/seats/{n}/events` | server-sent event stream for one seat |
//! | POST | `/lobbies/{id}/seats/{n}/actions` | answer the open prompt |
//! | POST | `/lobbies/{id}/seats/{n}/judgments` | post-game human/AI verdicts |
//! | GET | `/lobbies/{id}/result` | outcome, revealed after the caller's judgments |
//!
//! Seat endpoints take the token as `Authorization: Bearer <token>` or as a
//! `token` query parameter. The event stream resumes from `Last-Event-ID` or
//! the `from` query parameter.

pub mod config;
mod http;
pub mod lobby;
pub mod wire;

use std::net::SocketAddr;

pub use config::{Deadlines, ServiceConfig};
pub use http::{router, Service};
pub use wire::{ApiError, SeatMessage, SCHEMA_VERSION};

/// Binds `addr` and serves until the process ends.
pub async fn serve(addr: SocketAddr, config: ServiceConfig) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(Service::new(config))).await
}

/// Serves on an already bound listener; returns the bound address.
pub async fn spawn(config: ServiceConfig) -> std::io::Result<SocketAddr> {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let addr = listener.local_addr()?;
    tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, router(Service::new(config))).await {
            log::error!("service stopped: {e}");
        }
    });
    Ok(addr)
}
