//! HTTP interface to the registry.
//!
//! All bodies are canonical JSON. Reads are public; `PUT` and `archive`
//! need `Authorization: Bearer <token>` when a write token is configured.

pub mod config;
mod error;
pub mod ops;
mod routes;

use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Instant;

use axum::routing::{get, post, put};
use axum::Router;
use cireg_core::schema::{SpecCatalog, SpecError};
use cireg_core::store::{Store, StoreError};
use tokio::net::TcpListener;

pub use config::{Config, ConfigError};
pub use error::ApiError;
pub use routes::{DEFAULT_PAGE, MAX_PAGE};

pub struct AppState {
    pub store: Arc<Store>,
    pub specs: SpecCatalog,
    token: Option<String>,
    started: Instant,
}

impl AppState {
    pub fn new(store: Arc<Store>, specs: SpecCatalog, token: Option<String>) -> Self {
        AppState {
            store,
            specs,
            token,
            started: Instant::now(),
        }
    }
}

pub fn router(state: AppState) -> Router {
    use routes::*;
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/specs", get(list_specs))
        .route("/v1/specs/{kind}/{version}", get(get_spec))
        .route("/v1/match", post(match_app))
        .route("/v1/{kind}/search", post(search))
        .route("/v1/{kind}/{id}", put(publish).get(get_entry))
        .route("/v1/{kind}/{id}/archive", post(archive))
        .route("/v1/{kind}/{id}/history", get(history))
        .fallback(no_route)
        .method_not_allowed_fallback(wrong_method)
        .layer(axum::middleware::from_fn(log_request))
        .with_state(Arc::new(state))
}

/// Bundled specs plus any found in `config.spec_dir`.
pub fn load_specs(config: &Config) -> Result<SpecCatalog, SpecError> {
    let mut specs = SpecCatalog::bundled();
    if let Some(dir) = &config.spec_dir {
        specs.load_dir(dir)?;
    }
    Ok(specs)
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("spec directory: {0}")]
    Specs(#[from] SpecError),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        source: std::io::Error,
    },
    #[error("registry: {0}")]
    Store(#[from] StoreError),
    #[error("server: {0}")]
    Io(#[from] std::io::Error),
}

/// A bound listener with its registry open.
pub struct Server {
    listener: TcpListener,
    state: AppState,
}

impl Server {
    /// Binds first and opens the data directory only once the address is
    /// ours, so a failed start leaves nothing behind.
    pub async fn bind(config: &Config) -> Result<Server, ServeError> {
        let specs = load_specs(config)?;
        let listener = TcpListener::bind(config.bind).await.map_err(|source| ServeError::Bind {
            addr: config.bind,
            source,
        })?;
        let dir = config.data_dir.clone();
        let store = tokio::task::spawn_blocking(move || Store::open(dir))
            .await
            .map_err(|e| ServeError::Io(std::io::Error::other(e)))??;
        Ok(Server {
            listener,
            state: AppState::new(Arc::new(store), specs, config.write_token.clone()),
        })
    }

    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Serves until `shutdown` resolves, then drains in-flight requests and
    /// syncs the event log.
    pub async fn run(self, shutdown: impl Future<Output = ()> + Send + 'static) -> Result<(), ServeError> {
        let store = self.state.store.clone();
        axum::serve(self.listener, router(self.state))
            .with_graceful_shutdown(shutdown)
            .await?;
        store.sync()?;
        tracing::info!("registry flushed, shutting down");
        Ok(())
    }
}

/// Resolves on SIGTERM or Ctrl-C.
pub async fn termination() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
}
