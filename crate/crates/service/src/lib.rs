//! HTTP front end over a journal-persisted store.
//!
//! The journal is the only writer: ingestion and chat exchanges take its
//! lock, commit, and only then swap the new store in, so readers always see
//! a fully applied state.

mod error;
mod export;
mod routes;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use axum::http::HeaderValue;
use axum::Router;
use peripartum_core::journal::{Journal, JournalError};
use peripartum_core::{build_catalog, CanonicalStore, Catalog};
use peripartum_nl2sql::{Model, PromptOptions, RemoteConfig, RemoteModel, StubModel, TranslateError};
use peripartum_sql::guardrail::Limits;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

pub use error::ApiError;
pub use export::export_sql;
pub use routes::router;

/// Which chat-completion back end answers `/chat`.
#[derive(Debug, Clone)]
pub enum ModelChoice {
    Stub,
    Remote(RemoteConfig),
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub bind: SocketAddr,
    /// Journal file; created when absent.
    pub store: PathBuf,
    pub model: ModelChoice,
    pub prompt: PromptOptions,
    pub limits: Limits,
    /// Allowed browser origins. Empty allows any origin.
    pub cors_origins: Vec<String>,
    /// When set, every route but `/health` requires this bearer token.
    pub api_token: Option<String>,
}

impl ServiceConfig {
    pub fn new(store: impl Into<PathBuf>) -> Self {
        ServiceConfig {
            bind: SocketAddr::from(([127, 0, 0, 1], 8080)),
            store: store.into(),
            model: ModelChoice::Stub,
            prompt: PromptOptions::default(),
            limits: Limits::default(),
            cors_origins: Vec::new(),
            api_token: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("refusing to start: {0}")]
    Journal(#[from] JournalError),
    #[error("cannot configure model endpoint: {0}")]
    Model(#[from] TranslateError),
    #[error("invalid CORS origin `{0}`")]
    Cors(String),
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error("server error: {0}")]
    Serve(std::io::Error),
}

pub(crate) struct Shared {
    pub catalog: Arc<Catalog>,
    pub store: RwLock<CanonicalStore>,
    pub seq: AtomicU64,
    pub writer: Arc<tokio::sync::Mutex<Journal>>,
    pub model: Arc<dyn Model>,
    pub prompt: PromptOptions,
    pub limits: Limits,
    pub api_token: Option<String>,
}

/// Cheap to clone; every handler gets one.
#[derive(Clone)]
pub struct AppState(pub(crate) Arc<Shared>);

impl AppState {
    /// Replays the journal and builds the model. A corrupt journal is an
    /// error naming the last valid sequence number.
    ///
    /// Call this outside any async runtime: the remote model owns a
    /// blocking HTTP client.
    pub fn open(config: &ServiceConfig) -> Result<AppState, ServiceError> {
        let (journal, replay) = Journal::open(&config.store)?;
        let model: Arc<dyn Model> = match &config.model {
            ModelChoice::Stub => Arc::new(StubModel::builtin()),
            ModelChoice::Remote(remote) => Arc::new(RemoteModel::new(remote.clone())?),
        };
        tracing::info!(
            path = %config.store.display(),
            seq = replay.last_seq,
            records = replay.store.total_records(),
            model = %model.describe(),
            "journal replayed"
        );
        Ok(Self::from_parts(journal, replay.store, model, config))
    }

    pub fn from_parts(journal: Journal, store: CanonicalStore, model: Arc<dyn Model>, config: &ServiceConfig) -> Self {
        AppState(Arc::new(Shared {
            catalog: Arc::new(build_catalog()),
            store: RwLock::new(store),
            seq: AtomicU64::new(journal.last_seq()),
            writer: Arc::new(tokio::sync::Mutex::new(journal)),
            model,
            prompt: config.prompt.clone(),
            limits: config.limits,
            api_token: config.api_token.clone(),
        }))
    }

    /// Current store snapshot (a cheap structural clone).
    pub fn store(&self) -> CanonicalStore {
        self.0.store.read().unwrap_or_else(|p| p.into_inner()).clone()
    }

    pub fn seq(&self) -> u64 {
        self.0.seq.load(Ordering::SeqCst)
    }

    pub(crate) fn publish(&self, store: CanonicalStore, seq: u64) {
        *self.0.store.write().unwrap_or_else(|p| p.into_inner()) = store;
        self.0.seq.store(seq, Ordering::SeqCst);
    }
}

pub fn cors_layer(origins: &[String]) -> Result<CorsLayer, ServiceError> {
    let layer = CorsLayer::new().allow_methods(Any).allow_headers(Any);
    if origins.is_empty() || origins.iter().any(|o| o == "*") {
        return Ok(layer.allow_origin(Any));
    }
    let values = origins
        .iter()
        .map(|o| HeaderValue::from_str(o).map_err(|_| ServiceError::Cors(o.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(layer.allow_origin(AllowOrigin::list(values)))
}

/// The router with CORS applied.
pub fn app(state: AppState, config: &ServiceConfig) -> Result<Router, ServiceError> {
    Ok(router(state).layer(cors_layer(&config.cors_origins)?))
}

/// Serves until Ctrl-C. Every journal write is synced before its response,
/// so shutdown has nothing left to flush.
pub async fn serve(state: AppState, config: &ServiceConfig) -> Result<(), ServiceError> {
    let app = app(state, config)?;
    let listener = tokio::net::TcpListener::bind(config.bind)
        .await
        .map_err(|source| ServiceError::Bind { addr: config.bind, source })?;
    let local = listener.local_addr().unwrap_or(config.bind);
    tracing::info!(%local, "listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
            tracing::info!("shutting down");
        })
        .await
        .map_err(ServiceError::Serve)
}
