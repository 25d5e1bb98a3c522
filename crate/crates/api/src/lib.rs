//! HTTP API for the school health screening system.
//!
//! Every route lives under `/api/v1`, authenticates with a bearer token,
//! checks the caller's role against the access matrix, then delegates to
//! the records store. Bodies are JSON and carry `api_version`.

use std::future::Future;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::routing::{get, patch, post, put};
use axum::Router;
use hmms_core::access::HashCost;
use hmms_core::config::{Config, ConfigError, Reference};
use hmms_core::screening::{Ruleset, ScreeningContext};
use hmms_core::store::{Store, StoreError};
use parking_lot::RwLock;
use thiserror::Error;

pub mod error;
mod handlers;
mod print;
pub mod session;
pub mod wire;

pub use error::ApiError;
pub use session::{Caller, Session, Sessions};

pub const API_VERSION: &str = "1";

/// Shared by every request.
#[derive(Clone)]
pub struct AppState {
    pub store: Arc<Store>,
    pub reference: Reference,
    /// Active ruleset; replaced atomically by `PUT /ruleset`.
    pub ruleset: Arc<RwLock<Arc<Ruleset>>>,
    pub sessions: Arc<Sessions>,
    /// Where an installed ruleset is written, if anywhere.
    pub ruleset_path: Option<PathBuf>,
    /// Cost used when hashing new passwords.
    pub hash_cost: HashCost,
}

impl AppState {
    pub fn new(store: Arc<Store>, reference: Reference, session_ttl: chrono::Duration) -> Self {
        let ruleset = Arc::new(RwLock::new(reference.ruleset.clone()));
        AppState {
            store,
            reference,
            ruleset,
            sessions: Arc::new(Sessions::new(session_ttl)),
            ruleset_path: None,
            hash_cost: HashCost::default(),
        }
    }

    pub fn ctx(&self) -> ScreeningContext<'_> {
        self.reference.screening_context()
    }

    pub fn ruleset(&self) -> Arc<Ruleset> {
        self.ruleset.read().clone()
    }
}

pub fn router(state: AppState) -> Router {
    use handlers::*;
    let api = Router::new()
        .route("/login", post(login))
        .route("/logout", post(logout))
        .route("/students", post(register).get(search))
        .route("/students/{id}", get(view_student).delete(delete_student))
        .route("/students/{id}/basic", get(basic_info))
        .route("/students/{id}/history", get(history))
        .route("/students/{id}/values", post(record_value))
        .route("/students/{id}/values/{key}", put(edit_value))
        .route("/students/{id}/doses", post(record_dose))
        .route("/students/{id}/screen", post(screen))
        .route("/students/{id}/referrals", get(referrals))
        .route("/students/{id}/print", get(print_student))
        .route("/students/{id}/health-data", axum::routing::delete(delete_health_data))
        .route("/punch", post(punch))
        .route("/referrals/{id}", patch(update_referral))
        .route("/me/minimal", get(me_minimal))
        .route("/staff", get(list_staff).post(create_staff))
        .route("/staff/{id}", get(get_staff).put(update_staff).delete(delete_staff))
        .route("/catalog", get(catalog))
        .route("/ruleset", get(get_ruleset).put(put_ruleset))
        .route("/cohort/export", post(export_cohort))
        .route("/healthz", get(healthz))
        .route("/readyz", get(readyz));
    Router::new()
        .nest("/api/v1", api)
        .fallback(unknown_route)
        .method_not_allowed_fallback(method_not_allowed)
        .with_state(state)
}

#[derive(Debug, Error)]
pub enum ServeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("opening database: {0}")]
    Store(#[from] StoreError),
    #[error("cannot listen on {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error("server error: {0}")]
    Io(#[from] std::io::Error),
}

impl ServeError {
    pub fn code(&self) -> &'static str {
        match self {
            ServeError::Config(e) => e.code(),
            ServeError::Store(e) => e.code(),
            ServeError::Bind { source, .. } if source.kind() == std::io::ErrorKind::AddrInUse => "PortInUse",
            ServeError::Bind { .. } => "BindFailed",
            ServeError::Io(_) => "ServerIo",
        }
    }
}

/// Loads reference data and opens the database named in `config`.
pub fn build_state(config: &Config) -> Result<AppState, ServeError> {
    let reference = config.reference()?;
    if let Some(dir) = config.database.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let store = Store::sqlite(&config.database, reference.catalog.clone(), reference.schedule.clone())?;
    let ttl = chrono::Duration::minutes(config.session_ttl_minutes as i64);
    let mut state = AppState::new(Arc::new(store), reference, ttl);
    state.ruleset_path = config.ruleset.clone();
    Ok(state)
}

/// Binds the configured address. Split from [`run`] so callers learn about
/// a busy port before anything else happens.
pub async fn bind(config: &Config) -> Result<tokio::net::TcpListener, ServeError> {
    let addr = format!("{}:{}", config.bind, config.port);
    tokio::net::TcpListener::bind(&addr).await.map_err(|source| ServeError::Bind { addr, source })
}

pub async fn run(
    listener: tokio::net::TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ServeError> {
    let app = router(state).into_make_service_with_connect_info::<SocketAddr>();
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await?;
    Ok(())
}

/// Validates `config`, binds, and serves until ctrl-c.
pub async fn serve(config: Config) -> Result<(), ServeError> {
    let state = build_state(&config)?;
    let listener = bind(&config).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    run(listener, state, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await
}
