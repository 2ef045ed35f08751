use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use corrgan_core::io::read_correlation_dir;
use corrgan_core::{CorrError, Tolerances};
use serde::Deserialize;
use serde_json::json;
use tower_http::services::ServeDir;

use crate::game::{Game, GameError, Label, DEFAULT_TTL};

pub type SharedGame = Arc<Mutex<Game>>;

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub real_dir: PathBuf,
    pub fake_dir: PathBuf,
    pub log_file: PathBuf,
    pub seed: Option<u64>,
    pub ttl: Duration,
    pub static_dir: Option<PathBuf>,
}

impl ServiceConfig {
    pub fn new(real_dir: PathBuf, fake_dir: PathBuf, log_file: PathBuf) -> Self {
        ServiceConfig { real_dir, fake_dir, log_file, seed: None, ttl: DEFAULT_TTL, static_dir: None }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Data(#[from] CorrError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("cannot listen on {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error("server error: {0}")]
    Server(std::io::Error),
}

/// Loads both pools (corrmat-csv directories) and replays the log.
pub fn load_game(cfg: &ServiceConfig) -> Result<Game, ServiceError> {
    let real = read_correlation_dir(&cfg.real_dir, Tolerances::default())?;
    let fake = read_correlation_dir(&cfg.fake_dir, Tolerances::default())?;
    Ok(Game::new(real, fake, cfg.seed, cfg.ttl, Some(&cfg.log_file))?)
}

fn error(status: StatusCode, msg: impl ToString) -> Response {
    (status, Json(json!({ "error": msg.to_string() }))).into_response()
}

impl IntoResponse for GameError {
    fn into_response(self) -> Response {
        let status = match &self {
            GameError::EmptyPool(_) => StatusCode::SERVICE_UNAVAILABLE,
            GameError::UnknownChallenge(_) => StatusCode::NOT_FOUND,
            GameError::AlreadyAnswered(_) => StatusCode::CONFLICT,
            GameError::Log { .. } => StatusCode::INTERNAL_SERVER_ERROR,
        };
        error(status, self)
    }
}

async fn challenge(State(game): State<SharedGame>) -> Response {
    match game.lock().expect("game lock").challenge() {
        Ok(p) => Json(p).into_response(),
        Err(e) => e.into_response(),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GuessBody {
    id: String,
    guess: Label,
}

/// The body is parsed by hand so every malformed request maps to 400.
async fn guess(State(game): State<SharedGame>, body: Bytes) -> Response {
    let body: GuessBody = match serde_json::from_slice(&body) {
        Ok(b) => b,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("malformed guess: {e}")),
    };
    match game.lock().expect("game lock").guess(&body.id, body.guess) {
        Ok(outcome) => Json(outcome).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn stats(State(game): State<SharedGame>) -> Response {
    Json(game.lock().expect("game lock").stats()).into_response()
}

pub fn router(game: SharedGame, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/challenge", get(challenge))
        .route("/api/guess", post(guess))
        .route("/api/stats", get(stats))
        .with_state(game);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(cfg: &ServiceConfig, addr: SocketAddr) -> Result<(), ServiceError> {
    let game = load_game(cfg)?;
    let (real, fake) = game.pool_sizes();
    let app = router(Arc::new(Mutex::new(game)), cfg.static_dir.as_deref());
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| ServiceError::Bind { addr, source })?;
    log::info!("serving {real} real and {fake} fake matrices on {addr}");
    axum::serve(listener, app).await.map_err(ServiceError::Server)
}
