//! Annotation HTTP service.
//!
//! JSON endpoints over an [`AnnotationStore`], guarded by a shared bearer
//! token. Writes go through a single `RwLock` writer; reads share a snapshot.
//! Advancing a round retrains the selection model on the exported training
//! set and opens an entropy-batch round over the untouched sentences.

use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use revmine_core::active_learning::{entropy_batch, EntropyBatchParams, SelectionRound};
use revmine_core::annotation::{Annotation, AnnotationError, AnnotationStore, LabelMap, Resolution, Role, ThirdChoice};
use revmine_core::features::EmbeddingTable;
use revmine_core::models::{AspectClassifier, ModelConfig};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::{Mutex, RwLock};

pub const TOKEN_ENV: &str = "REVMINE_TOKEN";

/// What `POST /api/rounds/advance` needs to run a selection round.
pub struct RoundSettings {
    /// Every candidate `(sentence_id, text)`.
    pub pool: Vec<(String, String)>,
    pub embeddings: Option<EmbeddingTable>,
    pub model: ModelConfig,
    pub params: EntropyBatchParams,
    pub seed: u64,
    /// Round files are written here when set.
    pub rounds_dir: Option<PathBuf>,
}

pub struct AppState {
    store: RwLock<AnnotationStore>,
    token: Option<String>,
    rounds: Option<Arc<RoundSettings>>,
    advancing: Mutex<()>,
}

impl AppState {
    /// `token` of `None` disables authentication.
    pub fn new(store: AnnotationStore, token: Option<String>, rounds: Option<RoundSettings>) -> Arc<Self> {
        Arc::new(AppState {
            store: RwLock::new(store),
            token,
            rounds: rounds.map(Arc::new),
            advancing: Mutex::new(()),
        })
    }

    pub async fn store(&self) -> tokio::sync::RwLockReadGuard<'_, AnnotationStore> {
        self.store.read().await
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
        }
    }
}

impl From<AnnotationError> for ApiError {
    fn from(e: AnnotationError) -> Self {
        let status = match &e {
            AnnotationError::UnknownSentence(_) => StatusCode::NOT_FOUND,
            AnnotationError::UnknownAnnotator(_) | AnnotationError::Forbidden { .. } => StatusCode::FORBIDDEN,
            AnnotationError::SelfAdjudication { .. } => StatusCode::FORBIDDEN,
            AnnotationError::NotEnoughAnnotations(_) | AnnotationError::AlreadyAgreed(_) => StatusCode::CONFLICT,
            AnnotationError::RejectedResolution(_) | AnnotationError::EmptyResolution(_) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            AnnotationError::Journal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn authorize(state: &AppState, headers: &HeaderMap) -> Result<(), ApiError> {
    let Some(expected) = &state.token else {
        return Ok(());
    };
    let given = headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    if given == Some(expected.as_str()) {
        Ok(())
    } else {
        Err(ApiError::new(StatusCode::UNAUTHORIZED, "missing or invalid bearer token"))
    }
}

#[derive(Debug, Deserialize)]
pub struct NextQuery {
    pub annotator: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NextSentence {
    pub round_id: u32,
    pub sentence_id: String,
    pub text: String,
}

async fn next_sentence(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    Query(q): Query<NextQuery>,
) -> Result<Response, ApiError> {
    authorize(&state, &headers)?;
    let store = state.store.read().await;
    if store.role(&q.annotator).is_none() {
        return Err(AnnotationError::UnknownAnnotator(q.annotator).into());
    }
    let Some(round) = store.current_round() else {
        return Err(ApiError::new(StatusCode::CONFLICT, "no round is open"));
    };
    Ok(match store.next_for(&q.annotator) {
        Some((id, text)) => Json(NextSentence {
            round_id: round.round_id,
            sentence_id: id.to_string(),
            text: text.to_string(),
        })
        .into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    })
}

async fn post_annotation(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    Json(a): Json<Annotation>,
) -> ApiResult<Annotation> {
    authorize(&state, &headers)?;
    Ok(Json(state.store.write().await.record_annotation(a)?))
}

async fn adjudication_queue(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
) -> ApiResult<Vec<revmine_core::annotation::QueueItem>> {
    authorize(&state, &headers)?;
    Ok(Json(state.store.read().await.adjudication_queue()))
}

/// Body of `POST /api/adjudication/{sentence_id}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolutionRequest {
    pub annotator_id: String,
    #[serde(default)]
    pub choice: Option<ThirdChoice>,
    #[serde(default)]
    pub labels: Option<LabelMap>,
}

async fn post_resolution(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    Path(sentence_id): Path<String>,
    Json(req): Json<ResolutionRequest>,
) -> ApiResult<revmine_core::annotation::AdjudicatedSentence> {
    authorize(&state, &headers)?;
    let resolution = Resolution {
        sentence_id,
        annotator_id: req.annotator_id,
        choice: req.choice,
        labels: req.labels,
        timestamp: 0,
    };
    Ok(Json(state.store.write().await.record_resolution(resolution)?))
}

async fn progress(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
) -> ApiResult<revmine_core::annotation::Progress> {
    authorize(&state, &headers)?;
    Ok(Json(state.store.read().await.progress()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdvanceRequest {
    pub annotator_id: String,
}

async fn advance_round(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    Json(req): Json<AdvanceRequest>,
) -> ApiResult<SelectionRound> {
    authorize(&state, &headers)?;
    let Some(settings) = state.rounds.clone() else {
        return Err(ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "round advancement is not configured"));
    };
    let Ok(_guard) = state.advancing.try_lock() else {
        return Err(ApiError::new(StatusCode::CONFLICT, "a round is already being advanced"));
    };
    let (training, touched, round_id) = {
        let store = state.store.read().await;
        match store.role(&req.annotator_id) {
            Some(Role::Admin) => {}
            Some(_) => {
                return Err(AnnotationError::Forbidden {
                    annotator: req.annotator_id,
                    needed: Role::Admin,
                }
                .into())
            }
            None => return Err(AnnotationError::UnknownAnnotator(req.annotator_id).into()),
        }
        let touched: std::collections::BTreeSet<String> =
            store.touched_sentences().into_iter().map(str::to_string).collect();
        let next = store.current_round().map_or(1, |r| r.round_id + 1);
        (store.export_training_set(), touched, next)
    };
    if training.is_empty() {
        return Err(ApiError::new(StatusCode::CONFLICT, "no adjudicated sentences to train on"));
    }
    let round = tokio::task::spawn_blocking(move || -> Result<SelectionRound, ApiError> {
        let seed = settings.seed.wrapping_add(u64::from(round_id));
        let model = AspectClassifier::train(&training.examples, &settings.model, settings.embeddings.as_ref(), seed)
            .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
        let unlabeled: Vec<(String, String)> =
            settings.pool.iter().filter(|(id, _)| !touched.contains(id)).cloned().collect();
        let round = entropy_batch(&model.scorer(settings.embeddings.as_ref()), &unlabeled, &settings.params, seed, round_id)
            .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
        if let Some(dir) = &settings.rounds_dir {
            round
                .write(dir)
                .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
        }
        Ok(round)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    state.store.write().await.open_round(round.clone())?;
    Ok(Json(round))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/batch/next", get(next_sentence))
        .route("/api/annotations", post(post_annotation))
        .route("/api/adjudication/queue", get(adjudication_queue))
        .route("/api/adjudication/{sentence_id}", post(post_resolution))
        .route("/api/progress", get(progress))
        .route("/api/rounds/advance", post(advance_round))
        .with_state(state)
}

/// Serves until the process is stopped.
pub async fn serve(addr: std::net::SocketAddr, state: Arc<AppState>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state)).await
}
