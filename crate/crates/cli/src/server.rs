//! REST service over the engine.
//!
//! Each session sits behind its own async mutex, so turns on one session run
//! strictly one after another while different sessions proceed in parallel.
//! A turn that cannot get the lock within the configured wait is answered
//! with 409. The engine itself is synchronous and runs on the blocking pool.

use crate::packs::{PackRegistry, PackState};
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::HashMap;
use std::sync::Arc;
use std::time::Duration;
use tokio::sync::{Mutex, OwnedMutexGuard};
use tutorloop_core::events::ModeChanged;
use tutorloop_core::modes::ModeContent;
use tutorloop_core::session::{EventSink, TransitionOutcome};
use tutorloop_core::{
    AssessmentItemResult, BackendError, Engine, EngineError, EventStore, LccRow, Mode, Session, SessionEvent, Status, StoreError,
    TurnInput, TutorResponse,
};

pub struct AppState {
    engine: Arc<Engine>,
    packs: PackRegistry,
    store: Arc<dyn EventStore>,
    sessions: std::sync::Mutex<HashMap<String, Arc<Mutex<Session>>>>,
    turn_wait: Duration,
}

impl AppState {
    pub fn new(engine: Engine, packs: PackRegistry, store: Arc<dyn EventStore>) -> Self {
        let turn_wait = engine.config().turn_wait();
        Self {
            engine: Arc::new(engine),
            packs,
            store,
            sessions: std::sync::Mutex::new(HashMap::new()),
            turn_wait,
        }
    }

    pub fn with_turn_wait(mut self, wait: Duration) -> Self {
        self.turn_wait = wait;
        self
    }

    /// Returns the cached handle, folding the log from the store on a miss.
    fn handle(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        let mut map = self.sessions.lock().expect("session map poisoned");
        if let Some(h) = map.get(id) {
            return Ok(h.clone());
        }
        let (session, warnings) = self.store.load_session(id).map_err(|e| match e {
            StoreError::NotFound(_) | StoreError::InvalidSessionId(_) => ApiError::not_found("session", id),
            other => ApiError::internal(other.to_string()),
        })?;
        for w in warnings {
            tracing::warn!(session = id, "{w}");
        }
        let h = Arc::new(Mutex::new(session));
        map.insert(id.to_owned(), h.clone());
        Ok(h)
    }

    async fn lock(self: &Arc<Self>, id: &str) -> Result<OwnedMutexGuard<Session>, ApiError> {
        let state = self.clone();
        let owned = id.to_owned();
        let handle = tokio::task::spawn_blocking(move || state.handle(&owned)).await.map_err(ApiError::join)??;
        tokio::time::timeout(self.turn_wait, handle.lock_owned())
            .await
            .map_err(|_| ApiError::new(StatusCode::CONFLICT, json!({"error": "turn_in_flight", "session_id": id})))
    }
}

/// Lets a shared `dyn EventStore` stand in where the engine wants a sink.
struct Sink<'a>(&'a dyn EventStore);

impl EventSink for Sink<'_> {
    fn append(&self, events: &[SessionEvent]) -> Result<(), EngineError> {
        Ok(self.0.append_events(events)?)
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/packs", get(list_packs))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/turns", post(post_turn))
        .route("/sessions/{id}/lcc", get(get_lcc))
        .with_state(state)
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn new(status: StatusCode, body: Value) -> Self {
        Self { status, body }
    }

    fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, json!({"error": format!("unknown {what}"), "id": id}))
    }

    fn internal(message: String) -> Self {
        tracing::error!("{message}");
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, json!({"error": "internal", "message": message}))
    }

    fn join(e: tokio::task::JoinError) -> Self {
        Self::internal(e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let message = e.to_string();
        match e {
            EngineError::SessionNotFound(_) => Self::new(StatusCode::NOT_FOUND, json!({"error": message})),
            EngineError::MidTurn => Self::new(StatusCode::CONFLICT, json!({"error": "turn_in_flight"})),
            EngineError::Backend(b) => backend_failure(&b, message),
            EngineError::Protocol(_) | EngineError::Match(_) => {
                Self::new(StatusCode::BAD_GATEWAY, json!({"error": "backend_failure", "message": message, "retries": 0}))
            }
            EngineError::Mode(_) => Self::new(StatusCode::UNPROCESSABLE_ENTITY, json!({"error": "invalid_assessment", "message": message})),
            _ => Self::internal(message),
        }
    }
}

fn backend_failure(b: &BackendError, message: String) -> ApiError {
    ApiError::new(StatusCode::BAD_GATEWAY, json!({"error": "backend_failure", "message": message, "retries": b.retries()}))
}

async fn healthz() -> Json<Value> {
    Json(json!({"status": "ok"}))
}

#[derive(Serialize)]
struct PackSummary<'a> {
    pack_id: &'a str,
    valid: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    scenario: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed_question: Option<&'a str>,
}

async fn list_packs(State(state): State<Arc<AppState>>) -> Json<Value> {
    let list: Vec<PackSummary> = state
        .packs
        .iter()
        .map(|e| match &e.state {
            PackState::Valid(p) => PackSummary {
                pack_id: &e.id,
                valid: true,
                scenario: Some(&p.scenario),
                seed_question: Some(&p.seed_question),
            },
            PackState::Invalid(_) => PackSummary { pack_id: &e.id, valid: false, scenario: None, seed_question: None },
        })
        .collect();
    Json(json!(list))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub pack_id: String,
    #[serde(default)]
    pub mode: Option<Mode>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionCreatedBody {
    pub session_id: String,
    pub mode: Mode,
    pub scenario: String,
    pub seed_question: String,
    pub mode_content: ModeContent,
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    Json(req): Json<CreateSession>,
) -> Result<(StatusCode, Json<SessionCreatedBody>), ApiError> {
    let entry = state.packs.get(&req.pack_id).ok_or_else(|| ApiError::not_found("pack", &req.pack_id))?;
    let pack = match &entry.state {
        PackState::Valid(p) => (**p).clone(),
        PackState::Invalid(report) => {
            return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, serde_json::to_value(report).expect("report serializes")))
        }
    };
    let mode = req.mode.unwrap_or_default();
    let id = uuid::Uuid::new_v4().simple().to_string();
    let st = state.clone();
    let sid = id.clone();
    let session = tokio::task::spawn_blocking(move || st.engine.create_session(&sid, pack, mode, &Sink(st.store.as_ref())))
        .await
        .map_err(ApiError::join)??;
    let body = SessionCreatedBody {
        session_id: id.clone(),
        mode,
        scenario: session.pack.scenario.clone(),
        seed_question: session.pack.seed_question.clone(),
        mode_content: tutorloop_core::modes::mode_content(mode, &session.pack, session.assessment_round),
    };
    tracing::info!(session = %id, pack = %req.pack_id, %mode, "session created");
    state.sessions.lock().expect("session map poisoned").insert(id, Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(body)))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PostTurn {
    pub utterance: String,
    #[serde(default)]
    pub assessment: Option<Vec<AssessmentItemResult>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TurnBody {
    #[serde(flatten)]
    pub response: TutorResponse,
    pub turn_index: usize,
    pub mode: Mode,
    #[serde(default)]
    pub transition: Option<TransitionOutcome>,
}

async fn post_turn(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(req): Json<PostTurn>,
) -> Result<Json<TurnBody>, ApiError> {
    let mut guard = state.lock(&id).await?;
    let engine = state.engine.clone();
    let store = state.store.clone();
    let input = TurnInput { utterance: req.utterance, assessment: req.assessment };
    let (outcome, mode) = tokio::task::spawn_blocking(move || {
        let outcome = engine.run_turn(&mut guard, input, &Sink(store.as_ref()));
        (outcome, guard.mode)
    })
    .await
    .map_err(ApiError::join)?;
    let outcome = outcome.inspect_err(|e| tracing::warn!(session = %id, "turn failed: {e}"))?;
    Ok(Json(TurnBody { response: outcome.response, turn_index: outcome.turn_index, mode, transition: outcome.transition }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub turn: usize,
    pub mode: Mode,
    pub utterance: String,
    pub class: tutorloop_core::UtteranceClass,
    #[serde(rename = "move")]
    pub tutor_move: tutorloop_core::TutorMove,
    pub response: TutorResponse,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Accumulated {
    pub correct: f64,
    pub wrong: f64,
    pub overall: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub pack_id: String,
    pub scenario: String,
    pub seed_question: String,
    pub mode: Mode,
    pub status: Status,
    pub completed_at_turn: Option<usize>,
    pub transcript: Vec<TranscriptEntry>,
    pub lcc: Vec<LccRow>,
    pub accumulated: Accumulated,
    pub mode_history: Vec<ModeChanged>,
    pub event_count: u64,
}

impl SessionView {
    pub fn of(s: &Session) -> Self {
        Self {
            session_id: s.session_id.clone(),
            pack_id: s.pack.pack_id.clone(),
            scenario: s.pack.scenario.clone(),
            seed_question: s.pack.seed_question.clone(),
            mode: s.mode,
            status: s.status(),
            completed_at_turn: s.completed_at_turn,
            transcript: s
                .turn_history
                .iter()
                .map(|t| TranscriptEntry {
                    turn: t.index,
                    mode: t.mode,
                    utterance: t.utterance.clone(),
                    class: t.class,
                    tutor_move: t.plan.tutor_move,
                    response: t.response.clone(),
                })
                .collect(),
            lcc: s.lcc_rows(),
            accumulated: Accumulated {
                correct: s.score_state.accumulated_correct,
                wrong: s.score_state.accumulated_wrong,
                overall: s.score_state.overall,
            },
            mode_history: s.mode_history.clone(),
            event_count: s.last_seq + 1,
        }
    }
}

async fn get_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    let guard = state.lock(&id).await?;
    Ok(Json(SessionView::of(&guard)))
}

async fn get_lcc(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let guard = state.lock(&id).await?;
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], guard.lcc_csv()).into_response())
}
