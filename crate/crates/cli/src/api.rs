//! Routes and handlers.

use std::convert::Infallible;
use std::sync::Arc;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream, StreamExt};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::OwnedMutexGuard;
use tower_http::cors::{Any, CorsLayer};

use walle_core::dialogue::{start_session, Feedback, PromptBundle, State as DialogueState};
use walle_core::eval::BackendChoice;
use walle_core::grasp::ExecutionOutcome;
use walle_core::llm::{
    ChatBackend, FailureInjection, MockScript, RemoteChat, ScriptedMock, TargetCommand,
};
use walle_core::pipeline::PipelineConfig;
use walle_core::scene::{place_templates, sample_scene, Catalog, SceneParams};
use walle_core::seed::mix;

use crate::error::ApiError;
use crate::store::{EventKind, SessionCore, SessionSlot, SessionStore};

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    pub idle_timeout: Duration,
    pub eviction_period: Duration,
    /// Pause between consecutive waypoint events.
    pub waypoint_interval: Duration,
    /// `None` allows any origin.
    pub cors_origin: Option<String>,
    pub catalog: Catalog,
    /// Used when a create request carries no pipeline of its own.
    pub pipeline: PipelineConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            idle_timeout: Duration::from_secs(30 * 60),
            eviction_period: Duration::from_secs(60),
            waypoint_interval: Duration::from_millis(150),
            cors_origin: None,
            catalog: Catalog::bundled(),
            pipeline: PipelineConfig::default(),
        }
    }
}

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<SessionStore>,
    pub config: Arc<ServiceConfig>,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        Self {
            store: Arc::new(SessionStore::default()),
            config: Arc::new(config),
        }
    }

    pub fn evict_idle(&self, now: Instant) -> usize {
        self.store.evict_idle(self.config.idle_timeout, now)
    }

    fn slot(&self, id: &str) -> Result<Arc<SessionSlot>, ApiError> {
        let slot = self
            .store
            .get(id)
            .ok_or_else(|| ApiError::UnknownSession(id.to_string()))?;
        slot.touch();
        Ok(slot)
    }
}

/// Periodically drops idle sessions; runs until the runtime shuts down.
pub fn spawn_evictor(state: AppState) -> tokio::task::JoinHandle<()> {
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(state.config.eviction_period);
        loop {
            tick.tick().await;
            state.evict_idle(Instant::now());
        }
    })
}

pub fn router(state: AppState) -> Router {
    let cors = match &state.config.cors_origin {
        Some(origin) => CorsLayer::new()
            .allow_origin(origin.parse::<HeaderValue>().unwrap_or(HeaderValue::from_static("null")))
            .allow_methods([Method::GET, Method::POST])
            .allow_headers([header::CONTENT_TYPE]),
        None => CorsLayer::new().allow_origin(Any).allow_methods(Any).allow_headers(Any),
    };
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/scene", get(get_scene))
        .route("/sessions/{id}/messages", post(post_message))
        .route("/sessions/{id}/confirm", post(post_confirmation))
        .route("/sessions/{id}/execute", post(step_execution))
        .route("/sessions/{id}/feedback", post(post_feedback))
        .route("/sessions/{id}/events", get(events))
        .layer(cors)
        .with_state(state)
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CreateSession {
    pub users: Vec<String>,
    /// Drawn at random when absent; echoed in the handle.
    pub seed: Option<u64>,
    pub object_count: Option<usize>,
    /// Catalog names to place instead of sampling.
    pub objects: Option<Vec<String>>,
    pub backend: Option<BackendChoice>,
    pub llm_failure: Option<FailureInjection>,
    pub pipeline: Option<PipelineConfig>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SessionHandle {
    pub session_id: String,
    /// Unix milliseconds.
    pub created_at: u64,
    pub backend: String,
    pub seed: u64,
    pub users: Vec<String>,
    pub state: DialogueState,
}

#[derive(Deserialize)]
pub struct MessageRequest {
    pub user: String,
    pub text: String,
}

#[derive(Deserialize)]
pub struct ConfirmRequest {
    pub user: String,
    pub accept: bool,
}

#[derive(Deserialize)]
pub struct FeedbackRequest {
    pub outcome: Feedback,
}

#[derive(Deserialize)]
pub struct EventsQuery {
    #[serde(default)]
    pub since: u64,
    /// `false` replays the log and ends the stream.
    #[serde(default = "yes")]
    pub follow: bool,
}

fn yes() -> bool {
    true
}

const DEFAULT_OBJECTS: usize = 5;

fn unix_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

fn handle(slot: &SessionSlot, core: &SessionCore) -> SessionHandle {
    SessionHandle {
        session_id: slot.id.clone(),
        created_at: slot.created_at,
        backend: slot.backend.to_string(),
        seed: slot.seed,
        users: core.session.users().to_vec(),
        state: core.session.state().clone(),
    }
}

/// Runs `f` on a blocking thread while holding the session lock, so a
/// remote chat call never stalls the runtime and requests on one session
/// are applied one at a time.
async fn locked<T, F>(slot: &SessionSlot, f: F) -> Result<(OwnedMutexGuard<SessionCore>, T), ApiError>
where
    T: Send + 'static,
    F: FnOnce(&mut SessionCore) -> Result<T, ApiError> + Send + 'static,
{
    let mut guard = slot.core.clone().lock_owned().await;
    let (guard, result) = tokio::task::spawn_blocking(move || {
        let r = f(&mut guard);
        (guard, r)
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))?;
    result.map(|v| (guard, v))
}

async fn create_session(
    State(app): State<AppState>,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> Result<impl IntoResponse, ApiError> {
    let Json(req) = body?;
    let seed = req.seed.unwrap_or_else(rand::random);
    let catalog = &app.config.catalog;
    let scene = match &req.objects {
        Some(names) => {
            let entries = names
                .iter()
                .map(|n| catalog.get(n).ok_or_else(|| ApiError::BadRequest(format!("unknown object {n:?}"))))
                .collect::<Result<Vec<_>, _>>()?;
            place_templates(&entries, seed, &SceneParams::default())
        }
        None => sample_scene(catalog, req.object_count.unwrap_or(DEFAULT_OBJECTS), seed),
    }
    .map_err(|e| ApiError::BadRequest(e.to_string()))?;
    let pipeline = req.pipeline.clone().unwrap_or_else(|| app.config.pipeline.clone());
    pipeline
        .noise
        .validate()
        .map_err(|e| ApiError::BadRequest(e.to_string()))?;
    let backend: Arc<dyn ChatBackend> = match req.backend.clone().unwrap_or(BackendChoice::Mock) {
        BackendChoice::Mock => {
            let mut script = MockScript::for_users(&req.users);
            script.failure_injection = req.llm_failure.unwrap_or_default();
            Arc::new(ScriptedMock::new(script))
        }
        BackendChoice::Remote(rc) => Arc::new(RemoteChat::new(rc)),
    };
    let users = req.users.clone();
    // briefing may call the remote model
    let session = tokio::task::spawn_blocking(move || start_session(backend, PromptBundle::bundled(), scene, users))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))??;
    let rng = ChaCha8Rng::seed_from_u64(mix(seed, 3));
    let mut core = SessionCore::new(session, rng, pipeline);
    let start = crate::store::Mark {
        messages: 0,
        transitions: 0,
        environment: String::new(),
    };
    core.emit_since(&start);
    let slot = app.store.insert(core, seed, unix_ms());
    let core = slot.core.lock().await;
    Ok((StatusCode::CREATED, Json(handle(&slot, &core))))
}

async fn get_session(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionHandle>, ApiError> {
    let slot = app.slot(&id)?;
    let core = slot.core.lock().await;
    Ok(Json(handle(&slot, &core)))
}

async fn get_scene(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let slot = app.slot(&id)?;
    let core = slot.core.lock().await;
    Ok(Json(core.scene_snapshot()))
}

#[derive(Serialize)]
struct MessageReply {
    reply: String,
    command: Option<TargetCommand>,
    state: DialogueState,
}

async fn post_message(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<MessageRequest>, JsonRejection>,
) -> Result<Json<MessageReply>, ApiError> {
    let Json(req) = body?;
    let slot = app.slot(&id)?;
    let (_, reply) = locked(&slot, move |core| {
        let mark = core.mark();
        let r = core.session.post_user_utterance(&req.user, &req.text)?;
        core.emit_since(&mark);
        Ok(MessageReply {
            reply: r.reply.content,
            command: r.command,
            state: core.session.state().clone(),
        })
    })
    .await?;
    Ok(Json(reply))
}

#[derive(Serialize)]
struct ConfirmReply {
    /// Assistant answer to a rejection.
    reply: Option<String>,
    state: DialogueState,
}

async fn post_confirmation(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<ConfirmRequest>, JsonRejection>,
) -> Result<Json<ConfirmReply>, ApiError> {
    let Json(req) = body?;
    let slot = app.slot(&id)?;
    let (_, reply) = locked(&slot, move |core| {
        let mark = core.mark();
        let r = core.session.confirm_target(&req.user, req.accept)?;
        core.emit_since(&mark);
        Ok(ConfirmReply {
            reply: r.map(|m| m.content),
            state: core.session.state().clone(),
        })
    })
    .await?;
    Ok(Json(reply))
}

#[derive(Serialize)]
struct ExecuteReply {
    outcome: ExecutionOutcome,
    report: Value,
    state: DialogueState,
}

async fn step_execution(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<ExecuteReply>, ApiError> {
    let slot = app.slot(&id)?;
    let (mut core, (mark, report)) = locked(&slot, |core| {
        let mark = core.mark();
        let cfg = core.pipeline.clone();
        let report = core.session.step_execution(&cfg, &mut core.rng)?;
        Ok((mark, report))
    })
    .await?;
    // Executing first, then the animated plan, then the outcome
    core.emit_transitions(mark.transitions, mark.transitions + 1);
    let waypoints = report.plan.as_ref().map(|p| p.waypoints.clone()).unwrap_or_default();
    let count = waypoints.len();
    for (index, w) in waypoints.into_iter().enumerate() {
        if index > 0 && !app.config.waypoint_interval.is_zero() {
            tokio::time::sleep(app.config.waypoint_interval).await;
        }
        core.emit(EventKind::PlanWaypoint, json!({ "index": index, "count": count, "waypoint": w }));
    }
    let summary = json!({
        "outcome": report.outcome,
        "grounding": report.grounding,
        "estimate": report.estimate,
        "grasp": report.grasp,
    });
    core.emit(EventKind::Outcome, summary.clone());
    let rest = crate::store::Mark {
        transitions: mark.transitions + 1,
        ..mark
    };
    core.emit_since(&rest);
    Ok(Json(ExecuteReply {
        outcome: report.outcome,
        report: summary,
        state: core.session.state().clone(),
    }))
}

#[derive(Serialize)]
struct FeedbackReply {
    reply: String,
    state: DialogueState,
}

async fn post_feedback(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<FeedbackRequest>, JsonRejection>,
) -> Result<Json<FeedbackReply>, ApiError> {
    let Json(req) = body?;
    let slot = app.slot(&id)?;
    let (_, reply) = locked(&slot, move |core| {
        let mark = core.mark();
        let m = core.session.report_feedback(req.outcome)?;
        core.emit_since(&mark);
        Ok(FeedbackReply {
            reply: m.content,
            state: core.session.state().clone(),
        })
    })
    .await?;
    Ok(Json(reply))
}

async fn events(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<EventsQuery>,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let slot = app.slot(&id)?;
    let (backlog, rx) = slot.core.lock().await.subscribe(q.since);
    let replay = stream::iter(backlog);
    let stream = if q.follow {
        // a lagging subscriber is cut off and resumes with `since`
        let live = stream::unfold(rx, |mut rx| async move { rx.recv().await.ok().map(|ev| (ev, rx)) });
        replay.chain(live).boxed()
    } else {
        replay.boxed()
    };
    let stream = stream.map(|ev| {
        Ok(Event::default()
            .id(ev.seq.to_string())
            .event(ev.kind.as_str())
            .json_data(&ev)
            .expect("event serializes"))
    });
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}
