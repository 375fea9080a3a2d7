//! HTTP API over sessions and generated motions.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::{Path, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use motion_agent_core::agent::{
    place_second_person, run_turn, AgentError, BackendKind, MotionRecord, PlannerBackend, RemotePlanner,
    RuleBasedPlanner, Session, PLAN_SCHEMA_VERSION,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::PlannerConfig;
use crate::mota;
use crate::pipeline::Runtime;
use crate::store::{SessionStore, StoreError};
use crate::transport::HttpTransport;

pub type PlannerFactory = Arc<dyn Fn() -> Box<dyn PlannerBackend> + Send + Sync>;

pub fn planner_factory(cfg: &PlannerConfig) -> PlannerFactory {
    let cfg = cfg.clone();
    match cfg.kind {
        BackendKind::RuleBased => Arc::new(|| Box::new(RuleBasedPlanner)),
        BackendKind::RemoteChat => Arc::new(move || Box::new(RemotePlanner::new(HttpTransport::new(&cfg)))),
    }
}

pub struct AppState {
    pub runtime: Arc<Runtime>,
    pub store: SessionStore,
    pub planner: PlannerFactory,
    pub planner_kind: BackendKind,
    pub seed: u64,
    pub bearer_token: Option<String>,
    sessions: Mutex<HashMap<String, Arc<tokio::sync::Mutex<Session>>>>,
    create_lock: Mutex<()>,
}

impl AppState {
    pub fn new(
        runtime: Arc<Runtime>,
        store: SessionStore,
        planner: PlannerFactory,
        planner_kind: BackendKind,
        seed: u64,
        bearer_token: Option<String>,
    ) -> Self {
        Self {
            runtime,
            store,
            planner,
            planner_kind,
            seed,
            bearer_token,
            sessions: Mutex::new(HashMap::new()),
            create_lock: Mutex::new(()),
        }
    }

    fn session(&self, id: &str) -> Result<Arc<tokio::sync::Mutex<Session>>, ApiError> {
        let mut map = self.sessions.lock().expect("session map");
        if let Some(s) = map.get(id) {
            return Ok(s.clone());
        }
        let s = Arc::new(tokio::sync::Mutex::new(self.store.load(id)?));
        map.insert(id.to_owned(), s.clone());
        Ok(s)
    }

    fn create(&self) -> Result<Session, ApiError> {
        let _g = self.create_lock.lock().expect("create lock");
        let id = self.store.next_id()?;
        let session = self.store.create(&id, now())?;
        self.sessions
            .lock()
            .expect("session map")
            .insert(id, Arc::new(tokio::sync::Mutex::new(session.clone())));
        Ok(session)
    }

    async fn motion(&self, mid: &str) -> Result<(MotionRecord, Option<MotionRecord>), ApiError> {
        let not_found = || ApiError::not_found(format!("motion '{mid}' not found"));
        let (sid, _) = mid.rsplit_once("-m").ok_or_else(not_found)?;
        let handle = self.session(sid).map_err(|_| not_found())?;
        let s = handle.lock().await;
        let m = s.motion(mid).cloned().ok_or_else(not_found)?;
        let partner = m.partner.as_deref().and_then(|p| s.motion(p)).cloned();
        Ok((m, partner))
    }
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self { status, body: json!({ "error": code, "message": message.into() }) }
    }

    fn not_found(message: String) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(_) | StoreError::BadId(_) => Self::not_found(e.to_string()),
            _ => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "storage", e.to_string()),
        }
    }
}

impl From<AgentError> for ApiError {
    fn from(e: AgentError) -> Self {
        let message = e.to_string();
        match e {
            AgentError::PlanFormat { raw, reason } => Self {
                status: StatusCode::UNPROCESSABLE_ENTITY,
                body: json!({ "error": "plan_format", "message": message, "reason": reason, "raw": raw }),
            },
            AgentError::Transport(_) => Self::new(StatusCode::BAD_GATEWAY, "planner_unavailable", message),
            AgentError::Schema(_) | AgentError::UnknownMotion(_) | AgentError::NoMotion | AgentError::SkeletonMismatch => {
                Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_plan", message)
            }
            _ => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MotionSummary {
    pub id: String,
    pub turn: usize,
    pub num_frames: usize,
    pub fps: f32,
    pub tokens: usize,
    pub truncated: bool,
    pub token_boundaries: Vec<usize>,
    pub partner: Option<String>,
    pub placement: Option<motion_agent_core::agent::PlacementTuple>,
    pub sha256: String,
}

impl From<&MotionRecord> for MotionSummary {
    fn from(m: &MotionRecord) -> Self {
        Self {
            id: m.id.clone(),
            turn: m.turn,
            num_frames: m.motion.num_frames(),
            fps: m.motion.fps(),
            tokens: m.tokens.ids.len(),
            truncated: m.segments.iter().any(|s| s.truncated),
            token_boundaries: m.boundaries(),
            partner: m.partner.clone(),
            placement: m.placement,
            sha256: m.hash.clone(),
        }
    }
}

#[derive(Debug, Deserialize)]
pub struct TurnRequest {
    pub text: String,
}

async fn healthz(State(st): State<Arc<AppState>>) -> Json<Value> {
    Json(json!({
        "status": "ok",
        "plan_schema_version": PLAN_SCHEMA_VERSION,
        "planner": st.planner_kind,
        "artifacts": st.runtime.info(),
    }))
}

async fn create_session(State(st): State<Arc<AppState>>) -> Result<(StatusCode, Json<Value>), ApiError> {
    let s = st.create()?;
    Ok((StatusCode::CREATED, Json(json!({ "id": s.id(), "created_at": s.created_at() }))))
}

fn session_json(s: &Session) -> Value {
    json!({
        "id": s.id(),
        "created_at": s.created_at(),
        "updated_at": s.updated_at(),
        "turns": s.turns(),
        "motions": s.motions().iter().map(MotionSummary::from).collect::<Vec<_>>(),
    })
}

async fn get_session(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let handle = st.session(&id)?;
    let s = handle.lock().await;
    Ok(Json(session_json(&s)))
}

async fn post_turn(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(req): Json<TurnRequest>,
) -> Result<Json<Value>, ApiError> {
    let text = req.text.trim().to_owned();
    if text.is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "empty_text", "text must not be empty"));
    }
    let handle = st.session(&id)?;
    let mut guard = handle.lock_owned().await;
    let st2 = st.clone();
    tokio::task::spawn_blocking(move || {
        let mut work = guard.clone();
        let before = work.motions().len();
        let mut planner = (st2.planner)();
        let mut agent = st2.runtime.agent();
        let turn = run_turn(&mut work, &text, planner.as_mut(), &mut agent, &st2.runtime.codec, st2.seed, now())?;
        let motions = &work.motions()[before..];
        st2.store.append_turn(work.id(), &turn, motions)?;
        let body = json!({
            "turn": turn.index,
            "plan": turn.plan,
            "response_text": turn.response,
            "motion_ids": turn.motion_ids,
            "captions": turn.captions,
            "motions": motions.iter().map(MotionSummary::from).collect::<Vec<_>>(),
        });
        *guard = work;
        Ok(Json(body))
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

fn wants_json(headers: &HeaderMap) -> bool {
    headers
        .get(header::ACCEPT)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.contains("application/json"))
}

async fn get_motion(
    State(st): State<Arc<AppState>>,
    Path(mid): Path<String>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let (m, _) = st.motion(&mid).await?;
    Ok(if wants_json(&headers) {
        ([(header::CONTENT_TYPE, "application/json")], mota::to_json(&m.motion)).into_response()
    } else {
        ([(header::CONTENT_TYPE, "application/octet-stream")], mota::encode(&m.motion)).into_response()
    })
}

async fn get_joints(State(st): State<Arc<AppState>>, Path(mid): Path<String>) -> Result<Json<Value>, ApiError> {
    let (m, partner) = st.motion(&mid).await?;
    let joints = match (m.placement, &partner) {
        (Some(r), Some(p)) => place_second_person(&p.motion, &m.motion, r)?.second,
        _ => m.motion.forward_kinematics(),
    };
    let down = st.runtime.codec.downsample();
    Ok(Json(json!({
        "id": m.id,
        "fps": m.motion.fps(),
        "num_frames": m.motion.num_frames(),
        "joint_count": m.motion.skeleton().parent.len(),
        "parent": m.motion.skeleton().parent,
        "positions": joints.to_nested(),
        "frame_boundaries": m.boundaries().iter().map(|b| b * down).collect::<Vec<_>>(),
        "partner": m.partner,
        "placement": m.placement,
    })))
}

async fn get_tokens(State(st): State<Arc<AppState>>, Path(mid): Path<String>) -> Result<Response, ApiError> {
    let (m, _) = st.motion(&mid).await?;
    Ok(([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], m.tokens.to_text()).into_response())
}

async fn auth(State(st): State<Arc<AppState>>, req: Request, next: Next) -> Response {
    if let Some(token) = &st.bearer_token {
        let ok = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .is_some_and(|v| v == token);
        if !ok {
            return ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or wrong bearer token").into_response();
        }
    }
    next.run(req).await
}

pub fn router(state: Arc<AppState>) -> Router {
    let api = Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/turns", post(post_turn))
        .route("/motions/{mid}", get(get_motion))
        .route("/motions/{mid}/joints", get(get_joints))
        .route("/motions/{mid}/tokens", get(get_tokens))
        .route_layer(middleware::from_fn_with_state(state.clone(), auth));
    Router::new().route("/healthz", get(healthz)).merge(api).with_state(state)
}

/// Serves until ctrl-c. `ready` receives the bound address.
pub async fn serve(state: Arc<AppState>, listen: &str, ready: impl FnOnce(SocketAddr)) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(listen).await?;
    ready(listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
