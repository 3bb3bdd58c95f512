//! HTTP front for the service: JSON endpoints and a server-sent-event push
//! stream. Paths and payloads are documented in `protocol.md`.

use std::convert::Infallible;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use anyhow::Context;
use axum::body::Bytes;
use axum::extract::{FromRequestParts, Path as UrlPath, Query, State};
use axum::http::request::Parts;
use axum::http::StatusCode;
use axum::response::sse::{Event as SseEvent, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::Stream;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use commit_core::api::{ApiError, Clock, PushEvent, Service, SystemClock, VirtualClock};
use commit_core::store::{log_path, StoreError};
use commit_core::time::{self, Timestamp};
use commit_core::{Condition, CycleIndex, GroupId, GroupLog, Manifest, MemberId, MessageId, MessageKind, ReactionKind};

/// An error response: `{"error": {"code", "message"}}`.
#[derive(Debug)]
pub struct HttpError {
    pub status: StatusCode,
    pub code: String,
    pub message: String,
}

impl HttpError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        HttpError {
            status,
            code: code.to_string(),
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        HttpError::new(StatusCode::BAD_REQUEST, "BAD_REQUEST", message)
    }
}

impl From<ApiError> for HttpError {
    fn from(e: ApiError) -> Self {
        let code = e.code();
        let status = match code {
            "UNAUTHORIZED" => StatusCode::UNAUTHORIZED,
            "UNKNOWN_GROUP" | "UNKNOWN_MEMBER" | "UNKNOWN_MESSAGE" => StatusCode::NOT_FOUND,
            "STORE_ERROR" => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::CONFLICT,
        };
        HttpError::new(status, code, e.to_string())
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: ErrorDetail<'a>,
}

#[derive(Serialize)]
struct ErrorDetail<'a> {
    code: &'a str,
    message: &'a str,
}

impl IntoResponse for HttpError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: ErrorDetail {
                code: &self.code,
                message: &self.message,
            },
        };
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, HttpError>;

/// Session token from `Authorization: Bearer <token>` or `?token=<token>`.
/// The query form exists for browser `EventSource`, which cannot set headers.
pub struct Token(pub String);

impl<S: Send + Sync> FromRequestParts<S> for Token {
    type Rejection = HttpError;

    async fn from_request_parts(parts: &mut Parts, _: &S) -> Result<Self, Self::Rejection> {
        let header = parts
            .headers
            .get(axum::http::header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        let query = parts.uri.query().and_then(|q| {
            q.split('&')
                .find_map(|kv| kv.strip_prefix("token="))
        });
        header
            .or(query)
            .map(|t| Token(t.trim().to_string()))
            .ok_or_else(|| HttpError::from(ApiError::Unauthorized))
    }
}

#[derive(Clone)]
pub struct AppState {
    pub service: Arc<Service>,
    /// Present when the server runs on virtual time.
    pub clock: Option<Arc<VirtualClock>>,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/groups", get(list_groups))
        .route("/v1/groups/{group_id}/join", post(join))
        .route("/v1/session", get(session))
        .route("/v1/feed", get(feed))
        .route("/v1/commit", post(commit))
        .route("/v1/messages", post(send_message))
        .route("/v1/reactions", post(send_reaction))
        .route("/v1/members", get(members))
        .route("/v1/banner", get(banner))
        .route("/v1/notifications", get(notifications))
        .route("/v1/stream", get(stream))
        .route("/v1/clock", get(clock_now).post(clock_move))
        .with_state(state)
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, HttpError> {
    let raw: &[u8] = if body.is_empty() { b"{}" } else { body };
    serde_json::from_slice(raw).map_err(|e| HttpError::bad_request(e.to_string()))
}

#[derive(Serialize, Deserialize)]
pub struct GroupSummary {
    pub group_id: GroupId,
    pub name: String,
    pub condition: Condition,
    pub cycle_hours: u32,
    #[serde(with = "time::wire")]
    pub epoch: Timestamp,
}

async fn list_groups(State(app): State<AppState>) -> ApiResult<Vec<GroupSummary>> {
    let mut out = Vec::new();
    for id in app.service.group_ids() {
        let summary = app.service.inspect(&id, |log| {
            let c = log.config();
            GroupSummary {
                group_id: c.group_id.clone(),
                name: c.name.clone(),
                condition: c.condition,
                cycle_hours: c.cycle_hours,
                epoch: c.epoch,
            }
        })?;
        out.push(summary);
    }
    Ok(Json(out))
}

#[derive(Deserialize)]
struct JoinRequest {
    member_id: MemberId,
    display_name: Option<String>,
}

async fn join(
    State(app): State<AppState>,
    UrlPath(group_id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<commit_core::api::Session> {
    let req: JoinRequest = parse(&body)?;
    if req.member_id.as_str().is_empty() {
        return Err(HttpError::bad_request("member_id must not be empty"));
    }
    let name = req.display_name.unwrap_or_else(|| req.member_id.to_string());
    Ok(Json(app.service.join_group(&GroupId(group_id), &req.member_id, &name)?))
}

async fn session(State(app): State<AppState>, Token(t): Token) -> ApiResult<commit_core::api::Session> {
    Ok(Json(app.service.session(&t)?))
}

#[derive(Deserialize)]
struct FeedQuery {
    #[serde(default)]
    since_seq: u64,
}

async fn feed(
    State(app): State<AppState>,
    Token(t): Token,
    Query(q): Query<FeedQuery>,
) -> ApiResult<commit_core::api::Feed> {
    Ok(Json(app.service.get_feed(&t, q.since_seq)?))
}

#[derive(Deserialize)]
struct CommitRequest {
    target_cycle: Option<CycleIndex>,
    #[serde(default)]
    null_commit: bool,
}

async fn commit(
    State(app): State<AppState>,
    Token(t): Token,
    body: Bytes,
) -> ApiResult<commit_core::CommitmentRecord> {
    let req: CommitRequest = parse(&body)?;
    Ok(Json(app.service.do_commit(&t, req.target_cycle, req.null_commit)?))
}

#[derive(Deserialize)]
struct MessageRequest {
    body: String,
    #[serde(default)]
    kind: MessageKind,
}

async fn send_message(
    State(app): State<AppState>,
    Token(t): Token,
    body: Bytes,
) -> ApiResult<commit_core::Message> {
    let req: MessageRequest = parse(&body)?;
    Ok(Json(app.service.send_message(&t, req.kind, &req.body)?))
}

#[derive(Deserialize)]
struct ReactionRequest {
    message_id: MessageId,
    reaction: ReactionKind,
}

async fn send_reaction(
    State(app): State<AppState>,
    Token(t): Token,
    body: Bytes,
) -> ApiResult<commit_core::Reaction> {
    let req: ReactionRequest = parse(&body)?;
    Ok(Json(app.service.send_reaction(&t, req.message_id, req.reaction)?))
}

async fn members(
    State(app): State<AppState>,
    Token(t): Token,
) -> ApiResult<Vec<commit_core::MembershipView>> {
    Ok(Json(app.service.get_members(&t)?))
}

async fn banner(State(app): State<AppState>, Token(t): Token) -> ApiResult<commit_core::BannerState> {
    Ok(Json(app.service.get_banner(&t)?))
}

async fn notifications(
    State(app): State<AppState>,
    Token(t): Token,
) -> ApiResult<Vec<commit_core::notify::Notification>> {
    Ok(Json(app.service.get_notifications(&t)?))
}

/// SSE event name for a push item; matches its `type` tag.
pub fn push_name(e: &PushEvent) -> &'static str {
    match e {
        PushEvent::Event { .. } => "event",
        PushEvent::GatedMessage { .. } => "gated_message",
        PushEvent::BannerChanged { .. } => "banner_changed",
        PushEvent::CycleStarted { .. } => "cycle_started",
    }
}

async fn stream(
    State(app): State<AppState>,
    Token(t): Token,
) -> Result<Sse<impl Stream<Item = Result<SseEvent, Infallible>>>, HttpError> {
    let rx = app.service.subscribe(&t)?;
    let events = futures::stream::unfold(rx, |mut rx| async move {
        let e = rx.recv().await?;
        let data = serde_json::to_string(&e).expect("push events always serialize");
        Some((Ok(SseEvent::default().event(push_name(&e)).data(data)), rx))
    });
    Ok(Sse::new(events).keep_alive(KeepAlive::default()))
}

#[derive(Serialize, Deserialize)]
pub struct ClockView {
    #[serde(with = "time::wire")]
    pub now: Timestamp,
    #[serde(rename = "virtual")]
    pub is_virtual: bool,
}

async fn clock_now(State(app): State<AppState>) -> Json<ClockView> {
    Json(ClockView {
        now: app.service.now(),
        is_virtual: app.clock.is_some(),
    })
}

#[derive(Deserialize)]
struct ClockRequest {
    #[serde(default, with = "time::wire_opt")]
    set: Option<Timestamp>,
    advance_minutes: Option<i64>,
}

/// Moves virtual time forward and brings every group up to it.
async fn clock_move(State(app): State<AppState>, body: Bytes) -> ApiResult<ClockView> {
    let clock = app.clock.as_ref().ok_or_else(|| {
        HttpError::new(StatusCode::CONFLICT, "CLOCK_NOT_VIRTUAL", "server runs on wall time")
    })?;
    let req: ClockRequest = parse(&body)?;
    match (req.set, req.advance_minutes) {
        (Some(t), None) => clock.set(t),
        (None, Some(m)) if m >= 0 => clock.advance(chrono::Duration::minutes(m)),
        _ => return Err(HttpError::bad_request("give exactly one of set or a non-negative advance_minutes")),
    }
    app.service.tick()?;
    Ok(Json(ClockView {
        now: app.service.now(),
        is_virtual: true,
    }))
}

/// Opens every manifest group's log in `log_dir`, creating missing ones.
/// With `virtual_clock`, time starts at the earliest epoch or the latest
/// log head, whichever is later.
pub fn load(manifest: &Manifest, log_dir: &Path, virtual_clock: bool) -> anyhow::Result<AppState> {
    let mut existing = Vec::new();
    let mut missing = Vec::new();
    for cfg in &manifest.groups {
        let path = log_path(log_dir, &cfg.group_id);
        if path.exists() {
            let log = GroupLog::open_file(cfg.clone(), &path)
                .with_context(|| format!("opening {}", path.display()))?;
            existing.push(log);
        } else {
            missing.push((cfg.clone(), path));
        }
    }
    let (clock, vclock): (Arc<dyn Clock>, _) = if virtual_clock {
        let earliest = manifest.groups.iter().map(|g| g.epoch).min();
        let head = existing.iter().filter_map(|l| l.head_time()).max();
        let start = earliest.max(head).unwrap_or_else(|| SystemClock.now());
        let vc = Arc::new(VirtualClock::new(start));
        (vc.clone(), Some(vc))
    } else {
        (Arc::new(SystemClock), None)
    };
    let service = Service::new(clock.clone());
    for log in existing {
        service.add_group(log)?;
    }
    for (cfg, path) in missing {
        let at = clock.now().max(cfg.epoch);
        let log = GroupLog::create_file(cfg, at, &path)
            .map_err(|e: StoreError| anyhow::anyhow!("creating {}: {e}", path.display()))?;
        service.add_group(log)?;
    }
    Ok(AppState {
        service: Arc::new(service),
        clock: vclock,
    })
}

/// Serves until interrupted. On wall time a background task brings groups
/// up to date every `tick`; on virtual time that happens on clock moves.
pub async fn serve(state: AppState, listen: SocketAddr, tick: Duration) -> anyhow::Result<()> {
    if state.clock.is_none() {
        let service = state.service.clone();
        tokio::spawn(async move {
            let mut interval = tokio::time::interval(tick);
            loop {
                interval.tick().await;
                if let Err(e) = service.tick() {
                    eprintln!("tick failed: {e}");
                }
            }
        });
    }
    let listener = tokio::net::TcpListener::bind(listen)
        .await
        .with_context(|| format!("binding {listen}"))?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

