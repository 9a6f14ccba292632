//! HTTP routes. Handlers authenticate, then call [`Service`]; mutations take
//! the write lock so they are applied one at a time.

use std::collections::HashMap;
use std::sync::Arc;

use axum::extract::{FromRequest, FromRequestParts, Path, Query, Request, State};
use axum::http::request::Parts;
use axum::middleware::{self, Next};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use canvas_core::canvas::{Preferences, TimelineDensity};
use canvas_core::credibility::{ProfileCoordinates, Source};
use canvas_core::graph::{Dimension, EntryUpdate, NewEntry};
use canvas_core::pathways::{Interaction, NodeId, Recipient, Relation, VersionRef};
use canvas_core::report::render_markdown;
use canvas_core::{AuthorId, DimensionalConstraint, EntryId, PathwayId, SessionId, SourceId};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tokio::sync::RwLock;

use crate::error::ApiError;
use crate::service::{parse_window, ReportInput, Service, Viewer};

pub struct AppState {
    pub service: RwLock<Service>,
    pub tokens: HashMap<String, AuthorId>,
}

pub type Shared = Arc<AppState>;

impl AppState {
    pub fn new(service: Service, tokens: HashMap<String, AuthorId>) -> Shared {
        Arc::new(Self { service: RwLock::new(service), tokens })
    }
}

/// The caller, resolved from an `Authorization: Bearer` header. A header
/// with an unknown token is rejected outright.
pub struct Caller(pub Option<AuthorId>);

impl Caller {
    fn viewer(&self) -> Viewer {
        match &self.0 {
            Some(a) => Viewer::Author(a.clone()),
            None => Viewer::Anonymous,
        }
    }

    fn require(&self) -> Result<AuthorId, ApiError> {
        self.0.clone().ok_or(ApiError::Unauthorized)
    }
}

impl FromRequestParts<Shared> for Caller {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &Shared) -> Result<Self, Self::Rejection> {
        let Some(value) = parts.headers.get(header::AUTHORIZATION) else {
            return Ok(Caller(None));
        };
        let token = value
            .to_str()
            .ok()
            .and_then(|v| v.strip_prefix("Bearer "))
            .ok_or(ApiError::Unauthorized)?;
        state.tokens.get(token.trim()).cloned().map(|a| Caller(Some(a))).ok_or(ApiError::Unauthorized)
    }
}

/// JSON body whose rejections use the API error format.
pub struct Body<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for Body<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        let Json(v) = Json::<T>::from_request(req, state).await.map_err(|e| ApiError::BadRequest(e.body_text()))?;
        Ok(Body(v))
    }
}

/// Query string whose rejections use the API error format.
pub struct Params<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequestParts<S> for Params<T> {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, Self::Rejection> {
        let Query(v) = Query::<T>::from_request_parts(parts, state).await.map_err(|e| ApiError::BadRequest(e.body_text()))?;
        Ok(Params(v))
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn created<T: Serialize>(v: T) -> Response {
    (StatusCode::CREATED, Json(v)).into_response()
}

fn version_ref(id: String, v: &str) -> Result<VersionRef, ApiError> {
    let version = v.parse().map_err(|_| ApiError::BadRequest(format!("bad version `{v}`")))?;
    Ok(VersionRef { pathway: PathwayId::new(id), version })
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/meta", get(meta))
        .route("/questions", get(questions))
        .route("/query", post(query))
        .route("/entries", post(create_entry))
        .route("/entries/{id}", get(entry).patch(update_entry))
        .route("/entries/{id}/zoom/{dimension}", get(zoom))
        .route("/entries/{id}/derive", post(derive))
        .route("/entries/{id}/children", post(add_child))
        .route("/entries/{id}/references", post(add_reference))
        .route("/sources", get(sources).post(add_source))
        .route("/sources/{id}", get(source))
        .route("/sources/{id}/reports", get(reports).post(submit_report))
        .route("/sessions", post(start_session))
        .route("/sessions/{id}", get(session))
        .route("/sessions/{id}/events", post(record))
        .route("/sessions/{id}/exclusions", post(exclude))
        .route("/sessions/{id}/archive", post(archive))
        .route("/pathways", get(pathways))
        .route("/pathways/{id}/{v}", get(pathway))
        .route("/pathways/{id}/{v}/branch", post(branch))
        .route("/pathways/{id}/{v}/resume", post(resume))
        .route("/pathways/{id}/{v}/share", post(share))
        .route("/pathways/{id}/{v}/report", get(pathway_report))
        .route("/suggest", get(suggest))
        .route("/preferences", get(preferences).put(set_preferences))
        .fallback(|| async { ApiError::Core(canvas_core::Error::NotFound("no such route".into())) })
        .layer(middleware::from_fn_with_state(state.clone(), reject_unknown_tokens))
        .with_state(state)
}

/// Applies to every route, including ones that never look at the caller.
async fn reject_unknown_tokens(State(s): State<Shared>, req: Request, next: Next) -> Response {
    let (mut parts, body) = req.into_parts();
    if let Err(e) = Caller::from_request_parts(&mut parts, &s).await {
        return e.into_response();
    }
    next.run(Request::from_parts(parts, body)).await
}

async fn meta(State(s): State<Shared>) -> Json<crate::service::Meta> {
    Json(s.service.read().await.meta())
}

async fn questions(State(s): State<Shared>) -> Json<Vec<canvas_core::query::CuratedQuestion>> {
    Json(s.service.read().await.questions())
}

#[derive(Debug, Deserialize)]
struct QueryBody {
    text: String,
    #[serde(default)]
    session: Option<SessionId>,
}

async fn query(
    State(s): State<Shared>,
    caller: Caller,
    Body(b): Body<QueryBody>,
) -> ApiResult<canvas_core::canvas::QueryOutcome> {
    let author = caller.require()?;
    let mut svc = s.service.write().await;
    if let Some(session) = &b.session {
        svc.owned_session(session, &Viewer::Author(author))?;
    }
    Ok(Json(svc.query(&b.text, b.session.as_ref())?))
}

#[derive(Debug, Deserialize)]
struct SessionParam {
    #[serde(default)]
    session: Option<SessionId>,
}

async fn entry(
    State(s): State<Shared>,
    caller: Caller,
    Path(id): Path<EntryId>,
    Params(p): Params<SessionParam>,
) -> ApiResult<canvas_core::canvas::EntryView> {
    let svc = s.service.read().await;
    if let Some(session) = &p.session {
        svc.owned_session(session, &caller.viewer())?;
    }
    Ok(Json(svc.entry_view(&id, p.session.as_ref())?))
}

#[derive(Debug, Deserialize)]
struct ZoomParams {
    #[serde(default)]
    window: Option<String>,
    #[serde(default)]
    session: Option<SessionId>,
}

async fn zoom(
    State(s): State<Shared>,
    caller: Caller,
    Path((id, dimension)): Path<(EntryId, String)>,
    Params(p): Params<ZoomParams>,
) -> ApiResult<canvas_core::canvas::ZoomResult> {
    let dimension: Dimension = dimension.parse().map_err(ApiError::BadRequest)?;
    let window = p.window.as_deref().map(parse_window).transpose()?;
    let svc = s.service.read().await;
    if let Some(session) = &p.session {
        svc.owned_session(session, &caller.viewer())?;
    }
    Ok(Json(svc.zoom(&id, dimension, window.as_ref(), p.session.as_ref())?))
}

async fn create_entry(State(s): State<Shared>, caller: Caller, Body(b): Body<NewEntry>) -> Result<Response, ApiError> {
    caller.require()?;
    Ok(created(s.service.write().await.create_entry(b)?))
}

async fn update_entry(
    State(s): State<Shared>,
    caller: Caller,
    Path(id): Path<EntryId>,
    Body(b): Body<EntryUpdate>,
) -> ApiResult<crate::service::Touched> {
    caller.require()?;
    Ok(Json(s.service.write().await.update_entry(&id, b)?))
}

async fn derive(
    State(s): State<Shared>,
    caller: Caller,
    Path(id): Path<EntryId>,
    Body(b): Body<DimensionalConstraint>,
) -> Result<Response, ApiError> {
    caller.require()?;
    Ok(created(s.service.write().await.derive(&id, b)?))
}

#[derive(Debug, Deserialize)]
struct ChildBody {
    child: EntryId,
}

async fn add_child(
    State(s): State<Shared>,
    caller: Caller,
    Path(id): Path<EntryId>,
    Body(b): Body<ChildBody>,
) -> ApiResult<canvas_core::canvas::EntryView> {
    caller.require()?;
    Ok(Json(s.service.write().await.add_containment(&id, &b.child)?))
}

#[derive(Debug, Deserialize)]
struct ReferenceBody {
    other: EntryId,
}

async fn add_reference(
    State(s): State<Shared>,
    caller: Caller,
    Path(id): Path<EntryId>,
    Body(b): Body<ReferenceBody>,
) -> ApiResult<canvas_core::canvas::EntryView> {
    caller.require()?;
    Ok(Json(s.service.write().await.add_reference(&id, &b.other)?))
}

async fn sources(State(s): State<Shared>) -> Json<Vec<crate::service::SourceView>> {
    Json(s.service.read().await.sources())
}

async fn source(State(s): State<Shared>, Path(id): Path<SourceId>) -> ApiResult<crate::service::SourceView> {
    Ok(Json(s.service.read().await.source(&id)?))
}

#[derive(Debug, Deserialize)]
struct SourceBody {
    source: Source,
    #[serde(default)]
    initial: Option<ProfileCoordinates>,
}

async fn add_source(State(s): State<Shared>, caller: Caller, Body(b): Body<SourceBody>) -> Result<Response, ApiError> {
    caller.require()?;
    Ok(created(s.service.write().await.add_source(b.source, b.initial)?))
}

async fn reports(
    State(s): State<Shared>,
    Path(id): Path<SourceId>,
) -> ApiResult<Vec<canvas_core::credibility::CredibilityReport>> {
    Ok(Json(s.service.read().await.reports(&id)?))
}

async fn submit_report(
    State(s): State<Shared>,
    caller: Caller,
    Path(id): Path<SourceId>,
    Body(b): Body<ReportInput>,
) -> Result<Response, ApiError> {
    caller.require()?;
    Ok(created(s.service.write().await.submit_report(&id, b)?))
}

async fn start_session(State(s): State<Shared>, caller: Caller) -> Result<Response, ApiError> {
    let author = caller.require()?;
    Ok(created(s.service.write().await.start_session(&author)?))
}

async fn session(
    State(s): State<Shared>,
    caller: Caller,
    Path(id): Path<SessionId>,
) -> ApiResult<canvas_core::pathways::Session> {
    let svc = s.service.read().await;
    Ok(Json(svc.owned_session(&id, &caller.viewer())?.clone()))
}

#[derive(Debug, Deserialize)]
struct EventBody {
    interaction: Interaction,
    #[serde(default)]
    relation: Option<Relation>,
}

async fn record(
    State(s): State<Shared>,
    caller: Caller,
    Path(id): Path<SessionId>,
    Body(b): Body<EventBody>,
) -> Result<Response, ApiError> {
    let author = caller.require()?;
    let mut svc = s.service.write().await;
    svc.owned_session(&id, &Viewer::Author(author))?;
    Ok(created(svc.record(&id, b.interaction, b.relation)?))
}

#[derive(Debug, Deserialize)]
struct ExclusionBody {
    source_id: SourceId,
    note: String,
}

async fn exclude(
    State(s): State<Shared>,
    caller: Caller,
    Path(id): Path<SessionId>,
    Body(b): Body<ExclusionBody>,
) -> Result<Response, ApiError> {
    let author = caller.require()?;
    let mut svc = s.service.write().await;
    svc.owned_session(&id, &Viewer::Author(author))?;
    Ok(created(svc.exclude(&id, &b.source_id, &b.note)?))
}

async fn archive(
    State(s): State<Shared>,
    caller: Caller,
    Path(id): Path<SessionId>,
) -> ApiResult<canvas_core::pathways::Pathway> {
    let author = caller.require()?;
    let mut svc = s.service.write().await;
    svc.owned_session(&id, &Viewer::Author(author))?;
    Ok(Json(svc.archive(&id)?))
}

#[derive(Debug, Deserialize)]
struct PathwaysParams {
    #[serde(default)]
    author: Option<AuthorId>,
}

async fn pathways(
    State(s): State<Shared>,
    caller: Caller,
    Params(p): Params<PathwaysParams>,
) -> Json<Vec<crate::service::PathwaySummary>> {
    Json(s.service.read().await.pathways(&caller.viewer(), p.author.as_ref()))
}

async fn pathway(
    State(s): State<Shared>,
    caller: Caller,
    Path((id, v)): Path<(String, String)>,
) -> ApiResult<canvas_core::pathways::Pathway> {
    let r = version_ref(id, &v)?;
    Ok(Json(s.service.read().await.pathway(&r, &caller.viewer())?.clone()))
}

#[derive(Debug, Deserialize)]
struct BranchBody {
    node: NodeId,
}

async fn branch(
    State(s): State<Shared>,
    caller: Caller,
    Path((id, v)): Path<(String, String)>,
    Body(b): Body<BranchBody>,
) -> Result<Response, ApiError> {
    let author = caller.require()?;
    let r = version_ref(id, &v)?;
    Ok(created(s.service.write().await.branch(&r, b.node, &author)?))
}

async fn resume(
    State(s): State<Shared>,
    caller: Caller,
    Path((id, v)): Path<(String, String)>,
) -> Result<Response, ApiError> {
    let author = caller.require()?;
    let r = version_ref(id, &v)?;
    Ok(created(s.service.write().await.resume(&r, &author)?))
}

#[derive(Debug, Deserialize)]
struct ShareBody {
    recipient: Recipient,
}

async fn share(
    State(s): State<Shared>,
    caller: Caller,
    Path((id, v)): Path<(String, String)>,
    Body(b): Body<ShareBody>,
) -> ApiResult<canvas_core::pathways::Share> {
    let author = caller.require()?;
    let r = version_ref(id, &v)?;
    Ok(Json(s.service.write().await.share(&r, b.recipient, &author)?))
}

#[derive(Debug, Deserialize)]
struct ReportParams {
    #[serde(default)]
    format: Option<String>,
}

async fn pathway_report(
    State(s): State<Shared>,
    caller: Caller,
    Path((id, v)): Path<(String, String)>,
    Params(p): Params<ReportParams>,
) -> Result<Response, ApiError> {
    let r = version_ref(id, &v)?;
    let report = s.service.read().await.report(&r, &caller.viewer())?;
    match p.format.as_deref() {
        None | Some("json") => Ok(Json(report).into_response()),
        Some("markdown") => {
            Ok(([(header::CONTENT_TYPE, "text/markdown; charset=utf-8")], render_markdown(&report)).into_response())
        }
        Some(other) => Err(ApiError::BadRequest(format!("unknown report format `{other}`"))),
    }
}

#[derive(Debug, Deserialize)]
struct SuggestParams {
    signature: String,
}

async fn suggest(
    State(s): State<Shared>,
    Params(p): Params<SuggestParams>,
) -> Json<Vec<canvas_core::pathways::Suggestion>> {
    Json(s.service.read().await.suggest(&p.signature))
}

async fn preferences(State(s): State<Shared>, caller: Caller) -> ApiResult<Preferences> {
    let author = caller.require()?;
    Ok(Json(s.service.read().await.preferences(&author)))
}

#[derive(Debug, Deserialize)]
struct PreferencesBody {
    #[serde(default)]
    default_dimension: Option<Dimension>,
    #[serde(default)]
    timeline_density: Option<TimelineDensity>,
}

async fn set_preferences(State(s): State<Shared>, caller: Caller, Body(b): Body<PreferencesBody>) -> ApiResult<Preferences> {
    let author = caller.require()?;
    let prefs = Preferences { author, default_dimension: b.default_dimension, timeline_density: b.timeline_density };
    Ok(Json(s.service.write().await.set_preferences(prefs)?))
}
