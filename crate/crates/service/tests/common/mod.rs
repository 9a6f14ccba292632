#![allow(dead_code)]

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use canvas_core::corpus::{load_seed, seed_time};
use canvas_core::persist::{Clock, FixedClock, SteppingClock, Store};
use canvas_core::AuthorId;
use canvas_service::{router, AppState, Service};
use chrono::{DateTime, Duration, Utc};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

pub const ALEX: &str = "alex-token";
pub const JORDAN: &str = "jordan-token";

pub fn tokens() -> HashMap<String, AuthorId> {
    HashMap::from([(ALEX.to_owned(), AuthorId::new("alex")), (JORDAN.to_owned(), AuthorId::new("jordan"))])
}

pub fn session_time() -> DateTime<Utc> {
    seed_time() + Duration::days(30)
}

/// Writes the seed corpus into `dir` as a compacted store.
pub fn seed_dir(dir: &Path) {
    let mut store = Store::open(dir).unwrap();
    store.replace(load_seed().unwrap()).unwrap();
}

pub fn app_with(dir: &Path, clock: Arc<dyn Clock>) -> Router {
    let service = Service::new(Store::open(dir).unwrap(), clock, 1000);
    router(AppState::new(service, tokens()))
}

/// Router over a freshly seeded directory with a stepping clock.
pub fn seeded_app(dir: &Path) -> Router {
    seed_dir(dir);
    app_with(dir, Arc::new(SteppingClock::new(session_time(), Duration::seconds(1))))
}

pub fn fixed(at: DateTime<Utc>) -> Arc<dyn Clock> {
    Arc::new(FixedClock(at))
}

pub async fn raw(app: &Router, method: Method, uri: &str, token: Option<&str>, body: Option<Value>) -> (StatusCode, String) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(t) = token {
        req = req.header("authorization", format!("Bearer {t}"));
    }
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

pub async fn call(app: &Router, method: Method, uri: &str, token: Option<&str>, body: Option<Value>) -> (StatusCode, Value) {
    let (status, text) = raw(app, method, uri, token, body).await;
    let value = serde_json::from_str(&text).unwrap_or_else(|e| panic!("{uri}: non-JSON body {text:?}: {e}"));
    (status, value)
}

pub async fn get(app: &Router, uri: &str, token: Option<&str>) -> Value {
    let (status, v) = call(app, Method::GET, uri, token, None).await;
    assert!(status.is_success(), "GET {uri}: {status} {v}");
    v
}

pub async fn post(app: &Router, uri: &str, token: Option<&str>, body: Value) -> Value {
    let (status, v) = call(app, Method::POST, uri, token, Some(body)).await;
    assert!(status.is_success(), "POST {uri}: {status} {v}");
    v
}

/// Node kinds the scripted exploration produces, in order.
pub const SCENARIO_KINDS: [&str; 12] = [
    "query",
    "zoom",
    "content_view",
    "zoom",
    "zoom",
    "source_evaluation",
    "source_evaluation",
    "source_evaluation",
    "source_evaluation",
    "source_evaluation",
    "source_evaluation",
    "source_exclusion",
];

/// What the scripted client observed along the way.
pub struct ScenarioRun {
    pub resolution: Value,
    pub logical: Value,
    pub temporal: Value,
    pub geographical: Value,
    pub pathway: Value,
}

/// Alex's exploration as an API client: query, logical zoom, a visit to
/// Ethics and Governance, temporal and geographical zooms, source checks,
/// one exclusion with a note, archive.
pub async fn run_scenario(app: &Router) -> ScenarioRun {
    let t = Some(ALEX);
    let session = post(app, "/sessions", t, json!({})).await;
    let sid = session["id"].as_str().unwrap().to_owned();
    let q = post(app, "/query", t, json!({ "text": canvas_core::corpus::ALEX_QUERY, "session": sid })).await;
    let target = q["resolution"]["target"].as_str().unwrap().to_owned();

    let event = |interaction: Value| json!({ "interaction": interaction });
    let zoom = |dim: &str| event(json!({ "kind": "zoom", "entry_id": target, "dimension": dim }));
    let events = format!("/sessions/{sid}/events");

    post(app, &events, t, zoom("logical")).await;
    let logical = get(app, &format!("/entries/{target}/zoom/logical?session={sid}"), t).await;
    post(app, &events, t, event(json!({ "kind": "content_view", "entry_id": "ethics-and-governance" }))).await;
    get(app, &format!("/entries/ethics-and-governance?session={sid}"), t).await;
    post(app, &events, t, zoom("temporal")).await;
    let temporal = get(app, &format!("/entries/{target}/zoom/temporal?session={sid}"), t).await;
    post(app, &events, t, zoom("geographical")).await;
    let geographical = get(app, &format!("/entries/{target}/zoom/geographical?session={sid}"), t).await;

    for source in ["fli", "deepmind", "stuart-russell", "dario-amodei", "peer-reviewed", "daily-buzz"] {
        let reports = get(app, &format!("/sources/{source}/reports"), None).await;
        let report_id = reports[0]["id"].clone();
        let check = json!({ "kind": "source_evaluation", "source_id": source, "report_id": report_id });
        post(app, &events, t, event(check)).await;
    }
    let note = json!({ "source_id": "daily-buzz", "note": "sensationalist framing, no citations" });
    post(app, &format!("/sessions/{sid}/exclusions"), t, note).await;
    let pathway = post(app, &format!("/sessions/{sid}/archive"), t, json!({})).await;
    ScenarioRun { resolution: q["resolution"].clone(), logical, temporal, geographical, pathway }
}

pub fn percent_encode(s: &str) -> String {
    s.bytes()
        .map(|b| if b.is_ascii_alphanumeric() { (b as char).to_string() } else { format!("%{b:02X}") })
        .collect()
}
