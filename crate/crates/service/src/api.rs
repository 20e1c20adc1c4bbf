//! HTTP routes over the triage engine.

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, StatusCode, Uri};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine as _;
use chrono::{DateTime, Utc};
use katriage::engine::IngestOutcome;
use katriage::risk::Assessment;
use katriage::store::{IngestReport, Rejection, SubjectKind};
use katriage::summary::SummaryMode;
use katriage::{
    Alert, AlertStatus, BlockEntry, Decision, Engine, EngineError, KaId, Person, RuleSet, StoreError,
    Transaction, SCHEMA_VERSION,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

pub const DEFAULT_PAGE: usize = 50;
pub const MAX_PAGE: usize = 500;

pub struct AppState {
    pub engine: Engine,
    pub api_token: Option<String>,
    /// Rule file re-read by `POST /rules/reload`.
    pub rules_path: Option<PathBuf>,
}

impl AppState {
    pub fn new(engine: Engine) -> Self {
        AppState {
            engine,
            api_token: None,
            rules_path: None,
        }
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    fn unprocessable(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, message)
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let status = if e.is_not_found() {
            StatusCode::NOT_FOUND
        } else if e.is_conflict() {
            StatusCode::CONFLICT
        } else if matches!(e, EngineError::Store(StoreError::Invalid(_))) {
            StatusCode::UNPROCESSABLE_ENTITY
        } else {
            StatusCode::INTERNAL_SERVER_ERROR
        };
        ApiError::new(status, e.to_string())
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        EngineError::from(e).into()
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let error = json!({
            "status": self.status.as_u16(),
            "message": self.message,
        });
        let body = json!({ "schema_version": SCHEMA_VERSION, "error": error });
        (self.status, Json(body)).into_response()
    }
}

/// Adds `schema_version` to payloads that do not carry one.
#[derive(Serialize)]
pub struct Versioned<T> {
    pub schema_version: u32,
    #[serde(flatten)]
    pub body: T,
}

fn versioned<T: Serialize>(body: T) -> Json<Versioned<T>> {
    Json(Versioned {
        schema_version: SCHEMA_VERSION,
        body,
    })
}

type Shared = Arc<AppState>;
type ApiResult<T> = Result<T, ApiError>;

/// Runs engine work off the async workers.
async fn blocking<T, F>(state: &Shared, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&Engine) -> ApiResult<T> + Send + 'static,
{
    let state = Arc::clone(state);
    tokio::task::spawn_blocking(move || f(&state.engine))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
}

pub fn router(state: AppState) -> Router {
    let state = Arc::new(state);
    let api = Router::new()
        .route("/areas", get(areas))
        .route("/events", post(post_events))
        .route("/persons", post(post_persons))
        .route("/alerts", get(list_alerts).post(raise_alert))
        .route("/alerts/{id}", get(get_alert))
        .route("/alerts/{id}/overview", get(overview))
        .route("/alerts/{id}/summaries", get(summaries))
        .route("/alerts/{id}/ka/{ka}/summary", get(summary))
        .route("/alerts/{id}/ka/{ka}/charts", get(charts))
        .route("/alerts/{id}/ka/{ka}/rows", get(rows))
        .route("/alerts/{id}/decision", post(decide))
        .route("/rules/reload", post(reload_rules))
        .route("/blocklist", post(add_block))
        .route_layer(middleware::from_fn_with_state(Arc::clone(&state), require_token));
    Router::new()
        .route("/health", get(health))
        .merge(api)
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "no such route") })
        .with_state(state)
}

async fn require_token(State(state): State<Shared>, req: Request, next: Next) -> Response {
    if let Some(token) = &state.api_token {
        let given = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if given != Some(token.as_str()) {
            return ApiError::new(StatusCode::UNAUTHORIZED, "missing or wrong bearer token").into_response();
        }
    }
    next.run(req).await
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "schema_version": SCHEMA_VERSION, "status": "ok" }))
}

#[derive(Serialize)]
struct AreaEntry {
    ka: KaId,
    label: String,
    icon_key: String,
}

#[derive(Serialize)]
struct AreasPayload {
    central_ka: KaId,
    areas: Vec<AreaEntry>,
}

async fn areas(State(state): State<Shared>) -> Json<Versioned<AreasPayload>> {
    let registry = state.engine.registry();
    versioned(AreasPayload {
        central_ka: registry.central().id.clone(),
        areas: registry
            .areas()
            .iter()
            .map(|a| AreaEntry {
                ka: a.id.clone(),
                label: a.label.clone(),
                icon_key: a.icon_key.clone(),
            })
            .collect(),
    })
}

/// Parses a JSON array or JSON Lines body.
pub fn parse_records<T: DeserializeOwned>(body: &[u8]) -> ApiResult<Vec<T>> {
    let text = std::str::from_utf8(body).map_err(|_| ApiError::bad_request("body is not UTF-8"))?;
    let trimmed = text.trim_start();
    if trimmed.is_empty() {
        return Err(ApiError::bad_request("empty body"));
    }
    if trimmed.starts_with('[') {
        return serde_json::from_str(trimmed).map_err(|e| ApiError::bad_request(format!("malformed array: {e}")));
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| ApiError::bad_request(format!("malformed record on line {}: {e}", i + 1)))
        })
        .collect()
}

fn with_rejections<T: Serialize>(rejections: &[Rejection], body: T) -> Response {
    let status = if rejections.is_empty() {
        StatusCode::OK
    } else {
        StatusCode::UNPROCESSABLE_ENTITY
    };
    (status, versioned(body)).into_response()
}

async fn post_events(State(state): State<Shared>, body: Bytes) -> ApiResult<Response> {
    let events: Vec<Transaction> = parse_records(&body)?;
    let outcome: IngestOutcome = blocking(&state, move |e| Ok(e.ingest_events(events)?)).await?;
    Ok(with_rejections(&outcome.report.rejections.clone(), outcome))
}

async fn post_persons(State(state): State<Shared>, body: Bytes) -> ApiResult<Response> {
    let persons: Vec<Person> = parse_records(&body)?;
    let report: IngestReport = blocking(&state, move |e| Ok(e.store().put_persons(persons)?)).await?;
    Ok(with_rejections(&report.rejections.clone(), report))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ListQuery {
    status: Option<AlertStatus>,
    limit: Option<usize>,
    cursor: Option<String>,
}

#[derive(Serialize)]
struct AlertRow {
    #[serde(flatten)]
    alert: Alert,
    event_score: f64,
    flagged_kas: Vec<KaId>,
}

#[derive(Serialize)]
struct AlertPage {
    alerts: Vec<AlertRow>,
    next_cursor: Option<String>,
}

type PageKey = (DateTime<Utc>, String);

pub fn encode_cursor(key: &PageKey) -> String {
    URL_SAFE_NO_PAD.encode(serde_json::to_vec(key).expect("cursor serializes"))
}

pub fn decode_cursor(cursor: &str) -> Option<PageKey> {
    let raw = URL_SAFE_NO_PAD.decode(cursor).ok()?;
    serde_json::from_slice(&raw).ok()
}

fn query<T: DeserializeOwned>(uri: &Uri) -> ApiResult<T> {
    Query::try_from_uri(uri)
        .map(|Query(q)| q)
        .map_err(|e| ApiError::bad_request(format!("bad query: {}", e.body_text())))
}

async fn list_alerts(State(state): State<Shared>, uri: Uri) -> ApiResult<Json<Versioned<AlertPage>>> {
    let q: ListQuery = query(&uri)?;
    let limit = q.limit.unwrap_or(DEFAULT_PAGE);
    if limit == 0 || limit > MAX_PAGE {
        return Err(ApiError::bad_request(format!("limit must be in 1..={MAX_PAGE}")));
    }
    let after = match &q.cursor {
        Some(c) => Some(decode_cursor(c).ok_or_else(|| ApiError::bad_request("bad cursor"))?),
        None => None,
    };
    let page = blocking(&state, move |e| {
        let mut alerts: Vec<Alert> = e
            .store()
            .alerts()
            .into_iter()
            .filter(|a| q.status.is_none_or(|s| a.status == s))
            .filter(|a| {
                after
                    .as_ref()
                    .is_none_or(|(t, id)| (a.created_at, &a.alert_id) < (*t, id))
            })
            .collect();
        alerts.sort_by(|a, b| (b.created_at, &b.alert_id).cmp(&(a.created_at, &a.alert_id)));
        let more = alerts.len() > limit;
        alerts.truncate(limit);
        let next_cursor = if more {
            alerts.last().map(|a| encode_cursor(&(a.created_at, a.alert_id.clone())))
        } else {
            None
        };
        let alerts = alerts
            .into_iter()
            .map(|alert| {
                let assessment = e.store().assessment(&alert.alert_id);
                AlertRow {
                    event_score: assessment.as_ref().map_or(0.0, Assessment::event_score),
                    flagged_kas: assessment.map(|a| a.flagged_areas()).unwrap_or_default(),
                    alert,
                }
            })
            .collect();
        Ok(AlertPage { alerts, next_cursor })
    })
    .await?;
    Ok(versioned(page))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RaiseRequest {
    transaction_id: String,
}

async fn raise_alert(State(state): State<Shared>, body: Bytes) -> ApiResult<Response> {
    let req: RaiseRequest =
        serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(format!("malformed body: {e}")))?;
    let (created, alert) = blocking(&state, move |e| {
        let existed = e.store().alert_for_transaction(&req.transaction_id).is_some();
        Ok((!existed, e.raise_alert(&req.transaction_id)?))
    })
    .await?;
    let status = if created { StatusCode::CREATED } else { StatusCode::OK };
    Ok((status, versioned(alert)).into_response())
}

#[derive(Serialize)]
struct AlertDetail {
    alert: Alert,
    assessment: Assessment,
}

async fn get_alert(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<Versioned<AlertDetail>>> {
    let detail = blocking(&state, move |e| {
        let alert = e.store().alert(&id).ok_or_else(|| not_found("alert", &id))?;
        let assessment = e.store().assessment(&id).ok_or_else(|| not_found("assessment", &id))?;
        Ok(AlertDetail { alert, assessment })
    })
    .await?;
    Ok(versioned(detail))
}

fn not_found(kind: &str, id: &str) -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, format!("{kind} {id:?} not found"))
}

async fn overview(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult<Response> {
    let o = blocking(&state, move |e| Ok(e.overview(&id)?)).await?;
    Ok(Json(o).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModeQuery {
    mode: Option<String>,
}

fn mode_of(uri: &Uri) -> ApiResult<Option<SummaryMode>> {
    let q: ModeQuery = query(&uri)?;
    q.mode
        .map(|m| m.parse::<SummaryMode>().map_err(ApiError::bad_request))
        .transpose()
}

async fn summary(
    State(state): State<Shared>,
    Path((id, ka)): Path<(String, String)>,
    uri: Uri,
) -> ApiResult<Response> {
    let mode = mode_of(&uri)?;
    let doc = blocking(&state, move |e| Ok(e.summary(&id, &ka, mode)?)).await?;
    Ok(versioned(doc).into_response())
}

#[derive(Serialize)]
struct SummariesPayload {
    alert_id: String,
    summaries: Vec<katriage::summary::SummaryDoc>,
}

async fn summaries(State(state): State<Shared>, Path(id): Path<String>, uri: Uri) -> ApiResult<Response> {
    let mode = mode_of(&uri)?;
    let payload = blocking(&state, move |e| {
        let summaries = e.summaries(&id, mode)?;
        Ok(SummariesPayload { alert_id: id, summaries })
    })
    .await?;
    Ok(versioned(payload).into_response())
}

async fn charts(State(state): State<Shared>, Path((id, ka)): Path<(String, String)>) -> ApiResult<Response> {
    let panel = blocking(&state, move |e| Ok(e.charts(&id, &ka)?)).await?;
    Ok(Json(panel).into_response())
}

#[derive(Serialize)]
struct RowsPayload {
    alert_id: String,
    ka: String,
    rows: Vec<Transaction>,
}

async fn rows(State(state): State<Shared>, Path((id, ka)): Path<(String, String)>) -> ApiResult<Response> {
    let payload = blocking(&state, move |e| {
        let rows = e.rows(&id, &ka)?;
        Ok(RowsPayload { alert_id: id, ka, rows })
    })
    .await?;
    Ok(versioned(payload).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DecisionRequest {
    decision: Decision,
    decided_at: Option<DateTime<Utc>>,
}

/// Accepts `{"decision": "fraud"}`, `"fraud"` or a bare `fraud`.
fn parse_decision(body: &[u8]) -> ApiResult<DecisionRequest> {
    let bad = |m: String| ApiError::bad_request(m);
    let text = std::str::from_utf8(body).map_err(|_| bad("body is not UTF-8".into()))?.trim();
    if text.starts_with('{') {
        return serde_json::from_str(text).map_err(|e| bad(format!("malformed decision: {e}")));
    }
    let word = text.trim_matches('"');
    let decision = serde_json::from_value(json!(word))
        .map_err(|_| bad(format!("decision must be fraud or legitimate, got {word:?}")))?;
    Ok(DecisionRequest {
        decision,
        decided_at: None,
    })
}

async fn decide(State(state): State<Shared>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let req = parse_decision(&body)?;
    let at = req.decided_at.unwrap_or_else(Utc::now);
    let alert = blocking(&state, move |e| Ok(e.decide(&id, req.decision, at)?)).await?;
    Ok(versioned(alert).into_response())
}

async fn reload_rules(State(state): State<Shared>) -> ApiResult<Response> {
    let Some(path) = state.rules_path.clone() else {
        return Err(ApiError::new(StatusCode::CONFLICT, "no rule file configured"));
    };
    let count = blocking(&state, move |e| {
        let rules = RuleSet::load(&path).map_err(|err| ApiError::unprocessable(err.to_string()))?;
        let n = rules.len();
        e.set_rules(rules);
        Ok(n)
    })
    .await?;
    Ok(versioned(json!({ "rules": count })).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BlockRequest {
    subject_kind: SubjectKind,
    subject_id: String,
    justification_text: String,
    justified_kas: Vec<String>,
    added_at: Option<DateTime<Utc>>,
}

async fn add_block(State(state): State<Shared>, body: Bytes) -> ApiResult<Response> {
    let req: BlockRequest =
        serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(format!("malformed body: {e}")))?;
    let entry = blocking(&state, move |e| {
        let mut kas = Vec::with_capacity(req.justified_kas.len());
        for ka in &req.justified_kas {
            let area = e
                .registry()
                .find(ka)
                .ok_or_else(|| ApiError::unprocessable(format!("unknown knowledge area {ka:?}")))?;
            kas.push(area.id.clone());
        }
        if req.subject_id.trim().is_empty() || req.justification_text.trim().is_empty() {
            return Err(ApiError::unprocessable("subject_id and justification_text must not be empty"));
        }
        let entry = BlockEntry {
            subject_kind: req.subject_kind,
            subject_id: req.subject_id,
            justification_text: req.justification_text,
            justified_kas: kas,
            added_at: req.added_at.unwrap_or_else(Utc::now),
        };
        e.store().blocklist_add(entry.clone())?;
        Ok(entry)
    })
    .await?;
    Ok((StatusCode::CREATED, versioned(entry)).into_response())
}

/// Serves `router` on `listener` until ctrl-c.
pub async fn serve(listener: tokio::net::TcpListener, app: Router) -> std::io::Result<()> {
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cursor_round_trips() {
        let key = (Utc::now(), "alert-T1-000001".to_string());
        assert_eq!(decode_cursor(&encode_cursor(&key)), Some(key));
        assert_eq!(decode_cursor("not a cursor"), None);
    }

    #[test]
    fn decision_bodies() {
        assert_eq!(parse_decision(br#"{"decision":"fraud"}"#).unwrap().decision, Decision::Fraud);
        assert_eq!(parse_decision(br#""legitimate""#).unwrap().decision, Decision::Legitimate);
        assert_eq!(parse_decision(b"fraud\n").unwrap().decision, Decision::Fraud);
        assert!(parse_decision(b"maybe").is_err());
    }

    #[test]
    fn records_from_array_or_lines() {
        let a: Vec<serde_json::Value> = parse_records(b"[{\"a\":1},{\"a\":2}]").unwrap();
        let b: Vec<serde_json::Value> = parse_records(b"{\"a\":1}\n\n{\"a\":2}\n").unwrap();
        assert_eq!(a, b);
        assert!(parse_records::<serde_json::Value>(b"  ").is_err());
        assert!(parse_records::<serde_json::Value>(b"{\"a\":1}\n{oops").is_err());
    }
}
