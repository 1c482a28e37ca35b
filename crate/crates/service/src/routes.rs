use std::collections::HashMap;
use std::sync::Arc;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::rejection::BytesRejection;
use axum::extract::{FromRequest, FromRequestParts, Path, RawQuery, Request, State};
use axum::http::request::Parts;
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::middleware::Next;
use axum::response::{IntoResponse, Response};
use cireg_core::canonical;
use cireg_core::model::Kind;
use cireg_core::schema::{SpecDefinition, SpecVersion};
use cireg_core::store::{Clause, EntryVersion, FilterQuery, Selector, StoreError};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::ops::{self, AppSource};
use crate::{ApiError, AppState};

type Shared = State<Arc<AppState>>;
type ApiResult = Result<Response, ApiError>;

pub const DEFAULT_PAGE: usize = 100;
pub const MAX_PAGE: usize = 1000;

/// A 200 response with a canonical JSON body.
fn json_response<T: Serialize>(status: StatusCode, body: &T) -> Response {
    let mut resp = (status, canonical::encode(body)).into_response();
    resp.headers_mut()
        .insert(header::CONTENT_TYPE, HeaderValue::from_static("application/json"));
    resp
}

fn ok<T: Serialize>(body: &T) -> ApiResult {
    Ok(json_response(StatusCode::OK, body))
}

fn with_etag(mut resp: Response, version: EntryVersion) -> Response {
    let tag = HeaderValue::from_str(&format!("\"{version}\"")).expect("digits are a valid header");
    resp.headers_mut().insert(header::ETAG, tag);
    resp
}

/// Path parameters with errors in the API format.
pub struct Params<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned + Send> FromRequestParts<S> for Params<T> {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, ApiError> {
        Path::<T>::from_request_parts(parts, state)
            .await
            .map(|Path(t)| Params(t))
            .map_err(|e| ApiError::bad_request(e.body_text()))
    }
}

/// Request body bytes with errors in the API format.
pub struct Body(pub Bytes);

impl<S: Send + Sync> FromRequest<S> for Body {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, ApiError> {
        Bytes::from_request(req, state).await.map(Body).map_err(|e: BytesRejection| {
            let code = if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
                "PayloadTooLarge"
            } else {
                "BadRequest"
            };
            ApiError::new(e.status(), code, e.body_text())
        })
    }
}

fn query(raw: Option<String>, allowed: &[&str]) -> Result<HashMap<String, String>, ApiError> {
    let pairs: Vec<(String, String)> = serde_urlencoded::from_str(raw.as_deref().unwrap_or(""))
        .map_err(|e| ApiError::bad_request(format!("query string: {e}")))?;
    let mut out = HashMap::new();
    for (k, v) in pairs {
        if !allowed.contains(&k.as_str()) {
            return Err(ApiError::bad_request(format!("unknown query parameter {k:?}")));
        }
        if out.insert(k.clone(), v).is_some() {
            return Err(ApiError::bad_request(format!("query parameter {k:?} given twice")));
        }
    }
    Ok(out)
}

fn flag(q: &HashMap<String, String>, name: &str) -> Result<bool, ApiError> {
    match q.get(name).map(String::as_str) {
        None | Some("false") => Ok(false),
        Some("true") | Some("") => Ok(true),
        Some(other) => Err(ApiError::bad_request(format!("{name} must be true or false, not {other:?}"))),
    }
}

fn kind_segment(segment: &str) -> Result<Kind, ApiError> {
    match segment {
        "resources" => Ok(Kind::Resource),
        "applications" => Ok(Kind::Application),
        other => Err(ApiError::not_found(format!("no collection {other:?}"))),
    }
}

fn parse_json(body: &[u8]) -> Result<Value, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::syntax(&e))
}

/// `If-Match: "3"`, `W/"3"` or a bare `3`.
fn if_match(headers: &HeaderMap) -> Result<Option<EntryVersion>, ApiError> {
    let Some(raw) = headers.get(header::IF_MATCH) else {
        return Ok(None);
    };
    let text = raw
        .to_str()
        .map_err(|_| ApiError::bad_request("If-Match is not ASCII"))?
        .trim();
    let text = text.strip_prefix("W/").unwrap_or(text);
    let text = text.strip_prefix('"').and_then(|t| t.strip_suffix('"')).unwrap_or(text);
    text.parse()
        .map(Some)
        .map_err(|e: String| ApiError::bad_request(format!("If-Match: {e}")))
}

impl AppState {
    fn authorize(&self, headers: &HeaderMap) -> Result<(), ApiError> {
        let Some(token) = &self.token else {
            return Ok(());
        };
        let given = headers
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        match given {
            Some(g) if constant_time_eq(g.as_bytes(), token.as_bytes()) => Ok(()),
            _ => Err(ApiError::unauthorized()),
        }
    }

    fn spec(&self, kind: Kind, version: Option<&String>) -> Result<Arc<SpecDefinition>, ApiError> {
        ops::resolve_spec(&self.specs, kind, spec_version(version)?)
    }
}

fn spec_version(raw: Option<&String>) -> Result<Option<SpecVersion>, ApiError> {
    raw.map(|v| v.parse::<SpecVersion>())
        .transpose()
        .map_err(|e| ApiError::bad_request(format!("spec: {e}")))
}

fn constant_time_eq(a: &[u8], b: &[u8]) -> bool {
    a.len() == b.len() && a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, StoreError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
        .map_err(ApiError::from)
}

pub async fn log_request(req: Request, next: Next) -> Response {
    let method = req.method().clone();
    let path = req.uri().path().to_string();
    let started = Instant::now();
    let resp = next.run(req).await;
    tracing::info!(
        target: "cireg::request",
        method = %method,
        path = %path,
        status = resp.status().as_u16(),
        millis = started.elapsed().as_millis() as u64,
    );
    resp
}

pub async fn publish(
    State(app): Shared,
    Params((kind, id)): Params<(String, String)>,
    RawQuery(raw): RawQuery,
    headers: HeaderMap,
    Body(body): Body,
) -> ApiResult {
    app.authorize(&headers)?;
    let kind = kind_segment(&kind)?;
    let q = query(raw, &["spec"])?;
    let spec = app.spec(kind, q.get("spec"))?;
    let expected = if_match(&headers)?;
    let store = app.store.clone();
    let outcome = blocking(move || store.publish(kind, &id, &body, &spec, expected)).await?;
    let status = if outcome.created { StatusCode::CREATED } else { StatusCode::OK };
    Ok(with_etag(json_response(status, &outcome.entry.meta()), outcome.entry.version))
}

pub async fn get_entry(
    State(app): Shared,
    Params((kind, id)): Params<(String, String)>,
    RawQuery(raw): RawQuery,
) -> ApiResult {
    let kind = kind_segment(&kind)?;
    let q = query(raw, &["version"])?;
    let selector = match q.get("version") {
        None => Selector::Latest,
        Some(v) => v
            .parse()
            .map_err(|e: String| ApiError::bad_request(format!("version: {e}")))?,
    };
    let entry = app.store.get(kind, &id, selector)?;
    Ok(with_etag(ok(&entry)?, entry.version))
}

pub async fn archive(
    State(app): Shared,
    Params((kind, id)): Params<(String, String)>,
    headers: HeaderMap,
) -> ApiResult {
    app.authorize(&headers)?;
    let kind = kind_segment(&kind)?;
    let store = app.store.clone();
    let entry = blocking(move || store.archive(kind, &id)).await?;
    ok(&entry.meta())
}

pub async fn history(State(app): Shared, Params((kind, id)): Params<(String, String)>) -> ApiResult {
    let kind = kind_segment(&kind)?;
    let versions: Vec<_> = app.store.history(kind, &id)?.iter().map(|e| e.meta()).collect();
    ok(&versions)
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SearchRequest {
    #[serde(default)]
    clauses: Vec<Clause>,
    #[serde(default)]
    include_archived: bool,
    #[serde(default)]
    limit: Option<usize>,
    #[serde(default)]
    cursor: Option<String>,
}

/// Page cursors are the hex of the last id on the previous page.
fn decode_cursor(cursor: &str) -> Result<String, ApiError> {
    let bad = || ApiError::new(StatusCode::BAD_REQUEST, "QueryError", "invalid cursor");
    let bytes = hex::decode(cursor).map_err(|_| bad())?;
    String::from_utf8(bytes).map_err(|_| bad())
}

pub async fn search(State(app): Shared, Params(kind): Params<String>, Body(body): Body) -> ApiResult {
    let kind = kind_segment(&kind)?;
    let req: SearchRequest = if body.iter().all(u8::is_ascii_whitespace) {
        SearchRequest::default()
    } else {
        serde_json::from_value(parse_json(&body)?)
            .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "QueryError", e.to_string()))?
    };
    let limit = req.limit.unwrap_or(DEFAULT_PAGE);
    if !(1..=MAX_PAGE).contains(&limit) {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "QueryError",
            format!("limit must be between 1 and {MAX_PAGE}"),
        ));
    }
    let after = req.cursor.as_deref().map(decode_cursor).transpose()?;
    let spec = app.spec(kind, None)?;
    let query = FilterQuery {
        kind,
        clauses: req.clauses,
        include_archived: req.include_archived,
    };
    let hits = app.store.search(&query, &spec)?;
    let start = after.map_or(0, |a| hits.partition_point(|h| h.id.as_str() <= a.as_str()));
    let page = &hits[start..hits.len().min(start + limit)];
    let next_cursor = (start + page.len() < hits.len())
        .then(|| page.last().map(|h| hex::encode(h.id.as_bytes())))
        .flatten();
    ok(&json!({"results": page, "next_cursor": next_cursor}))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AppReference {
    application_id: String,
    #[serde(default)]
    version: Option<Value>,
}

fn reference_selector(version: Option<Value>) -> Result<Selector, ApiError> {
    match version {
        None => Ok(Selector::Latest),
        Some(Value::String(s)) => s.parse().map_err(|e: String| ApiError::bad_request(format!("version: {e}"))),
        Some(Value::Number(n)) => n
            .as_u64()
            .and_then(EntryVersion::new)
            .map(Selector::Version)
            .ok_or_else(|| ApiError::bad_request("version must be a positive integer or \"latest\"")),
        Some(_) => Err(ApiError::bad_request("version must be a positive integer or \"latest\"")),
    }
}

pub async fn match_app(State(app): Shared, RawQuery(raw): RawQuery, Body(body): Body) -> ApiResult {
    let q = query(raw, &["compatible_only", "spec"])?;
    let compatible_only = flag(&q, "compatible_only")?;
    let spec = spec_version(q.get("spec"))?;
    let source = if parse_json(&body)?.get("application_id").is_some() {
        let reference: AppReference = serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(e.to_string()))?;
        AppSource::Registered {
            id: reference.application_id,
            selector: reference_selector(reference.version)?,
        }
    } else {
        AppSource::Inline(body.to_vec())
    };
    let state = app.clone();
    let outcome = tokio::task::spawn_blocking(move || {
        ops::match_application(&state.store, &state.specs, source, spec, compatible_only)
    })
    .await
    .map_err(|e| ApiError::internal(format!("worker failed: {e}")))??;
    ok(&outcome)
}

pub async fn list_specs(State(app): Shared) -> ApiResult {
    ok(&app.specs.list())
}

pub async fn get_spec(State(app): Shared, Params((kind, version)): Params<(String, String)>) -> ApiResult {
    let kind = Kind::parse_loose(&kind).ok_or_else(|| ApiError::not_found(format!("no spec kind {kind:?}")))?;
    let spec = app.spec(kind, Some(&version))?;
    let mut resp = (StatusCode::OK, spec.canonical_bytes().to_vec()).into_response();
    resp.headers_mut()
        .insert(header::CONTENT_TYPE, HeaderValue::from_static("application/json"));
    Ok(resp)
}

pub async fn health(State(app): Shared) -> ApiResult {
    ok(&json!({
        "status": "ok",
        "entry_count": app.store.entry_count(),
        "uptime_seconds": app.started.elapsed().as_secs(),
    }))
}

pub async fn no_route() -> ApiError {
    ApiError::not_found("no such endpoint")
}

pub async fn wrong_method() -> ApiError {
    ApiError::new(StatusCode::METHOD_NOT_ALLOWED, "MethodNotAllowed", "method not allowed on this endpoint")
}
