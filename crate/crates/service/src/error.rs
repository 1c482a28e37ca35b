use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use cireg_core::canonical;
use cireg_core::matcher::{ConstraintError, MatchError};
use cireg_core::store::StoreError;
use serde::Serialize;
use serde_json::{json, Value};

/// Error body of every failed request.
///
/// | code | status |
/// |---|---|
/// | `ValidationRejected` | 422 |
/// | `VersionConflict`, `AlreadyArchived` | 409 |
/// | `NotFound` | 404 |
/// | `Archived` | 410 |
/// | `QueryError`, `PathError`, `SyntaxError`, `SpecMismatch`, `BadRequest` | 400 |
/// | `Unauthorized` | 401 |
/// | `MethodNotAllowed` | 405 |
/// | `PayloadTooLarge` | 413 |
/// | `StorageError`, `Internal` | 500 |
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub details: Option<Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            details: None,
        }
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.details = Some(details);
        self
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "BadRequest", message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "NotFound", message)
    }

    pub fn unauthorized() -> Self {
        ApiError::new(StatusCode::UNAUTHORIZED, "Unauthorized", "missing or invalid bearer token")
    }

    pub fn syntax(e: &serde_json::Error) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "SyntaxError", format!("body is not valid JSON: {e}"))
            .with_details(json!({"line": e.line(), "column": e.column()}))
    }

    pub fn internal(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", message)
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let message = e.to_string();
        let code = e.code();
        let err = |status| ApiError::new(status, code, message.clone());
        match e {
            StoreError::ValidationRejected(report) => err(StatusCode::UNPROCESSABLE_ENTITY)
                .with_details(serde_json::to_value(&*report).expect("reports serialize")),
            StoreError::Syntax { line, column, .. } => {
                err(StatusCode::BAD_REQUEST).with_details(json!({"line": line, "column": column}))
            }
            StoreError::SpecMismatch { .. } => err(StatusCode::BAD_REQUEST),
            StoreError::VersionConflict { expected, actual, .. } => {
                err(StatusCode::CONFLICT).with_details(json!({"expected": expected, "actual": actual}))
            }
            StoreError::NotFound { .. } => err(StatusCode::NOT_FOUND),
            StoreError::Archived { .. } => err(StatusCode::GONE),
            StoreError::AlreadyArchived { .. } => err(StatusCode::CONFLICT),
            StoreError::Query(q) => err(StatusCode::BAD_REQUEST).with_details(json!({"path": q.path})),
            StoreError::Storage(_) => err(StatusCode::INTERNAL_SERVER_ERROR),
        }
    }
}

impl From<MatchError> for ApiError {
    fn from(e: MatchError) -> Self {
        let key = match &e.source {
            ConstraintError::UnknownKey { category, key } => Some(format!("{category}.{key}")),
            ConstraintError::Shape(_) => None,
        };
        ApiError::new(StatusCode::BAD_REQUEST, "PathError", e.to_string())
            .with_details(json!({"constraint": e.index, "key": key}))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = canonical::encode(&self);
        let mut resp = (self.status, body).into_response();
        resp.headers_mut()
            .insert(header::CONTENT_TYPE, HeaderValue::from_static("application/json"));
        if self.status == StatusCode::UNAUTHORIZED {
            resp.headers_mut()
                .insert(header::WWW_AUTHENTICATE, HeaderValue::from_static("Bearer"));
        }
        resp
    }
}
