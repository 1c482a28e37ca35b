//! Registry operations shared by the HTTP handlers and the command-line
//! tool's local mode, so both report identical results and errors.

use std::sync::Arc;

use axum::http::StatusCode;
use cireg_core::matcher::{match_views, MatchOutcome};
use cireg_core::model::{parse_application_with, Kind, ParseMode};
use cireg_core::schema::{validate, SpecCatalog, SpecDefinition, SpecError, SpecVersion};
use cireg_core::store::{Selector, Store, StoreError};

use crate::ApiError;

/// Where the application to match comes from.
#[derive(Debug, Clone)]
pub enum AppSource {
    /// A document submitted with the request; validated before matching.
    Inline(Vec<u8>),
    Registered { id: String, selector: Selector },
}

pub fn resolve_spec(
    specs: &SpecCatalog,
    kind: Kind,
    version: Option<SpecVersion>,
) -> Result<Arc<SpecDefinition>, ApiError> {
    specs.resolve(kind, version).ok_or_else(|| {
        ApiError::not_found(format!(
            "no {kind} spec {}",
            version.map_or("loaded".to_string(), |v| v.to_string())
        ))
    })
}

/// Reports validation problems of an inline document as `ValidationRejected`.
pub fn check_document(document: &[u8], spec: &SpecDefinition) -> Result<(), ApiError> {
    let report = validate(document, spec).map_err(|e| match e {
        SpecError::Syntax { line, column, message } => ApiError::from(StoreError::Syntax { line, column, message }),
        other => ApiError::internal(other.to_string()),
    })?;
    if report.valid {
        Ok(())
    } else {
        Err(StoreError::ValidationRejected(Box::new(report)).into())
    }
}

/// Matches an application against every active resource.
pub fn match_application(
    store: &Store,
    specs: &SpecCatalog,
    source: AppSource,
    spec: Option<SpecVersion>,
    compatible_only: bool,
) -> Result<MatchOutcome, ApiError> {
    let document = match source {
        AppSource::Inline(bytes) => {
            check_document(&bytes, &*resolve_spec(specs, Kind::Application, spec)?)?;
            bytes
        }
        AppSource::Registered { id, selector } => store.get(Kind::Application, &id, selector)?.payload.to_vec(),
    };
    let application = parse_application_with(&document, ParseMode::Lenient).map_err(|e| {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "ValidationRejected", e.to_string())
    })?;
    Ok(match_views(&application, &store.active_resources(), compatible_only)?)
}
