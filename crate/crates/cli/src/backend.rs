use std::path::Path;
use std::time::Duration;

use cireg_core::canonical;
use cireg_core::model::Kind;
use cireg_core::schema::{load_spec, SpecCatalog, SpecDefinition, SpecVersion};
use cireg_core::store::{Clause, EntryVersion, FilterQuery, Selector, Store, LOG_FILE};
use cireg_service::ops::{self, AppSource};
use cireg_service::{ApiError, MAX_PAGE};
use serde_json::{json, Value};
use ureq::http;

use crate::Failure;

pub enum Backend {
    Local { store: Store, specs: SpecCatalog },
    Remote(Remote),
}

pub struct Remote {
    agent: ureq::Agent,
    base: String,
    token: Option<String>,
}

impl From<ApiError> for Failure {
    fn from(e: ApiError) -> Self {
        Failure::Domain {
            code: e.code.to_string(),
            message: e.message,
            details: e.details,
        }
    }
}

fn api<T>(r: Result<T, impl Into<ApiError>>) -> Result<T, Failure> {
    r.map_err(|e| Failure::from(e.into()))
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("registry types serialize")
}

fn with_created(mut meta: Value, created: bool) -> Value {
    meta["created"] = created.into();
    meta
}

impl Backend {
    /// Opens `dir`. Read-only commands on a directory that was never
    /// written see an empty registry instead of creating one.
    pub fn local(dir: &Path, specs: SpecCatalog, writes: bool) -> Result<Backend, Failure> {
        let store = if writes || dir.join(LOG_FILE).exists() {
            api(Store::open(dir))?
        } else {
            Store::in_memory()
        };
        Ok(Backend::Local { store, specs })
    }

    pub fn remote(endpoint: &str, token: Option<String>) -> Backend {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(600)))
            .build()
            .into();
        Backend::Remote(Remote {
            agent,
            base: endpoint.trim_end_matches('/').to_string(),
            token,
        })
    }

    pub fn spec(&self, kind: Kind, version: Option<SpecVersion>) -> Result<SpecDefinition, Failure> {
        match self {
            Backend::Local { specs, .. } => Ok((*api(ops::resolve_spec(specs, kind, version))?).clone()),
            Backend::Remote(r) => {
                let version = match version {
                    Some(v) => v,
                    None => {
                        let listed = r.call("GET", "/v1/specs", None, false)?.1;
                        listed
                            .as_array()
                            .into_iter()
                            .flatten()
                            .filter(|s| s["kind"] == kind.as_str())
                            .filter_map(|s| s["version"].as_str()?.parse().ok())
                            .max()
                            .ok_or_else(|| Failure::from(ApiError::not_found(format!("no {kind} spec loaded"))))?
                    }
                };
                let bytes = r.raw("GET", &format!("/v1/specs/{kind}/{version}"), None, false)?;
                load_spec(&bytes).map_err(|e| Failure::Usage(format!("service sent an unusable spec: {e}")))
            }
        }
    }

    pub fn publish(&self, kind: Kind, id: &str, document: &[u8], expected: Option<EntryVersion>) -> Result<Value, Failure> {
        match self {
            Backend::Local { store, specs } => {
                let spec = api(ops::resolve_spec(specs, kind, None))?;
                let outcome = api(store.publish(kind, id, document, &spec, expected))?;
                Ok(with_created(to_value(&outcome.entry.meta()), outcome.created))
            }
            Backend::Remote(r) => {
                let path = format!("/v1/{}/{}", kind.plural(), encode(id));
                let (status, meta) = r.send("PUT", &path, Some(document.to_vec()), true, expected)?;
                Ok(with_created(meta, status == 201))
            }
        }
    }

    pub fn get(&self, kind: Kind, id: &str, selector: Option<Selector>) -> Result<Value, Failure> {
        match self {
            Backend::Local { store, .. } => Ok(to_value(&api(store.get(kind, id, selector.unwrap_or(Selector::Latest)))?)),
            Backend::Remote(r) => {
                let query = match selector {
                    None => String::new(),
                    Some(Selector::Latest) => "?version=latest".into(),
                    Some(Selector::Version(v)) => format!("?version={v}"),
                };
                Ok(r.call("GET", &format!("/v1/{}/{}{query}", kind.plural(), encode(id)), None, false)?.1)
            }
        }
    }

    pub fn archive(&self, kind: Kind, id: &str) -> Result<Value, Failure> {
        match self {
            Backend::Local { store, .. } => Ok(to_value(&api(store.archive(kind, id))?.meta())),
            Backend::Remote(r) => {
                let path = format!("/v1/{}/{}/archive", kind.plural(), encode(id));
                Ok(r.call("POST", &path, None, true)?.1)
            }
        }
    }

    pub fn history(&self, kind: Kind, id: &str) -> Result<Value, Failure> {
        match self {
            Backend::Local { store, .. } => {
                let versions: Vec<_> = api(store.history(kind, id))?.iter().map(|e| e.meta()).collect();
                Ok(to_value(&versions))
            }
            Backend::Remote(r) => {
                let path = format!("/v1/{}/{}/history", kind.plural(), encode(id));
                Ok(r.call("GET", &path, None, false)?.1)
            }
        }
    }

    pub fn search(&self, kind: Kind, clauses: Vec<Clause>, include_archived: bool) -> Result<Value, Failure> {
        match self {
            Backend::Local { store, specs } => {
                let spec = api(ops::resolve_spec(specs, kind, None))?;
                let query = FilterQuery {
                    kind,
                    clauses,
                    include_archived,
                };
                Ok(to_value(&api(store.search(&query, &spec))?))
            }
            Backend::Remote(r) => {
                let path = format!("/v1/{}/search", kind.plural());
                let mut hits = Vec::new();
                let mut cursor = Value::Null;
                loop {
                    let body = json!({
                        "clauses": clauses,
                        "include_archived": include_archived,
                        "limit": MAX_PAGE,
                        "cursor": cursor,
                    });
                    let page = r.call("POST", &path, Some(canonical::to_vec(&body)), false)?.1;
                    hits.extend(page["results"].as_array().cloned().unwrap_or_default());
                    cursor = page["next_cursor"].clone();
                    if cursor.is_null() {
                        break;
                    }
                }
                Ok(Value::Array(hits))
            }
        }
    }

    pub fn match_app(&self, source: AppSource, compatible_only: bool) -> Result<Value, Failure> {
        match self {
            Backend::Local { store, specs } => Ok(to_value(&api(ops::match_application(
                store,
                specs,
                source,
                None,
                compatible_only,
            ))?)),
            Backend::Remote(r) => {
                let body = match source {
                    AppSource::Inline(bytes) => bytes,
                    AppSource::Registered { id, selector } => {
                        let version = match selector {
                            Selector::Latest => json!("latest"),
                            Selector::Version(v) => json!(v),
                        };
                        canonical::to_vec(&json!({"application_id": id, "version": version}))
                    }
                };
                let path = if compatible_only { "/v1/match?compatible_only=true" } else { "/v1/match" };
                Ok(r.call("POST", path, Some(body), false)?.1)
            }
        }
    }

    /// Flushes local writes.
    pub fn close(self) -> Result<(), Failure> {
        match self {
            Backend::Local { store, .. } => api(store.sync()),
            Backend::Remote(_) => Ok(()),
        }
    }
}

/// Percent-encodes everything outside the URL-safe unreserved set.
fn encode(segment: &str) -> String {
    let mut out = String::with_capacity(segment.len());
    for b in segment.bytes() {
        if b.is_ascii_alphanumeric() || b"-._~".contains(&b) {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}

impl Remote {
    fn call(&self, method: &str, path: &str, body: Option<Vec<u8>>, auth: bool) -> Result<(u16, Value), Failure> {
        self.send(method, path, body, auth, None)
    }

    fn raw(&self, method: &str, path: &str, body: Option<Vec<u8>>, auth: bool) -> Result<Vec<u8>, Failure> {
        let (status, bytes) = self.exchange(method, path, body, auth, None)?;
        if (200..300).contains(&status) {
            Ok(bytes)
        } else {
            Err(remote_error(status, &bytes))
        }
    }

    fn send(
        &self,
        method: &str,
        path: &str,
        body: Option<Vec<u8>>,
        auth: bool,
        if_match: Option<EntryVersion>,
    ) -> Result<(u16, Value), Failure> {
        let (status, bytes) = self.exchange(method, path, body, auth, if_match)?;
        if !(200..300).contains(&status) {
            return Err(remote_error(status, &bytes));
        }
        let value = serde_json::from_slice(&bytes)
            .map_err(|e| Failure::Usage(format!("{method} {path}: response is not JSON: {e}")))?;
        Ok((status, value))
    }

    fn exchange(
        &self,
        method: &str,
        path: &str,
        body: Option<Vec<u8>>,
        auth: bool,
        if_match: Option<EntryVersion>,
    ) -> Result<(u16, Vec<u8>), Failure> {
        let url = format!("{}{path}", self.base);
        let mut req = http::Request::builder().method(method).uri(&url);
        if let (true, Some(token)) = (auth, &self.token) {
            req = req.header("authorization", format!("Bearer {token}"));
        }
        if let Some(v) = if_match {
            req = req.header("if-match", format!("\"{v}\""));
        }
        let has_body = body.is_some();
        let req = req
            .header("content-type", "application/json")
            .body(body.unwrap_or_default())
            .map_err(|e| Failure::Usage(format!("{url}: {e}")))?;
        let result = if has_body || method != "GET" {
            self.agent.run(req)
        } else {
            let (parts, _) = req.into_parts();
            self.agent.run(http::Request::from_parts(parts, ()))
        };
        let mut resp = result.map_err(|e| Failure::Usage(format!("{method} {url}: {e}")))?;
        let status = resp.status().as_u16();
        let bytes = resp
            .body_mut()
            .with_config()
            .limit(u64::MAX)
            .read_to_vec()
            .map_err(|e| Failure::Usage(format!("{method} {url}: {e}")))?;
        Ok((status, bytes))
    }
}

fn remote_error(status: u16, body: &[u8]) -> Failure {
    match serde_json::from_slice::<Value>(body) {
        Ok(v) if v["code"].is_string() => Failure::Domain {
            code: v["code"].as_str().unwrap_or_default().to_string(),
            message: v["message"].as_str().unwrap_or_default().to_string(),
            details: v.get("details").cloned(),
        },
        _ => Failure::Domain {
            code: "HttpError".into(),
            message: format!("HTTP {status}: {}", String::from_utf8_lossy(body).trim()),
            details: None,
        },
    }
}
