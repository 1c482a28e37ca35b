//! Durable, versioned registry of descriptions.
//!
//! Every accepted publish becomes an immutable `(kind, id, version)` entry.
//! On disk the registry is an append-only event log (`events.log`, one JSON
//! record per line) plus one canonical payload file per entry under
//! `entries/<kind>/<id>/<version>.json`. A payload is durable before the log
//! record that references it, so the log never points at a missing file. The
//! in-memory index is rebuilt from the log on open.
//!
//! Ids are namespaced by kind: a resource and an application may share one.

mod log;
mod query;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::num::NonZeroU64;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize, Serializer};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::canonical;
use crate::model::{canonicalize, is_identifier, resource_from_value, Kind, ParseMode, ResourceDescription};
use crate::schema::{validate, Issue, IssueCode, SpecDefinition, SpecError, SpecVersion, ValidationReport};

pub use log::{SyncMode, ENTRIES_DIR, LOG_FILE};
pub use query::{Clause, FilterQuery, Op, QueryError};

use log::{LogRecord, LogWriter, Operation};

/// Version number of an entry; the first publish of an id is version 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntryVersion(NonZeroU64);

impl EntryVersion {
    pub const FIRST: EntryVersion = EntryVersion(NonZeroU64::MIN);

    pub fn new(v: u64) -> Option<Self> {
        NonZeroU64::new(v).map(EntryVersion)
    }

    pub fn get(self) -> u64 {
        self.0.get()
    }

    pub fn next(self) -> Self {
        EntryVersion(self.0.checked_add(1).expect("version overflow"))
    }
}

impl fmt::Display for EntryVersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl FromStr for EntryVersion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.parse::<NonZeroU64>()
            .map(EntryVersion)
            .map_err(|_| format!("invalid version {s:?}: expected a positive integer"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryStatus {
    Active,
    Archived,
}

/// Which version `get` returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selector {
    Latest,
    Version(EntryVersion),
}

impl FromStr for Selector {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "latest" {
            Ok(Selector::Latest)
        } else {
            s.parse().map(Selector::Version)
        }
    }
}

/// One immutable published version. `status` reflects the id as a whole.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegistryEntry {
    pub id: String,
    pub kind: Kind,
    pub version: EntryVersion,
    pub status: EntryStatus,
    /// Canonical JSON of the description.
    pub payload: Arc<[u8]>,
    /// Lowercase hex SHA-256 of `payload`.
    pub content_hash: String,
    pub spec_version: SpecVersion,
    /// RFC 3339, UTC, second precision.
    pub published_at: String,
}

impl RegistryEntry {
    pub fn meta(&self) -> EntryMeta {
        EntryMeta {
            id: self.id.clone(),
            kind: self.kind,
            version: self.version,
            status: self.status,
            content_hash: self.content_hash.clone(),
            spec_version: self.spec_version,
            published_at: self.published_at.clone(),
        }
    }

    pub fn payload_value(&self) -> Value {
        serde_json::from_slice(&self.payload).expect("stored payloads are JSON")
    }
}

impl Serialize for RegistryEntry {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Full {
            #[serde(flatten)]
            meta: EntryMeta,
            payload: Value,
        }
        Full {
            meta: self.meta(),
            payload: self.payload_value(),
        }
        .serialize(s)
    }
}

/// Entry metadata without the payload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryMeta {
    pub id: String,
    pub kind: Kind,
    pub version: EntryVersion,
    pub status: EntryStatus,
    pub content_hash: String,
    pub spec_version: SpecVersion,
    pub published_at: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublishOutcome {
    pub entry: RegistryEntry,
    /// False when the document matched the latest active version and no new
    /// version was written.
    pub created: bool,
}

/// A search hit: identity plus a few summary fields of the latest version.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SearchHit {
    pub id: String,
    pub kind: Kind,
    pub version: EntryVersion,
    pub status: EntryStatus,
    pub summary: Arc<BTreeMap<String, String>>,
}

/// The decoded latest version of an active resource. `model` holds the
/// decode error for payloads that do not fit the model.
#[derive(Debug, Clone)]
pub struct ResourceView {
    pub id: String,
    pub version: EntryVersion,
    pub model: Result<Arc<ResourceDescription>, String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StoreError {
    #[error("document rejected: {} error(s)", .0.errors.len())]
    ValidationRejected(Box<ValidationReport>),
    #[error("document is not valid JSON at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("spec is for {spec}, not {kind}")]
    SpecMismatch { kind: Kind, spec: Kind },
    #[error("{kind} {id:?}: expected version {expected}, latest is {}", .actual.map_or("none".to_string(), |v| v.to_string()))]
    VersionConflict {
        kind: Kind,
        id: String,
        expected: EntryVersion,
        actual: Option<EntryVersion>,
    },
    #[error("{kind} {id:?}{}: not found", .version.map_or(String::new(), |v| format!(" version {v}")))]
    NotFound {
        kind: Kind,
        id: String,
        version: Option<EntryVersion>,
    },
    #[error("{kind} {id:?} is archived")]
    Archived { kind: Kind, id: String },
    #[error("{kind} {id:?} is already archived")]
    AlreadyArchived { kind: Kind, id: String },
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error("storage: {0}")]
    Storage(String),
}

impl StoreError {
    /// Stable machine-readable name.
    pub fn code(&self) -> &'static str {
        match self {
            StoreError::ValidationRejected(_) => "ValidationRejected",
            StoreError::Syntax { .. } => "SyntaxError",
            StoreError::SpecMismatch { .. } => "SpecMismatch",
            StoreError::VersionConflict { .. } => "VersionConflict",
            StoreError::NotFound { .. } => "NotFound",
            StoreError::Archived { .. } => "Archived",
            StoreError::AlreadyArchived { .. } => "AlreadyArchived",
            StoreError::Query(_) => "QueryError",
            StoreError::Storage(_) => "StorageError",
        }
    }
}

fn storage(context: impl fmt::Display, e: impl fmt::Display) -> StoreError {
    StoreError::Storage(format!("{context}: {e}"))
}

pub fn content_hash(payload: &[u8]) -> String {
    hex::encode(Sha256::digest(payload))
}

fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

#[derive(Debug, Clone)]
struct StoredVersion {
    payload: Arc<[u8]>,
    content_hash: String,
    spec_version: SpecVersion,
    published_at: String,
}

#[derive(Debug)]
struct IdState {
    versions: Vec<StoredVersion>,
    archived: bool,
    /// Parsed latest payload, for search.
    latest: Arc<Value>,
    summary: Arc<BTreeMap<String, String>>,
    /// Decoded latest payload, for matching. Resources only.
    model: Option<Result<Arc<ResourceDescription>, String>>,
}

impl IdState {
    fn latest_version(&self) -> EntryVersion {
        EntryVersion::new(self.versions.len() as u64).expect("ids have at least one version")
    }

    fn status(&self) -> EntryStatus {
        if self.archived {
            EntryStatus::Archived
        } else {
            EntryStatus::Active
        }
    }

    fn entry(&self, kind: Kind, id: &str, version: EntryVersion) -> RegistryEntry {
        let v = &self.versions[version.get() as usize - 1];
        RegistryEntry {
            id: id.to_string(),
            kind,
            version,
            status: self.status(),
            payload: v.payload.clone(),
            content_hash: v.content_hash.clone(),
            spec_version: v.spec_version,
            published_at: v.published_at.clone(),
        }
    }

    fn hit(&self, kind: Kind, id: &str) -> SearchHit {
        SearchHit {
            id: id.to_string(),
            kind,
            version: self.latest_version(),
            status: self.status(),
            summary: self.summary.clone(),
        }
    }
}

/// Fields with an equality index, per kind.
const INDEXED: &[(Kind, &str)] = &[
    (Kind::Resource, "high_level.resource_type"),
    (Kind::Resource, "high_level.category"),
    (Kind::Resource, "scheduler.scheduler_type"),
    (Kind::Application, "high_level.app_type"),
];

const SUMMARY: &[(Kind, &[&str])] = &[
    (
        Kind::Resource,
        &["high_level.name", "high_level.hostname", "high_level.resource_type", "high_level.category"],
    ),
    (Kind::Application, &["high_level.name", "high_level.app_type"]),
];

fn summarize(kind: Kind, doc: &Value) -> BTreeMap<String, String> {
    let fields = SUMMARY.iter().find(|(k, _)| *k == kind).map_or(&[][..], |(_, f)| f);
    fields
        .iter()
        .filter_map(|f| {
            let v = crate::model::path::get(doc, f)?.as_str()?;
            let short = f.rsplit('.').next().unwrap_or(f);
            Some((short.to_string(), v.to_string()))
        })
        .collect()
}

fn indexed_values(kind: Kind, doc: &Value) -> impl Iterator<Item = (&'static str, String)> + '_ {
    INDEXED.iter().filter(move |(k, _)| *k == kind).filter_map(move |(_, f)| {
        let v = crate::model::path::get(doc, f)?.as_str()?;
        Some((*f, v.to_string()))
    })
}

#[derive(Default, Debug)]
struct Index {
    ids: HashMap<Kind, BTreeMap<String, IdState>>,
    /// (kind, field, value) to the ids whose latest version has that value.
    by_value: HashMap<(Kind, &'static str, String), BTreeSet<String>>,
    entries: usize,
}

impl Index {
    fn state(&self, kind: Kind, id: &str) -> Option<&IdState> {
        self.ids.get(&kind)?.get(id)
    }

    fn push_version(&mut self, kind: Kind, id: &str, version: StoredVersion, doc: Value) {
        let doc = Arc::new(doc);
        let ids = self.ids.entry(kind).or_default();
        let summary = Arc::new(summarize(kind, &doc));
        let model = (kind == Kind::Resource).then(|| {
            resource_from_value(&doc, ParseMode::Lenient)
                .map(Arc::new)
                .map_err(|e| e.to_string())
        });
        if let Some(state) = ids.get_mut(id) {
            for key in indexed_values(kind, &state.latest) {
                if let Some(set) = self.by_value.get_mut(&(kind, key.0, key.1)) {
                    set.remove(id);
                }
            }
            state.versions.push(version);
            state.archived = false;
            state.latest = doc.clone();
            state.summary = summary;
            state.model = model;
        } else {
            ids.insert(
                id.to_string(),
                IdState {
                    versions: vec![version],
                    archived: false,
                    latest: doc.clone(),
                    summary,
                    model,
                },
            );
        }
        for (field, value) in indexed_values(kind, &doc) {
            self.by_value.entry((kind, field, value)).or_default().insert(id.to_string());
        }
        self.entries += 1;
    }
}

/// Per-id write locks. Entries are never removed; ids are never deleted.
#[derive(Default)]
struct IdLocks(Mutex<HashMap<(Kind, String), Arc<Mutex<()>>>>);

impl IdLocks {
    fn get(&self, kind: Kind, id: &str) -> Arc<Mutex<()>> {
        let mut map = self.0.lock().unwrap_or_else(|e| e.into_inner());
        map.entry((kind, id.to_string())).or_default().clone()
    }
}

pub struct Store {
    root: Option<PathBuf>,
    index: RwLock<Index>,
    locks: IdLocks,
    log: Mutex<LogWriter>,
}

impl fmt::Debug for Store {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Store").field("root", &self.root).finish_non_exhaustive()
    }
}

impl Store {
    /// Opens (creating if needed) the registry in `dir`, replaying its log.
    pub fn open(dir: impl AsRef<Path>) -> Result<Store, StoreError> {
        Self::open_with(dir, SyncMode::Always)
    }

    pub fn open_with(dir: impl AsRef<Path>, sync: SyncMode) -> Result<Store, StoreError> {
        let root = dir.as_ref().to_path_buf();
        let (writer, records) = LogWriter::open(&root, sync)?;
        let mut index = Index::default();
        for record in records {
            apply_replayed(&root, &mut index, record)?;
        }
        tracing::info!(dir = %root.display(), entries = index.entries, "registry opened");
        Ok(Store {
            root: Some(root),
            index: RwLock::new(index),
            locks: IdLocks::default(),
            log: Mutex::new(writer),
        })
    }

    /// A registry that lives only in memory.
    pub fn in_memory() -> Store {
        Store {
            root: None,
            index: RwLock::new(Index::default()),
            locks: IdLocks::default(),
            log: Mutex::new(LogWriter::memory()),
        }
    }

    pub fn root(&self) -> Option<&Path> {
        self.root.as_deref()
    }

    fn read_index(&self) -> std::sync::RwLockReadGuard<'_, Index> {
        self.index.read().unwrap_or_else(|e| e.into_inner())
    }

    fn write_index(&self) -> std::sync::RwLockWriteGuard<'_, Index> {
        self.index.write().unwrap_or_else(|e| e.into_inner())
    }

    /// Validates `document` against `spec` and records it as the next
    /// version of `id`. Publishing content identical to the latest active
    /// version returns that version with `created == false`. With
    /// `expected`, the publish only succeeds if the latest version is
    /// exactly `expected`.
    pub fn publish(
        &self,
        kind: Kind,
        id: &str,
        document: &[u8],
        spec: &SpecDefinition,
        expected: Option<EntryVersion>,
    ) -> Result<PublishOutcome, StoreError> {
        if spec.kind() != kind {
            return Err(StoreError::SpecMismatch {
                kind,
                spec: spec.kind(),
            });
        }
        let mut report = validate(document, spec).map_err(|e| match e {
            SpecError::Syntax {
                line,
                column,
                message,
            } => StoreError::Syntax {
                line,
                column,
                message,
            },
            other => StoreError::Storage(other.to_string()),
        })?;
        let value: Value = serde_json::from_slice(document).expect("validated documents are JSON");
        if !is_identifier(id) {
            report = report.with_error(Issue::new("id", IssueCode::PatternMismatch, format!("{id:?} is not a valid identifier")));
        } else if let Some(doc_id) = value.get("id").and_then(Value::as_str) {
            if doc_id != id && !report.errors.iter().any(|e| e.path == "id") {
                report = report.with_error(Issue::new(
                    "id",
                    IssueCode::CrossField,
                    format!("document id {doc_id:?} does not match registry id {id:?}"),
                ));
            }
        }
        if !report.valid {
            return Err(StoreError::ValidationRejected(Box::new(report)));
        }
        // Documents a newer spec accepts may not fit the model; those keep
        // their key-sorted form.
        let payload = canonicalize(kind, document).unwrap_or_else(|_| canonical::to_vec(&value));
        let hash = content_hash(&payload);

        let lock = self.locks.get(kind, id);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());

        let (current, reuse) = {
            let index = self.read_index();
            match index.state(kind, id) {
                None => (None, None),
                Some(state) => {
                    let latest = state.latest_version();
                    let same = !state.archived
                        && state.versions.last().is_some_and(|v| v.content_hash == hash);
                    (Some(latest), same.then(|| state.entry(kind, id, latest)))
                }
            }
        };
        if let Some(expected) = expected {
            if current != Some(expected) {
                return Err(StoreError::VersionConflict {
                    kind,
                    id: id.to_string(),
                    expected,
                    actual: current,
                });
            }
        }
        if let Some(entry) = reuse {
            return Ok(PublishOutcome {
                entry,
                created: false,
            });
        }
        let version = current.map_or(EntryVersion::FIRST, EntryVersion::next);
        let stored = StoredVersion {
            payload: payload.into(),
            content_hash: hash,
            spec_version: spec.version(),
            published_at: now_rfc3339(),
        };
        {
            let mut log = self.log.lock().unwrap_or_else(|e| e.into_inner());
            log.write_payload(kind, id, version, &stored.payload)?;
            log.append(LogRecord {
                seq: 0,
                op: Operation::Publish,
                id: id.to_string(),
                kind,
                version,
                content_hash: Some(stored.content_hash.clone()),
                spec_version: Some(stored.spec_version),
                published_at: stored.published_at.clone(),
            })?;
        }
        let mut index = self.write_index();
        index.push_version(kind, id, stored, value);
        let entry = index.state(kind, id).expect("just inserted").entry(kind, id, version);
        Ok(PublishOutcome {
            entry,
            created: true,
        })
    }

    pub fn get(&self, kind: Kind, id: &str, selector: Selector) -> Result<RegistryEntry, StoreError> {
        let index = self.read_index();
        let not_found = |version| StoreError::NotFound {
            kind,
            id: id.to_string(),
            version,
        };
        let state = index.state(kind, id).ok_or_else(|| not_found(None))?;
        match selector {
            Selector::Latest if state.archived => Err(StoreError::Archived {
                kind,
                id: id.to_string(),
            }),
            Selector::Latest => Ok(state.entry(kind, id, state.latest_version())),
            Selector::Version(v) if v <= state.latest_version() => Ok(state.entry(kind, id, v)),
            Selector::Version(v) => Err(not_found(Some(v))),
        }
    }

    /// Marks `id` archived. Its versions stay readable by number; the next
    /// publish reactivates it with a new version.
    pub fn archive(&self, kind: Kind, id: &str) -> Result<RegistryEntry, StoreError> {
        let lock = self.locks.get(kind, id);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        let latest = {
            let index = self.read_index();
            let state = index.state(kind, id).ok_or_else(|| StoreError::NotFound {
                kind,
                id: id.to_string(),
                version: None,
            })?;
            if state.archived {
                return Err(StoreError::AlreadyArchived {
                    kind,
                    id: id.to_string(),
                });
            }
            state.latest_version()
        };
        self.log.lock().unwrap_or_else(|e| e.into_inner()).append(LogRecord {
            seq: 0,
            op: Operation::Archive,
            id: id.to_string(),
            kind,
            version: latest,
            content_hash: None,
            spec_version: None,
            published_at: now_rfc3339(),
        })?;
        let mut index = self.write_index();
        let state = index.ids.get_mut(&kind).and_then(|m| m.get_mut(id)).expect("checked above");
        state.archived = true;
        Ok(state.entry(kind, id, latest))
    }

    /// All versions of `id`, oldest first.
    pub fn history(&self, kind: Kind, id: &str) -> Result<Vec<RegistryEntry>, StoreError> {
        let index = self.read_index();
        let state = index.state(kind, id).ok_or_else(|| StoreError::NotFound {
            kind,
            id: id.to_string(),
            version: None,
        })?;
        Ok((1..=state.versions.len() as u64)
            .map(|v| state.entry(kind, id, EntryVersion::new(v).expect("v >= 1")))
            .collect())
    }

    /// Ids whose latest version satisfies every clause, sorted by id.
    /// Clause paths must be fields of `spec`.
    pub fn search(&self, query: &FilterQuery, spec: &SpecDefinition) -> Result<Vec<SearchHit>, StoreError> {
        if spec.kind() != query.kind {
            return Err(StoreError::SpecMismatch {
                kind: query.kind,
                spec: spec.kind(),
            });
        }
        let compiled = query.compile(spec)?;
        let index = self.read_index();
        let Some(ids) = index.ids.get(&query.kind) else {
            return Ok(Vec::new());
        };
        let visible = |state: &IdState| query.include_archived || !state.archived;
        let mut hits = Vec::new();
        match compiled.indexed_eq(INDEXED, query.kind) {
            Some((field, value)) => {
                let key = (query.kind, field, value.to_string());
                for id in index.by_value.get(&key).into_iter().flatten() {
                    let state = &ids[id];
                    if visible(state) && compiled.matches(&state.latest) {
                        hits.push(state.hit(query.kind, id));
                    }
                }
            }
            None => {
                for (id, state) in ids {
                    if visible(state) && compiled.matches(&state.latest) {
                        hits.push(state.hit(query.kind, id));
                    }
                }
            }
        }
        Ok(hits)
    }

    /// The latest version of every id of `kind`, sorted by id.
    pub fn latest_entries(&self, kind: Kind, include_archived: bool) -> Vec<RegistryEntry> {
        let index = self.read_index();
        index
            .ids
            .get(&kind)
            .into_iter()
            .flatten()
            .filter(|(_, s)| include_archived || !s.archived)
            .map(|(id, s)| s.entry(kind, id, s.latest_version()))
            .collect()
    }

    /// Every active resource, decoded, sorted by id.
    pub fn active_resources(&self) -> Vec<ResourceView> {
        let index = self.read_index();
        index
            .ids
            .get(&Kind::Resource)
            .into_iter()
            .flatten()
            .filter(|(_, s)| !s.archived)
            .map(|(id, s)| ResourceView {
                id: id.clone(),
                version: s.latest_version(),
                model: s.model.clone().expect("resources carry a decoded model"),
            })
            .collect()
    }

    /// Total number of stored versions across all ids.
    pub fn entry_count(&self) -> usize {
        self.read_index().entries
    }

    /// Flushes buffered writes. Only meaningful with [`SyncMode::Deferred`].
    pub fn sync(&self) -> Result<(), StoreError> {
        self.log.lock().unwrap_or_else(|e| e.into_inner()).sync()
    }
}

fn apply_replayed(root: &Path, index: &mut Index, record: LogRecord) -> Result<(), StoreError> {
    let LogRecord {
        seq,
        op,
        id,
        kind,
        version,
        content_hash: hash,
        spec_version,
        published_at,
    } = record;
    let current = index.state(kind, &id).map(|s| s.latest_version());
    let corrupt = |msg: String| StoreError::Storage(format!("event log record {seq}: {msg}"));
    match op {
        Operation::Publish => {
            let expected = current.map_or(EntryVersion::FIRST, EntryVersion::next);
            if version != expected {
                return Err(corrupt(format!("{kind} {id:?} version {version}, expected {expected}")));
            }
            let (Some(hash), Some(spec_version)) = (hash, spec_version) else {
                return Err(corrupt("publish without hash or spec version".into()));
            };
            let file = log::payload_path(root, kind, &id, version);
            let payload = std::fs::read(&file).map_err(|e| storage(file.display(), e))?;
            if content_hash(&payload) != hash {
                return Err(corrupt(format!("{} does not match its content hash", file.display())));
            }
            let doc: Value = serde_json::from_slice(&payload).map_err(|e| storage(file.display(), e))?;
            let stored = StoredVersion {
                payload: payload.into(),
                content_hash: hash,
                spec_version,
                published_at,
            };
            index.push_version(kind, &id, stored, doc);
        }
        Operation::Archive => {
            let state = index
                .ids
                .get_mut(&kind)
                .and_then(|m| m.get_mut(&id))
                .ok_or_else(|| corrupt(format!("archive of unknown {kind} {id:?}")))?;
            if state.archived || Some(version) != current {
                return Err(corrupt(format!("archive of {kind} {id:?} does not follow its history")));
            }
            state.archived = true;
        }
    }
    Ok(())
}
