//! Brute-force reference implementations over plain JSON.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde_json::Value;

use crate::versions::reference_compare;

/// Values reached by following `path` (dot-separated, no array markers),
/// stepping into every element of every array met on the way.
pub fn values_at<'a>(doc: &'a Value, path: &str) -> Vec<&'a Value> {
    let mut current = vec![doc];
    for key in path.split('.') {
        let mut next = Vec::new();
        for v in current {
            let mut stack = vec![v];
            while let Some(v) = stack.pop() {
                match v {
                    Value::Array(items) => stack.extend(items.iter().rev()),
                    Value::Object(map) => {
                        if let Some(child) = map.get(key) {
                            next.push(child);
                        }
                    }
                    _ => {}
                }
            }
        }
        current = next;
    }
    let mut out = Vec::new();
    for v in current {
        match v {
            Value::Array(items) => out.extend(items.iter()),
            other => out.push(other),
        }
    }
    out
}

fn same_scalar(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => x.as_f64().unwrap() == y.as_f64().unwrap(),
        (Value::String(x), Value::String(y)) => x == y,
        (Value::Bool(x), Value::Bool(y)) => x == y,
        _ => false,
    }
}


/// One search clause applied to one document.
pub fn clause_holds(doc: &Value, path: &str, op: &str, value: Option<&Value>) -> bool {
    let found = values_at(doc, path);
    found.iter().any(|leaf| match op {
        "exists" => true,
        "eq" => same_scalar(leaf, value.unwrap()),
        "ne" => {
            matches!(leaf, Value::String(_) | Value::Number(_) | Value::Bool(_)) && !same_scalar(leaf, value.unwrap())
        }
        "contains" => match (leaf, value.unwrap()) {
            (Value::String(s), Value::String(t)) => s.contains(t.as_str()),
            _ => false,
        },
        "lt" | "le" | "gt" | "ge" => {
            let ord = match (leaf, value.unwrap()) {
                (Value::Number(x), Value::Number(y)) => x.as_f64().unwrap().partial_cmp(&y.as_f64().unwrap()),
                (Value::String(x), Value::String(y)) if !x.is_empty() => Some(reference_compare(x, y)),
                _ => None,
            };
            match (op, ord) {
                ("lt", Some(Ordering::Less)) => true,
                ("le", Some(Ordering::Less | Ordering::Equal)) => true,
                ("gt", Some(Ordering::Greater)) => true,
                ("ge", Some(Ordering::Greater | Ordering::Equal)) => true,
                _ => false,
            }
        }
        other => panic!("unknown op {other}"),
    })
}

/// `(id, doc, archived)` rows; returns matching ids in ascending order.
pub fn scan<'a>(
    rows: impl IntoIterator<Item = (&'a str, &'a Value, bool)>,
    clauses: &[(String, String, Option<Value>)],
    include_archived: bool,
) -> Vec<String> {
    let mut ids: Vec<String> = rows
        .into_iter()
        .filter(|(_, _, archived)| include_archived || !archived)
        .filter(|(_, doc, _)| clauses.iter().all(|(p, o, v)| clause_holds(doc, p, o, v.as_ref())))
        .map(|(id, _, _)| id.to_string())
        .collect();
    ids.sort();
    ids
}

/// Straight-line evaluation of one application constraint against one
/// resource document.
pub fn constraint_satisfied(resource: &Value, constraint: &Value) -> bool {
    let category = constraint["category"].as_str().unwrap();
    let key = constraint["key"].as_str().unwrap();
    let predicate = constraint["predicate"].as_str().unwrap();
    let value = constraint.get("value");
    let Some(block) = resource.get(category) else {
        return false;
    };

    if category == "software" && key == "packages" && predicate == "min_version" {
        let (name, want) = value.unwrap().as_str().unwrap().split_once(':').unwrap();
        let empty = Vec::new();
        let packages = block["packages"].as_array().unwrap_or(&empty);
        return packages.iter().any(|p| {
            p["name"] == name
                && p.get("version")
                    .and_then(Value::as_str)
                    .is_some_and(|v| reference_compare(v, want) != Ordering::Less)
        });
    }

    // A list key by itself stands for its elements' names (models for
    // accelerators).
    let path = match (category, key) {
        ("software", "packages") => "packages.name",
        ("scheduler", "queues") => "queues.name",
        ("hardware", "accelerators") => "accelerators.model",
        _ => key,
    };
    let mut found: Vec<Value> = values_at(block, path).into_iter().cloned().collect();
    if path == "queues.default" {
        // An unmarked queue is not the default.
        let queues = values_at(block, "queues");
        found = queues
            .iter()
            .map(|q| q.get("default").cloned().unwrap_or(Value::Bool(false)))
            .collect();
    }
    if found.is_empty() {
        return false;
    }
    match predicate {
        "exists" => true,
        "equals" => found.iter().any(|f| same_scalar(f, value.unwrap())),
        "one_of" => {
            let options = value.unwrap().as_array().unwrap();
            found.iter().any(|f| options.iter().any(|o| same_scalar(f, o)))
        }
        "min_version" => {
            let want = value.unwrap().as_str().unwrap();
            found
                .iter()
                .any(|f| f.as_str().is_some_and(|s| reference_compare(s, want) != Ordering::Less))
        }
        "min_value" => {
            let want = value.unwrap().as_f64().unwrap();
            found.iter().any(|f| f.as_f64().is_some_and(|x| x >= want))
        }
        other => panic!("unknown predicate {other}"),
    }
}

/// Expected outcome of matching one application against one resource.
#[derive(Debug, Clone, PartialEq)]
pub struct PairVerdict {
    pub resource_id: String,
    pub compatible: bool,
    pub satisfied: Vec<bool>,
    pub score: f64,
}

fn constraints(app: &Value) -> Vec<&Value> {
    ["architecture_hardware", "software_dependencies"]
        .iter()
        .filter_map(|k| app.get(*k).and_then(Value::as_array))
        .flatten()
        .collect()
}

/// Every application/resource pair evaluated exhaustively, ordered by
/// compatibility, then score, then resource id.
pub fn match_all_pairs(app: &Value, resources: &[(&str, &Value)]) -> Vec<PairVerdict> {
    let cs = constraints(app);
    let mut out: Vec<PairVerdict> = resources
        .iter()
        .map(|(id, r)| {
            let satisfied: Vec<bool> = cs.iter().map(|c| constraint_satisfied(r, c)).collect();
            let mut compatible = true;
            let mut wanted = 0u32;
            let mut met = 0u32;
            for (c, ok) in cs.iter().zip(&satisfied) {
                if c.get("preferred") == Some(&Value::Bool(true)) {
                    wanted += 1;
                    met += u32::from(*ok);
                } else if !ok {
                    compatible = false;
                }
            }
            let score = if wanted == 0 { 1.0 } else { f64::from(met) / f64::from(wanted) };
            PairVerdict {
                resource_id: id.to_string(),
                compatible,
                satisfied,
                score,
            }
        })
        .collect();
    out.sort_by(|a, b| {
        b.compatible
            .cmp(&a.compatible)
            .then(b.score.partial_cmp(&a.score).unwrap())
            .then(a.resource_id.cmp(&b.resource_id))
    });
    out
}

/// Operation in a random registry workload. Content is an opaque tag; equal
/// tags mean byte-identical documents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RegistryOp {
    Publish { id: String, content: u32 },
    Archive { id: String },
    GetLatest { id: String },
    GetVersion { id: String, version: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expected {
    /// Entry with this version and content tag; `created` only for publishes.
    Entry { version: u64, content: u32, created: bool },
    NotFound,
    Archived,
    AlreadyArchived,
}

#[derive(Debug, Default, Clone)]
struct IdLog {
    contents: Vec<u32>,
    archived: bool,
}

/// Recomputes every outcome from the sequence of events alone.
#[derive(Debug, Default, Clone)]
pub struct ReplayOracle {
    ids: BTreeMap<String, IdLog>,
}

impl ReplayOracle {
    pub fn apply(&mut self, op: &RegistryOp) -> Expected {
        match op {
            RegistryOp::Publish { id, content } => {
                let log = self.ids.entry(id.clone()).or_default();
                let unchanged = !log.archived && log.contents.last() == Some(content);
                if !unchanged {
                    log.contents.push(*content);
                    log.archived = false;
                }
                Expected::Entry {
                    version: log.contents.len() as u64,
                    content: *content,
                    created: !unchanged,
                }
            }
            RegistryOp::Archive { id } => match self.ids.get_mut(id) {
                None => Expected::NotFound,
                Some(log) if log.archived => Expected::AlreadyArchived,
                Some(log) => {
                    log.archived = true;
                    Expected::Entry {
                        version: log.contents.len() as u64,
                        content: *log.contents.last().unwrap(),
                        created: false,
                    }
                }
            },
            RegistryOp::GetLatest { id } => match self.ids.get(id) {
                None => Expected::NotFound,
                Some(log) if log.archived => Expected::Archived,
                Some(log) => Expected::Entry {
                    version: log.contents.len() as u64,
                    content: *log.contents.last().unwrap(),
                    created: false,
                },
            },
            RegistryOp::GetVersion { id, version } => match self.ids.get(id) {
                Some(log) if *version >= 1 && *version <= log.contents.len() as u64 => Expected::Entry {
                    version: *version,
                    content: log.contents[*version as usize - 1],
                    created: false,
                },
                _ => Expected::NotFound,
            },
        }
    }

    /// Ids not archived, ascending.
    pub fn active_ids(&self) -> Vec<String> {
        self.ids.iter().filter(|(_, l)| !l.archived).map(|(id, _)| id.clone()).collect()
    }

    /// Content tags of every version of `id`, oldest first.
    pub fn history(&self, id: &str) -> Vec<u32> {
        self.ids.get(id).map(|l| l.contents.clone()).unwrap_or_default()
    }
}

/// A random workload over a small id pool so that collisions, repeats and
/// archive/publish interleavings are frequent.
pub fn random_ops<R: rand::Rng>(rng: &mut R, n: usize, ids: usize) -> Vec<RegistryOp> {
    (0..n)
        .map(|_| {
            let id = format!("id-{}", rng.gen_range(0..ids));
            match rng.gen_range(0..10) {
                0..=3 => RegistryOp::Publish { id, content: rng.gen_range(0..4) },
                4 => RegistryOp::Archive { id },
                5..=6 => RegistryOp::GetLatest { id },
                _ => RegistryOp::GetVersion { id, version: rng.gen_range(0..6) },
            }
        })
        .collect()
}
