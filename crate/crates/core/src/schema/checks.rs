//! Built-in cross-field checks a spec can enable by name.
//!
//! Each check only looks at fields that passed their per-field rules, so a
//! single bad value yields a single error.

use std::fmt;
use std::str::FromStr;

use serde_json::Value;

use super::validate::{Errored, Issue, IssueCode};
use crate::model::{path, version, Kind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CrossCheck {
    /// `scheduler_type` "fork" runs processes directly; it has no queues.
    ForkHasNoQueues,
    /// ... and no scheduler version.
    ForkHasNoVersion,
    /// A compute resource behind a batch scheduler defines at least one queue.
    BatchComputeHasQueue,
    /// At most one queue is marked default.
    SingleDefaultQueue,
    /// Constraint values have the shape their predicate needs.
    ConstraintValueShape,
}

impl CrossCheck {
    pub const ALL: &'static [CrossCheck] = &[
        CrossCheck::ForkHasNoQueues,
        CrossCheck::ForkHasNoVersion,
        CrossCheck::BatchComputeHasQueue,
        CrossCheck::SingleDefaultQueue,
        CrossCheck::ConstraintValueShape,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CrossCheck::ForkHasNoQueues => "fork_has_no_queues",
            CrossCheck::ForkHasNoVersion => "fork_has_no_version",
            CrossCheck::BatchComputeHasQueue => "batch_compute_has_queue",
            CrossCheck::SingleDefaultQueue => "single_default_queue",
            CrossCheck::ConstraintValueShape => "constraint_value_shape",
        }
    }

    pub fn kind(self) -> Kind {
        match self {
            CrossCheck::ConstraintValueShape => Kind::Application,
            _ => Kind::Resource,
        }
    }
}

impl fmt::Display for CrossCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CrossCheck {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        CrossCheck::ALL.iter().copied().find(|c| c.as_str() == s).ok_or(())
    }
}

const SCHEDULER_TYPE: &str = "scheduler.scheduler_type";
const QUEUES: &str = "scheduler.queues";

pub(crate) fn run(check: CrossCheck, doc: &Value, errored: &Errored<'_>) -> Vec<Issue> {
    let clean_str = |at: &str| -> Option<&str> {
        if errored.touches(at) {
            None
        } else {
            path::get(doc, at).and_then(Value::as_str)
        }
    };
    let queues = || -> Option<&Vec<Value>> {
        if errored.exactly(QUEUES) {
            None
        } else {
            path::get(doc, QUEUES).and_then(Value::as_array)
        }
    };
    let mut out = Vec::new();
    match check {
        CrossCheck::ForkHasNoQueues => {
            if clean_str(SCHEDULER_TYPE) == Some("fork") && queues().is_some_and(|q| !q.is_empty()) {
                out.push(Issue::new(
                    "scheduler",
                    IssueCode::CrossField,
                    "scheduler_type \"fork\" does not use batch queues, but queues are defined",
                ));
            }
        }
        CrossCheck::ForkHasNoVersion => {
            let at = "scheduler.scheduler_version";
            if clean_str(SCHEDULER_TYPE) == Some("fork") && path::get(doc, at).is_some() && !errored.touches(at) {
                out.push(Issue::new(at, IssueCode::CrossField, "scheduler_type \"fork\" has no version"));
            }
        }
        CrossCheck::BatchComputeHasQueue => {
            let batch = clean_str(SCHEDULER_TYPE).is_some_and(|t| t != "fork");
            let compute = clean_str("high_level.resource_type") == Some("compute");
            let no_queues = match path::get(doc, QUEUES) {
                None => true,
                Some(_) => queues().is_some_and(|q| q.is_empty()),
            };
            if batch && compute && no_queues && !errored.exactly(QUEUES) {
                out.push(Issue::new(
                    QUEUES,
                    IssueCode::CrossField,
                    "a batch-scheduled compute resource must define at least one queue",
                ));
            }
        }
        CrossCheck::SingleDefaultQueue => {
            let mut seen = false;
            for (i, q) in queues().into_iter().flatten().enumerate() {
                let at = path::join(&path::index(QUEUES, i), "default");
                if errored.touches(&at) {
                    continue;
                }
                if q.get("default").and_then(Value::as_bool) == Some(true) {
                    if seen {
                        out.push(Issue::new(at, IssueCode::CrossField, "more than one default queue"));
                    }
                    seen = true;
                }
            }
        }
        CrossCheck::ConstraintValueShape => {
            for list in ["architecture_hardware", "software_dependencies"] {
                let Some(items) = doc.get(list).and_then(Value::as_array) else {
                    continue;
                };
                for (i, item) in items.iter().enumerate() {
                    let item_path = path::index(list, i);
                    let value_path = path::join(&item_path, "value");
                    let Some(predicate) = clean_str(&path::join(&item_path, "predicate")) else {
                        continue;
                    };
                    if errored.touches(&value_path) {
                        continue;
                    }
                    if let Err(msg) = value_shape(predicate, item.get("value")) {
                        out.push(Issue::new(value_path, IssueCode::CrossField, msg));
                    }
                }
            }
        }
    }
    out
}

fn value_shape(predicate: &str, value: Option<&Value>) -> Result<(), String> {
    let scalar = |v: &Value| matches!(v, Value::String(_) | Value::Number(_) | Value::Bool(_));
    let ok = match predicate {
        "exists" => value.is_none(),
        "equals" => value.is_some_and(scalar),
        "one_of" => value
            .and_then(Value::as_array)
            .is_some_and(|items| !items.is_empty() && items.iter().all(scalar)),
        "min_version" => value.and_then(Value::as_str).is_some_and(version::is_valid),
        "min_value" => value.is_some_and(Value::is_number),
        _ => true,
    };
    if ok {
        Ok(())
    } else {
        Err(match predicate {
            "exists" => "exists takes no value",
            "equals" => "equals requires a scalar value",
            "one_of" => "one_of requires a non-empty list",
            "min_version" => "min_version requires a version string",
            _ => "min_value requires a number",
        }
        .to_string())
    }
}
