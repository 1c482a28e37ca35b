//! Single-field mutations of valid documents, each tagged with the path and
//! error code a validator must report.
//!
//! The field table below is written out by hand from the description format,
//! independently of any spec file shipped with the registry.

use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Id,
    Text,
    /// Text without whitespace.
    Host,
    /// Free text that may be empty.
    Note,
    Enum,
    PosInt,
    NonNegative,
    Version,
    Bool,
    ScalarOrList,
    Object,
    Array,
}

use Field::*;

/// (path with `[]` for array elements, field kind, required)
const RESOURCE: &[(&str, Field, bool)] = &[
    ("", Object, true),
    ("id", Id, true),
    ("high_level", Object, true),
    ("high_level.name", Text, true),
    ("high_level.hostname", Host, true),
    ("high_level.owner", Text, true),
    ("high_level.resource_type", Enum, true),
    ("high_level.category", Enum, false),
    ("high_level.description", Note, false),
    ("hardware", Object, false),
    ("hardware.cpu_architecture", Text, true),
    ("hardware.memory_type", Text, false),
    ("hardware.memory_per_node_gb", NonNegative, false),
    ("hardware.cores_per_node", PosInt, false),
    ("hardware.threads_per_core", PosInt, false),
    ("hardware.node_count", PosInt, false),
    ("hardware.storage_type", Text, false),
    ("hardware.storage_capacity_tb", NonNegative, false),
    ("hardware.network_type", Text, false),
    ("hardware.accelerators", Array, false),
    ("hardware.accelerators[]", Object, false),
    ("hardware.accelerators[].model", Text, true),
    ("hardware.accelerators[].count_per_node", PosInt, true),
    ("operating_system", Object, false),
    ("operating_system.kernel_name", Text, true),
    ("operating_system.kernel_version", Version, true),
    ("operating_system.distribution", Text, true),
    ("operating_system.distribution_version", Version, true),
    ("scheduler", Object, false),
    ("scheduler.scheduler_type", Enum, true),
    ("scheduler.scheduler_version", Version, false),
    ("scheduler.queues", Array, false),
    ("scheduler.queues[]", Object, false),
    ("scheduler.queues[].name", Id, true),
    ("scheduler.queues[].max_nodes", PosInt, false),
    ("scheduler.queues[].max_wallclock_minutes", PosInt, false),
    ("scheduler.queues[].max_jobs_per_user", PosInt, false),
    ("scheduler.queues[].default", Bool, false),
    ("software", Object, false),
    ("software.packages", Array, true),
    ("software.packages[]", Object, false),
    ("software.packages[].name", Text, true),
    ("software.packages[].version", Version, false),
    ("software.packages[].kind", Enum, true),
];

const APPLICATION: &[(&str, Field, bool)] = &[
    ("", Object, true),
    ("id", Id, true),
    ("high_level", Object, true),
    ("high_level.name", Text, true),
    ("high_level.app_type", Enum, true),
    ("high_level.description", Note, false),
    ("packaging", Object, false),
    ("packaging.kind", Enum, true),
    ("packaging.reference", Text, true),
    ("architecture_hardware", Array, false),
    ("architecture_hardware[]", Object, false),
    ("architecture_hardware[].category", Enum, true),
    ("architecture_hardware[].key", Text, true),
    ("architecture_hardware[].predicate", Enum, true),
    ("architecture_hardware[].value", ScalarOrList, false),
    ("architecture_hardware[].preferred", Bool, false),
    ("software_dependencies", Array, false),
    ("software_dependencies[]", Object, false),
    ("software_dependencies[].category", Enum, true),
    ("software_dependencies[].key", Text, true),
    ("software_dependencies[].predicate", Enum, true),
    ("software_dependencies[].value", ScalarOrList, false),
    ("software_dependencies[].preferred", Bool, false),
    ("inputs", Array, false),
    ("inputs[]", Object, false),
    ("inputs[].name", Id, true),
    ("inputs[].kind", Enum, true),
    ("inputs[].required", Bool, true),
    ("runtime_requirements", Array, false),
    ("runtime_requirements[]", Object, false),
    ("runtime_requirements[].key", Text, true),
    ("runtime_requirements[].value", Text, true),
    ("outputs", Array, false),
    ("outputs[]", Object, false),
    ("outputs[].name", Id, true),
    ("outputs[].kind", Enum, true),
];

/// Arrays whose elements must have distinct `name`s.
const UNIQUE_NAMES: &[&str] = &["scheduler.queues", "inputs", "outputs"];

#[derive(Debug, Clone)]
pub struct Mutant {
    pub document: Value,
    /// Concrete path of the mutated field, e.g. `scheduler.queues[1].name`.
    pub path: String,
    /// Wire name of the error code expected at `path`.
    pub code: &'static str,
    pub description: String,
}

fn table(kind: &str) -> &'static [(&'static str, Field, bool)] {
    match kind {
        "resource" => RESOURCE,
        "application" => APPLICATION,
        other => panic!("unknown kind {other}"),
    }
}

fn lookup(kind: &str, pattern: &str) -> (Field, bool) {
    table(kind)
        .iter()
        .find(|(p, _, _)| *p == pattern)
        .map(|(_, f, r)| (*f, *r))
        .unwrap_or_else(|| panic!("fixture field {pattern:?} not in the {kind} table"))
}

/// Replaces the value at a concrete path (or removes it with `None`).
fn edit(doc: &Value, concrete: &[Step], new: Option<Value>) -> Value {
    let mut out = doc.clone();
    let mut cur = &mut out;
    for step in &concrete[..concrete.len() - 1] {
        cur = match step {
            Step::Key(k) => cur.get_mut(k.as_str()).unwrap(),
            Step::Index(i) => cur.get_mut(*i).unwrap(),
        };
    }
    match (concrete.last().unwrap(), new) {
        (Step::Key(k), Some(v)) => {
            cur.as_object_mut().unwrap().insert(k.clone(), v);
        }
        (Step::Key(k), None) => {
            cur.as_object_mut().unwrap().remove(k);
        }
        (Step::Index(i), Some(v)) => cur[*i] = v,
        (Step::Index(_), None) => unreachable!("array elements are never removed"),
    }
    out
}

#[derive(Debug, Clone)]
enum Step {
    Key(String),
    Index(usize),
}

fn render(steps: &[Step]) -> String {
    let mut s = String::new();
    for step in steps {
        match step {
            Step::Key(k) => {
                if !s.is_empty() {
                    s.push('.');
                }
                s.push_str(k);
            }
            Step::Index(i) => s.push_str(&format!("[{i}]")),
        }
    }
    s
}

fn pattern_of(steps: &[Step]) -> String {
    let mut s = String::new();
    for step in steps {
        match step {
            Step::Key(k) => {
                if !s.is_empty() {
                    s.push('.');
                }
                s.push_str(k);
            }
            Step::Index(_) => s.push_str("[]"),
        }
    }
    s
}

struct Ctx<'a> {
    kind: &'a str,
    root: &'a Value,
    out: Vec<Mutant>,
}

impl Ctx<'_> {
    fn push(&mut self, steps: &[Step], new: Option<Value>, code: &'static str, what: &str) {
        let path = render(steps);
        self.out.push(Mutant {
            document: edit(self.root, steps, new),
            description: format!("{what} at {path}"),
            path,
            code,
        });
    }

    fn walk(&mut self, steps: &mut Vec<Step>, value: &Value) {
        let pattern = pattern_of(steps);
        let (field, required) = lookup(self.kind, &pattern);
        let path = render(steps);
        if !steps.is_empty() {
            if required && !matches!(steps.last(), Some(Step::Index(_))) {
                self.push(steps, None, "missing", "remove required field");
            }
            self.leaf_mutations(steps, field, value);
        }
        match value {
            Value::Object(map) => {
                let mut extra = steps.clone();
                extra.push(Step::Key("zz_unexpected".into()));
                self.push(&extra, Some(json!(1)), "unknown_key", "insert unknown key");
                for (k, v) in map {
                    steps.push(Step::Key(k.clone()));
                    self.walk(steps, v);
                    steps.pop();
                }
            }
            Value::Array(items) if field == Array => {
                if UNIQUE_NAMES.contains(&path.as_str()) && items.len() >= 2 {
                    let first = items[0]["name"].clone();
                    let mut at = steps.clone();
                    at.push(Step::Index(1));
                    at.push(Step::Key("name".into()));
                    self.push(&at, Some(first), "duplicate", "duplicate name");
                }
                if path == "software.packages" && items.len() >= 2 {
                    let mut at = steps.clone();
                    at.push(Step::Index(1));
                    self.push(&at, Some(items[0].clone()), "duplicate", "duplicate package");
                }
                for (i, v) in items.iter().enumerate() {
                    steps.push(Step::Index(i));
                    self.walk(steps, v);
                    steps.pop();
                }
            }
            _ => {}
        }
    }

    fn leaf_mutations(&mut self, steps: &[Step], field: Field, value: &Value) {
        match field {
            Id => {
                self.push(steps, Some(json!(7)), "wrong_type", "number for identifier");
                self.push(steps, Some(json!("Not An Id")), "pattern_mismatch", "malformed identifier");
            }
            Text => {
                self.push(steps, Some(json!(7)), "wrong_type", "number for string");
                self.push(steps, Some(json!("")), "out_of_bounds", "empty string");
            }
            Host => {
                self.push(steps, Some(json!(["h"])), "wrong_type", "list for hostname");
                self.push(steps, Some(json!("two words")), "pattern_mismatch", "whitespace in hostname");
            }
            Note => self.push(steps, Some(json!(false)), "wrong_type", "boolean for string"),
            Enum => {
                self.push(steps, Some(json!("definitely_not_listed")), "out_of_domain", "unknown enum value");
                self.push(steps, Some(json!(3)), "wrong_type", "number for enum");
            }
            PosInt => {
                self.push(steps, Some(json!(0)), "out_of_bounds", "zero for positive integer");
                self.push(steps, Some(json!("fifty-six")), "wrong_type", "text for integer");
                self.push(steps, Some(json!(1.5)), "wrong_type", "fraction for integer");
            }
            NonNegative => {
                self.push(steps, Some(json!(-1)), "out_of_bounds", "negative number");
                self.push(steps, Some(json!("lots")), "wrong_type", "text for number");
            }
            Version => {
                self.push(steps, Some(json!("")), "pattern_mismatch", "empty version");
                self.push(steps, Some(json!(11.4)), "wrong_type", "number for version");
            }
            Bool => self.push(steps, Some(json!("yes")), "wrong_type", "text for boolean"),
            ScalarOrList => self.push(steps, Some(json!({"v": 1})), "wrong_type", "object for value"),
            Object => self.push(steps, Some(json!("flat")), "wrong_type", "string for object"),
            Array => {
                if !value.as_array().is_some_and(|a| a.is_empty()) {
                    self.push(steps, Some(json!({})), "wrong_type", "object for array");
                }
            }
        }
    }
}

/// Every single-field mutant of `doc`, a valid document of `kind`
/// (`"resource"` or `"application"`).
pub fn mutants(kind: &str, doc: &Value) -> Vec<Mutant> {
    let mut ctx = Ctx {
        kind,
        root: doc,
        out: Vec::new(),
    };
    ctx.walk(&mut Vec::new(), doc);
    ctx.out
}
