use std::collections::HashSet;

use serde::Serialize;
use serde_json::{Map, Value};

use super::{checks, Node, RuleType, SpecDefinition, SpecError, SpecVersion};
use crate::model::path;
use crate::model::version;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueCode {
    Missing,
    WrongType,
    OutOfDomain,
    OutOfBounds,
    PatternMismatch,
    Duplicate,
    UnknownKey,
    CrossField,
    /// Warning only: the field is marked deprecated by the spec.
    Deprecated,
}

impl IssueCode {
    pub fn as_str(self) -> &'static str {
        match self {
            IssueCode::Missing => "missing",
            IssueCode::WrongType => "wrong_type",
            IssueCode::OutOfDomain => "out_of_domain",
            IssueCode::OutOfBounds => "out_of_bounds",
            IssueCode::PatternMismatch => "pattern_mismatch",
            IssueCode::Duplicate => "duplicate",
            IssueCode::UnknownKey => "unknown_key",
            IssueCode::CrossField => "cross_field",
            IssueCode::Deprecated => "deprecated",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Issue {
    pub path: String,
    pub code: IssueCode,
    pub message: String,
}

impl Issue {
    pub(crate) fn new(path: impl Into<String>, code: IssueCode, message: impl Into<String>) -> Self {
        let path = path.into();
        Issue {
            path: if path.is_empty() { "$".into() } else { path },
            code,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub spec_version: SpecVersion,
    pub errors: Vec<Issue>,
    pub warnings: Vec<Issue>,
}

impl ValidationReport {
    /// Report with a single whole-document or caller-detected error added.
    pub fn with_error(mut self, issue: Issue) -> Self {
        self.errors.push(issue);
        self.errors.sort();
        self.valid = false;
        self
    }
}

/// Validates a document. Only undecodable input is an `Err`; every semantic
/// problem is an entry in the report.
pub fn validate(document: &[u8], spec: &SpecDefinition) -> Result<ValidationReport, SpecError> {
    let value: Value = serde_json::from_slice(document).map_err(|e| SpecError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    Ok(validate_value(&value, spec))
}

pub fn validate_value(document: &Value, spec: &SpecDefinition) -> ValidationReport {
    let mut walker = Walker {
        spec,
        errors: Vec::new(),
        warnings: Vec::new(),
        unique: Vec::new(),
    };
    match document {
        Value::Object(map) => walker.object(0, map, ""),
        other => walker.errors.push(Issue::new(
            "$",
            IssueCode::WrongType,
            format!("document must be an object, found {}", type_name(other)),
        )),
    }
    walker.unique_checks(document);
    for check in spec.checks() {
        let findings = {
            let errored = Errored(&walker.errors);
            checks::run(*check, document, &errored)
        };
        walker.errors.extend(findings);
    }
    let Walker {
        mut errors,
        mut warnings,
        ..
    } = walker;
    errors.sort();
    errors.dedup();
    warnings.sort();
    ValidationReport {
        valid: errors.is_empty(),
        spec_version: spec.version(),
        errors,
        warnings,
    }
}

/// Answers whether a path, one of its ancestors or one of its descendants
/// already carries an error, so that derived checks do not pile on.
pub(crate) struct Errored<'a>(&'a [Issue]);

impl Errored<'_> {
    pub(crate) fn touches(&self, at: &str) -> bool {
        self.0.iter().any(|e| related(&e.path, at))
    }

    pub(crate) fn exactly(&self, at: &str) -> bool {
        self.0.iter().any(|e| e.path == at)
    }
}

fn related(a: &str, b: &str) -> bool {
    let nested = |outer: &str, inner: &str| {
        inner.len() > outer.len()
            && inner.starts_with(outer)
            && matches!(inner.as_bytes()[outer.len()], b'.' | b'[')
    };
    a == b || a == "$" || nested(a, b) || nested(b, a)
}

pub(crate) fn type_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

fn is_scalar(v: &Value) -> bool {
    matches!(v, Value::String(_) | Value::Number(_) | Value::Bool(_))
}

fn type_matches(ty: RuleType, v: &Value) -> bool {
    match ty {
        RuleType::String | RuleType::Version => v.is_string(),
        RuleType::Integer => v.is_i64() || v.is_u64(),
        RuleType::Number => v.is_number(),
        RuleType::Boolean => v.is_boolean(),
        RuleType::Object => v.is_object(),
        RuleType::Array => v.is_array(),
        RuleType::ScalarOrList => {
            is_scalar(v) || v.as_array().is_some_and(|items| items.iter().all(is_scalar))
        }
    }
}

struct Walker<'s> {
    spec: &'s SpecDefinition,
    errors: Vec<Issue>,
    warnings: Vec<Issue>,
    /// (concrete array path, element node) pairs whose uniqueness is checked
    /// after the structural pass.
    unique: Vec<(String, usize)>,
}

impl Walker<'_> {
    fn node(&self, id: usize) -> &Node {
        &self.spec.nodes[id]
    }

    fn object(&mut self, node: usize, map: &Map<String, Value>, at: &str) {
        let fields: Vec<(String, usize)> = self
            .node(node)
            .fields
            .iter()
            .map(|(k, v)| (k.clone(), *v))
            .collect();
        for (key, child) in &fields {
            let child_path = path::join(at, key);
            match map.get(key) {
                Some(v) => self.value(*child, v, &child_path),
                None => {
                    let rule = &self.spec.rules[self.node(*child).rule.expect("child rule")];
                    if rule.required {
                        self.errors.push(Issue::new(
                            child_path,
                            IssueCode::Missing,
                            "required field is missing",
                        ));
                    }
                }
            }
        }
        for key in map.keys() {
            if !self.node(node).fields.contains_key(key) {
                self.errors.push(Issue::new(
                    path::join(at, key),
                    IssueCode::UnknownKey,
                    format!("key {key:?} is not defined by spec {}", self.spec.version()),
                ));
            }
        }
    }

    fn value(&mut self, node: usize, v: &Value, at: &str) {
        let rule_index = self.node(node).rule.expect("non-root node has a rule");
        let rule = &self.spec.rules[rule_index];
        if rule.deprecated {
            self.warnings.push(Issue::new(at, IssueCode::Deprecated, "field is deprecated"));
        }
        if !type_matches(rule.ty, v) {
            self.errors.push(Issue::new(
                at,
                IssueCode::WrongType,
                format!("expected {}, found {}", rule.ty.as_str(), type_name(v)),
            ));
            return;
        }
        match v {
            Value::String(s) => {
                if let Some(issue) = self.check_string(rule_index, s, at) {
                    self.errors.push(issue);
                }
            }
            Value::Number(n) => {
                let x = n.as_f64().unwrap_or(f64::NAN);
                let below = rule.minimum.as_ref().and_then(|m| m.as_f64()).filter(|m| x < *m);
                let above = rule.maximum.as_ref().and_then(|m| m.as_f64()).filter(|m| x > *m);
                if let Some(m) = below {
                    self.errors.push(Issue::new(at, IssueCode::OutOfBounds, format!("{n} is below minimum {m}")));
                } else if let Some(m) = above {
                    self.errors.push(Issue::new(at, IssueCode::OutOfBounds, format!("{n} is above maximum {m}")));
                }
            }
            Value::Object(map) => self.object(node, map, at),
            Value::Array(items) => {
                if let Some(elem) = self.node(node).element {
                    for (i, item) in items.iter().enumerate() {
                        self.value(elem, item, &path::index(at, i));
                    }
                    let elem_rule = self.node(elem).rule.expect("element rule");
                    if self.spec.rules[elem_rule].unique_by.is_some() {
                        self.unique.push((at.to_string(), elem));
                    }
                }
            }
            Value::Bool(_) | Value::Null => {}
        }
    }

    fn check_string(&self, rule_index: usize, s: &str, at: &str) -> Option<Issue> {
        let rule = &self.spec.rules[rule_index];
        if let Some(values) = &rule.enum_values {
            if !values.iter().any(|v| v == s) {
                return Some(Issue::new(
                    at,
                    IssueCode::OutOfDomain,
                    format!("{s:?} is not one of [{}]", values.join(", ")),
                ));
            }
        }
        let len = s.chars().count() as u64;
        if let Some(min) = rule.min_length.filter(|m| len < *m) {
            return Some(Issue::new(at, IssueCode::OutOfBounds, format!("length {len} is below {min}")));
        }
        if let Some(max) = rule.max_length.filter(|m| len > *m) {
            return Some(Issue::new(at, IssueCode::OutOfBounds, format!("length {len} exceeds {max}")));
        }
        if rule.ty == RuleType::Version && !version::is_valid(s) {
            return Some(Issue::new(at, IssueCode::PatternMismatch, format!("{s:?} is not a version string")));
        }
        if let Some(re) = &self.spec.patterns[rule_index] {
            if !re.is_match(s) {
                return Some(Issue::new(
                    at,
                    IssueCode::PatternMismatch,
                    format!("{s:?} does not match {}", re.as_str()),
                ));
            }
        }
        None
    }

    fn unique_checks(&mut self, document: &Value) {
        let pending = std::mem::take(&mut self.unique);
        let mut found = Vec::new();
        for (array_path, elem) in pending {
            let rule = &self.spec.rules[self.node(elem).rule.expect("element rule")];
            let fields = rule.unique_by.as_deref().unwrap_or_default();
            let Some(items) = path::get(document, &array_path).and_then(Value::as_array) else {
                continue;
            };
            let errored = Errored(&self.errors);
            let mut seen = HashSet::new();
            for (i, item) in items.iter().enumerate() {
                let item_path = path::index(&array_path, i);
                if fields.iter().any(|f| errored.touches(&path::join(&item_path, f))) {
                    continue;
                }
                let Some(obj) = item.as_object() else { continue };
                let key: Vec<String> = fields
                    .iter()
                    .map(|f| obj.get(f).map(|v| v.to_string()).unwrap_or_default())
                    .collect();
                if !seen.insert(key) {
                    let at = match fields {
                        [single] => path::join(&item_path, single),
                        _ => item_path,
                    };
                    found.push(Issue::new(
                        at,
                        IssueCode::Duplicate,
                        format!("duplicate ({}) within {array_path}", fields.join(", ")),
                    ));
                }
            }
        }
        self.errors.extend(found);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Kind;
    use crate::schema::{baseline, load_spec};
    use serde_json::json;

    fn frontera() -> Value {
        json!({
            "id": "frontera",
            "high_level": {"name": "Frontera", "hostname": "frontera.tacc.utexas.edu",
                           "owner": "TACC", "resource_type": "compute", "category": "hpc_cluster"},
            "hardware": {"cpu_architecture": "x86_64-cascadelake", "cores_per_node": 56,
                         "memory_per_node_gb": 192, "node_count": 8368},
            "scheduler": {"scheduler_type": "slurm", "scheduler_version": "20.11.8",
                          "queues": [{"name": "normal", "max_nodes": 512, "default": true},
                                     {"name": "development", "max_nodes": 40}]}
        })
    }

    fn check(doc: &Value) -> ValidationReport {
        validate_value(doc, baseline(Kind::Resource))
    }

    #[test]
    fn valid_fixture_is_clean() {
        let report = check(&frontera());
        assert!(report.valid, "{:?}", report.errors);
        assert!(report.errors.is_empty());
        assert_eq!(report.spec_version.to_string(), "1.0.0");
    }

    #[test]
    fn fork_with_queue_is_single_cross_field_error() {
        let mut doc = frontera();
        doc["scheduler"] = json!({"scheduler_type": "fork", "queues": [{"name": "normal"}]});
        let report = check(&doc);
        assert!(!report.valid);
        assert_eq!(report.errors.len(), 1, "{:?}", report.errors);
        assert_eq!(report.errors[0].path, "scheduler");
        assert_eq!(report.errors[0].code, IssueCode::CrossField);
    }

    #[test]
    fn collects_all_errors_sorted() {
        let mut doc = frontera();
        doc["id"] = json!("Not Valid");
        doc["hardware"]["cores_per_node"] = json!(0);
        doc["high_level"]["resource_type"] = json!("mainframe");
        doc["scheduler"]["queues"][1]["name"] = json!("normal");
        doc["extra"] = json!(1);
        let report = check(&doc);
        let got: Vec<(&str, IssueCode)> =
            report.errors.iter().map(|e| (e.path.as_str(), e.code)).collect();
        assert_eq!(
            got,
            vec![
                ("extra", IssueCode::UnknownKey),
                ("hardware.cores_per_node", IssueCode::OutOfBounds),
                ("high_level.resource_type", IssueCode::OutOfDomain),
                ("id", IssueCode::PatternMismatch),
                ("scheduler.queues[1].name", IssueCode::Duplicate),
            ]
        );
        assert_eq!(check(&doc), report);
    }

    #[test]
    fn wrong_type_blocks_descendants() {
        let mut doc = frontera();
        doc["high_level"] = json!(7);
        let report = check(&doc);
        assert_eq!(report.errors.len(), 1);
        assert_eq!(report.errors[0].path, "high_level");
        assert_eq!(report.errors[0].code, IssueCode::WrongType);
    }

    #[test]
    fn batch_compute_without_queues() {
        let mut doc = frontera();
        doc["scheduler"].as_object_mut().unwrap().remove("queues");
        let report = check(&doc);
        assert_eq!(report.errors.len(), 1);
        assert_eq!(report.errors[0].path, "scheduler.queues");
        assert_eq!(report.errors[0].code, IssueCode::CrossField);
    }

    #[test]
    fn non_object_document() {
        let report = check(&json!([1, 2]));
        assert_eq!(report.errors[0].path, "$");
        assert!(matches!(
            validate(b"{not json", baseline(Kind::Resource)),
            Err(SpecError::Syntax { .. })
        ));
    }

    #[test]
    fn deprecated_fields_warn() {
        let spec = load_spec(
            br#"{"kind":"resource","version":"1.0.1","rules":[
                {"path":"id","type":"string","required":true},
                {"path":"legacy","type":"string","deprecated":true}]}"#,
        )
        .unwrap();
        let report = validate_value(&json!({"id": "x", "legacy": "y"}), &spec);
        assert!(report.valid);
        assert_eq!(report.warnings.len(), 1);
        assert_eq!(report.warnings[0].code, IssueCode::Deprecated);
    }

    #[test]
    fn related_paths() {
        assert!(related("scheduler", "scheduler.queues[0]"));
        assert!(related("scheduler.queues[0].name", "scheduler.queues"));
        assert!(!related("scheduler.queues", "scheduler.queues_extra"));
        assert!(!related("hardware", "high_level"));
    }
}
