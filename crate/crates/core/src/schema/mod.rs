//! Versioned specification definitions and the validator that checks
//! description documents against them.
//!
//! A spec document is a canonical-JSON rule set:
//!
//! ```json
//! {"kind":"resource","version":"1.0.0",
//!  "rules":[{"path":"hardware.cores_per_node","type":"integer","minimum":1}, ...],
//!  "checks":["fork_has_no_queues", ...]}
//! ```
//!
//! Rule paths use `[]` for "every element of this array"
//! (`scheduler.queues[].name`). Every non-root rule needs a rule for its
//! parent: an `object` rule above a `.key` segment, an `array` rule above a
//! `[]` segment. `checks` names built-in cross-field checks.

mod catalog;
mod checks;
mod validate;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use regex::Regex;
use serde::{Deserialize, Serialize, Serializer};
use serde_json::{Number, Value};

use crate::canonical;
use crate::model::Kind;

pub use catalog::{baseline, SpecCatalog, SpecFile};
pub use checks::CrossCheck;
pub use validate::{validate, validate_value, Issue, IssueCode, ValidationReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpecVersion {
    pub major: u64,
    pub minor: u64,
    pub patch: u64,
}

impl SpecVersion {
    pub const fn new(major: u64, minor: u64, patch: u64) -> Self {
        SpecVersion {
            major,
            minor,
            patch,
        }
    }
}

impl fmt::Display for SpecVersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}.{}", self.major, self.minor, self.patch)
    }
}

impl FromStr for SpecVersion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split('.').collect();
        let num = |p: &str| -> Result<u64, String> {
            if p.is_empty() || !p.bytes().all(|b| b.is_ascii_digit()) || (p.len() > 1 && p.starts_with('0')) {
                return Err(format!("{s:?} is not MAJOR.MINOR.PATCH"));
            }
            p.parse().map_err(|_| format!("{s:?} is not MAJOR.MINOR.PATCH"))
        };
        match parts.as_slice() {
            [a, b, c] => Ok(SpecVersion::new(num(a)?, num(b)?, num(c)?)),
            _ => Err(format!("{s:?} is not MAJOR.MINOR.PATCH")),
        }
    }
}

impl Serialize for SpecVersion {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SpecVersion {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpecError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("malformed spec document: {0}")]
    Document(String),
    #[error("rule {index} ({path}): {message}")]
    Rule {
        index: usize,
        path: String,
        message: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleType {
    String,
    Integer,
    Number,
    Boolean,
    Object,
    Array,
    /// Non-empty string without whitespace, ordered by `compare_versions`.
    Version,
    /// A string, number or boolean, or an array of those.
    ScalarOrList,
}

impl RuleType {
    pub fn as_str(self) -> &'static str {
        match self {
            RuleType::String => "string",
            RuleType::Integer => "integer",
            RuleType::Number => "number",
            RuleType::Boolean => "boolean",
            RuleType::Object => "object",
            RuleType::Array => "array",
            RuleType::Version => "version",
            RuleType::ScalarOrList => "scalar_or_list",
        }
    }

    fn is_numeric(self) -> bool {
        matches!(self, RuleType::Integer | RuleType::Number)
    }

    fn is_textual(self) -> bool {
        matches!(self, RuleType::String | RuleType::Version)
    }
}

/// One per-path rule as written in the spec document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rule {
    pub path: String,
    #[serde(rename = "type")]
    pub ty: RuleType,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub required: bool,
    #[serde(default, rename = "enum", skip_serializing_if = "Option::is_none")]
    pub enum_values: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minimum: Option<Number>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maximum: Option<Number>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_length: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_length: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<String>,
    /// On an array-element rule: element fields whose combined values must be
    /// distinct across the array.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unique_by: Option<Vec<String>>,
    /// Present values produce a warning, never an error.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub deprecated: bool,
}

impl Rule {
    pub fn summary(&self) -> String {
        let mut parts = vec![self.ty.as_str().to_string()];
        parts.push(if self.required { "required" } else { "optional" }.to_string());
        if let Some(values) = &self.enum_values {
            parts.push(format!("one of [{}]", values.join(", ")));
        }
        if let Some(min) = &self.minimum {
            parts.push(format!(">= {min}"));
        }
        if let Some(max) = &self.maximum {
            parts.push(format!("<= {max}"));
        }
        if let Some(n) = self.min_length {
            parts.push(format!("min length {n}"));
        }
        if let Some(n) = self.max_length {
            parts.push(format!("max length {n}"));
        }
        if let Some(p) = &self.pattern {
            parts.push(format!("pattern {p}"));
        }
        if let Some(fields) = &self.unique_by {
            parts.push(format!("unique by ({})", fields.join(", ")));
        }
        if self.deprecated {
            parts.push("deprecated".to_string());
        }
        parts.join(", ")
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    kind: String,
    version: String,
    #[serde(default)]
    rules: Vec<Value>,
    #[serde(default)]
    checks: Vec<String>,
}

/// Rule tree node. The root (index 0) stands for the document object.
#[derive(Debug, Clone, Default)]
struct Node {
    rule: Option<usize>,
    fields: BTreeMap<String, usize>,
    element: Option<usize>,
}

/// An immutable, loaded spec.
#[derive(Debug, Clone)]
pub struct SpecDefinition {
    version: SpecVersion,
    kind: Kind,
    rules: Vec<Rule>,
    patterns: Vec<Option<Regex>>,
    checks: Vec<CrossCheck>,
    nodes: Vec<Node>,
    canonical: Vec<u8>,
}

impl PartialEq for SpecDefinition {
    fn eq(&self, other: &Self) -> bool {
        self.canonical == other.canonical
    }
}

/// One entry of [`list_rules`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RuleListing {
    pub path: String,
    pub required: bool,
    pub summary: String,
}

impl SpecDefinition {
    pub fn version(&self) -> SpecVersion {
        self.version
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn checks(&self) -> &[CrossCheck] {
        &self.checks
    }

    /// The spec document in canonical encoding.
    pub fn canonical_bytes(&self) -> &[u8] {
        &self.canonical
    }

    pub fn file_name(&self) -> String {
        format!("{}-spec-{}.json", self.kind, self.version)
    }

    pub fn rule(&self, path: &str) -> Option<&Rule> {
        self.rules.iter().find(|r| r.path == path)
    }

    /// Rule paths with the `[]` markers removed, as used by search clauses
    /// and matcher constraint keys (`scheduler.queues.max_nodes`).
    pub fn field_paths(&self) -> impl Iterator<Item = String> + '_ {
        self.rules
            .iter()
            .filter(|r| !r.path.ends_with("[]"))
            .map(|r| r.path.replace("[]", ""))
    }
}

fn valid_rule_path(path: &str) -> bool {
    !path.is_empty()
        && path.split('.').all(|seg| {
            let name = seg.strip_suffix("[]").unwrap_or(seg);
            let mut bytes = name.bytes();
            matches!(bytes.next(), Some(b'a'..=b'z'))
                && bytes.all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
        })
}

/// Splits a rule path into its parent path and the final step.
enum Step<'a> {
    Field(&'a str),
    Element,
}

fn split_parent(path: &str) -> (&str, Step<'_>) {
    if let Some(parent) = path.strip_suffix("[]") {
        return (parent, Step::Element);
    }
    match path.rfind('.') {
        Some(i) => (&path[..i], Step::Field(&path[i + 1..])),
        None => ("", Step::Field(path)),
    }
}

pub fn load_spec(spec_document: &[u8]) -> Result<SpecDefinition, SpecError> {
    let value: Value = serde_json::from_slice(spec_document).map_err(|e| SpecError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let raw: RawSpec =
        serde_json::from_value(value.clone()).map_err(|e| SpecError::Document(e.to_string()))?;
    let kind = Kind::from_str(&raw.kind).map_err(SpecError::Document)?;
    let version = SpecVersion::from_str(&raw.version).map_err(SpecError::Document)?;

    let mut rules = Vec::with_capacity(raw.rules.len());
    for (index, rule) in raw.rules.into_iter().enumerate() {
        let path = rule
            .get("path")
            .and_then(Value::as_str)
            .unwrap_or("")
            .to_string();
        let rule: Rule = serde_json::from_value(rule).map_err(|e| SpecError::Rule {
            index,
            path: path.clone(),
            message: e.to_string(),
        })?;
        rules.push(rule);
    }

    let checks = raw
        .checks
        .iter()
        .map(|name| {
            CrossCheck::from_str(name)
                .map_err(|_| SpecError::Document(format!("unknown check {name:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    for check in &checks {
        if check.kind() != kind {
            return Err(SpecError::Document(format!(
                "check {check} does not apply to {kind} documents"
            )));
        }
    }

    let (nodes, patterns) = build_tree(&rules)?;
    Ok(SpecDefinition {
        version,
        kind,
        rules,
        patterns,
        checks,
        nodes,
        canonical: canonical::to_vec(&value),
    })
}

type Tree = (Vec<Node>, Vec<Option<Regex>>);

fn build_tree(rules: &[Rule]) -> Result<Tree, SpecError> {
    let err = |index: usize, path: &str, message: String| SpecError::Rule {
        index,
        path: path.to_string(),
        message,
    };
    let mut by_path: BTreeMap<&str, usize> = BTreeMap::new();
    let mut patterns = Vec::with_capacity(rules.len());
    for (index, rule) in rules.iter().enumerate() {
        if !valid_rule_path(&rule.path) {
            return Err(err(index, &rule.path, "malformed path".into()));
        }
        if let Some(first) = by_path.insert(&rule.path, index) {
            return Err(err(index, &rule.path, format!("duplicate path (first defined by rule {first})")));
        }
        if rule.enum_values.is_some() && rule.ty != RuleType::String {
            return Err(err(index, &rule.path, "enum requires type string".into()));
        }
        if (rule.minimum.is_some() || rule.maximum.is_some()) && !rule.ty.is_numeric() {
            return Err(err(index, &rule.path, "bounds require a numeric type".into()));
        }
        if (rule.min_length.is_some() || rule.max_length.is_some() || rule.pattern.is_some())
            && !rule.ty.is_textual()
        {
            return Err(err(index, &rule.path, "length and pattern require a string type".into()));
        }
        if rule.unique_by.is_some() && !rule.path.ends_with("[]") {
            return Err(err(index, &rule.path, "unique_by applies to array-element rules".into()));
        }
        let pattern = match &rule.pattern {
            Some(p) => Some(
                Regex::new(p).map_err(|e| err(index, &rule.path, format!("bad pattern: {e}")))?,
            ),
            None => None,
        };
        patterns.push(pattern);
    }

    let mut nodes = vec![Node::default()];
    let mut node_of: BTreeMap<&str, usize> = BTreeMap::new();
    node_of.insert("", 0);
    // Parents sort before their children, so one ordered pass suffices.
    let mut ordered: Vec<(&str, usize)> = by_path.iter().map(|(p, i)| (*p, *i)).collect();
    ordered.sort_by_key(|(p, _)| (p.matches('.').count() + p.matches("[]").count(), *p));
    for (path, index) in ordered {
        let (parent, step) = split_parent(path);
        let Some(&parent_node) = node_of.get(parent) else {
            return Err(err(index, path, format!("no rule for parent path {parent:?}")));
        };
        let parent_ty = nodes[parent_node].rule.map(|r| rules[r].ty);
        let id = nodes.len();
        match step {
            Step::Field(name) => {
                if parent_node != 0 && parent_ty != Some(RuleType::Object) {
                    return Err(err(index, path, format!("parent {parent:?} is not an object")));
                }
                nodes[parent_node].fields.insert(name.to_string(), id);
            }
            Step::Element => {
                if parent_ty != Some(RuleType::Array) {
                    return Err(err(index, path, format!("parent {parent:?} is not an array")));
                }
                nodes[parent_node].element = Some(id);
            }
        }
        nodes.push(Node {
            rule: Some(index),
            ..Node::default()
        });
        node_of.insert(path, id);
    }

    for (index, rule) in rules.iter().enumerate() {
        if let Some(fields) = &rule.unique_by {
            let node = &nodes[node_of[rule.path.as_str()]];
            if let Some(missing) = fields.iter().find(|f| !node.fields.contains_key(*f)) {
                return Err(err(index, &rule.path, format!("unique_by field {missing:?} has no rule")));
            }
        }
    }
    Ok((nodes, patterns))
}

/// Path-sorted listing of every rule.
pub fn list_rules(spec: &SpecDefinition) -> Vec<RuleListing> {
    let mut out: Vec<RuleListing> = spec
        .rules
        .iter()
        .map(|r| RuleListing {
            path: r.path.clone(),
            required: r.required,
            summary: r.summary(),
        })
        .collect();
    out.sort_by(|a, b| a.path.cmp(&b.path));
    out
}
