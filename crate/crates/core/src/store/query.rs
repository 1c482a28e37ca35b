use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::model::{compare_versions, version, Kind};
use crate::schema::SpecDefinition;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Op {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Contains,
    Exists,
}

impl Op {
    pub const ALL: &'static [Op] = &[Op::Eq, Op::Ne, Op::Lt, Op::Le, Op::Gt, Op::Ge, Op::Contains, Op::Exists];

    pub fn as_str(self) -> &'static str {
        match self {
            Op::Eq => "eq",
            Op::Ne => "ne",
            Op::Lt => "lt",
            Op::Le => "le",
            Op::Gt => "gt",
            Op::Ge => "ge",
            Op::Contains => "contains",
            Op::Exists => "exists",
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Op {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Op::ALL
            .iter()
            .copied()
            .find(|o| o.as_str() == s)
            .ok_or_else(|| format!("unknown operator {s:?}"))
    }
}

/// One condition of a search. Paths name fields with dots, without array
/// markers (`scheduler.queues.name`); a clause holds if any value reached
/// through the path's arrays satisfies it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Clause {
    pub path: String,
    pub op: Op,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<Value>,
}

impl Clause {
    pub fn new(path: impl Into<String>, op: Op, value: Option<Value>) -> Self {
        Clause {
            path: path.into(),
            op,
            value,
        }
    }

    /// Parses `path:op[:value]`. The value is read as a JSON number or
    /// boolean when it is one, as a string otherwise; a JSON string literal
    /// (`"48"`) forces a string.
    pub fn parse(text: &str) -> Result<Clause, QueryError> {
        let mut parts = text.splitn(3, ':');
        let path = parts.next().unwrap_or_default();
        let op = parts
            .next()
            .ok_or_else(|| QueryError::new(text, "expected path:op[:value]"))?;
        let op: Op = op.parse().map_err(|e: String| QueryError::new(path, e))?;
        let value = match parts.next() {
            None | Some("") if op == Op::Exists => None,
            None => None,
            Some(raw) => Some(match serde_json::from_str::<Value>(raw) {
                Ok(v @ (Value::Number(_) | Value::Bool(_) | Value::String(_))) => v,
                _ => Value::String(raw.to_string()),
            }),
        };
        Ok(Clause::new(path, op, value))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterQuery {
    pub kind: Kind,
    pub clauses: Vec<Clause>,
    pub include_archived: bool,
}

impl FilterQuery {
    pub fn new(kind: Kind, clauses: Vec<Clause>) -> Self {
        FilterQuery {
            kind,
            clauses,
            include_archived: false,
        }
    }

    pub(super) fn compile(&self, spec: &SpecDefinition) -> Result<Compiled, QueryError> {
        let known: std::collections::HashSet<String> = spec.field_paths().collect();
        let clauses = self
            .clauses
            .iter()
            .map(|c| compile_clause(c, &known))
            .collect::<Result<_, _>>()?;
        Ok(Compiled { clauses })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("query clause on {path:?}: {message}")]
pub struct QueryError {
    pub path: String,
    pub message: String,
}

impl QueryError {
    fn new(path: &str, message: impl Into<String>) -> Self {
        QueryError {
            path: path.to_string(),
            message: message.into(),
        }
    }
}

fn is_segment(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
}

enum Operand {
    None,
    Scalar(Value),
    Num(f64),
    Version(String),
    Text(String),
}

struct CompiledClause {
    path: String,
    segments: Vec<String>,
    op: Op,
    operand: Operand,
}

pub(super) struct Compiled {
    clauses: Vec<CompiledClause>,
}

fn compile_clause(c: &Clause, known: &std::collections::HashSet<String>) -> Result<CompiledClause, QueryError> {
    let err = |m: &str| QueryError::new(&c.path, m);
    if !c.path.split('.').all(is_segment) {
        return Err(err("malformed path"));
    }
    if !known.contains(&c.path) {
        return Err(err("no such field"));
    }
    let operand = match (c.op, &c.value) {
        (Op::Exists, None) => Operand::None,
        (Op::Exists, Some(_)) => return Err(err("exists takes no value")),
        (Op::Eq | Op::Ne, Some(v @ (Value::String(_) | Value::Number(_) | Value::Bool(_)))) => {
            Operand::Scalar(v.clone())
        }
        (Op::Eq | Op::Ne, _) => return Err(err("eq and ne take a string, number or boolean")),
        (Op::Lt | Op::Le | Op::Gt | Op::Ge, Some(Value::Number(n))) => {
            Operand::Num(n.as_f64().expect("JSON numbers are finite"))
        }
        (Op::Lt | Op::Le | Op::Gt | Op::Ge, Some(Value::String(s))) if version::is_valid(s) => {
            Operand::Version(s.clone())
        }
        (Op::Lt | Op::Le | Op::Gt | Op::Ge, _) => {
            return Err(err("ordering operators take a number or a version string"))
        }
        (Op::Contains, Some(Value::String(s))) => Operand::Text(s.clone()),
        (Op::Contains, _) => return Err(err("contains takes a string")),
    };
    Ok(CompiledClause {
        path: c.path.clone(),
        segments: c.path.split('.').map(str::to_string).collect(),
        op: c.op,
        operand,
    })
}

/// Everything reachable through `segments`, flattening arrays at every step
/// including the last.
fn leaves<'a>(v: &'a Value, segments: &[String], out: &mut Vec<&'a Value>) {
    match v {
        Value::Array(items) => items.iter().for_each(|i| leaves(i, segments, out)),
        _ => match segments.split_first() {
            None => out.push(v),
            Some((head, rest)) => {
                if let Some(child) = v.get(head.as_str()) {
                    leaves(child, rest, out)
                }
            }
        },
    }
}

fn scalar_eq(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => x.as_f64() == y.as_f64(),
        (Value::String(x), Value::String(y)) => x == y,
        (Value::Bool(x), Value::Bool(y)) => x == y,
        _ => false,
    }
}

fn is_scalar(v: &Value) -> bool {
    matches!(v, Value::String(_) | Value::Number(_) | Value::Bool(_))
}

impl CompiledClause {
    fn holds(&self, leaf: &Value) -> bool {
        let ordered = |o: Ordering| match self.op {
            Op::Lt => o == Ordering::Less,
            Op::Le => o != Ordering::Greater,
            Op::Gt => o == Ordering::Greater,
            Op::Ge => o != Ordering::Less,
            _ => false,
        };
        match &self.operand {
            Operand::None => true,
            Operand::Scalar(v) if self.op == Op::Eq => scalar_eq(leaf, v),
            Operand::Scalar(v) => is_scalar(leaf) && !scalar_eq(leaf, v),
            Operand::Num(n) => leaf
                .as_f64()
                .and_then(|x| x.partial_cmp(n))
                .is_some_and(ordered),
            Operand::Version(want) => leaf
                .as_str()
                .and_then(|s| compare_versions(s, want).ok())
                .is_some_and(ordered),
            Operand::Text(t) => leaf.as_str().is_some_and(|s| s.contains(t.as_str())),
        }
    }
}

impl Compiled {
    pub fn matches(&self, doc: &Value) -> bool {
        let mut found = Vec::new();
        self.clauses.iter().all(|c| {
            found.clear();
            leaves(doc, &c.segments, &mut found);
            found.iter().any(|leaf| c.holds(leaf))
        })
    }

    /// A string equality clause on an indexed field, if any.
    pub fn indexed_eq(&self, indexed: &[(Kind, &'static str)], kind: Kind) -> Option<(&'static str, &str)> {
        self.clauses.iter().find_map(|c| {
            let Operand::Scalar(Value::String(v)) = &c.operand else {
                return None;
            };
            if c.op != Op::Eq {
                return None;
            }
            indexed
                .iter()
                .find(|(k, f)| *k == kind && *f == c.path)
                .map(|(_, f)| (*f, v.as_str()))
        })
    }
}
