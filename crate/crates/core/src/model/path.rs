//! Concrete document paths: dot-separated keys with `[n]` array indices,
//! e.g. `scheduler.queues[0].max_nodes`.

use serde_json::{Map, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Segment {
    Key(String),
    Index(usize),
}

pub fn join(parent: &str, key: &str) -> String {
    if parent.is_empty() {
        key.to_string()
    } else {
        format!("{parent}.{key}")
    }
}

pub fn index(parent: &str, i: usize) -> String {
    format!("{parent}[{i}]")
}

/// Keys that can appear inside a path without escaping.
pub fn is_plain_key(key: &str) -> bool {
    !key.is_empty()
        && key
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
}

pub fn parse(path: &str) -> Option<Vec<Segment>> {
    let mut out = Vec::new();
    for part in path.split('.') {
        let (key, mut rest) = match part.find('[') {
            Some(i) => (&part[..i], &part[i..]),
            None => (part, ""),
        };
        if !is_plain_key(key) {
            return None;
        }
        out.push(Segment::Key(key.to_string()));
        while !rest.is_empty() {
            let close = rest.find(']')?;
            if !rest.starts_with('[') {
                return None;
            }
            out.push(Segment::Index(rest[1..close].parse().ok()?));
            rest = &rest[close + 1..];
        }
    }
    Some(out)
}

/// Looks up a concrete path. `$` and the empty path address the root.
pub fn get<'a>(root: &'a Value, path: &str) -> Option<&'a Value> {
    if path.is_empty() || path == "$" {
        return Some(root);
    }
    let mut cur = root;
    for seg in parse(path)? {
        cur = match seg {
            Segment::Key(k) => cur.as_object()?.get(&k)?,
            Segment::Index(i) => cur.as_array()?.get(i)?,
        };
    }
    Some(cur)
}

/// Writes `value` at `path`, creating intermediate objects as needed.
/// Array positions must already exist.
pub fn insert(root: &mut Value, path: &str, value: Value) {
    let Some(segs) = parse(path) else { return };
    let Some((last, init)) = segs.split_last() else {
        return;
    };
    let mut cur = root;
    for seg in init {
        cur = match seg {
            Segment::Key(k) => {
                if !cur.is_object() {
                    *cur = Value::Object(Map::new());
                }
                cur.as_object_mut()
                    .expect("object")
                    .entry(k.clone())
                    .or_insert_with(|| Value::Object(Map::new()))
            }
            Segment::Index(i) => match cur.as_array_mut().and_then(|a| a.get_mut(*i)) {
                Some(v) => v,
                None => return,
            },
        };
    }
    match last {
        Segment::Key(k) => {
            if let Some(obj) = cur.as_object_mut() {
                obj.insert(k.clone(), value);
            }
        }
        Segment::Index(i) => {
            if let Some(slot) = cur.as_array_mut().and_then(|a| a.get_mut(*i)) {
                *slot = value;
            }
        }
    }
}
