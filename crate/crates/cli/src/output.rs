//! Table rendering. JSON output is the canonical encoding and needs no help.

use serde_json::Value;

fn s(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => "-".into(),
        other => other.to_string(),
    }
}

fn meta_line(m: &Value) -> String {
    format!(
        "{}\t{}\tv{}\t{}\t{}\tspec {}\t{}",
        s(&m["kind"]),
        s(&m["id"]),
        s(&m["version"]),
        s(&m["status"]),
        s(&m["content_hash"]),
        s(&m["spec_version"]),
        s(&m["published_at"]),
    )
}

pub fn report(r: &Value) -> String {
    let mut out = format!(
        "{} (spec {})\n",
        if r["valid"] == true { "valid" } else { "invalid" },
        s(&r["spec_version"])
    );
    for (label, key) in [("error", "errors"), ("warning", "warnings")] {
        for issue in r[key].as_array().into_iter().flatten() {
            out.push_str(&format!(
                "{label}\t{}\t{}\t{}\n",
                s(&issue["path"]),
                s(&issue["code"]),
                s(&issue["message"])
            ));
        }
    }
    out
}

pub fn published(m: &Value) -> String {
    let what = if m["created"] == true { "created" } else { "unchanged" };
    format!("{what}\t{}\n", meta_line(m))
}

pub fn meta(m: &Value) -> String {
    format!("{}\n", meta_line(m))
}

pub fn entry(e: &Value) -> String {
    format!(
        "{}\n{}\n",
        meta_line(e),
        serde_json::to_string_pretty(&e["payload"]).expect("JSON values print")
    )
}

pub fn history(versions: &Value) -> String {
    versions.as_array().into_iter().flatten().map(meta).collect()
}

pub fn hits(hits: &Value) -> String {
    hits.as_array()
        .into_iter()
        .flatten()
        .map(|h| {
            let summary: Vec<String> = h["summary"]
                .as_object()
                .into_iter()
                .flatten()
                .map(|(k, v)| format!("{k}={}", s(v)))
                .collect();
            format!("{}\tv{}\t{}\t{}\n", s(&h["id"]), s(&h["version"]), s(&h["status"]), summary.join(" "))
        })
        .collect()
}

pub fn matches(outcome: &Value) -> String {
    let mut out = String::new();
    for (rank, r) in outcome["results"].as_array().into_iter().flatten().enumerate() {
        out.push_str(&format!(
            "{}\t{}\tv{}\t{}\tscore {:.3}\n",
            rank + 1,
            s(&r["resource_id"]),
            s(&r["resource_version"]),
            if r["compatible"] == true { "compatible" } else { "incompatible" },
            r["score"].as_f64().unwrap_or(0.0),
        ));
        for c in r["constraint_results"].as_array().into_iter().flatten() {
            let con = &c["constraint"];
            out.push_str(&format!(
                "\t{}\t{}.{} {}{}\t{}\n",
                if c["satisfied"] == true { "ok" } else { "FAIL" },
                s(&con["category"]),
                s(&con["key"]),
                s(&con["predicate"]),
                if con["preferred"] == true { " (preferred)" } else { "" },
                s(&c["reason"]),
            ));
        }
    }
    out
}
