mod common;

use common::*;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};

fn json_out(o: &std::process::Output) -> Value {
    assert_eq!(o.status.code(), Some(0), "stderr: {}", stderr(o));
    serde_json::from_slice(&o.stdout).unwrap()
}

fn publish_fixtures(dir: &std::path::Path) {
    for f in cireg_testkit::valid_fixtures() {
        let path = cireg_testkit::fixture_path(&format!("{}s/{}.json", f.kind, f.name));
        let o = local(dir, &["publish", path.to_str().unwrap(), "--kind", f.kind]);
        assert_eq!(o.status.code(), Some(0), "{}: {}", f.name, stderr(&o));
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let frontera = fixture("resources/frontera.json");
    let fork = fixture("invalid/invalid-fork-with-queues.json");
    let cases: Vec<(Vec<&str>, i32)> = vec![
        (vec!["validate", &frontera, "--kind", "resource"], 0),
        (vec!["validate", &fork, "--kind", "resource"], 1),
        (vec!["validate", "/no/such/file.json", "--kind", "resource"], 2),
        (vec!["validate", &frontera, "--kind", "gadget"], 2),
        (vec!["publish", &frontera, "--kind", "resource"], 0),
        (vec!["publish", &fork, "--kind", "resource"], 1),
        (vec!["publish", &frontera, "--kind", "resource", "--expect-version", "7"], 1),
        (vec!["get", "resource", "frontera"], 0),
        (vec!["get", "resource", "nope"], 1),
        (vec!["get", "resource", "frontera", "--version", "x"], 2),
        (vec!["search", "resource", "--where", "scheduler.scheduler_type:eq:slurm"], 0),
        (vec!["search", "resource", "--where", "no.such.path:eq:1"], 1),
        (vec!["search", "resource", "--where", "scheduler.scheduler_type"], 2),
        (vec!["search", "resource", "--where", "scheduler.scheduler_type:near:x"], 2),
        (vec!["archive", "resource", "frontera"], 0),
        (vec!["archive", "resource", "frontera"], 1),
        (vec!["history", "resource", "frontera"], 0),
        (vec!["frobnicate"], 2),
    ];
    for (args, want) in cases {
        let o = local(d, &args);
        assert_eq!(o.status.code(), Some(want), "{args:?}: {}", stderr(&o));
    }
    let o = cireg(&["--data-dir", "/tmp/x", "--endpoint", "http://127.0.0.1:1", "get", "resource", "a"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(cireg(&["--help"]).status.code(), Some(0));
}

#[test]
fn validate_reports_cross_field_on_stdout() {
    let o = cireg(&["validate", &fixture("invalid/invalid-fork-with-queues.json"), "--kind", "resource"]);
    assert_eq!(o.status.code(), Some(1));
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["valid"], false);
    assert_eq!(report["errors"][0]["path"], "scheduler");
    assert_eq!(report["errors"][0]["code"], "cross_field");
    for f in cireg_testkit::valid_fixtures() {
        let path = cireg_testkit::fixture_path(&format!("{}s/{}.json", f.kind, f.name));
        let o = cireg(&["validate", path.to_str().unwrap(), "--kind", f.kind]);
        assert_eq!(json_out(&o)["valid"], true, "{}", f.name);
    }
}

#[test]
fn publish_get_archive_history() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let published = json_out(&local(d, &["publish", &fixture("resources/frontera.json"), "--kind", "resource"]));
    assert_eq!(published["created"], true);
    assert_eq!(published["version"], 1);
    let again = json_out(&local(d, &["publish", &fixture("resources/frontera.json"), "--kind", "resource"]));
    assert_eq!(again["created"], false);
    assert_eq!(again["content_hash"], published["content_hash"]);

    let got = json_out(&local(d, &["get", "resource", "frontera"]));
    assert_eq!(got["content_hash"], published["content_hash"]);
    let raw = std::fs::read(fixture("resources/frontera.json")).unwrap();
    let canonical = cireg_core::model::canonicalize(cireg_core::model::Kind::Resource, &raw).unwrap();
    assert_eq!(got["payload"], serde_json::from_slice::<Value>(&canonical).unwrap());
    let original: Value = serde_json::from_slice(&raw).unwrap();

    let mut changed = original.clone();
    changed["high_level"]["description"] = "refreshed".into();
    let file = dir.path().join("v2.json");
    std::fs::write(&file, serde_json::to_vec(&changed).unwrap()).unwrap();
    let v2 = json_out(&local(d, &["publish", file.to_str().unwrap(), "--kind", "resource", "--expect-version", "1"]));
    assert_eq!(v2["version"], 2);

    json_out(&local(d, &["archive", "resource", "frontera"]));
    let o = local(d, &["get", "resource", "frontera"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("Archived:"), "{}", stderr(&o));
    let old = json_out(&local(d, &["get", "resource", "frontera", "--version", "1"]));
    assert_eq!(old["content_hash"], published["content_hash"]);

    let table = local(d, &["--output", "table", "history", "resource", "frontera"]);
    let text = stdout(&table);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2, "{text}");
    assert!(lines[0].contains("\tv1\t") && lines[1].contains("\tv2\t"));
    assert!(lines[1].contains("archived"));
}

#[test]
fn fixture_search_and_match() {
    let dir = tempfile::tempdir().unwrap();
    publish_fixtures(dir.path());
    let hits = json_out(&local(
        dir.path(),
        &[
            "search",
            "resource",
            "--where",
            "scheduler.scheduler_type:eq:slurm",
            "--where",
            "high_level.resource_type:eq:compute",
        ],
    ));
    let ids: Vec<&str> = hits.as_array().unwrap().iter().map(|h| h["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["frontera", "stampede2"]);

    let app = dir.path().join("bare.json");
    std::fs::write(&app, r#"{"id":"bare","high_level":{"name":"bare","app_type":"command_line_batch"}}"#).unwrap();
    let outcome = json_out(&local(dir.path(), &["match", app.to_str().unwrap()]));
    let results = outcome["results"].as_array().unwrap();
    assert_eq!(results.len(), cireg_testkit::resource_fixtures().len());
    assert!(results.iter().all(|r| r["compatible"] == true && r["score"] == 1.0));

    let by_id = json_out(&local(dir.path(), &["match", "--app-id", "fastqc", "--compatible-only"]));
    let ids: Vec<&str> = by_id["results"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["resource_id"].as_str().unwrap())
        .collect();
    assert_eq!(ids, ["campus-hpc", "frontera", "jetstream2-vm"]);
}

#[test]
fn json_output_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    publish_fixtures(dir.path());
    for args in [
        vec!["get", "resource", "stampede2"],
        vec!["history", "application", "fastqc"],
        vec!["search", "resource"],
        vec!["match", "--app-id", "jupyter-gpu"],
    ] {
        let a = local(dir.path(), &args);
        let b = local(dir.path(), &args);
        assert_eq!(a.status.code(), Some(0));
        assert_eq!(a.stdout, b.stdout, "{args:?}");
        let value: Value = serde_json::from_slice(&a.stdout).unwrap();
        let mut canonical = cireg_core::canonical::to_vec(&value);
        canonical.push(b'\n');
        assert_eq!(a.stdout, canonical);
    }
}

#[test]
fn read_commands_on_missing_dir_create_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("never");
    let o = local(&missing, &["search", "resource"]);
    assert_eq!(json_out(&o), json!([]));
    assert_eq!(local(&missing, &["get", "resource", "x"]).status.code(), Some(1));
    assert!(!missing.exists());
}

#[test]
fn local_and_remote_print_the_same_bytes() {
    let scratch = tempfile::tempdir().unwrap();
    let original = scratch.path().join("a");
    publish_fixtures(&original);
    local(&original, &["archive", "resource", "corral"]);
    let replica = scratch.path().join("b");
    copy_dir(&original, &replica);
    let served = Served::start(scratch.path(), &replica);
    for args in [
        vec!["get", "resource", "frontera"],
        vec!["get", "resource", "corral"],
        vec!["get", "resource", "corral", "--version", "1"],
        vec!["history", "resource", "corral"],
        vec!["search", "resource"],
        vec!["search", "resource", "--include-archived"],
        vec!["search", "resource", "--where", "hardware.accelerators:exists"],
        vec!["match", "--app-id", "fastqc"],
        vec!["match", &fixture("applications/jupyter-gpu.json"), "--compatible-only"],
        vec!["validate", &fixture("invalid/invalid-fork-with-queues.json"), "--kind", "resource"],
        vec!["--output", "table", "match", "--app-id", "jupyter-gpu"],
    ] {
        let l = local(&original, &args);
        let r = remote(&served.endpoint, &args);
        assert_eq!(l.status.code(), r.status.code(), "{args:?}: {}", stderr(&r));
        assert_eq!(stdout(&l), stdout(&r), "{args:?}");
        assert_eq!(stderr(&l), stderr(&r), "{args:?}");
    }
}

#[test]
fn remote_writes_follow_the_same_rules() {
    let scratch = tempfile::tempdir().unwrap();
    let data = scratch.path().join("data");
    let served = Served::start(scratch.path(), &data);
    let frontera = fixture("resources/frontera.json");
    let mask = |mut v: Value| {
        v.as_object_mut().unwrap().remove("published_at");
        v
    };
    let local_dir = scratch.path().join("local");
    let steps: Vec<Vec<&str>> = vec![
        vec!["publish", &frontera, "--kind", "resource"],
        vec!["publish", &frontera, "--kind", "resource"],
        vec!["archive", "resource", "frontera"],
        vec!["publish", &frontera, "--kind", "resource"],
    ];
    for args in &steps {
        let r = remote(&served.endpoint, args);
        let l = local(&local_dir, args);
        assert_eq!(mask(json_out(&r)), mask(json_out(&l)), "{args:?}");
    }
    // Writes require the token.
    let o = cireg(&["--endpoint", &served.endpoint, "archive", "resource", "frontera"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("Unauthorized:"));
}

fn random_where<R: Rng>(rng: &mut R) -> (String, Value) {
    let picks: Vec<(&str, &str, Option<Value>)> = vec![
        ("high_level.category", "eq", Some(json!(*cireg_testkit::gen::CATEGORIES.choose(rng).unwrap()))),
        ("scheduler.scheduler_type", "ne", Some(json!(*cireg_testkit::gen::SCHEDULERS.choose(rng).unwrap()))),
        ("hardware.cores_per_node", ["lt", "ge"][rng.gen_range(0..2)], Some(json!(rng.gen_range(1..129)))),
        ("scheduler.queues.max_nodes", "gt", Some(json!(rng.gen_range(1..512)))),
        ("software.packages.name", "eq", Some(json!(*cireg_testkit::gen::PACKAGES.choose(rng).unwrap()))),
        ("hardware.accelerators", "exists", None),
        ("hardware.network_type", "contains", Some(json!("band"))),
    ];
    let (path, op, value) = picks.choose(rng).unwrap().clone();
    let text = match &value {
        None => format!("{path}:{op}"),
        Some(Value::String(s)) => format!("{path}:{op}:{s}"),
        Some(v) => format!("{path}:{op}:{v}"),
    };
    let mut wire = json!({"path": path, "op": op});
    if let Some(v) = value {
        wire["value"] = v;
    }
    (text, wire)
}

#[test]
fn cli_search_equals_service_search() {
    let scratch = tempfile::tempdir().unwrap();
    let original = scratch.path().join("a");
    let mut rng = StdRng::seed_from_u64(41);
    {
        let store = cireg_core::store::Store::open(&original).unwrap();
        let spec = cireg_core::schema::baseline(cireg_core::model::Kind::Resource);
        for i in 0..400 {
            let id = format!("r{i:03}");
            let doc = cireg_testkit::gen::resource(&mut rng, &id);
            store
                .publish(cireg_core::model::Kind::Resource, &id, &serde_json::to_vec(&doc).unwrap(), spec, None)
                .unwrap();
            if i % 7 == 0 {
                store.archive(cireg_core::model::Kind::Resource, &id).unwrap();
            }
        }
    }
    let replica = scratch.path().join("b");
    copy_dir(&original, &replica);
    let served = Served::start(scratch.path(), &replica);
    let agent = agent();
    for _ in 0..50 {
        let n = rng.gen_range(0..4);
        let (texts, wires): (Vec<String>, Vec<Value>) = (0..n).map(|_| random_where(&mut rng)).unzip();
        let include_archived = rng.gen_bool(0.2);
        let mut args = vec!["search".to_string(), "resource".to_string()];
        for t in &texts {
            args.push("--where".into());
            args.push(t.clone());
        }
        if include_archived {
            args.push("--include-archived".into());
        }
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let cli = json_out(&local(&original, &args));
        let body = json!({"clauses": wires, "include_archived": include_archived, "limit": 1000});
        let mut resp = agent
            .post(&format!("{}/v1/resources/search", served.endpoint))
            .content_type("application/json")
            .send(serde_json::to_vec(&body).unwrap())
            .unwrap();
        assert_eq!(resp.status().as_u16(), 200);
        let page: Value = serde_json::from_slice(&resp.body_mut().read_to_vec().unwrap()).unwrap();
        assert!(page["next_cursor"].is_null());
        assert_eq!(cli, page["results"], "{texts:?}");
    }
}

#[test]
fn serve_answers_and_stops_on_sigterm() {
    let scratch = tempfile::tempdir().unwrap();
    let data = scratch.path().join("data");
    let served = Served::start(scratch.path(), &data);
    let mut health = agent().get(&format!("{}/v1/health", served.endpoint)).call().unwrap();
    assert_eq!(health.status().as_u16(), 200);
    let body: Value = serde_json::from_slice(&health.body_mut().read_to_vec().unwrap()).unwrap();
    assert_eq!(body["status"], "ok");
    let o = remote(&served.endpoint, &["publish", &fixture("resources/corral.json"), "--kind", "resource"]);
    assert_eq!(json_out(&o)["version"], 1);
    let status = served.terminate();
    assert!(status.success(), "{status:?}");
    let got = json_out(&local(&data, &["get", "resource", "corral"]));
    assert_eq!(got["version"], 1);
}

#[test]
fn serve_refuses_occupied_port_and_bad_config() {
    let scratch = tempfile::tempdir().unwrap();
    let holder = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = holder.local_addr().unwrap().port();
    let data = scratch.path().join("data");
    let config = scratch.path().join("busy.toml");
    std::fs::write(&config, format!("bind = \"127.0.0.1:{port}\"\ndata_dir = {:?}\n", data.to_str().unwrap())).unwrap();
    let o = cireg(&["serve", "--config", config.to_str().unwrap()]);
    assert_ne!(o.status.code(), Some(0));
    assert!(!data.exists());

    let bad = scratch.path().join("bad.toml");
    std::fs::write(&bad, "bind = 17\n").unwrap();
    assert_eq!(cireg(&["serve", "--config", bad.to_str().unwrap()]).status.code(), Some(2));
    std::fs::write(&bad, "colour = \"blue\"\n").unwrap();
    assert_eq!(cireg(&["search", "resource", "--config", bad.to_str().unwrap()]).status.code(), Some(2));
    std::fs::write(&bad, "[client]\nendpoint = 3\n").unwrap();
    assert_eq!(cireg(&["search", "resource", "--config", bad.to_str().unwrap()]).status.code(), Some(2));
    std::fs::write(&bad, format!("spec_dir = {:?}\n", scratch.path().join("nospecs").to_str().unwrap())).unwrap();
    assert_eq!(cireg(&["serve", "--config", bad.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn client_table_supplies_endpoint_and_output() {
    let scratch = tempfile::tempdir().unwrap();
    let data = scratch.path().join("data");
    let served = Served::start(scratch.path(), &data);
    let config = scratch.path().join("client.toml");
    std::fs::write(
        &config,
        format!("[client]\nendpoint = {:?}\ntoken = \"test-token\"\noutput = \"table\"\n", served.endpoint),
    )
    .unwrap();
    let c = config.to_str().unwrap();
    let o = cireg(&["--config", c, "publish", &fixture("resources/corral.json"), "--kind", "resource"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("created\tresource\tcorral\tv1\t"));
    let o = cireg(&["--config", c, "--output", "json", "search", "resource"]);
    assert_eq!(json_out(&o)[0]["id"], "corral");
}
