use std::collections::BTreeMap;

use cireg_core::model::Kind;
use cireg_core::schema::baseline;
use cireg_core::store::{Clause, EntryStatus, EntryVersion, FilterQuery, Op, Selector, Store, StoreError};
use cireg_testkit::oracles::{self, Expected, RegistryOp, ReplayOracle};
use cireg_testkit::{gen, resource_fixtures};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};

fn doc_for(id: &str, content: u32) -> Vec<u8> {
    let doc = json!({
        "id": id,
        "high_level": {"name": format!("{id} v{content}"), "hostname": "h.example.org", "owner": "o", "resource_type": "storage"},
    });
    serde_json::to_vec(&doc).unwrap()
}

fn observe(store: &Store, op: &RegistryOp, contents: &mut BTreeMap<String, u32>) -> Expected {
    let spec = baseline(Kind::Resource);
    let tag = |payload: &[u8]| -> u32 {
        let v: Value = serde_json::from_slice(payload).unwrap();
        let name = v["high_level"]["name"].as_str().unwrap();
        name.rsplit('v').next().unwrap().parse().unwrap()
    };
    let result = match op {
        RegistryOp::Publish { id, content } => {
            contents.insert(id.clone(), *content);
            store
                .publish(Kind::Resource, id, &doc_for(id, *content), spec, None)
                .map(|o| (o.entry, o.created))
        }
        RegistryOp::Archive { id } => store.archive(Kind::Resource, id).map(|e| (e, false)),
        RegistryOp::GetLatest { id } => store.get(Kind::Resource, id, Selector::Latest).map(|e| (e, false)),
        RegistryOp::GetVersion { id, version } => match EntryVersion::new(*version) {
            None => Err(StoreError::NotFound {
                kind: Kind::Resource,
                id: id.clone(),
                version: None,
            }),
            Some(v) => store.get(Kind::Resource, id, Selector::Version(v)).map(|e| (e, false)),
        },
    };
    match result {
        Ok((entry, created)) => Expected::Entry {
            version: entry.version.get(),
            content: tag(&entry.payload),
            created,
        },
        Err(StoreError::NotFound { .. }) => Expected::NotFound,
        Err(StoreError::Archived { .. }) => Expected::Archived,
        Err(StoreError::AlreadyArchived { .. }) => Expected::AlreadyArchived,
        Err(other) => panic!("unexpected {other}"),
    }
}

#[test]
fn ten_thousand_ops_match_replay_oracle() {
    let mut rng = StdRng::seed_from_u64(3);
    let store = Store::in_memory();
    let mut oracle = ReplayOracle::default();
    let mut contents = BTreeMap::new();
    let ops = oracles::random_ops(&mut rng, 10_000, 40);
    for (i, op) in ops.iter().enumerate() {
        let want = oracle.apply(op);
        let got = observe(&store, op, &mut contents);
        assert_eq!(got, want, "op {i}: {op:?}");
    }
    for id in contents.keys() {
        let history = store.history(Kind::Resource, id).unwrap();
        let versions: Vec<u64> = history.iter().map(|e| e.version.get()).collect();
        assert_eq!(versions, (1..=history.len() as u64).collect::<Vec<_>>());
        assert_eq!(history.len(), oracle.history(id).len());
    }
    let active: Vec<String> = store
        .search(&FilterQuery::new(Kind::Resource, vec![]), baseline(Kind::Resource))
        .unwrap()
        .into_iter()
        .map(|h| h.id)
        .collect();
    assert_eq!(active, oracle.active_ids());
}

#[test]
fn replay_survives_reopen() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = StdRng::seed_from_u64(4);
    let ops = oracles::random_ops(&mut rng, 600, 15);
    let mut oracle = ReplayOracle::default();
    let mut contents = BTreeMap::new();
    let mut before = Vec::new();
    {
        let store = Store::open(dir.path()).unwrap();
        for op in &ops {
            assert_eq!(observe(&store, op, &mut contents), oracle.apply(op));
        }
        for id in contents.keys() {
            before.extend(store.history(Kind::Resource, id).unwrap());
        }
    }
    let store = Store::open(dir.path()).unwrap();
    let mut after = Vec::new();
    for id in contents.keys() {
        after.extend(store.history(Kind::Resource, id).unwrap());
    }
    assert_eq!(before, after);
}

fn random_clause<R: Rng>(rng: &mut R) -> (String, String, Option<Value>) {
    let choices: Vec<(&str, &str, Option<Value>)> = vec![
        ("high_level.resource_type", "eq", Some(json!(["compute", "storage"][rng.gen_range(0..2)]))),
        ("high_level.category", "eq", Some(json!(*gen::CATEGORIES.choose(rng).unwrap()))),
        ("high_level.category", "ne", Some(json!("hpc_cluster"))),
        ("scheduler.scheduler_type", "eq", Some(json!(*gen::SCHEDULERS.choose(rng).unwrap()))),
        ("scheduler.scheduler_type", "ne", Some(json!("fork"))),
        ("scheduler.queues.max_nodes", ["lt", "le", "gt", "ge"][rng.gen_range(0..4)], Some(json!(rng.gen_range(1..1024)))),
        ("scheduler.queues.name", "eq", Some(json!(*gen::QUEUE_NAMES.choose(rng).unwrap()))),
        ("scheduler.queues", "exists", None),
        ("hardware.cores_per_node", ["lt", "le", "gt", "ge"][rng.gen_range(0..4)], Some(json!(rng.gen_range(1..129)))),
        ("hardware.memory_per_node_gb", "ge", Some(json!(128))),
        ("hardware.storage_capacity_tb", "lt", Some(json!(500.5))),
        ("hardware.accelerators.model", "eq", Some(json!(*gen::ACCELERATORS.choose(rng).unwrap()))),
        ("hardware.accelerators", "exists", None),
        ("hardware.network_type", "contains", Some(json!(["infini", "net", "path"][rng.gen_range(0..3)]))),
        ("software.packages.name", "eq", Some(json!(*gen::PACKAGES.choose(rng).unwrap()))),
        ("software.packages.version", ["lt", "ge"][rng.gen_range(0..2)], Some(json!(format!("{}.{}", rng.gen_range(1..15), rng.gen_range(0..10))))),
        ("operating_system.kernel_version", "ge", Some(json!("5.0"))),
        ("operating_system.distribution", "eq", Some(json!(*gen::DISTRIBUTIONS.choose(rng).unwrap()))),
        ("high_level.name", "contains", Some(json!("r1"))),
        ("high_level.description", "exists", None),
    ];
    let (p, o, v) = choices.choose(rng).unwrap().clone();
    (p.to_string(), o.to_string(), v)
}

#[test]
fn search_equals_brute_force_scan() {
    let mut rng = StdRng::seed_from_u64(9);
    let store = Store::in_memory();
    let spec = baseline(Kind::Resource);
    let mut docs = Vec::new();
    for i in 0..1000 {
        let id = format!("r{i:04}");
        let doc = gen::resource(&mut rng, &id);
        store.publish(Kind::Resource, &id, &serde_json::to_vec(&doc).unwrap(), spec, None).unwrap();
        docs.push((id, doc, false));
    }
    for row in docs.iter_mut() {
        if rng.gen_bool(0.2) {
            store.archive(Kind::Resource, &row.0).unwrap();
            row.2 = true;
        }
    }
    for _ in 0..100 {
        let n = rng.gen_range(0..4);
        let clauses: Vec<_> = (0..n).map(|_| random_clause(&mut rng)).collect();
        let include_archived = rng.gen_bool(0.3);
        let want = oracles::scan(docs.iter().map(|(id, d, a)| (id.as_str(), d, *a)), &clauses, include_archived);
        let query = FilterQuery {
            kind: Kind::Resource,
            clauses: clauses
                .iter()
                .map(|(p, o, v)| Clause::new(p, o.parse::<Op>().unwrap(), v.clone()))
                .collect(),
            include_archived,
        };
        let got: Vec<String> = store.search(&query, spec).unwrap().into_iter().map(|h| h.id).collect();
        assert_eq!(got, want, "{clauses:?}");
    }
}

#[test]
fn slurm_compute_clusters_among_fixtures() {
    let store = Store::in_memory();
    let spec = baseline(Kind::Resource);
    for f in resource_fixtures() {
        store.publish(Kind::Resource, &f.id(), &f.bytes, spec, None).unwrap();
    }
    let query = FilterQuery::new(
        Kind::Resource,
        vec![
            Clause::new("high_level.resource_type", Op::Eq, Some(json!("compute"))),
            Clause::new("scheduler.scheduler_type", Op::Eq, Some(json!("slurm"))),
        ],
    );
    let ids: Vec<String> = store.search(&query, spec).unwrap().into_iter().map(|h| h.id).collect();
    assert_eq!(ids, ["frontera", "stampede2"]);
    let cuda = FilterQuery::new(
        Kind::Resource,
        vec![Clause::new("software.packages.version", Op::Ge, Some(json!("12.0")))],
    );
    let ids: Vec<String> = store.search(&cuda, spec).unwrap().into_iter().map(|h| h.id).collect();
    // Any package at 12.0 or later qualifies, whatever its name.
    assert_eq!(ids, ["cloud-batch", "frontera", "jetstream2-vm", "lab-workstation", "stampede2"]);
}

#[test]
fn archival_conserves_versions() {
    let mut rng = StdRng::seed_from_u64(12);
    let store = Store::in_memory();
    let spec = baseline(Kind::Resource);
    let mut ids = Vec::new();
    for i in 0..1000 {
        let id = format!("e{i:04}");
        let versions = rng.gen_range(1..4);
        for v in 0..versions {
            store.publish(Kind::Resource, &id, &doc_for(&id, v), spec, None).unwrap();
        }
        ids.push((id, versions));
    }
    let before = store.entry_count();
    ids.shuffle(&mut rng);
    let (archived, active) = ids.split_at(500);
    for (id, _) in archived {
        store.archive(Kind::Resource, id).unwrap();
    }
    assert_eq!(store.entry_count(), before);
    for (id, versions) in &ids {
        for v in 1..=*versions as u64 {
            let e = store.get(Kind::Resource, id, Selector::Version(EntryVersion::new(v).unwrap())).unwrap();
            assert_eq!(e.version.get(), v);
        }
    }
    let mut want: Vec<String> = active.iter().map(|(id, _)| id.clone()).collect();
    want.sort();
    let hits = store.search(&FilterQuery::new(Kind::Resource, vec![]), spec).unwrap();
    assert!(hits.iter().all(|h| h.status == EntryStatus::Active));
    assert_eq!(hits.into_iter().map(|h| h.id).collect::<Vec<_>>(), want);
}
