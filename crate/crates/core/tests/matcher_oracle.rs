use std::collections::BTreeSet;

use cireg_core::matcher::{evaluate_constraint, match_application, match_resources, match_views};
use cireg_core::model::{parse_application, parse_resource, ApplicationDescription, Constraint, Kind, ResourceDescription};
use cireg_core::schema::baseline;
use cireg_core::store::{EntryVersion, Store};
use cireg_testkit::{application_fixtures, gen, oracles, resource_fixtures};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::Value;

fn resources(rng: &mut StdRng, n: usize) -> Vec<(String, Value, ResourceDescription)> {
    (0..n)
        .map(|i| {
            let id = format!("r{i:04}");
            let doc = gen::resource(rng, &id);
            let parsed = parse_resource(&serde_json::to_vec(&doc).unwrap()).unwrap();
            (id, doc, parsed)
        })
        .collect()
}

fn app(doc: &Value) -> ApplicationDescription {
    parse_application(&serde_json::to_vec(doc).unwrap()).unwrap()
}

#[test]
fn random_pairs_match_straight_line_evaluator() {
    let mut rng = StdRng::seed_from_u64(21);
    let pool = resources(&mut rng, 100);
    for _ in 0..500 {
        let c_json = gen::constraint(&mut rng);
        let c: Constraint = {
            let mut a = serde_json::json!({"id": "a", "high_level": {"name": "a", "app_type": "interactive"}});
            a["software_dependencies"] = serde_json::json!([c_json.clone()]);
            app(&a).software_dependencies.unwrap().remove(0)
        };
        let (_, r_json, r) = &pool[rng.gen_range(0..pool.len())];
        let got = evaluate_constraint(&c, r).unwrap();
        assert_eq!(got.satisfied, oracles::constraint_satisfied(r_json, &c_json), "{c_json} vs {r_json}");
        assert!(!got.reason.is_empty());
    }
}

#[test]
fn hundred_apps_over_thousand_resources() {
    let mut rng = StdRng::seed_from_u64(22);
    let pool = resources(&mut rng, 1000);
    let oracle_rows: Vec<(&str, &Value)> = pool.iter().map(|(id, v, _)| (id.as_str(), v)).collect();
    for i in 0..100 {
        let a_json = gen::application(&mut rng, &format!("a{i}"), 10);
        let want = oracles::match_all_pairs(&a_json, &oracle_rows);
        let got = match_resources(&app(&a_json), pool.iter().map(|(_, _, r)| (r, EntryVersion::FIRST)), false).unwrap();
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(&want) {
            assert_eq!(g.resource_id, w.resource_id, "app {a_json}");
            assert_eq!(g.compatible, w.compatible);
            assert_eq!(g.score, w.score);
            let sat: Vec<bool> = g.constraint_results.iter().map(|c| c.satisfied).collect();
            assert_eq!(sat, w.satisfied);
        }
        let only = match_resources(&app(&a_json), pool.iter().map(|(_, _, r)| (r, EntryVersion::FIRST)), true).unwrap();
        assert!(only.iter().all(|r| r.compatible));
        assert_eq!(only.len(), want.iter().filter(|w| w.compatible).count());
    }
}

#[test]
fn dropping_a_required_constraint_never_shrinks_compatibility() {
    let mut rng = StdRng::seed_from_u64(23);
    let pool = resources(&mut rng, 200);
    let compatible = |a: &ApplicationDescription| -> BTreeSet<String> {
        match_resources(a, pool.iter().map(|(_, _, r)| (r, EntryVersion::FIRST)), true)
            .unwrap()
            .into_iter()
            .map(|m| m.resource_id)
            .collect()
    };
    let mut trials = 0;
    while trials < 1000 {
        let a = app(&gen::application(&mut rng, "m", 10));
        let deps = a.software_dependencies.clone().unwrap_or_default();
        let Some(i) = deps.iter().position(|c| !c.preferred) else { continue };
        let mut fewer = a.clone();
        fewer.software_dependencies.as_mut().unwrap().remove(i);
        assert!(compatible(&a).is_subset(&compatible(&fewer)));
        trials += 1;
    }
}

#[test]
fn fixture_matches() {
    let store = Store::in_memory();
    for f in resource_fixtures() {
        store.publish(Kind::Resource, &f.id(), &f.bytes, baseline(Kind::Resource), None).unwrap();
    }
    let entries = store.latest_entries(Kind::Resource, false);
    let apps: Vec<_> = application_fixtures().into_iter().map(|f| (f.id(), app(&f.value()))).collect();
    let compatible = |id: &str| -> Vec<String> {
        let (_, a) = apps.iter().find(|(i, _)| i == id).unwrap();
        let outcome = match_application(a, &entries, true).unwrap();
        assert!(outcome.diagnostics.is_empty());
        // The store's decoded snapshot gives the same answer as re-parsing.
        assert_eq!(match_views(a, &store.active_resources(), true).unwrap(), outcome);
        outcome.results.into_iter().map(|r| r.resource_id).collect()
    };
    // x86_64, >= 4 GB, a container runtime, and slurm/pbs/fork.
    assert_eq!(compatible("fastqc"), ["campus-hpc", "frontera", "jetstream2-vm"]);
    // GPUs with CUDA 12 on Linux; the lab workstation meets both preferences.
    assert_eq!(compatible("jupyter-gpu"), ["lab-workstation", "cloud-batch"]);
    // The only spark site has no declared network.
    assert!(compatible("sensor-stream").is_empty());
}
