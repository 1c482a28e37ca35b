//! Random valid documents and random key-order renderings.

use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::{json, Map, Value};

use crate::versions::random_version;

pub const CATEGORIES: &[&str] = &[
    "hpc_cluster",
    "campus_cluster",
    "national_storage",
    "academic_cloud",
    "commercial_cloud",
    "individual_lab",
];
pub const SCHEDULERS: &[&str] = &["slurm", "sge", "pbs", "lsf", "condor", "fork", "other"];
pub const PACKAGE_KINDS: &[&str] = &["mpi", "openmp", "cuda", "container_runtime", "module", "library", "framework", "other"];
pub const ARCHES: &[&str] = &["x86_64", "aarch64", "ppc64le"];
pub const MEMORY_TYPES: &[&str] = &["DDR4", "DDR5", "HBM2"];
pub const NETWORKS: &[&str] = &["infiniband-hdr", "ethernet-25g", "omni-path"];
pub const STORAGE_TYPES: &[&str] = &["lustre", "gpfs", "nvme"];
pub const ACCELERATORS: &[&str] = &["nvidia-a100", "nvidia-v100", "amd-mi250"];
pub const KERNELS: &[&str] = &["Linux", "Darwin"];
pub const DISTRIBUTIONS: &[&str] = &["Ubuntu", "CentOS", "Rocky Linux"];
pub const PACKAGES: &[&str] = &["cuda", "openmpi", "mvapich2", "singularity", "docker", "spark", "python"];
pub const QUEUE_NAMES: &[&str] = &["normal", "debug", "gpu", "long", "large", "shared"];
pub const OWNERS: &[&str] = &["TACC", "SDSC", "NCSA", "Lab A", "Campus IT"];
pub const APP_TYPES: &[&str] = &["command_line_batch", "interactive", "streaming"];
pub const PACKAGING_KINDS: &[&str] = &["container_image", "vm_image", "unikernel", "module", "bare"];
pub const INPUT_KINDS: &[&str] = &["file", "object", "database", "url", "environment_variable"];
pub const OUTPUT_KINDS: &[&str] = &["file", "stdout_stream", "stderr_stream", "object"];

fn pick<R: Rng>(rng: &mut R, from: &[&str]) -> String {
    from.choose(rng).unwrap().to_string()
}

fn small_version<R: Rng>(rng: &mut R) -> String {
    match rng.gen_range(0..4) {
        0 => format!("{}.{}", rng.gen_range(1..15), rng.gen_range(0..10)),
        1 => format!("{}.{}.{}", rng.gen_range(1..15), rng.gen_range(0..10), rng.gen_range(0..10)),
        2 => format!("{}", rng.gen_range(1..30)),
        _ => random_version(rng),
    }
}

/// A random resource that satisfies every rule and cross-field check.
pub fn resource<R: Rng>(rng: &mut R, id: &str) -> Value {
    let compute = rng.gen_bool(0.85);
    let mut hl = json!({
        "name": format!("Resource {id}"),
        "hostname": format!("{id}.example.org"),
        "owner": pick(rng, OWNERS),
        "resource_type": if compute { "compute" } else { "storage" },
    });
    if rng.gen_bool(0.8) {
        hl["category"] = pick(rng, CATEGORIES).into();
    }
    if rng.gen_bool(0.2) {
        hl["description"] = "synthetic".into();
    }
    let mut doc = json!({"id": id, "high_level": hl});

    if rng.gen_bool(0.8) {
        let mut hw = Map::new();
        hw.insert("cpu_architecture".into(), pick(rng, ARCHES).into());
        let values: [(&str, Value); 8] = [
            ("memory_type", pick(rng, MEMORY_TYPES).into()),
            ("memory_per_node_gb", json!([16, 64, 128, 192, 256, 512][rng.gen_range(0..6)])),
            ("cores_per_node", json!(rng.gen_range(1..129))),
            ("threads_per_core", json!(rng.gen_range(1..5))),
            ("node_count", json!(rng.gen_range(1..10000))),
            ("storage_type", pick(rng, STORAGE_TYPES).into()),
            ("storage_capacity_tb", json!(rng.gen_range(0..5000) as f64 / 4.0)),
            ("network_type", pick(rng, NETWORKS).into()),
        ];
        for (key, v) in values {
            if rng.gen_bool(0.6) {
                hw.insert(key.into(), v);
            }
        }
        if rng.gen_bool(0.4) {
            let n = rng.gen_range(0..3);
            let acc: Vec<Value> = (0..n)
                .map(|_| json!({"model": pick(rng, ACCELERATORS), "count_per_node": rng.gen_range(1..9)}))
                .collect();
            hw.insert("accelerators".into(), acc.into());
        }
        doc["hardware"] = hw.into();
    }

    if rng.gen_bool(0.8) {
        doc["operating_system"] = json!({
            "kernel_name": pick(rng, KERNELS),
            "kernel_version": small_version(rng),
            "distribution": pick(rng, DISTRIBUTIONS),
            "distribution_version": small_version(rng),
        });
    }

    if rng.gen_bool(0.8) {
        let st = pick(rng, SCHEDULERS);
        let mut sched = json!({"scheduler_type": st});
        if st != "fork" {
            if rng.gen_bool(0.5) {
                sched["scheduler_version"] = small_version(rng).into();
            }
            let need = compute;
            let n = if need { rng.gen_range(1..5) } else { rng.gen_range(0..3) };
            let mut names: Vec<&str> = QUEUE_NAMES.to_vec();
            names.shuffle(rng);
            let default_at = rng.gen_bool(0.6).then(|| rng.gen_range(0..n.max(1)));
            let queues: Vec<Value> = (0..n)
                .map(|i| {
                    let mut q = json!({"name": names[i]});
                    if rng.gen_bool(0.6) {
                        q["max_nodes"] = json!(rng.gen_range(1..1024));
                    }
                    if rng.gen_bool(0.5) {
                        q["max_wallclock_minutes"] = json!(rng.gen_range(1..10080));
                    }
                    if rng.gen_bool(0.3) {
                        q["max_jobs_per_user"] = json!(rng.gen_range(1..100));
                    }
                    if default_at == Some(i) {
                        q["default"] = true.into();
                    } else if rng.gen_bool(0.1) {
                        q["default"] = false.into();
                    }
                    q
                })
                .collect();
            if n > 0 || rng.gen_bool(0.5) {
                sched["queues"] = queues.into();
            }
        }
        doc["scheduler"] = sched;
    }

    if rng.gen_bool(0.7) {
        let n = rng.gen_range(0..6);
        let mut seen = std::collections::HashSet::new();
        let mut packages = Vec::new();
        for _ in 0..n {
            let name = pick(rng, PACKAGES);
            let version = rng.gen_bool(0.85).then(|| small_version(rng));
            if !seen.insert((name.clone(), version.clone())) {
                continue;
            }
            let mut p = json!({"name": name, "kind": pick(rng, PACKAGE_KINDS)});
            if let Some(v) = version {
                p["version"] = v.into();
            }
            packages.push(p);
        }
        doc["software"] = json!({"packages": packages});
    }
    doc
}

fn scalar<R: Rng>(rng: &mut R, pool: &[&str]) -> Value {
    pick(rng, pool).into()
}

/// A random constraint whose key exists for its category and whose value is
/// drawn from the same vocabularies as [`resource`].
pub fn constraint<R: Rng>(rng: &mut R) -> Value {
    // (category, key, string pool or None for numeric, version-typed)
    type Key = (&'static str, &'static str, Option<&'static [&'static str]>, bool);
    const KEYS: &[Key] = &[
        ("hardware", "cpu_architecture", Some(ARCHES), false),
        ("hardware", "memory_type", Some(MEMORY_TYPES), false),
        ("hardware", "memory_per_node_gb", None, false),
        ("hardware", "cores_per_node", None, false),
        ("hardware", "node_count", None, false),
        ("hardware", "network_type", Some(NETWORKS), false),
        ("hardware", "accelerators", Some(ACCELERATORS), false),
        ("hardware", "accelerators.model", Some(ACCELERATORS), false),
        ("hardware", "accelerators.count_per_node", None, false),
        ("operating_system", "kernel_name", Some(KERNELS), false),
        ("operating_system", "kernel_version", None, true),
        ("operating_system", "distribution", Some(DISTRIBUTIONS), false),
        ("operating_system", "distribution_version", None, true),
        ("scheduler", "scheduler_type", Some(SCHEDULERS), false),
        ("scheduler", "scheduler_version", None, true),
        ("scheduler", "queues", Some(QUEUE_NAMES), false),
        ("scheduler", "queues.max_nodes", None, false),
        ("scheduler", "queues.default", None, false),
        ("software", "packages", Some(PACKAGES), false),
        ("software", "packages.kind", Some(PACKAGE_KINDS), false),
        ("software", "packages.version", None, true),
        ("high_level", "resource_type", Some(&["compute", "storage"]), false),
        ("high_level", "category", Some(CATEGORIES), false),
        ("high_level", "owner", Some(OWNERS), false),
    ];
    let (category, key, pool, versioned) = *KEYS.choose(rng).unwrap();
    let (predicate, value) = if key == "queues.default" {
        match rng.gen_range(0..2) {
            0 => ("equals", Some(json!(rng.gen_bool(0.5)))),
            _ => ("exists", None),
        }
    } else if key == "packages" && rng.gen_bool(0.4) {
        let v = format!("{}:{}", pick(rng, PACKAGES), small_version(rng));
        ("min_version", Some(v.into()))
    } else if versioned {
        match rng.gen_range(0..3) {
            0 => ("min_version", Some(small_version(rng).into())),
            1 => ("exists", None),
            _ => ("equals", Some(small_version(rng).into())),
        }
    } else if let Some(pool) = pool {
        match rng.gen_range(0..3) {
            0 => ("equals", Some(scalar(rng, pool))),
            1 => {
                let n = rng.gen_range(1..4);
                let list: Vec<Value> = (0..n).map(|_| scalar(rng, pool)).collect();
                ("one_of", Some(list.into()))
            }
            _ => ("exists", None),
        }
    } else {
        match rng.gen_range(0..3) {
            0 => ("min_value", Some(json!([1, 2, 4, 8, 16, 48, 64, 128, 256][rng.gen_range(0..9)]))),
            1 => ("equals", Some(json!(rng.gen_range(1..5)))),
            _ => ("exists", None),
        }
    };
    let mut c = json!({"category": category, "key": key, "predicate": predicate});
    if let Some(v) = value {
        c["value"] = v;
    }
    if rng.gen_bool(0.25) {
        c["preferred"] = true.into();
    }
    c
}

/// A random valid application with at most `max_constraints` constraints.
pub fn application<R: Rng>(rng: &mut R, id: &str, max_constraints: usize) -> Value {
    let mut doc = json!({
        "id": id,
        "high_level": {"name": format!("App {id}"), "app_type": pick(rng, APP_TYPES)},
    });
    if rng.gen_bool(0.7) {
        doc["packaging"] = json!({"kind": pick(rng, PACKAGING_KINDS), "reference": format!("registry.example.org/{id}:1")});
    }
    let n = rng.gen_range(0..=max_constraints);
    let split = rng.gen_range(0..=n);
    let all: Vec<Value> = (0..n).map(|_| constraint(rng)).collect();
    if split > 0 || rng.gen_bool(0.3) {
        doc["architecture_hardware"] = all[..split].to_vec().into();
    }
    if split < n || rng.gen_bool(0.3) {
        doc["software_dependencies"] = all[split..].to_vec().into();
    }
    if rng.gen_bool(0.5) {
        let n = rng.gen_range(0..4);
        let inputs: Vec<Value> = (0..n)
            .map(|i| json!({"name": format!("in{i}"), "kind": pick(rng, INPUT_KINDS), "required": rng.gen_bool(0.5)}))
            .collect();
        doc["inputs"] = inputs.into();
    }
    if rng.gen_bool(0.4) {
        doc["runtime_requirements"] = json!([{"key": "threads", "value": rng.gen_range(1..64).to_string()}]);
    }
    if rng.gen_bool(0.5) {
        let n = rng.gen_range(0..3);
        let outputs: Vec<Value> = (0..n)
            .map(|i| json!({"name": format!("out{i}"), "kind": pick(rng, OUTPUT_KINDS)}))
            .collect();
        doc["outputs"] = outputs.into();
    }
    doc
}

/// JSON text of `v` with object keys in random order and random spacing.
pub fn render_shuffled<R: Rng>(rng: &mut R, v: &Value) -> String {
    let mut out = String::new();
    write_shuffled(rng, v, &mut out);
    out
}

fn write_shuffled<R: Rng>(rng: &mut R, v: &Value, out: &mut String) {
    let space = |rng: &mut R, out: &mut String| {
        if rng.gen_bool(0.3) {
            out.push_str([" ", "\n", "\t", "  "][rng.gen_range(0..4)]);
        }
    };
    match v {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.shuffle(rng);
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                space(rng, out);
                out.push_str(&Value::String(k.clone()).to_string());
                out.push(':');
                space(rng, out);
                write_shuffled(rng, &map[k], out);
            }
            space(rng, out);
            out.push('}');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                space(rng, out);
                write_shuffled(rng, item, out);
            }
            out.push(']');
        }
        other => out.push_str(&other.to_string()),
    }
}
