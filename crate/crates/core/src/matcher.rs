//! Decides which registered resources can run an application.
//!
//! Every constraint of the application is evaluated against every resource.
//! A field that is absent on the resource never satisfies a constraint, not
//! even `exists`. Required constraints decide compatibility; `preferred`
//! ones only feed the score, which is the fraction of preferences met.

use std::cmp::Ordering;

use serde::Serialize;

use crate::model::{
    compare_versions, parse_resource_with, ApplicationDescription, Constraint, ConstraintCategory,
    ConstraintValue, Kind, ParseMode, Predicate, ResourceDescription, Scalar,
};
use crate::store::{EntryVersion, RegistryEntry, ResourceView};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintResult {
    pub constraint: Constraint,
    pub satisfied: bool,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchResult {
    pub resource_id: String,
    pub resource_version: EntryVersion,
    pub compatible: bool,
    pub constraint_results: Vec<ConstraintResult>,
    pub score: f64,
}

/// A resource entry the matcher had to skip.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub resource_id: String,
    pub resource_version: EntryVersion,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MatchOutcome {
    pub results: Vec<MatchResult>,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConstraintError {
    #[error("{category} has no field {key:?}")]
    UnknownKey {
        category: ConstraintCategory,
        key: String,
    },
    #[error("{0}")]
    Shape(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("constraint {index}: {source}")]
pub struct MatchError {
    pub index: usize,
    #[source]
    pub source: ConstraintError,
}

/// Every key a constraint may name, per category.
pub const CONSTRAINT_KEYS: &[(ConstraintCategory, &[&str])] = &[
    (
        ConstraintCategory::HighLevel,
        &["name", "hostname", "owner", "resource_type", "category", "description"],
    ),
    (
        ConstraintCategory::Hardware,
        &[
            "cpu_architecture",
            "memory_type",
            "memory_per_node_gb",
            "cores_per_node",
            "threads_per_core",
            "node_count",
            "storage_type",
            "storage_capacity_tb",
            "network_type",
            "accelerators",
            "accelerators.model",
            "accelerators.count_per_node",
        ],
    ),
    (
        ConstraintCategory::OperatingSystem,
        &["kernel_name", "kernel_version", "distribution", "distribution_version"],
    ),
    (
        ConstraintCategory::Scheduler,
        &[
            "scheduler_type",
            "scheduler_version",
            "queues",
            "queues.name",
            "queues.max_nodes",
            "queues.max_wallclock_minutes",
            "queues.max_jobs_per_user",
            "queues.default",
        ],
    ),
    (
        ConstraintCategory::Software,
        &["packages", "packages.name", "packages.version", "packages.kind"],
    ),
];

#[derive(Debug, Clone, Copy)]
enum Leaf<'a> {
    Str(&'a str),
    Num(f64),
    Bool(bool),
}

impl Leaf<'_> {
    fn equals(self, s: &Scalar) -> bool {
        match (self, s) {
            (Leaf::Str(a), Scalar::Str(b)) => a == b,
            (Leaf::Num(a), Scalar::Num(b)) => a == *b,
            (Leaf::Bool(a), Scalar::Bool(b)) => a == *b,
            _ => false,
        }
    }

    fn render(self) -> String {
        match self {
            Leaf::Str(s) => format!("{s:?}"),
            Leaf::Num(n) => n.to_string(),
            Leaf::Bool(b) => b.to_string(),
        }
    }
}

fn num(n: Option<u64>) -> Option<Leaf<'static>> {
    n.map(|n| Leaf::Num(n as f64))
}

/// Resolves a constraint key to the resource's values. `None` means the
/// field (or its whole block) is absent. List-valued keys without a
/// sub-field resolve to element names.
fn resolve<'a>(
    r: &'a ResourceDescription,
    category: ConstraintCategory,
    key: &str,
) -> Result<Option<Vec<Leaf<'a>>>, ConstraintError> {
    use ConstraintCategory as C;
    let one = |v: Option<Leaf<'a>>| Ok(v.map(|l| vec![l]));
    let text = |s: &'a Option<String>| s.as_deref().map(Leaf::Str);
    let unknown = || ConstraintError::UnknownKey {
        category,
        key: key.to_string(),
    };
    match category {
        C::HighLevel => {
            let hl = &r.high_level;
            match key {
                "name" => one(Some(Leaf::Str(&hl.name))),
                "hostname" => one(Some(Leaf::Str(&hl.hostname))),
                "owner" => one(Some(Leaf::Str(&hl.owner))),
                "resource_type" => one(Some(Leaf::Str(hl.resource_type.as_str()))),
                "category" => one(hl.category.map(|c| Leaf::Str(c.as_str()))),
                "description" => one(text(&hl.description)),
                _ => Err(unknown()),
            }
        }
        C::Hardware => {
            let Some(hw) = &r.hardware else {
                return CONSTRAINT_KEYS[1].1.contains(&key).then_some(None).ok_or_else(unknown);
            };
            let accelerators = || hw.accelerators.as_ref();
            match key {
                "cpu_architecture" => one(Some(Leaf::Str(&hw.cpu_architecture))),
                "memory_type" => one(text(&hw.memory_type)),
                "memory_per_node_gb" => one(hw.memory_per_node_gb.map(Leaf::Num)),
                "cores_per_node" => one(num(hw.cores_per_node)),
                "threads_per_core" => one(num(hw.threads_per_core)),
                "node_count" => one(num(hw.node_count)),
                "storage_type" => one(text(&hw.storage_type)),
                "storage_capacity_tb" => one(hw.storage_capacity_tb.map(Leaf::Num)),
                "network_type" => one(text(&hw.network_type)),
                "accelerators" | "accelerators.model" => Ok(accelerators()
                    .map(|a| a.iter().map(|x| Leaf::Str(&x.model)).collect())),
                "accelerators.count_per_node" => Ok(accelerators()
                    .map(|a| a.iter().map(|x| Leaf::Num(x.count_per_node as f64)).collect())),
                _ => Err(unknown()),
            }
        }
        C::OperatingSystem => {
            let Some(os) = &r.operating_system else {
                return CONSTRAINT_KEYS[2].1.contains(&key).then_some(None).ok_or_else(unknown);
            };
            match key {
                "kernel_name" => one(Some(Leaf::Str(&os.kernel_name))),
                "kernel_version" => one(Some(Leaf::Str(&os.kernel_version))),
                "distribution" => one(Some(Leaf::Str(&os.distribution))),
                "distribution_version" => one(Some(Leaf::Str(&os.distribution_version))),
                _ => Err(unknown()),
            }
        }
        C::Scheduler => {
            let Some(s) = &r.scheduler else {
                return CONSTRAINT_KEYS[3].1.contains(&key).then_some(None).ok_or_else(unknown);
            };
            let queues = s.queues.as_ref();
            let each = |f: fn(&'a crate::model::QueueDefinition) -> Option<Leaf<'a>>| {
                Ok(queues.map(|q| q.iter().filter_map(f).collect()))
            };
            match key {
                "scheduler_type" => one(Some(Leaf::Str(s.scheduler_type.as_str()))),
                "scheduler_version" => one(text(&s.scheduler_version)),
                "queues" | "queues.name" => each(|q| Some(Leaf::Str(&q.name))),
                "queues.max_nodes" => each(|q| num(q.max_nodes)),
                "queues.max_wallclock_minutes" => each(|q| num(q.max_wallclock_minutes)),
                "queues.max_jobs_per_user" => each(|q| num(q.max_jobs_per_user)),
                "queues.default" => each(|q| Some(Leaf::Bool(q.default))),
                _ => Err(unknown()),
            }
        }
        C::Software => {
            let Some(sw) = &r.software else {
                return CONSTRAINT_KEYS[4].1.contains(&key).then_some(None).ok_or_else(unknown);
            };
            let pkgs = sw.packages.iter();
            match key {
                "packages" | "packages.name" => Ok(Some(pkgs.map(|p| Leaf::Str(&p.name)).collect())),
                "packages.version" => Ok(Some(
                    pkgs.filter_map(|p| p.version.as_deref().map(Leaf::Str)).collect(),
                )),
                "packages.kind" => Ok(Some(pkgs.map(|p| Leaf::Str(p.kind.as_str())).collect())),
                _ => Err(unknown()),
            }
        }
    }
}

fn check_key(c: &Constraint) -> Result<(), ConstraintError> {
    let known = CONSTRAINT_KEYS
        .iter()
        .find(|(cat, _)| *cat == c.category)
        .is_some_and(|(_, keys)| keys.contains(&c.key.as_str()));
    if known {
        Ok(())
    } else {
        Err(ConstraintError::UnknownKey {
            category: c.category,
            key: c.key.clone(),
        })
    }
}

fn is_package_list(c: &Constraint) -> bool {
    c.category == ConstraintCategory::Software && c.key == "packages"
}

/// Checks key and value shape without touching any resource.
pub fn check_constraint(c: &Constraint) -> Result<(), ConstraintError> {
    check_key(c)?;
    c.check_shape().map_err(ConstraintError::Shape)?;
    if c.predicate == Predicate::MinVersion && is_package_list(c) && package_requirement(c).is_none() {
        return Err(ConstraintError::Shape(
            "min_version on software.packages takes \"name:version\"".into(),
        ));
    }
    Ok(())
}

fn package_requirement(c: &Constraint) -> Option<(&str, &str)> {
    match &c.value {
        Some(ConstraintValue::Scalar(Scalar::Str(s))) => {
            let (name, version) = s.split_once(':')?;
            (!name.is_empty() && !version.is_empty()).then_some((name, version))
        }
        _ => None,
    }
}

fn at_least(found: &str, required: &str) -> bool {
    compare_versions(found, required).is_ok_and(|o| o != Ordering::Less)
}

pub fn evaluate_constraint(
    c: &Constraint,
    r: &ResourceDescription,
) -> Result<ConstraintResult, ConstraintError> {
    check_constraint(c)?;
    evaluate_checked(c, r)
}

fn evaluate_checked(c: &Constraint, r: &ResourceDescription) -> Result<ConstraintResult, ConstraintError> {
    let field = || format!("{}.{}", c.category, c.key);
    let result = |satisfied: bool, reason: String| ConstraintResult {
        constraint: c.clone(),
        satisfied,
        reason,
    };

    if c.predicate == Predicate::MinVersion && is_package_list(c) {
        let (name, required) = package_requirement(c).expect("checked above");
        let Some(sw) = &r.software else {
            return Ok(result(false, "field absent".into()));
        };
        let named: Vec<_> = sw.packages.iter().filter(|p| p.name == name).collect();
        if named.is_empty() {
            return Ok(result(false, format!("{}: no package named {name:?}", field())));
        }
        let satisfied = named
            .iter()
            .any(|p| p.version.as_deref().is_some_and(|v| at_least(v, required)));
        let versions: Vec<String> = named
            .iter()
            .map(|p| p.version.clone().unwrap_or_else(|| "unversioned".into()))
            .collect();
        return Ok(result(
            satisfied,
            format!("{}: {name} [{}] vs >= {required}", field(), versions.join(", ")),
        ));
    }

    let leaves = match resolve(r, c.category, &c.key)? {
        Some(l) if !l.is_empty() => l,
        _ => return Ok(result(false, "field absent".into())),
    };
    let satisfied = match (c.predicate, &c.value) {
        (Predicate::Exists, _) => true,
        (Predicate::Equals, Some(ConstraintValue::Scalar(s))) => leaves.iter().any(|l| l.equals(s)),
        (Predicate::OneOf, Some(ConstraintValue::List(items))) => {
            leaves.iter().any(|l| items.iter().any(|s| l.equals(s)))
        }
        (Predicate::MinVersion, Some(ConstraintValue::Scalar(Scalar::Str(v)))) => leaves
            .iter()
            .any(|l| matches!(l, Leaf::Str(s) if at_least(s, v))),
        (Predicate::MinValue, Some(ConstraintValue::Scalar(Scalar::Num(n)))) => leaves
            .iter()
            .any(|l| matches!(l, Leaf::Num(x) if x >= n)),
        _ => unreachable!("shape checked"),
    };
    let shown: Vec<String> = leaves.iter().map(|l| l.render()).collect();
    let reason = if shown.len() == 1 {
        format!("{} = {}", field(), shown[0])
    } else {
        format!("{} = [{}]", field(), shown.join(", "))
    };
    Ok(result(satisfied, reason))
}

/// Evaluates `app` against already-parsed resources.
pub fn match_resources<'r>(
    app: &ApplicationDescription,
    resources: impl IntoIterator<Item = (&'r ResourceDescription, EntryVersion)>,
    compatible_only: bool,
) -> Result<Vec<MatchResult>, MatchError> {
    let constraints: Vec<&Constraint> = app.constraints().collect();
    for (index, c) in constraints.iter().enumerate() {
        check_constraint(c).map_err(|source| MatchError { index, source })?;
    }
    let mut results = Vec::new();
    for (resource, version) in resources {
        let mut constraint_results = Vec::with_capacity(constraints.len());
        for (index, c) in constraints.iter().enumerate() {
            constraint_results
                .push(evaluate_checked(c, resource).map_err(|source| MatchError { index, source })?);
        }
        let compatible = constraint_results
            .iter()
            .all(|cr| cr.constraint.preferred || cr.satisfied);
        if compatible_only && !compatible {
            continue;
        }
        let preferred = constraint_results.iter().filter(|cr| cr.constraint.preferred);
        let (wanted, met) = preferred.fold((0usize, 0usize), |(w, m), cr| {
            (w + 1, m + usize::from(cr.satisfied))
        });
        let score = if wanted == 0 { 1.0 } else { met as f64 / wanted as f64 };
        results.push(MatchResult {
            resource_id: resource.id.clone(),
            resource_version: version,
            compatible,
            constraint_results,
            score,
        });
    }
    results.sort_by(rank);
    Ok(results)
}

/// Compatible first, then higher score, then resource id and version.
pub fn rank(a: &MatchResult, b: &MatchResult) -> Ordering {
    b.compatible
        .cmp(&a.compatible)
        .then_with(|| b.score.total_cmp(&a.score))
        .then_with(|| a.resource_id.cmp(&b.resource_id))
        .then_with(|| a.resource_version.cmp(&b.resource_version))
}

/// Matches `app` against registry entries, skipping (and reporting) entries
/// that are not resources or whose payload does not parse.
pub fn match_application(
    app: &ApplicationDescription,
    resources: &[RegistryEntry],
    compatible_only: bool,
) -> Result<MatchOutcome, MatchError> {
    let mut diagnostics = Vec::new();
    let mut parsed = Vec::with_capacity(resources.len());
    for entry in resources {
        if entry.kind != Kind::Resource {
            diagnostics.push(Diagnostic {
                resource_id: entry.id.clone(),
                resource_version: entry.version,
                message: format!("entry is an {}, not a resource", entry.kind),
            });
            continue;
        }
        match parse_resource_with(&entry.payload, ParseMode::Lenient) {
            Ok(r) => parsed.push((r, entry.version)),
            Err(e) => diagnostics.push(Diagnostic {
                resource_id: entry.id.clone(),
                resource_version: entry.version,
                message: e.to_string(),
            }),
        }
    }
    let results = match_resources(app, parsed.iter().map(|(r, v)| (r, *v)), compatible_only)?;
    Ok(MatchOutcome {
        results,
        diagnostics,
    })
}

/// Matches `app` against the decoded resources of a store snapshot.
pub fn match_views(
    app: &ApplicationDescription,
    resources: &[ResourceView],
    compatible_only: bool,
) -> Result<MatchOutcome, MatchError> {
    let mut diagnostics = Vec::new();
    let usable = resources.iter().filter_map(|view| match &view.model {
        Ok(model) => Some((&**model, view.version)),
        Err(message) => {
            diagnostics.push(Diagnostic {
                resource_id: view.id.clone(),
                resource_version: view.version,
                message: message.clone(),
            });
            None
        }
    });
    let results = match_resources(app, usable.collect::<Vec<_>>(), compatible_only)?;
    Ok(MatchOutcome {
        results,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_application, parse_resource};
    use crate::schema::baseline;
    use std::collections::BTreeSet;

    fn resource(extra: &str) -> ResourceDescription {
        let doc = format!(
            r#"{{"id":"r1","high_level":{{"name":"R","hostname":"r.org","owner":"o","resource_type":"compute"}}{extra}}}"#
        );
        parse_resource(doc.as_bytes()).unwrap()
    }

    fn constraint(category: ConstraintCategory, key: &str, predicate: Predicate, value: Option<ConstraintValue>) -> Constraint {
        Constraint {
            category,
            key: key.into(),
            predicate,
            value,
            preferred: false,
        }
    }

    fn s(x: &str) -> Option<ConstraintValue> {
        Some(ConstraintValue::Scalar(Scalar::Str(x.into())))
    }

    #[test]
    fn keys_mirror_baseline_spec() {
        let spec: BTreeSet<String> = baseline(Kind::Resource)
            .field_paths()
            .filter(|p| p != "id" && p.contains('.'))
            .collect();
        let ours: BTreeSet<String> = CONSTRAINT_KEYS
            .iter()
            .flat_map(|(cat, keys)| keys.iter().map(move |k| format!("{cat}.{k}")))
            .collect();
        assert_eq!(ours, spec);
    }

    #[test]
    fn cuda_min_version() {
        let r = resource(r#","software":{"packages":[{"name":"cuda","version":"11.4","kind":"cuda"}]}"#);
        let c = constraint(ConstraintCategory::Software, "packages", Predicate::MinVersion, s("cuda:11.0"));
        assert!(evaluate_constraint(&c, &r).unwrap().satisfied);
        let c = constraint(ConstraintCategory::Software, "packages", Predicate::MinVersion, s("cuda:12.0"));
        let res = evaluate_constraint(&c, &r).unwrap();
        assert!(!res.satisfied);
        assert!(res.reason.contains("11.4"));
    }

    #[test]
    fn absent_scheduler_never_satisfies() {
        let r = resource("");
        for (p, v) in [
            (Predicate::Equals, s("slurm")),
            (Predicate::OneOf, Some(ConstraintValue::List(vec![Scalar::Str("slurm".into())]))),
            (Predicate::MinVersion, s("1.0")),
            (Predicate::Exists, None),
        ] {
            let res = evaluate_constraint(&constraint(ConstraintCategory::Scheduler, "scheduler_type", p, v), &r).unwrap();
            assert!(!res.satisfied);
            assert_eq!(res.reason, "field absent");
        }
    }

    #[test]
    fn unknown_key_is_path_error() {
        let c = constraint(ConstraintCategory::Hardware, "gpu_count", Predicate::Exists, None);
        assert!(matches!(
            evaluate_constraint(&c, &resource("")),
            Err(ConstraintError::UnknownKey { .. })
        ));
    }

    #[test]
    fn slurm_app_over_two_resources() {
        let slurm = resource(r#","scheduler":{"scheduler_type":"slurm","queues":[{"name":"normal"}]}"#);
        let mut fork = resource(r#","scheduler":{"scheduler_type":"fork"}"#);
        fork.id = "workstation".into();
        let app = parse_application(
            br#"{"id":"a","high_level":{"name":"a","app_type":"command_line_batch"},
                 "software_dependencies":[{"category":"scheduler","key":"scheduler_type","predicate":"equals","value":"slurm"}]}"#,
        )
        .unwrap();
        let v = EntryVersion::FIRST;
        let results = match_resources(&app, [(&fork, v), (&slurm, v)], false).unwrap();
        assert_eq!(results.len(), 2);
        assert_eq!(results[0].resource_id, "r1");
        assert!(results[0].compatible);
        assert!(!results[1].compatible);
        assert_eq!(results[1].constraint_results.len(), 1);
        let only = match_resources(&app, [(&fork, v), (&slurm, v)], true).unwrap();
        assert_eq!(only.len(), 1);
    }

    #[test]
    fn no_constraints_all_compatible() {
        let app = parse_application(br#"{"id":"a","high_level":{"name":"a","app_type":"interactive"}}"#).unwrap();
        let mut rs = vec![resource(""), resource(""), resource("")];
        for (i, r) in rs.iter_mut().enumerate() {
            r.id = format!("r{}", 3 - i);
        }
        let results = match_resources(&app, rs.iter().map(|r| (r, EntryVersion::FIRST)), false).unwrap();
        let ids: Vec<_> = results.iter().map(|r| r.resource_id.as_str()).collect();
        assert_eq!(ids, ["r1", "r2", "r3"]);
        assert!(results.iter().all(|r| r.compatible && r.score == 1.0));
    }

    #[test]
    fn preferences_score() {
        let r = resource(r#","hardware":{"cpu_architecture":"x86_64","cores_per_node":56}"#);
        let mut want_cores = constraint(
            ConstraintCategory::Hardware,
            "cores_per_node",
            Predicate::MinValue,
            Some(ConstraintValue::Scalar(Scalar::Num(48.0))),
        );
        want_cores.preferred = true;
        let mut want_gpu = constraint(ConstraintCategory::Hardware, "accelerators", Predicate::Exists, None);
        want_gpu.preferred = true;
        let mut app = parse_application(br#"{"id":"a","high_level":{"name":"a","app_type":"interactive"}}"#).unwrap();
        app.architecture_hardware = Some(vec![want_cores, want_gpu]);
        let results = match_resources(&app, [(&r, EntryVersion::FIRST)], false).unwrap();
        assert!(results[0].compatible);
        assert_eq!(results[0].score, 0.5);
    }
}
