use std::collections::HashSet;

use super::path;
use super::version;
use super::*;

pub const IDENTIFIER_MAX_LEN: usize = 253;

/// Lowercase alphanumerics plus `-` and `.`, starting with an alphanumeric,
/// at most 253 bytes.
pub fn is_identifier(s: &str) -> bool {
    let bytes = s.as_bytes();
    !bytes.is_empty()
        && bytes.len() <= IDENTIFIER_MAX_LEN
        && (bytes[0].is_ascii_lowercase() || bytes[0].is_ascii_digit())
        && bytes
            .iter()
            .all(|&b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'-' || b == b'.')
}

type Check = Result<(), ModelError>;

fn identifier(s: &str, at: &str) -> Check {
    if is_identifier(s) {
        Ok(())
    } else {
        Err(ModelError::invariant(at, format!("{s:?} is not a valid identifier")))
    }
}

fn non_empty(s: &str, at: &str) -> Check {
    if s.is_empty() {
        Err(ModelError::invariant(at, "must not be empty"))
    } else {
        Ok(())
    }
}

fn version_string(s: &str, at: &str) -> Check {
    if version::is_valid(s) {
        Ok(())
    } else {
        Err(ModelError::invariant(at, format!("{s:?} is not a version string")))
    }
}

fn positive(n: Option<u64>, at: &str) -> Check {
    match n {
        Some(0) => Err(ModelError::invariant(at, "must be at least 1")),
        _ => Ok(()),
    }
}

fn non_negative(n: Option<f64>, at: &str) -> Check {
    match n {
        Some(x) if !(x >= 0.0) || !x.is_finite() => {
            Err(ModelError::invariant(at, "must be a non-negative number"))
        }
        _ => Ok(()),
    }
}

impl ResourceDescription {
    pub fn check_invariants(&self) -> Check {
        identifier(&self.id, "id")?;
        let hl = &self.high_level;
        non_empty(&hl.name, "high_level.name")?;
        non_empty(&hl.owner, "high_level.owner")?;
        if hl.hostname.is_empty() || hl.hostname.chars().any(char::is_whitespace) {
            return Err(ModelError::invariant(
                "high_level.hostname",
                "must be a non-empty network address",
            ));
        }
        if let Some(hw) = &self.hardware {
            hw.check_invariants()?;
        }
        if let Some(os) = &self.operating_system {
            non_empty(&os.kernel_name, "operating_system.kernel_name")?;
            version_string(&os.kernel_version, "operating_system.kernel_version")?;
            non_empty(&os.distribution, "operating_system.distribution")?;
            version_string(&os.distribution_version, "operating_system.distribution_version")?;
        }
        if let Some(s) = &self.scheduler {
            s.check_invariants()?;
            if hl.resource_type == ResourceType::Compute
                && s.scheduler_type != SchedulerType::Fork
                && s.queues().is_empty()
            {
                return Err(ModelError::invariant(
                    "scheduler.queues",
                    "a batch-scheduled compute resource must define at least one queue",
                ));
            }
        }
        if let Some(sw) = &self.software {
            let mut seen = HashSet::new();
            for (i, pkg) in sw.packages.iter().enumerate() {
                let at = path::index("software.packages", i);
                non_empty(&pkg.name, &path::join(&at, "name"))?;
                if let Some(v) = &pkg.version {
                    version_string(v, &path::join(&at, "version"))?;
                }
                if !seen.insert((pkg.name.as_str(), pkg.version.as_deref())) {
                    return Err(ModelError::invariant(at, "duplicate (name, version) package"));
                }
            }
        }
        Ok(())
    }
}

impl HardwareData {
    fn check_invariants(&self) -> Check {
        non_empty(&self.cpu_architecture, "hardware.cpu_architecture")?;
        for (value, key) in [
            (&self.memory_type, "memory_type"),
            (&self.storage_type, "storage_type"),
            (&self.network_type, "network_type"),
        ] {
            if let Some(s) = value {
                non_empty(s, &path::join("hardware", key))?;
            }
        }
        non_negative(self.memory_per_node_gb, "hardware.memory_per_node_gb")?;
        non_negative(self.storage_capacity_tb, "hardware.storage_capacity_tb")?;
        positive(self.cores_per_node, "hardware.cores_per_node")?;
        positive(self.threads_per_core, "hardware.threads_per_core")?;
        positive(self.node_count, "hardware.node_count")?;
        for (i, acc) in self.accelerators.iter().flatten().enumerate() {
            let at = path::index("hardware.accelerators", i);
            non_empty(&acc.model, &path::join(&at, "model"))?;
            positive(Some(acc.count_per_node), &path::join(&at, "count_per_node"))?;
        }
        Ok(())
    }
}

impl SchedulerData {
    fn check_invariants(&self) -> Check {
        let fork = self.scheduler_type == SchedulerType::Fork;
        if let Some(v) = &self.scheduler_version {
            if fork {
                return Err(ModelError::invariant(
                    "scheduler.scheduler_version",
                    "fork scheduling has no version",
                ));
            }
            version_string(v, "scheduler.scheduler_version")?;
        }
        if fork && !self.queues().is_empty() {
            return Err(ModelError::invariant(
                "scheduler",
                "fork scheduling does not define queues",
            ));
        }
        let mut names = HashSet::new();
        let mut default_seen = false;
        for (i, q) in self.queues().iter().enumerate() {
            let at = path::index("scheduler.queues", i);
            identifier(&q.name, &path::join(&at, "name"))?;
            if !names.insert(q.name.as_str()) {
                return Err(ModelError::invariant(
                    path::join(&at, "name"),
                    format!("duplicate queue name {:?}", q.name),
                ));
            }
            positive(q.max_nodes, &path::join(&at, "max_nodes"))?;
            positive(q.max_wallclock_minutes, &path::join(&at, "max_wallclock_minutes"))?;
            positive(q.max_jobs_per_user, &path::join(&at, "max_jobs_per_user"))?;
            if q.default {
                if default_seen {
                    return Err(ModelError::invariant(
                        path::join(&at, "default"),
                        "more than one default queue",
                    ));
                }
                default_seen = true;
            }
        }
        Ok(())
    }
}

impl Constraint {
    /// Checks that `value` has the shape `predicate` requires.
    pub fn check_shape(&self) -> Result<(), String> {
        use ConstraintValue::{List, Scalar as One};
        match (self.predicate, &self.value) {
            (Predicate::Exists, None) => Ok(()),
            (Predicate::Exists, Some(_)) => Err("exists takes no value".into()),
            (Predicate::Equals, Some(One(_))) => Ok(()),
            (Predicate::OneOf, Some(List(items))) if !items.is_empty() => Ok(()),
            (Predicate::MinVersion, Some(One(Scalar::Str(s)))) if version::is_valid(s) => Ok(()),
            (Predicate::MinValue, Some(One(Scalar::Num(_)))) => Ok(()),
            (Predicate::Equals, _) => Err("equals requires a scalar value".into()),
            (Predicate::OneOf, _) => Err("one_of requires a non-empty list".into()),
            (Predicate::MinVersion, _) => Err("min_version requires a version string".into()),
            (Predicate::MinValue, _) => Err("min_value requires a number".into()),
        }
    }
}

impl ApplicationDescription {
    pub fn check_invariants(&self) -> Check {
        identifier(&self.id, "id")?;
        non_empty(&self.high_level.name, "high_level.name")?;
        if let Some(p) = &self.packaging {
            non_empty(&p.reference, "packaging.reference")?;
        }
        for (list, items) in [
            ("architecture_hardware", &self.architecture_hardware),
            ("software_dependencies", &self.software_dependencies),
        ] {
            for (i, c) in items.iter().flatten().enumerate() {
                let at = path::index(list, i);
                non_empty(&c.key, &path::join(&at, "key"))?;
                c.check_shape()
                    .map_err(|msg| ModelError::invariant(path::join(&at, "value"), msg))?;
            }
        }
        let mut names = HashSet::new();
        for (i, input) in self.inputs.iter().flatten().enumerate() {
            let at = path::join(&path::index("inputs", i), "name");
            identifier(&input.name, &at)?;
            if !names.insert(input.name.as_str()) {
                return Err(ModelError::invariant(at, "duplicate input name"));
            }
        }
        for (i, req) in self.runtime_requirements.iter().flatten().enumerate() {
            let at = path::index("runtime_requirements", i);
            non_empty(&req.key, &path::join(&at, "key"))?;
            non_empty(&req.value, &path::join(&at, "value"))?;
        }
        let mut names = HashSet::new();
        for (i, output) in self.outputs.iter().flatten().enumerate() {
            let at = path::join(&path::index("outputs", i), "name");
            identifier(&output.name, &at)?;
            if !names.insert(output.name.as_str()) {
                return Err(ModelError::invariant(at, "duplicate output name"));
            }
        }
        Ok(())
    }
}
