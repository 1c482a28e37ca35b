//! Test support for the registry: hand-built fixtures, random document
//! generators, mutation harness and brute-force reference oracles.
//!
//! Nothing here depends on the registry crates, so the oracles stay
//! independent of the code they check.

pub mod gen;
pub mod mutate;
pub mod oracles;
pub mod versions;

use std::path::PathBuf;

use serde_json::Value;

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn fixture_path(relative: &str) -> PathBuf {
    fixtures_dir().join(relative)
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: String,
    /// `"resource"` or `"application"`.
    pub kind: &'static str,
    pub bytes: Vec<u8>,
}

impl Fixture {
    pub fn value(&self) -> Value {
        serde_json::from_slice(&self.bytes).expect("fixtures are JSON")
    }

    pub fn id(&self) -> String {
        self.value()["id"].as_str().expect("fixture id").to_string()
    }
}

fn load(sub: &str, kind: &'static str) -> Vec<Fixture> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(fixtures_dir().join(sub))
        .expect("fixture directory")
        .map(|e| e.expect("fixture entry").path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| Fixture {
            name: p.file_stem().unwrap().to_string_lossy().into_owned(),
            kind,
            bytes: std::fs::read(&p).expect("readable fixture"),
        })
        .collect()
}

pub fn resource_fixtures() -> Vec<Fixture> {
    load("resources", "resource")
}

pub fn application_fixtures() -> Vec<Fixture> {
    load("applications", "application")
}

/// All valid fixtures, resources first.
pub fn valid_fixtures() -> Vec<Fixture> {
    let mut all = resource_fixtures();
    all.extend(application_fixtures());
    all
}

pub fn invalid_fork_with_queues() -> Vec<u8> {
    std::fs::read(fixture_path("invalid/invalid-fork-with-queues.json")).expect("invalid fixture")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_fixtures_cover_all_categories() {
        let fixtures = valid_fixtures();
        assert_eq!(fixtures.len(), 10);
        let mut categories: Vec<String> = resource_fixtures()
            .iter()
            .filter_map(|f| f.value()["high_level"]["category"].as_str().map(str::to_string))
            .collect();
        categories.sort();
        categories.dedup();
        assert_eq!(categories.len(), gen::CATEGORIES.len());
        let mut app_types: Vec<String> = application_fixtures()
            .iter()
            .map(|f| f.value()["high_level"]["app_type"].as_str().unwrap().to_string())
            .collect();
        app_types.sort();
        assert_eq!(app_types, ["command_line_batch", "interactive", "streaming"]);
    }

    #[test]
    fn every_block_appears() {
        let resources: Vec<Value> = resource_fixtures().iter().map(Fixture::value).collect();
        for block in ["high_level", "hardware", "operating_system", "scheduler", "software"] {
            assert!(resources.iter().any(|r| r.get(block).is_some()), "{block}");
        }
        let apps: Vec<Value> = application_fixtures().iter().map(Fixture::value).collect();
        for block in [
            "high_level",
            "packaging",
            "architecture_hardware",
            "software_dependencies",
            "inputs",
            "runtime_requirements",
            "outputs",
        ] {
            assert!(apps.iter().any(|a| a.get(block).is_some()), "{block}");
        }
    }

    #[test]
    fn mutants_are_plentiful() {
        let n: usize = valid_fixtures().iter().map(|f| mutate::mutants(f.kind, &f.value()).len()).sum();
        assert!(n >= 200, "{n}");
    }
}
