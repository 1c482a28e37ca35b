use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Arc, OnceLock};

use serde::Serialize;

use super::{load_spec, SpecDefinition, SpecError, SpecVersion};
use crate::model::Kind;

const RESOURCE_BASELINE: &[u8] = include_bytes!("../../specs/resource-spec-1.0.0.json");
const APPLICATION_BASELINE: &[u8] = include_bytes!("../../specs/application-spec-1.0.0.json");

pub(crate) fn bundled_bytes(kind: Kind) -> &'static [u8] {
    match kind {
        Kind::Resource => RESOURCE_BASELINE,
        Kind::Application => APPLICATION_BASELINE,
    }
}

/// The shipped 1.0.0 spec for `kind`.
pub fn baseline(kind: Kind) -> &'static SpecDefinition {
    static SPECS: OnceLock<[SpecDefinition; 2]> = OnceLock::new();
    let specs = SPECS.get_or_init(|| {
        [Kind::Resource, Kind::Application]
            .map(|k| load_spec(bundled_bytes(k)).expect("bundled spec is well-formed"))
    });
    match kind {
        Kind::Resource => &specs[0],
        Kind::Application => &specs[1],
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SpecFile {
    pub kind: Kind,
    pub version: SpecVersion,
    pub file: String,
}

/// All loaded specs, keyed by kind and version.
#[derive(Debug, Clone, Default)]
pub struct SpecCatalog {
    specs: BTreeMap<(Kind, SpecVersion), Arc<SpecDefinition>>,
}

impl SpecCatalog {
    /// A catalog holding the bundled baseline specs.
    pub fn bundled() -> Self {
        let mut catalog = SpecCatalog::default();
        for kind in Kind::ALL {
            catalog.insert(baseline(*kind).clone());
        }
        catalog
    }

    pub fn insert(&mut self, spec: SpecDefinition) -> Option<Arc<SpecDefinition>> {
        self.specs
            .insert((spec.kind(), spec.version()), Arc::new(spec))
    }

    /// Loads every `resource-spec-<v>.json` / `application-spec-<v>.json` in
    /// `dir`. The version in the file name must match the declared one.
    pub fn load_dir(&mut self, dir: &Path) -> Result<usize, SpecError> {
        let entries = std::fs::read_dir(dir)
            .map_err(|e| SpecError::Document(format!("{}: {e}", dir.display())))?;
        let mut names: Vec<_> = entries
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        names.sort();
        let mut loaded = 0;
        for path in names {
            let Some(stem) = path.file_name().and_then(|n| n.to_str()) else {
                continue;
            };
            if !(stem.starts_with("resource-spec-") || stem.starts_with("application-spec-")) {
                continue;
            }
            let bytes = std::fs::read(&path)
                .map_err(|e| SpecError::Document(format!("{}: {e}", path.display())))?;
            let spec = load_spec(&bytes)?;
            if spec.file_name() != stem {
                return Err(SpecError::Document(format!(
                    "{} declares {} {}",
                    path.display(),
                    spec.kind(),
                    spec.version()
                )));
            }
            self.insert(spec);
            loaded += 1;
        }
        Ok(loaded)
    }

    pub fn get(&self, kind: Kind, version: SpecVersion) -> Option<Arc<SpecDefinition>> {
        self.specs.get(&(kind, version)).cloned()
    }

    /// The highest loaded version for `kind`.
    pub fn latest(&self, kind: Kind) -> Option<Arc<SpecDefinition>> {
        self.specs
            .range((kind, SpecVersion::new(0, 0, 0))..=(kind, SpecVersion::new(u64::MAX, u64::MAX, u64::MAX)))
            .next_back()
            .map(|(_, s)| s.clone())
    }

    /// `version` if given, otherwise the latest.
    pub fn resolve(&self, kind: Kind, version: Option<SpecVersion>) -> Option<Arc<SpecDefinition>> {
        match version {
            Some(v) => self.get(kind, v),
            None => self.latest(kind),
        }
    }

    pub fn list(&self) -> Vec<SpecFile> {
        self.specs
            .values()
            .map(|s| SpecFile {
                kind: s.kind(),
                version: s.version(),
                file: s.file_name(),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_catalog() {
        let catalog = SpecCatalog::bundled();
        let listed = catalog.list();
        assert_eq!(listed.len(), 2);
        assert_eq!(listed[0].file, "resource-spec-1.0.0.json");
        assert_eq!(listed[1].file, "application-spec-1.0.0.json");
        assert_eq!(
            catalog.latest(Kind::Application).unwrap().version(),
            SpecVersion::new(1, 0, 0)
        );
    }

    #[test]
    fn directory_specs_extend_and_become_latest() {
        let dir = tempfile::tempdir().unwrap();
        let mut doc: serde_json::Value = serde_json::from_slice(RESOURCE_BASELINE).unwrap();
        doc["version"] = "1.1.0".into();
        std::fs::write(
            dir.path().join("resource-spec-1.1.0.json"),
            serde_json::to_vec(&doc).unwrap(),
        )
        .unwrap();
        std::fs::write(dir.path().join("notes.json"), b"{}").unwrap();
        let mut catalog = SpecCatalog::bundled();
        assert_eq!(catalog.load_dir(dir.path()).unwrap(), 1);
        assert_eq!(
            catalog.latest(Kind::Resource).unwrap().version(),
            SpecVersion::new(1, 1, 0)
        );

        std::fs::write(
            dir.path().join("resource-spec-2.0.0.json"),
            serde_json::to_vec(&doc).unwrap(),
        )
        .unwrap();
        assert!(catalog.load_dir(dir.path()).is_err());
    }
}
