use std::str::FromStr;

use serde_json::{Map, Value};

use super::path;
use super::*;

pub fn parse_resource(document: &[u8]) -> Result<ResourceDescription, ModelError> {
    parse_resource_with(document, ParseMode::Strict)
}

pub fn parse_application(document: &[u8]) -> Result<ApplicationDescription, ModelError> {
    parse_application_with(document, ParseMode::Strict)
}

pub fn parse_resource_with(
    document: &[u8],
    mode: ParseMode,
) -> Result<ResourceDescription, ModelError> {
    resource_from_value(&decode_json(document)?, mode)
}

/// Decodes an already-parsed JSON document.
pub fn resource_from_value(root: &Value, mode: ParseMode) -> Result<ResourceDescription, ModelError> {
    let mut dec = Decoder::new(mode);
    let mut doc = dec.resource(root)?;
    doc.extensions = dec.extensions;
    Ok(doc)
}

pub fn parse_application_with(
    document: &[u8],
    mode: ParseMode,
) -> Result<ApplicationDescription, ModelError> {
    let root = decode_json(document)?;
    let mut dec = Decoder::new(mode);
    let mut doc = dec.application(&root)?;
    doc.extensions = dec.extensions;
    Ok(doc)
}

pub(crate) fn decode_json(document: &[u8]) -> Result<Value, ModelError> {
    serde_json::from_slice(document).map_err(|e| ModelError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

type Result<T, E = ModelError> = std::result::Result<T, E>;

struct Decoder {
    mode: ParseMode,
    extensions: Extensions,
}

/// Field cursor over one JSON object; tracks which keys the model consumed.
struct Obj<'v> {
    path: String,
    map: &'v Map<String, Value>,
    consumed: Vec<&'static str>,
}

fn type_error(path: &str, expected: &str, found: &Value) -> ModelError {
    let found = match found {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    };
    ModelError::structure(path, format!("expected {expected}, found {found}"))
}

fn object<'v>(v: &'v Value, path: &str) -> Result<Obj<'v>> {
    match v {
        Value::Object(map) => Ok(Obj {
            path: path.to_string(),
            map,
            consumed: Vec::new(),
        }),
        other => Err(type_error(display(path), "object", other)),
    }
}

fn display(path: &str) -> &str {
    if path.is_empty() {
        "$"
    } else {
        path
    }
}

impl<'v> Obj<'v> {
    fn get(&mut self, key: &'static str) -> Option<(&'v Value, String)> {
        self.consumed.push(key);
        self.map.get(key).map(|v| (v, path::join(&self.path, key)))
    }

    fn req(&mut self, key: &'static str) -> Result<(&'v Value, String)> {
        self.get(key).ok_or_else(|| {
            ModelError::structure(
                path::join(&self.path, key),
                "missing required field",
            )
        })
    }

    fn req_str(&mut self, key: &'static str) -> Result<String> {
        let (v, p) = self.req(key)?;
        string(v, &p)
    }

    fn opt_str(&mut self, key: &'static str) -> Result<Option<String>> {
        self.get(key).map(|(v, p)| string(v, &p)).transpose()
    }

    fn opt_u64(&mut self, key: &'static str) -> Result<Option<u64>> {
        self.get(key).map(|(v, p)| unsigned(v, &p)).transpose()
    }

    fn req_u64(&mut self, key: &'static str) -> Result<u64> {
        let (v, p) = self.req(key)?;
        unsigned(v, &p)
    }

    fn opt_f64(&mut self, key: &'static str) -> Result<Option<f64>> {
        self.get(key).map(|(v, p)| number(v, &p)).transpose()
    }

    fn req_enum<T: FromStr<Err = String>>(&mut self, key: &'static str) -> Result<T> {
        let (v, p) = self.req(key)?;
        enumerated(v, &p)
    }

    fn opt_enum<T: FromStr<Err = String>>(&mut self, key: &'static str) -> Result<Option<T>> {
        self.get(key).map(|(v, p)| enumerated(v, &p)).transpose()
    }

    fn req_bool(&mut self, key: &'static str) -> Result<bool> {
        let (v, p) = self.req(key)?;
        boolean(v, &p)
    }

    fn opt_bool(&mut self, key: &'static str) -> Result<Option<bool>> {
        self.get(key).map(|(v, p)| boolean(v, &p)).transpose()
    }
}

fn string(v: &Value, path: &str) -> Result<String> {
    v.as_str()
        .map(str::to_string)
        .ok_or_else(|| type_error(path, "string", v))
}

fn unsigned(v: &Value, path: &str) -> Result<u64> {
    v.as_u64()
        .ok_or_else(|| type_error(path, "non-negative integer", v))
}

fn number(v: &Value, path: &str) -> Result<f64> {
    v.as_f64().ok_or_else(|| type_error(path, "number", v))
}

fn boolean(v: &Value, path: &str) -> Result<bool> {
    v.as_bool().ok_or_else(|| type_error(path, "boolean", v))
}

fn enumerated<T: FromStr<Err = String>>(v: &Value, path: &str) -> Result<T> {
    let s = v.as_str().ok_or_else(|| type_error(path, "string", v))?;
    s.parse().map_err(|msg| ModelError::structure(path, msg))
}

fn scalar(v: &Value, path: &str) -> Result<Scalar> {
    match v {
        Value::String(s) => Ok(Scalar::Str(s.clone())),
        Value::Number(n) => Ok(Scalar::Num(n.as_f64().unwrap_or_default())),
        Value::Bool(b) => Ok(Scalar::Bool(*b)),
        other => Err(type_error(path, "string, number or boolean", other)),
    }
}

impl Decoder {
    fn new(mode: ParseMode) -> Self {
        Decoder {
            mode,
            extensions: Extensions::new(),
        }
    }

    /// Rejects or stashes every key the model did not consume.
    fn finish(&mut self, obj: Obj<'_>) -> Result<()> {
        let mut unknown: Vec<(&String, &Value)> = obj
            .map
            .iter()
            .filter(|(k, _)| !obj.consumed.contains(&k.as_str()))
            .collect();
        unknown.sort_by(|a, b| a.0.cmp(b.0));
        for (key, value) in unknown {
            let at = path::join(&obj.path, key);
            match self.mode {
                ParseMode::Strict => return Err(ModelError::structure(at, "unknown key")),
                ParseMode::Lenient if !path::is_plain_key(key) => {
                    return Err(ModelError::structure(
                        at,
                        "unknown key contains characters that cannot be preserved",
                    ))
                }
                ParseMode::Lenient => {
                    self.extensions.insert(at, value.clone());
                }
            }
        }
        Ok(())
    }

    fn list<T>(
        &mut self,
        v: &Value,
        path: &str,
        mut item: impl FnMut(&mut Self, &Value, &str) -> Result<T>,
    ) -> Result<Vec<T>> {
        let items = v.as_array().ok_or_else(|| type_error(path, "array", v))?;
        items
            .iter()
            .enumerate()
            .map(|(i, elem)| item(self, elem, &path::index(path, i)))
            .collect()
    }

    fn opt_list<T>(
        &mut self,
        obj: &mut Obj<'_>,
        key: &'static str,
        item: impl FnMut(&mut Self, &Value, &str) -> Result<T>,
    ) -> Result<Option<Vec<T>>> {
        match obj.get(key) {
            Some((v, p)) => self.list(v, &p, item).map(Some),
            None => Ok(None),
        }
    }

    fn opt_block<T>(
        &mut self,
        obj: &mut Obj<'_>,
        key: &'static str,
        block: impl FnOnce(&mut Self, &Value, &str) -> Result<T>,
    ) -> Result<Option<T>> {
        match obj.get(key) {
            Some((v, p)) => block(self, v, &p).map(Some),
            None => Ok(None),
        }
    }

    fn resource(&mut self, root: &Value) -> Result<ResourceDescription> {
        let mut top = object(root, "")?;
        let id = top.req_str("id")?;
        let (hl, hl_path) = top.req("high_level")?;
        let high_level = self.resource_high_level(hl, &hl_path)?;
        let hardware = self.opt_block(&mut top, "hardware", Self::hardware)?;
        let operating_system = self.opt_block(&mut top, "operating_system", Self::os)?;
        let scheduler = self.opt_block(&mut top, "scheduler", Self::scheduler)?;
        let software = self.opt_block(&mut top, "software", Self::software)?;
        self.finish(top)?;
        Ok(ResourceDescription {
            id,
            high_level,
            hardware,
            operating_system,
            scheduler,
            software,
            extensions: Extensions::new(),
        })
    }

    fn resource_high_level(&mut self, v: &Value, path: &str) -> Result<HighLevelResourceData> {
        let mut o = object(v, path)?;
        let out = HighLevelResourceData {
            name: o.req_str("name")?,
            hostname: o.req_str("hostname")?,
            owner: o.req_str("owner")?,
            resource_type: o.req_enum("resource_type")?,
            category: o.opt_enum("category")?,
            description: o.opt_str("description")?,
        };
        self.finish(o)?;
        Ok(out)
    }

    fn hardware(&mut self, v: &Value, path: &str) -> Result<HardwareData> {
        let mut o = object(v, path)?;
        let cpu_architecture = o.req_str("cpu_architecture")?;
        let memory_type = o.opt_str("memory_type")?;
        let memory_per_node_gb = o.opt_f64("memory_per_node_gb")?;
        let cores_per_node = o.opt_u64("cores_per_node")?;
        let threads_per_core = o.opt_u64("threads_per_core")?;
        let node_count = o.opt_u64("node_count")?;
        let storage_type = o.opt_str("storage_type")?;
        let storage_capacity_tb = o.opt_f64("storage_capacity_tb")?;
        let network_type = o.opt_str("network_type")?;
        let accelerators = self.opt_list(&mut o, "accelerators", |dec, v, p| {
            let mut a = object(v, p)?;
            let out = Accelerator {
                model: a.req_str("model")?,
                count_per_node: a.req_u64("count_per_node")?,
            };
            dec.finish(a)?;
            Ok(out)
        })?;
        self.finish(o)?;
        Ok(HardwareData {
            cpu_architecture,
            memory_type,
            memory_per_node_gb,
            cores_per_node,
            threads_per_core,
            node_count,
            storage_type,
            storage_capacity_tb,
            network_type,
            accelerators,
        })
    }

    fn os(&mut self, v: &Value, path: &str) -> Result<OperatingSystemData> {
        let mut o = object(v, path)?;
        let out = OperatingSystemData {
            kernel_name: o.req_str("kernel_name")?,
            kernel_version: o.req_str("kernel_version")?,
            distribution: o.req_str("distribution")?,
            distribution_version: o.req_str("distribution_version")?,
        };
        self.finish(o)?;
        Ok(out)
    }

    fn scheduler(&mut self, v: &Value, path: &str) -> Result<SchedulerData> {
        let mut o = object(v, path)?;
        let scheduler_type = o.req_enum("scheduler_type")?;
        let scheduler_version = o.opt_str("scheduler_version")?;
        let queues = self.opt_list(&mut o, "queues", |dec, v, p| {
            let mut q = object(v, p)?;
            let out = QueueDefinition {
                name: q.req_str("name")?,
                max_nodes: q.opt_u64("max_nodes")?,
                max_wallclock_minutes: q.opt_u64("max_wallclock_minutes")?,
                max_jobs_per_user: q.opt_u64("max_jobs_per_user")?,
                default: q.opt_bool("default")?.unwrap_or(false),
            };
            dec.finish(q)?;
            Ok(out)
        })?;
        self.finish(o)?;
        Ok(SchedulerData {
            scheduler_type,
            scheduler_version,
            queues,
        })
    }

    fn software(&mut self, v: &Value, path: &str) -> Result<SoftwareData> {
        let mut o = object(v, path)?;
        let (list, list_path) = o.req("packages")?;
        let packages = self.list(list, &list_path, |dec, v, p| {
            let mut pkg = object(v, p)?;
            let out = SoftwarePackage {
                name: pkg.req_str("name")?,
                version: pkg.opt_str("version")?,
                kind: pkg.req_enum("kind")?,
            };
            dec.finish(pkg)?;
            Ok(out)
        })?;
        self.finish(o)?;
        Ok(SoftwareData { packages })
    }

    fn application(&mut self, root: &Value) -> Result<ApplicationDescription> {
        let mut top = object(root, "")?;
        let id = top.req_str("id")?;
        let (hl, hl_path) = top.req("high_level")?;
        let high_level = {
            let mut o = object(hl, &hl_path)?;
            let out = HighLevelApplicationData {
                name: o.req_str("name")?,
                app_type: o.req_enum("app_type")?,
                description: o.opt_str("description")?,
            };
            self.finish(o)?;
            out
        };
        let packaging = self.opt_block(&mut top, "packaging", |dec, v, p| {
            let mut o = object(v, p)?;
            let out = Packaging {
                kind: o.req_enum("kind")?,
                reference: o.req_str("reference")?,
            };
            dec.finish(o)?;
            Ok(out)
        })?;
        let architecture_hardware =
            self.opt_list(&mut top, "architecture_hardware", Self::constraint)?;
        let software_dependencies =
            self.opt_list(&mut top, "software_dependencies", Self::constraint)?;
        let inputs = self.opt_list(&mut top, "inputs", |dec, v, p| {
            let mut o = object(v, p)?;
            let out = InputSpec {
                name: o.req_str("name")?,
                kind: o.req_enum("kind")?,
                required: o.req_bool("required")?,
            };
            dec.finish(o)?;
            Ok(out)
        })?;
        let runtime_requirements = self.opt_list(&mut top, "runtime_requirements", |dec, v, p| {
            let mut o = object(v, p)?;
            let out = RuntimeRequirement {
                key: o.req_str("key")?,
                value: o.req_str("value")?,
            };
            dec.finish(o)?;
            Ok(out)
        })?;
        let outputs = self.opt_list(&mut top, "outputs", |dec, v, p| {
            let mut o = object(v, p)?;
            let out = OutputSpec {
                name: o.req_str("name")?,
                kind: o.req_enum("kind")?,
            };
            dec.finish(o)?;
            Ok(out)
        })?;
        self.finish(top)?;
        Ok(ApplicationDescription {
            id,
            high_level,
            packaging,
            architecture_hardware,
            software_dependencies,
            inputs,
            runtime_requirements,
            outputs,
            extensions: Extensions::new(),
        })
    }

    fn constraint(&mut self, v: &Value, path: &str) -> Result<Constraint> {
        let mut o = object(v, path)?;
        let category = o.req_enum("category")?;
        let key = o.req_str("key")?;
        let predicate = o.req_enum("predicate")?;
        let value = match o.get("value") {
            None => None,
            Some((Value::Array(items), p)) => Some(ConstraintValue::List(
                items
                    .iter()
                    .enumerate()
                    .map(|(i, item)| scalar(item, &path::index(&p, i)))
                    .collect::<Result<_>>()?,
            )),
            Some((v, p)) => Some(ConstraintValue::Scalar(scalar(v, &p)?)),
        };
        let preferred = o.opt_bool("preferred")?.unwrap_or(false);
        self.finish(o)?;
        Ok(Constraint {
            category,
            key,
            predicate,
            value,
            preferred,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FRONTERA: &str = r#"{
        "id": "frontera",
        "high_level": {"name": "Frontera", "hostname": "frontera.tacc.utexas.edu",
                       "owner": "TACC", "resource_type": "compute"},
        "scheduler": {"scheduler_type": "slurm"}
    }"#;

    #[test]
    fn parses_frontera_blocks() {
        let r = parse_resource(FRONTERA.as_bytes()).unwrap();
        assert_eq!(r.id, "frontera");
        assert_eq!(r.high_level.name, "Frontera");
        assert_eq!(r.high_level.hostname, "frontera.tacc.utexas.edu");
        assert_eq!(r.high_level.owner, "TACC");
        assert_eq!(r.high_level.resource_type, ResourceType::Compute);
        assert_eq!(
            r.scheduler.as_ref().unwrap().scheduler_type,
            SchedulerType::Slurm
        );
        assert!(r.hardware.is_none() && r.software.is_none());
    }

    #[test]
    fn minimal_storage_resource() {
        let doc = br#"{"id":"corral","high_level":{"name":"Corral","hostname":"corral.tacc.utexas.edu","owner":"TACC","resource_type":"storage"}}"#;
        let r = parse_resource(doc).unwrap();
        assert_eq!(r.high_level.resource_type, ResourceType::Storage);
        assert!(r.hardware.is_none());
        assert!(r.operating_system.is_none());
        assert!(r.scheduler.is_none());
        assert!(r.software.is_none());
    }

    #[test]
    fn textual_core_count_is_structure_error() {
        let doc = br#"{"id":"x","high_level":{"name":"X","hostname":"x","owner":"o","resource_type":"compute"},
                      "hardware":{"cpu_architecture":"x86_64","cores_per_node":"fifty-six"}}"#;
        let err = parse_resource(doc).unwrap_err();
        assert!(matches!(err, ModelError::Structure { .. }));
        assert_eq!(err.path(), "hardware.cores_per_node");
    }

    #[test]
    fn malformed_json_reports_position() {
        let err = parse_resource(b"{\n  \"id\": \"x\",\n  oops\n}").unwrap_err();
        match err {
            ModelError::Syntax { line, column, .. } => {
                assert_eq!(line, 3);
                assert!(column > 0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_hostname_is_reported_by_path() {
        let doc = br#"{"id":"x","high_level":{"name":"X","owner":"o","resource_type":"compute"}}"#;
        assert_eq!(parse_resource(doc).unwrap_err().path(), "high_level.hostname");
    }

    #[test]
    fn applications_by_type() {
        let fastqc = br#"{"id":"fastqc","high_level":{"name":"fastqc","app_type":"command_line_batch"}}"#;
        let app = parse_application(fastqc).unwrap();
        assert_eq!(app.high_level.app_type, AppType::CommandLineBatch);

        let jupyter = br#"{"id":"jupyter","high_level":{"name":"Jupyter","app_type":"interactive"}}"#;
        let app = parse_application(jupyter).unwrap();
        assert_eq!(app.high_level.app_type, AppType::Interactive);
        assert_eq!(app.high_level.name, "Jupyter");

        let bad = br#"{"id":"x","high_level":{"name":"x","app_type":"batch-job"}}"#;
        let err = parse_application(bad).unwrap_err();
        assert!(matches!(err, ModelError::Structure { .. }));
        assert_eq!(err.path(), "high_level.app_type");
    }

    #[test]
    fn strict_rejects_and_lenient_keeps_unknown_keys() {
        let doc = br#"{"id":"x","high_level":{"name":"X","hostname":"x","owner":"o","resource_type":"compute"},
                      "scheduler":{"scheduler_type":"slurm","queues":[{"name":"normal","partition_weight":3}]}}"#;
        let err = parse_resource(doc).unwrap_err();
        assert_eq!(err.path(), "scheduler.queues[0].partition_weight");

        let r = parse_resource_with(doc, ParseMode::Lenient).unwrap();
        assert_eq!(
            r.extensions.get("scheduler.queues[0].partition_weight"),
            Some(&serde_json::json!(3))
        );
        let bytes = canonical_serialize(&r.clone().into()).unwrap();
        assert!(std::str::from_utf8(&bytes).unwrap().contains("\"partition_weight\":3"));
        assert_eq!(parse_resource_with(&bytes, ParseMode::Lenient).unwrap(), r);
    }

    #[test]
    fn constraint_values() {
        let doc = br#"{"id":"a","high_level":{"name":"a","app_type":"streaming"},
            "software_dependencies":[
              {"category":"software","key":"packages","predicate":"one_of","value":["spark","storm"]},
              {"category":"hardware","key":"cores_per_node","predicate":"min_value","value":16,"preferred":true},
              {"category":"scheduler","key":"scheduler_type","predicate":"exists"}]}"#;
        let app = parse_application(doc).unwrap();
        let deps = app.software_dependencies.as_ref().unwrap();
        assert_eq!(
            deps[0].value,
            Some(ConstraintValue::List(vec![
                Scalar::Str("spark".into()),
                Scalar::Str("storm".into())
            ]))
        );
        assert_eq!(deps[1].value, Some(ConstraintValue::Scalar(Scalar::Num(16.0))));
        assert!(deps[1].preferred);
        assert_eq!(deps[2].value, None);
    }

    #[test]
    fn null_is_not_absence() {
        let doc = br#"{"id":"x","high_level":{"name":"X","hostname":"x","owner":"o","resource_type":"compute"},"hardware":null}"#;
        assert_eq!(parse_resource(doc).unwrap_err().path(), "hardware");
    }
}
