//! In-memory data model for resource and application descriptions.
//!
//! Documents are decoded from the canonical JSON encoding by [`parse_resource`]
//! and [`parse_application`], and written back out by [`canonical_serialize`].
//! Decoding checks structure (required keys, JSON types, enum domains);
//! value-level invariants such as positivity or uniqueness are checked by
//! [`Description::check_invariants`], which serialization runs first.

mod decode;
mod invariants;
pub mod path;
pub mod version;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};
use serde_json::Value;

use crate::canonical;

pub use decode::{parse_application, parse_application_with, parse_resource, parse_resource_with, resource_from_value};
pub use invariants::{is_identifier, IDENTIFIER_MAX_LEN};
pub use version::{compare_versions, FormatError};

/// Unknown-key handling while decoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    /// Any key not defined by the model is a [`ModelError::Structure`].
    #[default]
    Strict,
    /// Unknown keys are kept in [`Extensions`] and written back on serialization.
    Lenient,
}

/// Keys the model does not define, keyed by their concrete document path
/// (for example `hardware.interconnect` or `scheduler.queues[1].partition`).
pub type Extensions = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("structure error at {path}: {message}")]
    Structure { path: String, message: String },
    #[error("invariant violated at {path}: {message}")]
    Invariant { path: String, message: String },
}

impl ModelError {
    /// Document path the error refers to; `$` for whole-document syntax errors.
    pub fn path(&self) -> &str {
        match self {
            ModelError::Syntax { .. } => "$",
            ModelError::Structure { path, .. } | ModelError::Invariant { path, .. } => path,
        }
    }

    pub(crate) fn structure(path: impl Into<String>, message: impl Into<String>) -> Self {
        ModelError::Structure {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn invariant(path: impl Into<String>, message: impl Into<String>) -> Self {
        ModelError::Invariant {
            path: path.into(),
            message: message.into(),
        }
    }
}

/// Declares a closed string enumeration with its wire names.
macro_rules! string_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $wire:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $wire),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($wire => Ok($name::$variant),)+
                    other => Err(format!(
                        "{other:?} is not one of {}",
                        [$($wire),+].join(", ")
                    )),
                }
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.serialize_str(self.as_str())
            }
        }

        impl<'de> serde::Deserialize<'de> for $name {
            fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let s = <std::borrow::Cow<'de, str>>::deserialize(deserializer)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

string_enum!(
    /// The two kinds of document held by the registry.
    Kind {
        Resource => "resource",
        Application => "application",
    }
);

impl Kind {
    /// Plural form used in HTTP paths (`/v1/resources/...`).
    pub fn plural(self) -> &'static str {
        match self {
            Kind::Resource => "resources",
            Kind::Application => "applications",
        }
    }

    /// Accepts either the singular or the plural spelling.
    pub fn parse_loose(s: &str) -> Option<Kind> {
        match s {
            "resource" | "resources" => Some(Kind::Resource),
            "application" | "applications" => Some(Kind::Application),
            _ => None,
        }
    }
}

string_enum!(ResourceType {
    Compute => "compute",
    Storage => "storage",
});

string_enum!(ResourceCategory {
    HpcCluster => "hpc_cluster",
    CampusCluster => "campus_cluster",
    NationalStorage => "national_storage",
    AcademicCloud => "academic_cloud",
    CommercialCloud => "commercial_cloud",
    IndividualLab => "individual_lab",
});

string_enum!(SchedulerType {
    Slurm => "slurm",
    Sge => "sge",
    Pbs => "pbs",
    Lsf => "lsf",
    Condor => "condor",
    Fork => "fork",
    Other => "other",
});

string_enum!(PackageKind {
    Mpi => "mpi",
    OpenMp => "openmp",
    Cuda => "cuda",
    ContainerRuntime => "container_runtime",
    Module => "module",
    Library => "library",
    Framework => "framework",
    Other => "other",
});

string_enum!(AppType {
    CommandLineBatch => "command_line_batch",
    Interactive => "interactive",
    Streaming => "streaming",
});

string_enum!(PackagingKind {
    ContainerImage => "container_image",
    VmImage => "vm_image",
    Unikernel => "unikernel",
    Module => "module",
    Bare => "bare",
});

string_enum!(InputKind {
    File => "file",
    Object => "object",
    Database => "database",
    Url => "url",
    EnvironmentVariable => "environment_variable",
});

string_enum!(OutputKind {
    File => "file",
    StdoutStream => "stdout_stream",
    StderrStream => "stderr_stream",
    Object => "object",
});

string_enum!(ConstraintCategory {
    Hardware => "hardware",
    OperatingSystem => "operating_system",
    Scheduler => "scheduler",
    Software => "software",
    HighLevel => "high_level",
});

string_enum!(Predicate {
    Equals => "equals",
    OneOf => "one_of",
    MinVersion => "min_version",
    MinValue => "min_value",
    Exists => "exists",
});

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResourceDescription {
    pub id: String,
    pub high_level: HighLevelResourceData,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hardware: Option<HardwareData>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub operating_system: Option<OperatingSystemData>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheduler: Option<SchedulerData>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub software: Option<SoftwareData>,
    #[serde(skip)]
    pub extensions: Extensions,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HighLevelResourceData {
    pub name: String,
    pub hostname: String,
    pub owner: String,
    pub resource_type: ResourceType,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub category: Option<ResourceCategory>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HardwareData {
    pub cpu_architecture: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub memory_type: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub memory_per_node_gb: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cores_per_node: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads_per_core: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node_count: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub storage_type: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub storage_capacity_tb: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub network_type: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accelerators: Option<Vec<Accelerator>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Accelerator {
    pub model: String,
    pub count_per_node: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperatingSystemData {
    pub kernel_name: String,
    pub kernel_version: String,
    pub distribution: String,
    pub distribution_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchedulerData {
    pub scheduler_type: SchedulerType,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheduler_version: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub queues: Option<Vec<QueueDefinition>>,
}

impl SchedulerData {
    pub fn queues(&self) -> &[QueueDefinition] {
        self.queues.as_deref().unwrap_or(&[])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueueDefinition {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_nodes: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_wallclock_minutes: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_jobs_per_user: Option<u64>,
    #[serde(skip_serializing_if = "is_false")]
    pub default: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SoftwareData {
    pub packages: Vec<SoftwarePackage>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SoftwarePackage {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub version: Option<String>,
    pub kind: PackageKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApplicationDescription {
    pub id: String,
    pub high_level: HighLevelApplicationData,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub packaging: Option<Packaging>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub architecture_hardware: Option<Vec<Constraint>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub software_dependencies: Option<Vec<Constraint>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inputs: Option<Vec<InputSpec>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_requirements: Option<Vec<RuntimeRequirement>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outputs: Option<Vec<OutputSpec>>,
    #[serde(skip)]
    pub extensions: Extensions,
}

impl ApplicationDescription {
    /// All matchable constraints: hardware first, then software, each in
    /// declaration order.
    pub fn constraints(&self) -> impl Iterator<Item = &Constraint> {
        self.architecture_hardware
            .iter()
            .flatten()
            .chain(self.software_dependencies.iter().flatten())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HighLevelApplicationData {
    pub name: String,
    pub app_type: AppType,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Packaging {
    pub kind: PackagingKind,
    pub reference: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputSpec {
    pub name: String,
    pub kind: InputKind,
    pub required: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuntimeRequirement {
    pub key: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputSpec {
    pub name: String,
    pub kind: OutputKind,
}

/// One application-side requirement on a resource field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Constraint {
    pub category: ConstraintCategory,
    pub key: String,
    pub predicate: Predicate,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<ConstraintValue>,
    /// Preferred constraints contribute to the match score instead of
    /// deciding compatibility.
    #[serde(skip_serializing_if = "is_false")]
    pub preferred: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Scalar {
    Str(String),
    Num(f64),
    Bool(bool),
}

impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Scalar::Str(s) => serializer.serialize_str(s),
            Scalar::Num(n) => serializer.serialize_f64(*n),
            Scalar::Bool(b) => serializer.serialize_bool(*b),
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Str(s) => write!(f, "{s:?}"),
            Scalar::Num(n) => write!(f, "{n}"),
            Scalar::Bool(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ConstraintValue {
    Scalar(Scalar),
    List(Vec<Scalar>),
}

/// Either kind of description.
#[derive(Debug, Clone, PartialEq)]
pub enum Description {
    Resource(ResourceDescription),
    Application(ApplicationDescription),
}

impl Description {
    pub fn parse(kind: Kind, document: &[u8], mode: ParseMode) -> Result<Self, ModelError> {
        match kind {
            Kind::Resource => parse_resource_with(document, mode).map(Description::Resource),
            Kind::Application => {
                parse_application_with(document, mode).map(Description::Application)
            }
        }
    }

    pub fn kind(&self) -> Kind {
        match self {
            Description::Resource(_) => Kind::Resource,
            Description::Application(_) => Kind::Application,
        }
    }

    pub fn id(&self) -> &str {
        match self {
            Description::Resource(r) => &r.id,
            Description::Application(a) => &a.id,
        }
    }

    pub fn check_invariants(&self) -> Result<(), ModelError> {
        match self {
            Description::Resource(r) => r.check_invariants(),
            Description::Application(a) => a.check_invariants(),
        }
    }

    fn to_value(&self) -> Value {
        let (value, extensions) = match self {
            Description::Resource(r) => (serde_json::to_value(r), &r.extensions),
            Description::Application(a) => (serde_json::to_value(a), &a.extensions),
        };
        let mut value = value.expect("model types serialize infallibly");
        for (at, extra) in extensions {
            path::insert(&mut value, at, extra.clone());
        }
        value
    }
}

impl From<ResourceDescription> for Description {
    fn from(r: ResourceDescription) -> Self {
        Description::Resource(r)
    }
}

impl From<ApplicationDescription> for Description {
    fn from(a: ApplicationDescription) -> Self {
        Description::Application(a)
    }
}

/// Deterministic single-line encoding: keys sorted at every level, absent
/// optional fields omitted, numbers in shortest round-trip form.
pub fn canonical_serialize(doc: &Description) -> Result<Vec<u8>, ModelError> {
    doc.check_invariants()?;
    Ok(canonical::to_vec(&doc.to_value()))
}

/// Decodes `document` leniently and re-encodes it canonically, so that
/// documents carrying keys unknown to this model keep them.
pub fn canonicalize(kind: Kind, document: &[u8]) -> Result<Vec<u8>, ModelError> {
    canonical_serialize(&Description::parse(kind, document, ParseMode::Lenient)?)
}
