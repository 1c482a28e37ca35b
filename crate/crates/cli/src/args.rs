use std::path::PathBuf;

use cireg_core::model::Kind;
use cireg_core::store::{EntryVersion, Selector};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

#[derive(Debug, Parser)]
#[command(name = "cireg", version, about = "Describe, publish and match computational resources and applications")]
pub struct Cli {
    /// TOML config file, shared with `cireg serve`.
    #[arg(long, global = true, env = "CIREG_CONFIG")]
    pub config: Option<PathBuf>,
    /// Service URL. Without one, commands work on a local data directory.
    #[arg(long, global = true, env = "CIREG_ENDPOINT")]
    pub endpoint: Option<String>,
    /// Bearer token for writes against a service.
    #[arg(long, global = true, env = "CIREG_TOKEN", hide_env_values = true)]
    pub token: Option<String>,
    /// Local registry directory.
    #[arg(long, global = true)]
    pub data_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub output: Option<Output>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Output {
    Json,
    Table,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a description against a spec without storing it.
    Validate {
        file: PathBuf,
        #[arg(long, value_parser = kind)]
        kind: Kind,
        /// Spec version; defaults to the latest loaded.
        #[arg(long)]
        spec: Option<String>,
    },
    /// Store a description as the next version of its id.
    Publish {
        file: PathBuf,
        #[arg(long, value_parser = kind)]
        kind: Kind,
        /// Registry id; defaults to the document's `id`.
        #[arg(long)]
        id: Option<String>,
        /// Fail unless the current latest version is exactly this one.
        #[arg(long, value_parser = version)]
        expect_version: Option<EntryVersion>,
    },
    Get {
        #[arg(value_parser = kind)]
        kind: Kind,
        id: String,
        /// A version number or `latest`.
        #[arg(long, value_parser = selector)]
        version: Option<Selector>,
    },
    Archive {
        #[arg(value_parser = kind)]
        kind: Kind,
        id: String,
    },
    History {
        #[arg(value_parser = kind)]
        kind: Kind,
        id: String,
    },
    /// List ids whose latest version satisfies every `--where` clause.
    Search {
        #[arg(value_parser = kind)]
        kind: Kind,
        /// `path:op[:value]`, e.g. `scheduler.scheduler_type:eq:slurm`.
        #[arg(long = "where", value_name = "CLAUSE")]
        clauses: Vec<String>,
        #[arg(long)]
        include_archived: bool,
    },
    /// Rank active resources by how well they suit an application.
    Match {
        /// Application description to match.
        #[arg(required_unless_present = "app_id", conflicts_with = "app_id")]
        app_file: Option<PathBuf>,
        /// Match a registered application instead of a file.
        #[arg(long)]
        app_id: Option<String>,
        #[arg(long, requires = "app_id", value_parser = selector)]
        app_version: Option<Selector>,
        #[arg(long)]
        compatible_only: bool,
    },
    /// Run the HTTP service.
    Serve,
}

fn kind(s: &str) -> Result<Kind, String> {
    Kind::parse_loose(s).ok_or_else(|| format!("expected resource or application, not {s:?}"))
}

fn version(s: &str) -> Result<EntryVersion, String> {
    s.parse()
}

fn selector(s: &str) -> Result<Selector, String> {
    s.parse()
}
