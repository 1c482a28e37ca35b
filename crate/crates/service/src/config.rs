use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::Deserialize;

pub const DEFAULT_BIND: &str = "127.0.0.1:8470";

/// Service settings, read from a TOML file and then overridden by
/// `CIREG_BIND`, `CIREG_DATA_DIR`, `CIREG_WRITE_TOKEN` and `CIREG_SPEC_DIR`.
///
/// The file may also carry a `[client]` table for the command-line tool;
/// the service ignores it.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default = "default_bind")]
    pub bind: SocketAddr,
    #[serde(default = "default_data_dir")]
    pub data_dir: PathBuf,
    /// Bearer token required on writes. Writes are open when unset.
    #[serde(default)]
    pub write_token: Option<String>,
    /// Extra spec documents loaded on top of the bundled ones.
    #[serde(default)]
    pub spec_dir: Option<PathBuf>,
    #[serde(default)]
    pub client: Option<toml::Table>,
}

fn default_bind() -> SocketAddr {
    DEFAULT_BIND.parse().expect("default bind address parses")
}

fn default_data_dir() -> PathBuf {
    PathBuf::from("cireg-data")
}

impl Default for Config {
    fn default() -> Self {
        Config {
            bind: default_bind(),
            data_dir: default_data_dir(),
            write_token: None,
            spec_dir: None,
            client: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{}: {source}", path.display())]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error("{var}: {message}")]
    Env { var: &'static str, message: String },
}

impl Config {
    pub fn from_toml(text: &str, path: &Path) -> Result<Config, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// Reads `path` (defaults when `None`) and applies the process
    /// environment.
    pub fn load(path: Option<&Path>) -> Result<Config, ConfigError> {
        let mut config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Read {
                    path: p.to_path_buf(),
                    source,
                })?;
                Config::from_toml(&text, p)?
            }
            None => Config::default(),
        };
        config.apply_env(|k| std::env::var(k).ok())?;
        Ok(config)
    }

    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(v) = lookup("CIREG_BIND") {
            self.bind = v.parse().map_err(|e| ConfigError::Env {
                var: "CIREG_BIND",
                message: format!("{v:?}: {e}"),
            })?;
        }
        if let Some(v) = lookup("CIREG_DATA_DIR") {
            self.data_dir = v.into();
        }
        if let Some(v) = lookup("CIREG_WRITE_TOKEN") {
            self.write_token = (!v.is_empty()).then_some(v);
        }
        if let Some(v) = lookup("CIREG_SPEC_DIR") {
            self.spec_dir = Some(v.into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_env() {
        let mut c = Config::from_toml(
            "bind = \"0.0.0.0:9000\"\ndata_dir = \"/srv/reg\"\nwrite_token = \"s3cret\"\n[client]\nendpoint = \"http://x\"\n",
            Path::new("c.toml"),
        )
        .unwrap();
        assert_eq!(c.bind.port(), 9000);
        assert_eq!(c.write_token.as_deref(), Some("s3cret"));
        c.apply_env(|k| match k {
            "CIREG_BIND" => Some("127.0.0.1:1".into()),
            "CIREG_WRITE_TOKEN" => Some(String::new()),
            _ => None,
        })
        .unwrap();
        assert_eq!(c.bind.port(), 1);
        assert_eq!(c.write_token, None);
        assert_eq!(c.data_dir, PathBuf::from("/srv/reg"));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_addresses() {
        assert!(Config::from_toml("port = 1", Path::new("c.toml")).is_err());
        assert!(Config::from_toml("bind = \"nowhere\"", Path::new("c.toml")).is_err());
        let mut c = Config::default();
        assert!(c.apply_env(|k| (k == "CIREG_BIND").then(|| "x".into())).is_err());
    }
}
