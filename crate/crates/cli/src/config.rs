//! Operator configuration.
//!
//! A flat TOML file with three optional keys:
//!
//! ```toml
//! listen = "127.0.0.1:8080"
//! storage = "/var/lib/odes/odes.json"
//! admin_token = "change-me"
//! ```
//!
//! `ODES_LISTEN`, `ODES_STORAGE` and `ODES_ADMIN_TOKEN` override the file;
//! missing values fall back to the defaults below.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::Deserialize;

pub const DEFAULT_LISTEN: &str = "127.0.0.1:8080";
pub const DEFAULT_STORAGE: &str = "odes-data.json";

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    listen: Option<String>,
    storage: Option<PathBuf>,
    admin_token: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Config {
    pub listen: SocketAddr,
    pub storage: PathBuf,
    pub admin_token: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{field}: {value:?} is not a socket address (host:port)")]
    BadListen { field: String, value: String },
}

impl Config {
    /// Reads `path` (if any), then applies environment overrides.
    pub fn load(path: Option<&Path>, env: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let file = match path {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
                    path: path.to_path_buf(),
                    source,
                })?;
                toml::from_str::<FileConfig>(&text).map_err(|e| ConfigError::Parse {
                    path: path.to_path_buf(),
                    message: e.to_string().trim_end().to_string(),
                })?
            }
            None => FileConfig::default(),
        };

        let (listen_field, listen) = match env("ODES_LISTEN") {
            Some(v) => ("ODES_LISTEN", v),
            None => ("listen", file.listen.unwrap_or_else(|| DEFAULT_LISTEN.into())),
        };
        let listen = listen.parse().map_err(|_| ConfigError::BadListen {
            field: listen_field.into(),
            value: listen.clone(),
        })?;
        let storage = env("ODES_STORAGE")
            .map(PathBuf::from)
            .or(file.storage)
            .unwrap_or_else(|| DEFAULT_STORAGE.into());
        let admin_token = env("ODES_ADMIN_TOKEN").or(file.admin_token).filter(|t| !t.is_empty());
        Ok(Config {
            listen,
            storage,
            admin_token,
        })
    }
}
