//! Node configuration files.
//!
//! ```json
//! {"v": 1, "role": "cu", "listen": "127.0.0.1:7101",
//!  "lsp_endpoint": "127.0.0.1:7001", "csp_endpoint": "127.0.0.1:7000",
//!  "zone_id": "downtown", "zones_file": "zones.json",
//!  "seed_file": "restaurants/downtown.jsonl"}
//! ```
//!
//! Relative paths are resolved against the config file's directory.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Lsp,
    Cu,
    Csp,
}

impl std::fmt::Display for Role {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Role::Lsp => "lsp",
            Role::Cu => "cu",
            Role::Csp => "csp",
        })
    }
}

#[derive(Debug, Error)]
#[error("ConfigError: {0}")]
pub struct ConfigError(pub String);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeConfig {
    pub v: u32,
    pub role: Role,
    pub listen: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lsp_endpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csp_endpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zone_id: Option<String>,
    pub zones_file: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grant_on_escalation: Option<bool>,
    /// LSP only: append-only account log, replayed at boot.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accounts_file: Option<PathBuf>,
    /// CSP only: append-only escalation log.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audit_file: Option<PathBuf>,
    /// CU heartbeat period, and the CSP's basis for liveness. Default 5000.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heartbeat_ms: Option<u64>,
    /// CU only: endpoint announced to the CSP; defaults to the bound address.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub advertise: Option<String>,
}

impl NodeConfig {
    pub fn new(role: Role, listen: &str, zones_file: &Path) -> Self {
        Self {
            v: CONFIG_VERSION,
            role,
            listen: listen.to_string(),
            lsp_endpoint: None,
            csp_endpoint: None,
            zone_id: None,
            zones_file: zones_file.to_path_buf(),
            seed_file: None,
            grant_on_escalation: None,
            accounts_file: None,
            audit_file: None,
            heartbeat_ms: None,
            advertise: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        let mut cfg: NodeConfig = serde_json::from_str(&text)
            .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        resolve(&mut cfg.zones_file);
        for p in [&mut cfg.seed_file, &mut cfg.accounts_file, &mut cfg.audit_file]
            .into_iter()
            .flatten()
        {
            resolve(p);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.v != CONFIG_VERSION {
            return Err(ConfigError(format!("unsupported config version {}", self.v)));
        }
        let require = |field: &Option<String>, name: &str| {
            field
                .as_ref()
                .map(|_| ())
                .ok_or_else(|| ConfigError(format!("role {} requires {name}", self.role)))
        };
        match self.role {
            Role::Lsp => Ok(()),
            Role::Csp => require(&self.lsp_endpoint, "lsp_endpoint"),
            Role::Cu => {
                require(&self.lsp_endpoint, "lsp_endpoint")?;
                require(&self.csp_endpoint, "csp_endpoint")?;
                require(&self.zone_id, "zone_id")
            }
        }
    }

    pub fn heartbeat(&self) -> Duration {
        Duration::from_millis(self.heartbeat_ms.unwrap_or(5_000).max(1))
    }
}
