//! Service configuration, read from TOML. Every field has a default, so an
//! empty file is a valid configuration.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::session::{LobbyConfig, SessionConfig};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("config {path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServerSection {
    pub bind: String,
    /// Directory served under `/assets`.
    pub assets_dir: PathBuf,
    /// Bearer token for `GET /logs/:session`. Without one the route is off.
    pub admin_token: Option<String>,
    pub heartbeat_s: u64,
    /// Drive the clock from the test-control routes instead of wall time.
    pub virtual_clock: bool,
    /// Seed for per-session randomness; unset means fresh entropy.
    pub seed: Option<u64>,
}

impl Default for ServerSection {
    fn default() -> Self {
        ServerSection {
            bind: "127.0.0.1:8080".into(),
            assets_dir: PathBuf::from("assets"),
            admin_token: None,
            heartbeat_s: 15,
            virtual_clock: false,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    /// YAML file; the bundled scenario when unset.
    pub path: Option<PathBuf>,
    pub strict: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LogSection {
    pub dir: PathBuf,
    /// fsync every event. Turn off for throwaway simulations.
    pub sync: bool,
}

impl Default for LogSection {
    fn default() -> Self {
        LogSection { dir: PathBuf::from("data"), sync: true }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServiceConfig {
    pub server: ServerSection,
    pub scenario: ScenarioSection,
    pub lobby: LobbyConfig,
    pub session: SessionConfig,
    pub log: LogSection,
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<ServiceConfig, ConfigError> {
        let de = toml::Deserializer::parse(text)
            .map_err(|e| ConfigError { path: String::new(), message: e.message().to_string() })?;
        serde_path_to_error::deserialize(de)
            .map_err(|e| ConfigError { path: e.path().to_string(), message: e.inner().message().to_string() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_is_default() {
        assert_eq!(ServiceConfig::from_toml("").unwrap(), ServiceConfig::default());
    }

    #[test]
    fn overrides() {
        let c = ServiceConfig::from_toml(
            "[lobby]\ntimeout_s = 60\n[session.reward]\nbase_cents = 40\n[server]\nvirtual_clock = true\n",
        )
        .unwrap();
        assert_eq!(c.lobby.timeout_s, 60);
        assert_eq!(c.session.reward.base_cents, 40);
        assert_eq!(c.session.reward.per_minute_cents, 15);
        assert!(c.server.virtual_clock);
    }

    #[test]
    fn unknown_key_has_path() {
        let e = ServiceConfig::from_toml("[session]\nmin_read = 3\n").unwrap_err();
        assert_eq!(e.path, "session.min_read");
        let e = ServiceConfig::from_toml("[lobby]\ntimeout_s = \"x\"\n").unwrap_err();
        assert_eq!(e.path, "lobby.timeout_s");
    }
}
