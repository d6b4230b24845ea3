//! The single TOML configuration file: weights, bounds, scheme catalog,
//! accounting models, probes, telemetry and custom scenarios.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::{validate_weights, WeightConfig};
use crate::error::{Error, Result};
use crate::metric::{
    default_catalog_entries, EnergyModel, OverheadModel, ProtocolId, SchemeCatalog, SchemeEntry,
};
use crate::normalize::BoundsPolicy;
use crate::sim::{builtin_presets, ScenarioSpec};

/// Environment variable that overrides the config path when `--config` is absent.
pub const CONFIG_ENV: &str = "QERS_CONFIG";

/// Certificate checking for HTTPS probes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerifyMode {
    /// Public web PKI roots only.
    #[default]
    Strict,
    /// Trust exactly the certificate(s) in `ca_file`.
    TrustPinned,
}

/// One probe block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    pub protocol: ProtocolId,
    /// `host:port`.
    pub target: String,
    /// HTTP/HTTPS request path.
    #[serde(default = "default_path")]
    pub path: String,
    #[serde(default = "default_count")]
    pub count: u32,
    #[serde(default = "default_payload")]
    pub payload_bytes: usize,
    #[serde(default = "default_interval")]
    pub interval_ms: u64,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
    /// Catalog entry used for key size, resistance and byte overhead accounting.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<String>,
    /// HTTP/HTTPS: keep one connection for every request.
    #[serde(default)]
    pub reuse_connection: bool,
    /// MQTT publish topic.
    #[serde(default = "default_topic")]
    pub topic: String,
    /// MQTT topic the echo arrives on; defaults to `topic`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub echo_topic: Option<String>,
    #[serde(default = "default_qos")]
    pub qos: u8,
    #[serde(default)]
    pub verify: VerifyMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ca_file: Option<PathBuf>,
    /// TLS server name; defaults to the host part of `target`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub server_name: Option<String>,
    /// Added to each measured handshake to stand in for KEM cost.
    #[serde(default)]
    pub synthetic_kem_delay_ms: f64,
}

fn default_count() -> u32 {
    50
}
fn default_payload() -> usize {
    64
}
fn default_interval() -> u64 {
    100
}
fn default_timeout() -> u64 {
    2000
}
fn default_path() -> String {
    "/echo".to_string()
}
fn default_topic() -> String {
    "qers/probe".to_string()
}
fn default_qos() -> u8 {
    1
}

impl ProbeSpec {
    /// A block with every optional field at its default.
    pub fn new(protocol: ProtocolId, target: impl Into<String>) -> Self {
        ProbeSpec {
            protocol,
            target: target.into(),
            path: default_path(),
            count: default_count(),
            payload_bytes: default_payload(),
            interval_ms: default_interval(),
            timeout_ms: default_timeout(),
            scheme: None,
            reuse_connection: false,
            topic: default_topic(),
            echo_topic: None,
            qos: default_qos(),
            verify: VerifyMode::default(),
            ca_file: None,
            server_name: None,
            synthetic_kem_delay_ms: 0.0,
        }
    }

    pub fn echo_topic(&self) -> &str {
        self.echo_topic.as_deref().unwrap_or(&self.topic)
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        if self.count < 1 {
            return Err(Error::config(format!("{path}.count"), "must be >= 1"));
        }
        if self.timeout_ms == 0 {
            return Err(Error::config(format!("{path}.timeout_ms"), "must be > 0"));
        }
        if self.qos > 2 {
            return Err(Error::config(format!("{path}.qos"), "must be 0, 1 or 2"));
        }
        if !(self.synthetic_kem_delay_ms.is_finite() && self.synthetic_kem_delay_ms >= 0.0) {
            return Err(Error::config(
                format!("{path}.synthetic_kem_delay_ms"),
                "must be >= 0",
            ));
        }
        if self.protocol == ProtocolId::Https {
            if self.scheme.is_none() {
                return Err(Error::config(
                    format!("{path}.scheme"),
                    "HTTPS probes must name a scheme",
                ));
            }
            if self.verify == VerifyMode::TrustPinned && self.ca_file.is_none() {
                return Err(Error::config(
                    format!("{path}.ca_file"),
                    "trust-pinned verification needs a ca_file",
                ));
            }
        }
        if !self.path.starts_with('/') {
            return Err(Error::config(format!("{path}.path"), "must start with `/`"));
        }
        if self.target.rsplit_once(':').is_none() {
            return Err(Error::config(
                format!("{path}.target"),
                "expected host:port",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderKind {
    /// Reads host CPU counters; RSSI from `/proc/net/wireless` or `rssi_dbm`.
    Host,
    /// Constant `cpu_pct` and `rssi_dbm`.
    #[default]
    Fixed,
    /// Seeded normal draws around `cpu_pct` and `rssi_dbm`.
    Simulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TelemetryConfig {
    #[serde(default)]
    pub provider: ProviderKind,
    #[serde(default = "default_telemetry_interval")]
    pub interval_ms: u64,
    #[serde(default = "default_cpu")]
    pub cpu_pct: f64,
    #[serde(default)]
    pub cpu_stddev_pct: f64,
    #[serde(default = "default_rssi")]
    pub rssi_dbm: f64,
    #[serde(default)]
    pub rssi_stddev_db: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_telemetry_interval() -> u64 {
    250
}
fn default_cpu() -> f64 {
    25.0
}
fn default_rssi() -> f64 {
    -40.0
}

impl Default for TelemetryConfig {
    fn default() -> Self {
        TelemetryConfig {
            provider: ProviderKind::default(),
            interval_ms: default_telemetry_interval(),
            cpu_pct: default_cpu(),
            cpu_stddev_pct: 0.0,
            rssi_dbm: default_rssi(),
            rssi_stddev_db: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub weights: WeightConfig,
    #[serde(default)]
    pub bounds: BoundsPolicy,
    #[serde(default = "default_catalog_entries")]
    pub catalog: Vec<SchemeEntry>,
    #[serde(default)]
    pub overhead: OverheadModel,
    #[serde(default)]
    pub energy: EnergyModel,
    #[serde(default)]
    pub telemetry: TelemetryConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub probe: Vec<ProbeSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scenario: Vec<ScenarioSpec>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            weights: WeightConfig::default(),
            bounds: BoundsPolicy::default(),
            catalog: default_catalog_entries(),
            overhead: OverheadModel::default(),
            energy: EnergyModel::default(),
            telemetry: TelemetryConfig::default(),
            probe: Vec::new(),
            scenario: Vec::new(),
        }
    }
}

impl Config {
    /// Parses and validates a TOML document.
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Config> {
        let config: Config = toml::from_str(text).map_err(|e| {
            let path = e
                .span()
                .map(|span| {
                    let line = text[..span.start].matches('\n').count() + 1;
                    format!("{origin}:{line}")
                })
                .unwrap_or_else(|| origin.to_string());
            Error::config(path, e.message().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::UnreadableFile {
            path: path.to_path_buf(),
            source,
        })?;
        Config::from_toml_str(&text, &path.display().to_string())
    }

    /// `default` (or nothing) selects the built-in configuration; anything
    /// else is a file path.
    pub fn resolve(arg: Option<&str>) -> Result<Config> {
        match arg {
            None | Some("default") => Ok(Config::default()),
            Some(path) => Config::load(Path::new(path)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_weights(&self.weights).map_err(|e| Error::config("weights", e.to_string()))?;
        self.bounds.validate()?;
        let catalog = self.catalog()?;
        if !(self.overhead.bytes_to_ms.is_finite() && self.overhead.bytes_to_ms >= 0.0) {
            return Err(Error::config("overhead.bytes_to_ms", "must be >= 0"));
        }
        if !(self.energy.device_power_w.is_finite() && self.energy.device_power_w >= 0.0) {
            return Err(Error::config("energy.device_power_w", "must be >= 0"));
        }
        if self.telemetry.interval_ms == 0 {
            return Err(Error::config("telemetry.interval_ms", "must be > 0"));
        }
        if !(0.0..=100.0).contains(&self.telemetry.cpu_pct) {
            return Err(Error::config("telemetry.cpu_pct", "must be in [0, 100]"));
        }
        for (i, probe) in self.probe.iter().enumerate() {
            let path = format!("probe[{i}]");
            probe.validate(&path)?;
            if let Some(scheme) = &probe.scheme {
                catalog
                    .get(scheme)
                    .map_err(|e| Error::config(format!("{path}.scheme"), e.to_string()))?;
            }
        }
        for (i, spec) in self.scenario.iter().enumerate() {
            spec.validate()
                .map_err(|e| Error::config(format!("scenario[{i}]"), e.to_string()))?;
            for (p, params) in &spec.protocols {
                catalog.get(&params.scheme).map_err(|e| {
                    Error::config(format!("scenario[{i}].protocols.{p}.scheme"), e.to_string())
                })?;
            }
        }
        Ok(())
    }

    pub fn catalog(&self) -> Result<SchemeCatalog> {
        SchemeCatalog::from_entries(self.catalog.iter().cloned())
            .map_err(|e| Error::config("catalog", e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// First 16 hex digits of the SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// A scenario from the config by label, falling back to the built-in presets.
    pub fn scenario(&self, label: &str) -> Option<ScenarioSpec> {
        if let Some(spec) = self.scenario.iter().find(|s| s.label.as_str() == label) {
            return Some(spec.clone());
        }
        let presets = builtin_presets();
        match label {
            "close" => Some(presets.close),
            "far" => Some(presets.far),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let config = Config::default();
        let text = config.to_toml();
        let back = Config::from_toml_str(&text, "mem").unwrap();
        assert_eq!(back, config);
        assert_eq!(back.hash(), config.hash());
    }

    #[test]
    fn presets_round_trip_through_config() {
        let presets = builtin_presets();
        let config = Config {
            scenario: vec![presets.close.clone(), presets.far.clone()],
            ..Config::default()
        };
        let back = Config::from_toml_str(&config.to_toml(), "mem").unwrap();
        assert_eq!(back.scenario, vec![presets.close, presets.far]);
    }

    #[test]
    fn empty_document_is_default() {
        assert_eq!(Config::from_toml_str("", "mem").unwrap(), Config::default());
    }

    #[test]
    fn tuned_sum_violation_names_constraint() {
        let text = "[weights]\nalpha = 0.5\nbeta = 0.15\ngamma = 0.15\ndelta = 0.15\nepsilon = 0.10\nzeta = 0.10\neta = 0.10\n";
        let err = Config::from_toml_str(text, "mem").unwrap_err().to_string();
        assert!(err.contains("tuned weights"), "{err}");
        assert!(err.contains("1.25"), "{err}");
    }

    #[test]
    fn unknown_field_reports_line() {
        let text = "[energy]\ndevice_power_w = 2.0\nvolts = 3\n";
        match Config::from_toml_str(text, "cfg.toml").unwrap_err() {
            Error::Config { path, message } => {
                assert!(path.starts_with("cfg.toml:"), "{path}");
                assert!(message.contains("volts"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn https_probe_requires_scheme_and_pin() {
        let text = "[[probe]]\nprotocol = \"HTTPS\"\ntarget = \"127.0.0.1:8443\"\n";
        let err = Config::from_toml_str(text, "mem").unwrap_err().to_string();
        assert!(err.contains("probe[0].scheme"), "{err}");

        let text = "[[probe]]\nprotocol = \"HTTPS\"\ntarget = \"127.0.0.1:8443\"\nscheme = \"kem-l3\"\nverify = \"trust-pinned\"\n";
        let err = Config::from_toml_str(text, "mem").unwrap_err().to_string();
        assert!(err.contains("ca_file"), "{err}");

        let text =
            "[[probe]]\nprotocol = \"MQTT\"\ntarget = \"127.0.0.1:1883\"\nscheme = \"kem-l9\"\n";
        let err = Config::from_toml_str(text, "mem").unwrap_err().to_string();
        assert!(err.contains("unknown scheme"), "{err}");
    }

    #[test]
    fn scenario_lookup_prefers_config() {
        let mut custom = builtin_presets().close;
        custom.seed = 7;
        let config = Config {
            scenario: vec![custom.clone()],
            ..Config::default()
        };
        assert_eq!(config.scenario("close").unwrap().seed, 7);
        assert_eq!(config.scenario("far").unwrap(), builtin_presets().far);
        assert!(config.scenario("mars").is_none());
    }
}
