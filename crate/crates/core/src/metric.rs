//! Shared vocabulary: protocols, metric kinds, samples, series and the
//! cryptographic scheme catalog.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One of the three evaluated communication protocols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ProtocolId {
    Mqtt,
    Http,
    Https,
}

impl ProtocolId {
    pub const ALL: [ProtocolId; 3] = [ProtocolId::Mqtt, ProtocolId::Http, ProtocolId::Https];

    pub fn as_str(self) -> &'static str {
        match self {
            ProtocolId::Mqtt => "MQTT",
            ProtocolId::Http => "HTTP",
            ProtocolId::Https => "HTTPS",
        }
    }
}

impl fmt::Display for ProtocolId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProtocolId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "MQTT" => Ok(ProtocolId::Mqtt),
            "HTTP" => Ok(ProtocolId::Http),
            "HTTPS" => Ok(ProtocolId::Https),
            other => Err(Error::Parse(format!("unknown protocol `{other}`"))),
        }
    }
}

/// Whether a larger raw value is better (benefit) or worse (cost).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Benefit,
    Cost,
}

/// The nine measured or declared criteria.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    /// End-to-end latency, ms.
    Latency,
    /// Absolute difference between consecutive latencies, ms.
    Jitter,
    /// Loss ratio in [0, 1].
    PacketLoss,
    /// CPU utilization, percent.
    CpuUtilization,
    /// Energy, millijoules.
    Energy,
    /// Received signal strength, dBm.
    Rssi,
    /// Public key size, bytes.
    KeySize,
    /// Handshake time plus byte cost, ms.
    CryptoOverhead,
    /// Declared resistance level 1..=5.
    ProvenResistance,
}

impl MetricKind {
    pub const ALL: [MetricKind; 9] = [
        MetricKind::Latency,
        MetricKind::Jitter,
        MetricKind::PacketLoss,
        MetricKind::CpuUtilization,
        MetricKind::Energy,
        MetricKind::Rssi,
        MetricKind::KeySize,
        MetricKind::CryptoOverhead,
        MetricKind::ProvenResistance,
    ];

    pub const fn index(self) -> usize {
        self as usize
    }

    pub const fn orientation(self) -> Orientation {
        match self {
            MetricKind::Rssi | MetricKind::ProvenResistance => Orientation::Benefit,
            _ => Orientation::Cost,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::Latency => "latency",
            MetricKind::Jitter => "jitter",
            MetricKind::PacketLoss => "packet_loss",
            MetricKind::CpuUtilization => "cpu_utilization",
            MetricKind::Energy => "energy",
            MetricKind::Rssi => "rssi",
            MetricKind::KeySize => "key_size",
            MetricKind::CryptoOverhead => "crypto_overhead",
            MetricKind::ProvenResistance => "proven_resistance",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            MetricKind::Latency | MetricKind::Jitter | MetricKind::CryptoOverhead => "ms",
            MetricKind::PacketLoss => "ratio",
            MetricKind::CpuUtilization => "percent",
            MetricKind::Energy => "mJ",
            MetricKind::Rssi => "dBm",
            MetricKind::KeySize => "bytes",
            MetricKind::ProvenResistance => "level",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MetricKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown metric `{s}`")))
    }
}

/// A single timestamped observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSample {
    /// Monotonic milliseconds since run start.
    pub timestamp_ms: f64,
    pub protocol: ProtocolId,
    pub kind: MetricKind,
    pub value: f64,
}

/// A broken sample invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub kind: MetricKind,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

/// Returns every invariant the sample breaks. An empty list means the sample is valid.
pub fn validate_sample(sample: &MetricSample) -> Vec<Violation> {
    let mut out = Vec::new();
    let v = sample.value;
    let mut push = |msg: &str| {
        out.push(Violation {
            kind: sample.kind,
            message: msg.to_string(),
        })
    };

    if !sample.timestamp_ms.is_finite() || sample.timestamp_ms < 0.0 {
        push("timestamp must be a finite non-negative number");
    }
    if !v.is_finite() {
        push("value is not finite");
        return out;
    }

    match sample.kind {
        MetricKind::PacketLoss => {
            if v < 0.0 {
                push("negative ratio");
            }
            if v > 1.0 {
                push("ratio exceeds 1");
            }
        }
        MetricKind::CpuUtilization => {
            if v < 0.0 {
                push("negative percentage");
            }
            if v > 100.0 {
                push("percentage exceeds 100");
            }
        }
        MetricKind::KeySize => {
            if v < 0.0 {
                push("negative byte count");
            }
            if v.fract() != 0.0 {
                push("byte count is not integral");
            }
        }
        MetricKind::Latency
        | MetricKind::Jitter
        | MetricKind::Energy
        | MetricKind::CryptoOverhead => {
            if v < 0.0 {
                push("negative value");
            }
        }
        MetricKind::ProvenResistance => {
            if !(1.0..=5.0).contains(&v) || v.fract() != 0.0 {
                push("resistance level must be an integer in 1..=5");
            }
        }
        MetricKind::Rssi => {}
    }
    out
}

/// Free-form scenario label, e.g. `close` or `far`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScenarioLabel(pub String);

impl ScenarioLabel {
    pub fn new(s: impl Into<String>) -> Self {
        ScenarioLabel(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ScenarioLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ScenarioLabel {
    fn from(s: &str) -> Self {
        ScenarioLabel(s.to_string())
    }
}

/// Grouping key for a series.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SeriesKey {
    pub scenario: ScenarioLabel,
    pub protocol: ProtocolId,
    pub kind: MetricKind,
}

/// Ordered observations of one metric for one protocol in one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSeries {
    pub protocol: ProtocolId,
    pub scenario: ScenarioLabel,
    pub kind: MetricKind,
    pub samples: Vec<MetricSample>,
}

impl MetricSeries {
    pub fn new(protocol: ProtocolId, scenario: ScenarioLabel, kind: MetricKind) -> Self {
        MetricSeries {
            protocol,
            scenario,
            kind,
            samples: Vec::new(),
        }
    }

    /// Builds a series from `(timestamp_ms, value)` pairs.
    pub fn from_points(
        protocol: ProtocolId,
        scenario: ScenarioLabel,
        kind: MetricKind,
        points: impl IntoIterator<Item = (f64, f64)>,
    ) -> Self {
        let samples = points
            .into_iter()
            .map(|(timestamp_ms, value)| MetricSample {
                timestamp_ms,
                protocol,
                kind,
                value,
            })
            .collect();
        MetricSeries {
            protocol,
            scenario,
            kind,
            samples,
        }
    }

    pub fn key(&self) -> SeriesKey {
        SeriesKey {
            scenario: self.scenario.clone(),
            protocol: self.protocol,
            kind: self.kind,
        }
    }

    pub fn push(&mut self, timestamp_ms: f64, value: f64) {
        self.samples.push(MetricSample {
            timestamp_ms,
            protocol: self.protocol,
            kind: self.kind,
            value,
        });
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.value)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean(&self) -> Option<f64> {
        if self.samples.is_empty() {
            None
        } else {
            Some(self.values().sum::<f64>() / self.samples.len() as f64)
        }
    }

    pub fn timestamps_strictly_increasing(&self) -> bool {
        self.samples
            .windows(2)
            .all(|w| w[0].timestamp_ms < w[1].timestamp_ms)
    }

    /// Value in effect at `t`: the last sample at or before `t`, or the first
    /// sample when `t` precedes the whole series.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        let idx = self.samples.partition_point(|s| s.timestamp_ms <= t);
        match idx {
            0 => self.samples.first().map(|s| s.value),
            i => Some(self.samples[i - 1].value),
        }
    }
}

/// Parameters of one cryptographic scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeEntry {
    pub id: String,
    pub public_key_bytes: u64,
    /// Ciphertext (KEM) or signature (SIG) size.
    pub artifact_bytes: u64,
    pub resistance_level: u8,
}

impl SchemeEntry {
    /// Bytes exchanged for one key establishment or authentication.
    pub fn handshake_bytes(&self) -> u64 {
        self.public_key_bytes + self.artifact_bytes
    }
}

/// Scheme identifier to parameters. Always loaded from configuration.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SchemeCatalog {
    entries: BTreeMap<String, SchemeEntry>,
}

impl SchemeCatalog {
    pub fn from_entries(entries: impl IntoIterator<Item = SchemeEntry>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for entry in entries {
            if entry.public_key_bytes == 0 || entry.artifact_bytes == 0 {
                return Err(Error::InvalidCatalog(format!(
                    "scheme `{}`: byte counts must be > 0",
                    entry.id
                )));
            }
            if !(1..=5).contains(&entry.resistance_level) {
                return Err(Error::InvalidCatalog(format!(
                    "scheme `{}`: resistance_level must be in 1..=5",
                    entry.id
                )));
            }
            if map.insert(entry.id.clone(), entry.clone()).is_some() {
                return Err(Error::InvalidCatalog(format!(
                    "duplicate scheme `{}`",
                    entry.id
                )));
            }
        }
        Ok(SchemeCatalog { entries: map })
    }

    pub fn get(&self, id: &str) -> Result<&SchemeEntry> {
        self.entries
            .get(id)
            .ok_or_else(|| Error::UnknownScheme(id.to_string()))
    }

    pub fn entries(&self) -> impl Iterator<Item = &SchemeEntry> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Configured public-key byte count of `scheme`.
pub fn lookup_key_size(scheme: &str, catalog: &SchemeCatalog) -> Result<u64> {
    catalog.get(scheme).map(|e| e.public_key_bytes)
}

/// Catalog shipped with the default configuration.
///
/// KEM entries follow the ML-KEM parameter sets (FIPS 203: encapsulation key
/// and ciphertext sizes); SIG entries follow ML-DSA (FIPS 204: public key and
/// signature sizes). Levels are the NIST security categories.
pub fn default_catalog_entries() -> Vec<SchemeEntry> {
    let e = |id: &str, pk: u64, art: u64, level: u8| SchemeEntry {
        id: id.to_string(),
        public_key_bytes: pk,
        artifact_bytes: art,
        resistance_level: level,
    };
    vec![
        e("kem-l1", 800, 768, 1),
        e("kem-l3", 1184, 1088, 3),
        e("kem-l5", 1568, 1568, 5),
        e("sig-l2", 1312, 2420, 2),
        e("sig-l3", 1952, 3309, 3),
        e("sig-l5", 2592, 4627, 5),
    ]
}

/// Converts key/signature bytes and handshake time into the single
/// crypto-overhead figure in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverheadModel {
    #[serde(default)]
    pub bytes_to_ms: f64,
}

impl Default for OverheadModel {
    fn default() -> Self {
        OverheadModel { bytes_to_ms: 0.0 }
    }
}

impl OverheadModel {
    pub fn crypto_overhead_ms(&self, handshake_ms: f64, bytes: u64) -> f64 {
        handshake_ms + bytes as f64 * self.bytes_to_ms
    }
}

/// Energy derived from CPU load: `cpu% × seconds × watts`, in millijoules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyModel {
    pub device_power_w: f64,
}

impl Default for EnergyModel {
    fn default() -> Self {
        EnergyModel {
            device_power_w: 2.0,
        }
    }
}

impl EnergyModel {
    pub fn energy_mj(&self, cpu_percent: f64, seconds: f64) -> f64 {
        cpu_percent / 100.0 * seconds * self.device_power_w * 1000.0
    }
}
