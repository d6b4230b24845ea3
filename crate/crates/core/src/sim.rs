//! Deterministic synthetic traces for close- and far-range scenarios.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`), seeded with the 64-bit
//! scenario seed. Each protocol draws from its own ChaCha stream (stream id =
//! protocol ordinal), so adding or removing a protocol block leaves the other
//! protocols' traces unchanged. Normal variates use `rand_distr::Normal`.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{
    EnergyModel, MetricKind, MetricSeries, OverheadModel, ProtocolId, ScenarioLabel, SchemeCatalog,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LatencyDistribution {
    /// Normal, redrawn until non-negative.
    #[default]
    TruncatedNormal,
}

/// Distribution parameters of one protocol within a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolParams {
    pub latency_mean_ms: f64,
    pub latency_stddev_ms: f64,
    #[serde(default)]
    pub latency_distribution: LatencyDistribution,
    pub loss_probability: f64,
    pub cpu_mean_pct: f64,
    #[serde(default)]
    pub cpu_stddev_pct: f64,
    pub rssi_mean_dbm: f64,
    #[serde(default)]
    pub rssi_stddev_db: f64,
    /// Per-sample handshake cost; only meaningful for HTTPS.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub handshake_ms: Option<f64>,
    #[serde(default)]
    pub handshake_stddev_ms: f64,
    pub scheme: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub label: ScenarioLabel,
    pub duration_s: u64,
    pub interval_ms: u64,
    pub seed: u64,
    /// Messages behind each packet-loss sample.
    #[serde(default = "default_messages_per_sample")]
    pub messages_per_sample: u32,
    pub protocols: BTreeMap<ProtocolId, ProtocolParams>,
}

fn default_messages_per_sample() -> u32 {
    20
}

impl ScenarioSpec {
    pub fn sample_count(&self) -> u64 {
        self.duration_s * 1000 / self.interval_ms
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(format!("{}: {m}", self.label)));
        if self.interval_ms == 0 {
            return bad("interval_ms must be > 0".into());
        }
        if self.duration_s == 0 || !(self.duration_s * 1000).is_multiple_of(self.interval_ms) {
            return bad("duration must be a positive multiple of the interval".into());
        }
        if self.messages_per_sample == 0 {
            return bad("messages_per_sample must be > 0".into());
        }
        if self.protocols.is_empty() {
            return bad("no protocols".into());
        }
        for (p, params) in &self.protocols {
            let checks = [
                (
                    params.latency_mean_ms.is_finite() && params.latency_mean_ms >= 0.0,
                    "latency_mean_ms must be >= 0",
                ),
                (
                    params.latency_stddev_ms.is_finite() && params.latency_stddev_ms >= 0.0,
                    "latency_stddev_ms must be >= 0",
                ),
                (
                    (0.0..=1.0).contains(&params.loss_probability),
                    "loss_probability must be in [0, 1]",
                ),
                (
                    (0.0..=100.0).contains(&params.cpu_mean_pct),
                    "cpu_mean_pct must be in [0, 100]",
                ),
                (
                    params.cpu_stddev_pct.is_finite() && params.cpu_stddev_pct >= 0.0,
                    "cpu_stddev_pct must be >= 0",
                ),
                (
                    params.rssi_mean_dbm.is_finite(),
                    "rssi_mean_dbm must be finite",
                ),
                (
                    params.rssi_stddev_db.is_finite() && params.rssi_stddev_db >= 0.0,
                    "rssi_stddev_db must be >= 0",
                ),
                (
                    params
                        .handshake_ms
                        .is_none_or(|h| h.is_finite() && h >= 0.0),
                    "handshake_ms must be >= 0",
                ),
                (
                    params.handshake_stddev_ms.is_finite() && params.handshake_stddev_ms >= 0.0,
                    "handshake_stddev_ms must be >= 0",
                ),
            ];
            for (ok, msg) in checks {
                if !ok {
                    return bad(format!("{p}: {msg}"));
                }
            }
        }
        Ok(())
    }
}

struct NormalDraw(Option<Normal<f64>>, f64);

impl NormalDraw {
    fn new(mean: f64, stddev: f64) -> Self {
        if stddev == 0.0 {
            NormalDraw(None, mean)
        } else {
            // stddev was validated finite and > 0
            NormalDraw(Some(Normal::new(mean, stddev).expect("valid normal")), mean)
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match &self.0 {
            Some(n) => n.sample(rng),
            None => self.1,
        }
    }

    fn sample_non_negative(&self, rng: &mut ChaCha8Rng) -> f64 {
        loop {
            let v = self.sample(rng);
            if v >= 0.0 {
                return v;
            }
        }
    }
}

/// Generates every metric series for every protocol in `spec`.
///
/// Series come back ordered by protocol, then metric kind.
pub fn generate_scenario(
    spec: &ScenarioSpec,
    catalog: &SchemeCatalog,
    overhead: &OverheadModel,
    energy: &EnergyModel,
) -> Result<Vec<MetricSeries>> {
    spec.validate()?;
    let mut out = Vec::with_capacity(spec.protocols.len() * MetricKind::ALL.len());
    for (protocol, params) in &spec.protocols {
        let scheme = catalog.get(&params.scheme)?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(*protocol as u64);

        let mut series: BTreeMap<MetricKind, MetricSeries> = MetricKind::ALL
            .into_iter()
            .map(|k| (k, MetricSeries::new(*protocol, spec.label.clone(), k)))
            .collect();

        let latency = NormalDraw::new(params.latency_mean_ms, params.latency_stddev_ms);
        let cpu = NormalDraw::new(params.cpu_mean_pct, params.cpu_stddev_pct);
        let rssi = NormalDraw::new(params.rssi_mean_dbm, params.rssi_stddev_db);
        let handshake = params
            .handshake_ms
            .map(|h| NormalDraw::new(h, params.handshake_stddev_ms));
        let interval_s = spec.interval_ms as f64 / 1000.0;

        let mut previous_latency = latency.sample_non_negative(&mut rng);
        for i in 0..spec.sample_count() {
            let t = (i * spec.interval_ms) as f64;
            let l = latency.sample_non_negative(&mut rng);
            let lost = (0..spec.messages_per_sample)
                .filter(|_| rng.random_bool(params.loss_probability))
                .count();
            let c = cpu.sample(&mut rng).clamp(0.0, 100.0);
            let r = rssi.sample(&mut rng);
            let hs = handshake
                .as_ref()
                .map_or(0.0, |h| h.sample_non_negative(&mut rng));

            let mut put = |kind: MetricKind, v: f64| series.get_mut(&kind).unwrap().push(t, v);
            put(MetricKind::Latency, l);
            put(MetricKind::Jitter, (l - previous_latency).abs());
            put(
                MetricKind::PacketLoss,
                lost as f64 / spec.messages_per_sample as f64,
            );
            put(MetricKind::CpuUtilization, c);
            put(MetricKind::Energy, energy.energy_mj(c, interval_s));
            put(MetricKind::Rssi, r);
            put(MetricKind::KeySize, scheme.public_key_bytes as f64);
            put(
                MetricKind::CryptoOverhead,
                overhead.crypto_overhead_ms(hs, scheme.handshake_bytes()),
            );
            put(MetricKind::ProvenResistance, scheme.resistance_level as f64);
            previous_latency = l;
        }
        out.extend(series.into_values());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Presets {
    pub close: ScenarioSpec,
    pub far: ScenarioSpec,
}

pub const DEFAULT_SEED: u64 = 0x5145_5253; // "QERS"

fn params(
    latency: (f64, f64),
    loss: f64,
    cpu: (f64, f64),
    rssi: f64,
    handshake: Option<(f64, f64)>,
    scheme: &str,
) -> ProtocolParams {
    ProtocolParams {
        latency_mean_ms: latency.0,
        latency_stddev_ms: latency.1,
        latency_distribution: LatencyDistribution::TruncatedNormal,
        loss_probability: loss,
        cpu_mean_pct: cpu.0,
        cpu_stddev_pct: cpu.1,
        rssi_mean_dbm: rssi,
        rssi_stddev_db: 2.0,
        handshake_ms: handshake.map(|h| h.0),
        handshake_stddev_ms: handshake.map_or(0.0, |h| h.1),
        scheme: scheme.to_string(),
    }
}

/// The two bundled scenarios.
///
/// These are artifact constants chosen so that scoring reproduces the
/// qualitative protocol orderings (MQTT > HTTP > HTTPS on Basic/Tuned, HTTPS
/// first on Fusion) and a uniform close-to-far decline. They are not
/// measurements.
pub fn builtin_presets() -> Presets {
    let close = ScenarioSpec {
        label: "close".into(),
        duration_s: 600,
        interval_ms: 1000,
        seed: DEFAULT_SEED,
        messages_per_sample: 20,
        protocols: BTreeMap::from([
            (
                ProtocolId::Mqtt,
                params((18.0, 4.0), 0.002, (22.0, 4.0), -38.0, None, "kem-l1"),
            ),
            (
                ProtocolId::Http,
                params((45.0, 8.0), 0.006, (38.0, 5.0), -40.0, None, "kem-l3"),
            ),
            (
                ProtocolId::Https,
                params(
                    (70.0, 10.0),
                    0.010,
                    (55.0, 6.0),
                    -40.0,
                    Some((120.0, 15.0)),
                    "kem-l5",
                ),
            ),
        ]),
    };
    let far = ScenarioSpec {
        label: "far".into(),
        duration_s: 600,
        interval_ms: 1000,
        seed: DEFAULT_SEED,
        messages_per_sample: 20,
        protocols: BTreeMap::from([
            (
                ProtocolId::Mqtt,
                params((21.0, 5.0), 0.006, (23.0, 4.0), -63.0, None, "kem-l1"),
            ),
            (
                ProtocolId::Http,
                params((49.0, 9.0), 0.012, (39.0, 5.0), -65.0, None, "kem-l3"),
            ),
            (
                ProtocolId::Https,
                params(
                    (75.0, 11.0),
                    0.020,
                    (56.0, 6.0),
                    -65.0,
                    Some((128.0, 16.0)),
                    "kem-l5",
                ),
            ),
        ]),
    };
    Presets { close, far }
}
