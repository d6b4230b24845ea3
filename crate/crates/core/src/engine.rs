//! Basic, Tuned and Fusion QERS computation and readiness classification.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{MetricKind, MetricSeries, ProtocolId, ScenarioLabel};
use crate::normalize::{normalize, BoundsPolicy, BoundsScope, NormalizationBounds, MAX_SCORE};
use crate::stats::Summary;

const SUM_TOLERANCE: f64 = 1e-9;

/// Weights of the Fusion performance subscore.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerformanceWeights {
    pub latency: f64,
    pub jitter: f64,
    pub packet_loss: f64,
    pub energy: f64,
    pub cpu_utilization: f64,
}

impl PerformanceWeights {
    pub fn pairs(&self) -> [(MetricKind, f64); 5] {
        [
            (MetricKind::Latency, self.latency),
            (MetricKind::Jitter, self.jitter),
            (MetricKind::PacketLoss, self.packet_loss),
            (MetricKind::Energy, self.energy),
            (MetricKind::CpuUtilization, self.cpu_utilization),
        ]
    }
}

impl Default for PerformanceWeights {
    /// Baseline ratios L 0.25, Ploss 0.15, C 0.15, E 0.10 plus J 0.05, rescaled to sum 1.
    fn default() -> Self {
        let total = 0.25 + 0.05 + 0.15 + 0.10 + 0.15;
        PerformanceWeights {
            latency: 0.25 / total,
            jitter: 0.05 / total,
            packet_loss: 0.15 / total,
            energy: 0.10 / total,
            cpu_utilization: 0.15 / total,
        }
    }
}

/// Weights of the Fusion security subscore.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecurityWeights {
    pub key_size: f64,
    pub rssi: f64,
    pub proven_resistance: f64,
    pub crypto_overhead: f64,
}

impl SecurityWeights {
    pub fn pairs(&self) -> [(MetricKind, f64); 4] {
        [
            (MetricKind::KeySize, self.key_size),
            (MetricKind::Rssi, self.rssi),
            (MetricKind::ProvenResistance, self.proven_resistance),
            (MetricKind::CryptoOverhead, self.crypto_overhead),
        ]
    }
}

impl Default for SecurityWeights {
    fn default() -> Self {
        SecurityWeights {
            key_size: 0.25,
            rssi: 0.25,
            proven_resistance: 0.25,
            crypto_overhead: 0.25,
        }
    }
}

/// Blend of `MS − P` and `S` in the Fusion score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FusionMix {
    pub alpha_f: f64,
    pub beta_f: f64,
}

impl Default for FusionMix {
    fn default() -> Self {
        FusionMix {
            alpha_f: 0.5,
            beta_f: 0.5,
        }
    }
}

/// Every coefficient used by the three score layers.
///
/// `alpha..eta` weight L, Co, Ploss, C, R, E, K in that order. Defaults are the
/// baseline configuration (0.25, 0.15, 0.15, 0.15, 0.10, 0.10, 0.10).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightConfig {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub zeta: f64,
    pub eta: f64,
    #[serde(default)]
    pub fusion_perf: PerformanceWeights,
    #[serde(default)]
    pub fusion_sec: SecurityWeights,
    #[serde(default)]
    pub fusion_mix: FusionMix,
}

impl Default for WeightConfig {
    fn default() -> Self {
        WeightConfig {
            alpha: 0.25,
            beta: 0.15,
            gamma: 0.15,
            delta: 0.15,
            epsilon: 0.10,
            zeta: 0.10,
            eta: 0.10,
            fusion_perf: PerformanceWeights::default(),
            fusion_sec: SecurityWeights::default(),
            fusion_mix: FusionMix::default(),
        }
    }
}

impl WeightConfig {
    /// `(name, value)` for every weight, in a stable order.
    pub fn named(&self) -> Vec<(String, f64)> {
        let mut out = vec![
            ("alpha".to_string(), self.alpha),
            ("beta".to_string(), self.beta),
            ("gamma".to_string(), self.gamma),
            ("delta".to_string(), self.delta),
            ("epsilon".to_string(), self.epsilon),
            ("zeta".to_string(), self.zeta),
            ("eta".to_string(), self.eta),
        ];
        out.extend(
            self.fusion_perf
                .pairs()
                .iter()
                .map(|(k, v)| (format!("fusion_perf.{k}"), *v)),
        );
        out.extend(
            self.fusion_sec
                .pairs()
                .iter()
                .map(|(k, v)| (format!("fusion_sec.{k}"), *v)),
        );
        out.push(("fusion_mix.alpha_f".to_string(), self.fusion_mix.alpha_f));
        out.push(("fusion_mix.beta_f".to_string(), self.fusion_mix.beta_f));
        out
    }

    pub fn tuned_sum(&self) -> f64 {
        self.alpha + self.beta + self.gamma + self.delta + self.epsilon + self.zeta + self.eta
    }
}

/// Checks non-negativity and the four sum-to-one constraints.
pub fn validate_weights(w: &WeightConfig) -> Result<()> {
    for (name, value) in w.named() {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::NegativeWeight { name, value });
        }
    }
    let sums = [
        ("tuned weights alpha..eta", w.tuned_sum()),
        (
            "fusion_perf weights",
            w.fusion_perf.pairs().iter().map(|p| p.1).sum(),
        ),
        (
            "fusion_sec weights",
            w.fusion_sec.pairs().iter().map(|p| p.1).sum(),
        ),
        (
            "fusion_mix alpha_f + beta_f",
            w.fusion_mix.alpha_f + w.fusion_mix.beta_f,
        ),
    ];
    for (constraint, sum) in sums {
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::WeightSumViolation { constraint, sum });
        }
    }
    Ok(())
}

/// Normalized (0–100) value per metric kind; absent kinds are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NormalizedMetrics {
    values: [Option<f64>; 9],
}

impl NormalizedMetrics {
    pub fn new() -> Self {
        Self::default()
    }

    /// All nine kinds set to `v`.
    pub fn uniform(v: f64) -> Self {
        NormalizedMetrics {
            values: [Some(v); 9],
        }
    }

    pub fn with(mut self, kind: MetricKind, v: f64) -> Self {
        self.set(kind, v);
        self
    }

    pub fn set(&mut self, kind: MetricKind, v: f64) {
        self.values[kind.index()] = Some(v);
    }

    pub fn get(&self, kind: MetricKind) -> Option<f64> {
        self.values[kind.index()]
    }

    fn require(&self, kind: MetricKind) -> Result<f64> {
        self.get(kind).ok_or(Error::MissingMetric {
            kind,
            context: "normalized metrics".to_string(),
        })
    }
}

fn clamp_score(v: f64) -> f64 {
    v.clamp(0.0, MAX_SCORE)
}

/// `MS − (α·L + β·Co + γ·Ploss)` before clamping.
pub fn score_basic_unclamped(n: &NormalizedMetrics, w: &WeightConfig) -> Result<f64> {
    let penalty = w.alpha * n.require(MetricKind::Latency)?
        + w.beta * n.require(MetricKind::CryptoOverhead)?
        + w.gamma * n.require(MetricKind::PacketLoss)?;
    Ok(MAX_SCORE - penalty)
}

pub fn score_basic(n: &NormalizedMetrics, w: &WeightConfig) -> Result<f64> {
    score_basic_unclamped(n, w).map(clamp_score)
}

/// `MS − (α·L + β·Co + γ·Ploss + δ·C + ζ·E + η·K) + ε·R` before clamping.
pub fn score_tuned_unclamped(n: &NormalizedMetrics, w: &WeightConfig) -> Result<f64> {
    let penalty = w.alpha * n.require(MetricKind::Latency)?
        + w.beta * n.require(MetricKind::CryptoOverhead)?
        + w.gamma * n.require(MetricKind::PacketLoss)?
        + w.delta * n.require(MetricKind::CpuUtilization)?
        + w.zeta * n.require(MetricKind::Energy)?
        + w.eta * n.require(MetricKind::KeySize)?;
    let benefit = w.epsilon * n.require(MetricKind::Rssi)?;
    Ok(MAX_SCORE - penalty + benefit)
}

pub fn score_tuned(n: &NormalizedMetrics, w: &WeightConfig) -> Result<f64> {
    score_tuned_unclamped(n, w).map(clamp_score)
}

/// Performance subscore `P = Σ wᵢ·Cᵢ`.
pub fn performance_subscore(n: &NormalizedMetrics, w: &PerformanceWeights) -> Result<f64> {
    w.pairs()
        .iter()
        .map(|(kind, weight)| n.require(*kind).map(|v| weight * v))
        .sum()
}

/// Security subscore `S = Σ wⱼ·Bⱼ`. Key size and overhead count as benefits here.
pub fn security_subscore(n: &NormalizedMetrics, w: &SecurityWeights) -> Result<f64> {
    w.pairs()
        .iter()
        .map(|(kind, weight)| n.require(*kind).map(|v| weight * v))
        .sum()
}

/// `α_f·(MS − P) + β_f·S` before clamping.
pub fn score_fusion_unclamped(n: &NormalizedMetrics, w: &WeightConfig) -> Result<f64> {
    let p = performance_subscore(n, &w.fusion_perf)?;
    let s = security_subscore(n, &w.fusion_sec)?;
    Ok(w.fusion_mix.alpha_f * (MAX_SCORE - p) + w.fusion_mix.beta_f * s)
}

pub fn score_fusion(n: &NormalizedMetrics, w: &WeightConfig) -> Result<f64> {
    score_fusion_unclamped(n, w).map(clamp_score)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ReadinessBand {
    Unusable,
    Poor,
    Moderate,
    Good,
    Excellent,
}

impl ReadinessBand {
    pub const ALL: [ReadinessBand; 5] = [
        ReadinessBand::Unusable,
        ReadinessBand::Poor,
        ReadinessBand::Moderate,
        ReadinessBand::Good,
        ReadinessBand::Excellent,
    ];

    /// Inclusive lower edge of the band.
    pub fn lower(self) -> f64 {
        match self {
            ReadinessBand::Unusable => 0.0,
            ReadinessBand::Poor => 30.0,
            ReadinessBand::Moderate => 50.0,
            ReadinessBand::Good => 70.0,
            ReadinessBand::Excellent => 85.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ReadinessBand::Unusable => "Unusable",
            ReadinessBand::Poor => "Poor",
            ReadinessBand::Moderate => "Moderate",
            ReadinessBand::Good => "Good",
            ReadinessBand::Excellent => "Excellent",
        }
    }
}

impl fmt::Display for ReadinessBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Half-open bands `[lower, next lower)`; Excellent includes 100.
pub fn classify(score: f64) -> Result<ReadinessBand> {
    if !(0.0..=MAX_SCORE).contains(&score) {
        return Err(Error::OutOfRange(score));
    }
    Ok(ReadinessBand::ALL
        .into_iter()
        .rev()
        .find(|band| score >= band.lower())
        .unwrap_or(ReadinessBand::Unusable))
}

/// Distributions of the three scores for one group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreDistributions {
    pub basic: Summary,
    pub tuned: Summary,
    pub fusion: Summary,
}

/// Scores of one (protocol, scenario) group. `basic`, `tuned` and `fusion` are means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QersResult {
    pub protocol: ProtocolId,
    pub scenario: ScenarioLabel,
    pub basic: f64,
    pub tuned: f64,
    pub fusion: f64,
    pub basic_band: ReadinessBand,
    pub tuned_band: ReadinessBand,
    pub fusion_band: ReadinessBand,
    pub distributions: ScoreDistributions,
    /// Mean normalized value of each metric over its own samples.
    pub normalized_means: BTreeMap<MetricKind, f64>,
    pub bounds: BTreeMap<MetricKind, NormalizationBounds>,
}

type GroupKey = (ScenarioLabel, ProtocolId);

/// Scores every (protocol, scenario) group in `dataset`.
///
/// Each latency sample drives one per-sample evaluation; the other metrics
/// contribute the value in effect at that timestamp. Output is sorted by
/// scenario, then protocol.
pub fn evaluate_run(
    dataset: &[MetricSeries],
    weights: &WeightConfig,
    policy: &BoundsPolicy,
) -> Result<Vec<QersResult>> {
    let groups = group_series(dataset);

    for ((scenario, protocol), kinds) in &groups {
        for kind in MetricKind::ALL {
            match kinds.get(&kind) {
                None => {
                    return Err(Error::MissingMetric {
                        kind,
                        context: format!("{protocol}/{scenario}"),
                    })
                }
                Some(s) if s.is_empty() => {
                    return Err(Error::EmptySeries(format!("{protocol}/{scenario}/{kind}")))
                }
                Some(_) => {}
            }
        }
    }

    let mut results = Vec::with_capacity(groups.len());
    for ((scenario, protocol), kinds) in &groups {
        let mut bounds = BTreeMap::new();
        for kind in MetricKind::ALL {
            let b = match policy.scope {
                BoundsScope::Protocol => policy.bounds_for(kind, [&kinds[&kind]])?,
                BoundsScope::Scenario => policy.bounds_for(
                    kind,
                    groups
                        .iter()
                        .filter(|((s, _), _)| s == scenario)
                        .map(|(_, g)| &g[&kind]),
                )?,
            };
            bounds.insert(kind, b);
        }
        results.push(evaluate_group(protocol, scenario, kinds, &bounds, weights)?);
    }
    Ok(results)
}

fn group_series(
    dataset: &[MetricSeries],
) -> BTreeMap<GroupKey, BTreeMap<MetricKind, MetricSeries>> {
    let mut groups: BTreeMap<GroupKey, BTreeMap<MetricKind, MetricSeries>> = BTreeMap::new();
    for series in dataset {
        let entry = groups
            .entry((series.scenario.clone(), series.protocol))
            .or_default()
            .entry(series.kind)
            .or_insert_with(|| {
                MetricSeries::new(series.protocol, series.scenario.clone(), series.kind)
            });
        entry.samples.extend_from_slice(&series.samples);
    }
    for kinds in groups.values_mut() {
        for s in kinds.values_mut() {
            s.samples
                .sort_by(|a, b| a.timestamp_ms.total_cmp(&b.timestamp_ms));
        }
    }
    groups
}

fn evaluate_group(
    protocol: &ProtocolId,
    scenario: &ScenarioLabel,
    kinds: &BTreeMap<MetricKind, MetricSeries>,
    bounds: &BTreeMap<MetricKind, NormalizationBounds>,
    weights: &WeightConfig,
) -> Result<QersResult> {
    let driver = &kinds[&MetricKind::Latency];
    let n = driver.len();
    let (mut basic, mut tuned, mut fusion) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );

    for sample in &driver.samples {
        let mut norm = NormalizedMetrics::new();
        for kind in MetricKind::ALL {
            let series = &kinds[&kind];
            // non-empty was checked by the caller
            let raw = series.value_at(sample.timestamp_ms).unwrap_or_default();
            norm.set(kind, normalize(raw, &bounds[&kind]));
        }
        basic.push(score_basic(&norm, weights)?);
        tuned.push(score_tuned(&norm, weights)?);
        fusion.push(score_fusion(&norm, weights)?);
    }

    let empty = || Error::EmptySeries(format!("{protocol}/{scenario}/latency"));
    let distributions = ScoreDistributions {
        basic: Summary::from_values(&basic).ok_or_else(empty)?,
        tuned: Summary::from_values(&tuned).ok_or_else(empty)?,
        fusion: Summary::from_values(&fusion).ok_or_else(empty)?,
    };

    let normalized_means = MetricKind::ALL
        .into_iter()
        .map(|kind| {
            let series = &kinds[&kind];
            let b = &bounds[&kind];
            let total: f64 = series.values().map(|v| normalize(v, b)).sum();
            (kind, total / series.len() as f64)
        })
        .collect();

    Ok(QersResult {
        protocol: *protocol,
        scenario: scenario.clone(),
        basic: distributions.basic.mean,
        tuned: distributions.tuned.mean,
        fusion: distributions.fusion.mean,
        basic_band: classify(distributions.basic.mean)?,
        tuned_band: classify(distributions.tuned.mean)?,
        fusion_band: classify(distributions.fusion.mean)?,
        distributions,
        normalized_means,
        bounds: bounds.clone(),
    })
}
