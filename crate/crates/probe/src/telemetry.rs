//! CPU, RSSI and energy sampling from pluggable sources.

use std::path::PathBuf;
use std::time::Duration;

use qers_core::config::{ProviderKind, TelemetryConfig};
use qers_core::metric::EnergyModel;
use qers_core::{MetricKind, MetricSeries, ProtocolId, ScenarioLabel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use tokio::sync::oneshot;

use crate::clock::RunClock;
use crate::error::{ProbeError, Result};

pub trait TelemetryProvider: Send {
    /// CPU utilization since the previous read, in percent.
    fn read_cpu_percent(&mut self) -> Result<f64>;
    fn read_rssi_dbm(&mut self) -> Result<f64>;
    fn energy_model(&self) -> EnergyModel;
}

#[derive(Debug, Clone, Copy)]
pub struct FixedProvider {
    pub cpu_pct: f64,
    pub rssi_dbm: f64,
    pub energy: EnergyModel,
}

impl TelemetryProvider for FixedProvider {
    fn read_cpu_percent(&mut self) -> Result<f64> {
        Ok(self.cpu_pct.clamp(0.0, 100.0))
    }

    fn read_rssi_dbm(&mut self) -> Result<f64> {
        Ok(self.rssi_dbm)
    }

    fn energy_model(&self) -> EnergyModel {
        self.energy
    }
}

/// Seeded normal draws; CPU is clamped to `[0, 100]`.
#[derive(Debug, Clone)]
pub struct SimulatedProvider {
    rng: ChaCha8Rng,
    cpu: Normal<f64>,
    rssi: Normal<f64>,
    energy: EnergyModel,
}

impl SimulatedProvider {
    pub fn new(seed: u64, cpu: (f64, f64), rssi: (f64, f64), energy: EnergyModel) -> Result<Self> {
        let normal = |(m, sd): (f64, f64), what: &str| {
            Normal::new(m, sd).map_err(|e| ProbeError::Setup(format!("simulated {what}: {e}")))
        };
        Ok(SimulatedProvider {
            rng: ChaCha8Rng::seed_from_u64(seed),
            cpu: normal(cpu, "cpu")?,
            rssi: normal(rssi, "rssi")?,
            energy,
        })
    }
}

impl TelemetryProvider for SimulatedProvider {
    fn read_cpu_percent(&mut self) -> Result<f64> {
        Ok(self.cpu.sample(&mut self.rng).clamp(0.0, 100.0))
    }

    fn read_rssi_dbm(&mut self) -> Result<f64> {
        Ok(self.rssi.sample(&mut self.rng))
    }

    fn energy_model(&self) -> EnergyModel {
        self.energy
    }
}

/// Reads `/proc/stat` CPU counters and, when present, the first interface in
/// `/proc/net/wireless`. Falls back to a configured RSSI otherwise.
#[derive(Debug, Clone)]
pub struct HostProvider {
    stat_path: PathBuf,
    wireless_path: PathBuf,
    fallback_rssi_dbm: f64,
    energy: EnergyModel,
    last: (u64, u64),
}

fn parse_cpu_line(text: &str) -> Option<(u64, u64)> {
    let line = text.lines().find(|l| l.starts_with("cpu "))?;
    let fields: Vec<u64> = line
        .split_whitespace()
        .skip(1)
        .map(|f| f.parse().ok())
        .collect::<Option<_>>()?;
    if fields.len() < 4 {
        return None;
    }
    // idle + iowait
    let idle = fields[3] + fields.get(4).copied().unwrap_or(0);
    Some((idle, fields.iter().sum()))
}

fn parse_wireless_level(text: &str) -> Option<f64> {
    let line = text.lines().nth(2)?;
    let level = line.split_whitespace().nth(3)?;
    level.trim_end_matches('.').parse().ok()
}

impl HostProvider {
    pub fn new(fallback_rssi_dbm: f64, energy: EnergyModel) -> Result<Self> {
        Self::with_paths(
            "/proc/stat".into(),
            "/proc/net/wireless".into(),
            fallback_rssi_dbm,
            energy,
        )
    }

    pub fn with_paths(
        stat_path: PathBuf,
        wireless_path: PathBuf,
        fallback_rssi_dbm: f64,
        energy: EnergyModel,
    ) -> Result<Self> {
        let mut p = HostProvider {
            stat_path,
            wireless_path,
            fallback_rssi_dbm,
            energy,
            last: (0, 0),
        };
        p.last = p.counters()?;
        Ok(p)
    }

    fn counters(&self) -> Result<(u64, u64)> {
        let text = std::fs::read_to_string(&self.stat_path).map_err(|e| {
            ProbeError::ProviderUnavailable(format!("{}: {e}", self.stat_path.display()))
        })?;
        parse_cpu_line(&text).ok_or_else(|| {
            ProbeError::ProviderUnavailable(format!(
                "{}: no aggregate cpu line",
                self.stat_path.display()
            ))
        })
    }
}

impl TelemetryProvider for HostProvider {
    fn read_cpu_percent(&mut self) -> Result<f64> {
        let now = self.counters()?;
        let (idle, total) = (
            now.0.saturating_sub(self.last.0),
            now.1.saturating_sub(self.last.1),
        );
        self.last = now;
        if total == 0 {
            return Ok(0.0);
        }
        Ok((100.0 * (total - idle.min(total)) as f64 / total as f64).clamp(0.0, 100.0))
    }

    fn read_rssi_dbm(&mut self) -> Result<f64> {
        Ok(std::fs::read_to_string(&self.wireless_path)
            .ok()
            .and_then(|t| parse_wireless_level(&t))
            .unwrap_or(self.fallback_rssi_dbm))
    }

    fn energy_model(&self) -> EnergyModel {
        self.energy
    }
}

pub fn provider_from_config(
    cfg: &TelemetryConfig,
    energy: EnergyModel,
) -> Result<Box<dyn TelemetryProvider>> {
    Ok(match cfg.provider {
        ProviderKind::Fixed => Box::new(FixedProvider {
            cpu_pct: cfg.cpu_pct,
            rssi_dbm: cfg.rssi_dbm,
            energy,
        }),
        ProviderKind::Simulated => Box::new(SimulatedProvider::new(
            cfg.seed,
            (cfg.cpu_pct, cfg.cpu_stddev_pct),
            (cfg.rssi_dbm, cfg.rssi_stddev_db),
            energy,
        )?),
        ProviderKind::Host => Box::new(HostProvider::new(cfg.rssi_dbm, energy)?),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TelemetrySample {
    pub timestamp_ms: f64,
    pub cpu_pct: f64,
    pub rssi_dbm: f64,
    pub energy_mj: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TelemetryTrace {
    pub samples: Vec<TelemetrySample>,
}

impl TelemetryTrace {
    /// CPU, RSSI and energy series attributed to `protocol`.
    pub fn to_series(&self, protocol: ProtocolId, scenario: &ScenarioLabel) -> Vec<MetricSeries> {
        let mk = |kind, f: fn(&TelemetrySample) -> f64| {
            MetricSeries::from_points(
                protocol,
                scenario.clone(),
                kind,
                self.samples.iter().map(|s| (s.timestamp_ms, f(s))),
            )
        };
        vec![
            mk(MetricKind::CpuUtilization, |s| s.cpu_pct),
            mk(MetricKind::Rssi, |s| s.rssi_dbm),
            mk(MetricKind::Energy, |s| s.energy_mj),
        ]
    }
}

fn read_one(
    provider: &mut dyn TelemetryProvider,
    clock: &RunClock,
    interval: Duration,
) -> Result<TelemetrySample> {
    let cpu = provider.read_cpu_percent()?;
    let rssi = provider.read_rssi_dbm()?;
    Ok(TelemetrySample {
        timestamp_ms: clock.now_ms(),
        cpu_pct: cpu,
        rssi_dbm: rssi,
        energy_mj: provider
            .energy_model()
            .energy_mj(cpu, interval.as_secs_f64()),
    })
}

fn interval_timer(interval: Duration) -> tokio::time::Interval {
    let start = tokio::time::Instant::now() + interval;
    let mut t = tokio::time::interval_at(start, interval);
    t.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    t
}

/// One sample at the end of every `interval` within `window`.
pub async fn sample_telemetry(
    provider: &mut dyn TelemetryProvider,
    window: Duration,
    interval: Duration,
    clock: &RunClock,
) -> Result<TelemetryTrace> {
    if window.is_zero() || interval.is_zero() {
        return Err(ProbeError::Setup(
            "telemetry window and interval must be > 0".into(),
        ));
    }
    let n = (window.as_nanos() / interval.as_nanos()).max(1);
    let mut timer = interval_timer(interval);
    let mut trace = TelemetryTrace::default();
    for _ in 0..n {
        timer.tick().await;
        trace.samples.push(read_one(provider, clock, interval)?);
    }
    Ok(trace)
}

/// Samples every `interval` until `stop` fires, then takes one final sample
/// so short runs still produce data.
pub async fn sample_until(
    provider: &mut dyn TelemetryProvider,
    interval: Duration,
    clock: &RunClock,
    mut stop: oneshot::Receiver<()>,
) -> Result<TelemetryTrace> {
    if interval.is_zero() {
        return Err(ProbeError::Setup("telemetry interval must be > 0".into()));
    }
    let mut timer = interval_timer(interval);
    let mut trace = TelemetryTrace::default();
    loop {
        tokio::select! {
            _ = timer.tick() => trace.samples.push(read_one(provider, clock, interval)?),
            _ = &mut stop => break,
        }
    }
    if trace.samples.is_empty() {
        trace.samples.push(read_one(provider, clock, interval)?);
    }
    Ok(trace)
}
