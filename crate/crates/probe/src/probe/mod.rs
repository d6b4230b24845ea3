mod http;
mod mqtt;

use qers_core::config::ProbeSpec;
use qers_core::metric::OverheadModel;
use qers_core::{MetricKind, MetricSeries, ProtocolId, ScenarioLabel, SchemeCatalog};
use serde::Serialize;

use crate::clock::RunClock;
use crate::error::Result;

pub use http::{run_http_probe, run_https_probe};
pub use mqtt::run_mqtt_probe;

/// Everything a probe needs besides its own spec.
#[derive(Debug, Clone)]
pub struct ProbeContext {
    pub scenario: ScenarioLabel,
    pub catalog: SchemeCatalog,
    pub overhead: OverheadModel,
    pub clock: RunClock,
}

/// A completed TLS handshake. `duration_ms` is the measured time only,
/// without any synthetic KEM delay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HandshakeRecord {
    pub timestamp_ms: f64,
    pub duration_ms: f64,
}

#[derive(Debug, Clone)]
pub struct ProbeOutcome {
    pub protocol: ProtocolId,
    pub attempted: u32,
    pub completed: u32,
    /// Transport connections opened (TCP).
    pub connections: u32,
    pub handshakes: Vec<HandshakeRecord>,
    pub series: Vec<MetricSeries>,
}

impl ProbeOutcome {
    pub fn loss(&self) -> f64 {
        (self.attempted - self.completed) as f64 / self.attempted as f64
    }

    pub fn series(&self, kind: MetricKind) -> Option<&MetricSeries> {
        self.series.iter().find(|s| s.kind == kind)
    }

    pub fn into_series(self) -> Vec<MetricSeries> {
        self.series
    }
}

/// Per-request record kept while a probe runs.
#[derive(Debug, Clone, Copy)]
struct Completed {
    timestamp_ms: f64,
    latency_ms: f64,
}

/// Latency, jitter and the single packet-loss summary sample.
fn timing_series(
    protocol: ProtocolId,
    ctx: &ProbeContext,
    done: &[Completed],
    attempted: u32,
    end_ms: f64,
) -> Vec<MetricSeries> {
    let mk = |kind| MetricSeries::new(protocol, ctx.scenario.clone(), kind);
    let mut latency = mk(MetricKind::Latency);
    let mut jitter = mk(MetricKind::Jitter);
    for (i, c) in done.iter().enumerate() {
        latency.push(c.timestamp_ms, c.latency_ms);
        if i > 0 {
            jitter.push(
                c.timestamp_ms,
                (c.latency_ms - done[i - 1].latency_ms).abs(),
            );
        }
    }
    if done.len() == 1 {
        jitter.push(done[0].timestamp_ms, 0.0);
    }
    let mut loss = mk(MetricKind::PacketLoss);
    let failed = attempted - done.len() as u32;
    loss.push(end_ms, failed as f64 / attempted as f64);
    [latency, jitter, loss]
        .into_iter()
        .filter(|s| !s.is_empty())
        .collect()
}

/// Adds key size, resistance level and byte-derived crypto overhead for the
/// declared scheme, for any of those kinds the probe did not measure itself.
pub fn complete_accounting(
    outcome: &mut ProbeOutcome,
    spec: &ProbeSpec,
    ctx: &ProbeContext,
) -> Result<()> {
    let Some(scheme) = &spec.scheme else {
        return Ok(());
    };
    let entry = ctx.catalog.get(scheme)?;
    let timestamps: Vec<f64> = outcome
        .series(MetricKind::Latency)
        .map(|s| s.samples.iter().map(|x| x.timestamp_ms).collect())
        .unwrap_or_default();
    let Some(&first) = timestamps.first() else {
        return Ok(());
    };
    let mk = |kind| MetricSeries::new(outcome.protocol, ctx.scenario.clone(), kind);
    let mut added = Vec::new();
    if outcome.series(MetricKind::KeySize).is_none() {
        let mut s = mk(MetricKind::KeySize);
        s.push(first, entry.public_key_bytes as f64);
        added.push(s);
    }
    if outcome.series(MetricKind::ProvenResistance).is_none() {
        let mut s = mk(MetricKind::ProvenResistance);
        s.push(first, entry.resistance_level as f64);
        added.push(s);
    }
    if outcome.series(MetricKind::CryptoOverhead).is_none() {
        let mut s = mk(MetricKind::CryptoOverhead);
        let co = ctx
            .overhead
            .crypto_overhead_ms(0.0, entry.handshake_bytes());
        for t in timestamps {
            s.push(t, co);
        }
        added.push(s);
    }
    outcome.series.extend(added);
    Ok(())
}

/// Runs the probe for `spec.protocol` and completes scheme accounting.
pub async fn run_probe(spec: &ProbeSpec, ctx: &ProbeContext) -> Result<ProbeOutcome> {
    let mut outcome = match spec.protocol {
        ProtocolId::Mqtt => run_mqtt_probe(spec, ctx).await?,
        ProtocolId::Http => run_http_probe(spec, ctx).await?,
        ProtocolId::Https => run_https_probe(spec, ctx).await?,
    };
    complete_accounting(&mut outcome, spec, ctx)?;
    Ok(outcome)
}

fn ticker(interval_ms: u64) -> tokio::time::Interval {
    let mut t = tokio::time::interval(std::time::Duration::from_millis(interval_ms.max(1)));
    t.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    t
}
