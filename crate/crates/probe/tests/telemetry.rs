use std::time::Duration;

use qers_core::metric::EnergyModel;
use qers_core::{validate_sample, MetricKind, ProtocolId};
use qers_probe::{sample_telemetry, sample_until, FixedProvider, RunClock, SimulatedProvider};

fn fixed(cpu: f64) -> FixedProvider {
    FixedProvider {
        cpu_pct: cpu,
        rssi_dbm: -40.0,
        energy: EnergyModel {
            device_power_w: 2.0,
        },
    }
}

#[tokio::test(start_paused = true)]
async fn fixed_provider_energy_matches_hand_arithmetic() {
    let clock = RunClock::start();
    let trace = sample_telemetry(
        &mut fixed(40.0),
        Duration::from_millis(1000),
        Duration::from_millis(1000),
        &clock,
    )
    .await
    .unwrap();
    assert_eq!(trace.samples.len(), 1);
    // 0.40 × 1 s × 2 W = 0.8 J
    assert!((trace.samples[0].energy_mj - 800.0).abs() < 1e-9);
    assert_eq!(trace.samples[0].rssi_dbm, -40.0);
}

#[tokio::test(start_paused = true)]
async fn one_sample_per_interval() {
    let clock = RunClock::start();
    let trace = sample_telemetry(
        &mut fixed(40.0),
        Duration::from_millis(1000),
        Duration::from_millis(250),
        &clock,
    )
    .await
    .unwrap();
    assert_eq!(trace.samples.len(), 4);
    assert!(trace
        .samples
        .iter()
        .all(|s| (s.energy_mj - 200.0).abs() < 1e-9));
    let series = trace.to_series(ProtocolId::Mqtt, &"desk".into());
    assert_eq!(series.len(), 3);
    assert!(series.iter().all(|s| s.len() == 4));
}

#[tokio::test(start_paused = true)]
async fn zero_cpu_gives_zero_energy() {
    let clock = RunClock::start();
    let trace = sample_telemetry(
        &mut fixed(0.0),
        Duration::from_millis(500),
        Duration::from_millis(100),
        &clock,
    )
    .await
    .unwrap();
    assert!(trace.samples.iter().all(|s| s.energy_mj == 0.0));
}

#[tokio::test(start_paused = true)]
async fn simulated_provider_is_deterministic_and_valid() {
    let run = || async {
        let clock = RunClock::start();
        let mut p =
            SimulatedProvider::new(5, (40.0, 30.0), (-60.0, 5.0), EnergyModel::default()).unwrap();
        sample_telemetry(
            &mut p,
            Duration::from_secs(5),
            Duration::from_millis(100),
            &clock,
        )
        .await
        .unwrap()
    };
    let (a, b) = (run().await, run().await);
    let values = |t: &qers_probe::TelemetryTrace| {
        t.samples
            .iter()
            .map(|s| (s.cpu_pct, s.rssi_dbm, s.energy_mj))
            .collect::<Vec<_>>()
    };
    assert_eq!(values(&a), values(&b));
    for s in a.to_series(ProtocolId::Https, &"desk".into()) {
        for sample in &s.samples {
            assert!(validate_sample(sample).is_empty(), "{sample:?}");
        }
        if s.kind == MetricKind::CpuUtilization {
            assert!(s.values().any(|v| v != 40.0));
        }
    }
}

#[tokio::test(start_paused = true)]
async fn sample_until_stops_on_signal() {
    let clock = RunClock::start();
    let (tx, rx) = tokio::sync::oneshot::channel();
    let handle = tokio::spawn(async move {
        let mut p = fixed(10.0);
        sample_until(&mut p, Duration::from_millis(100), &clock, rx).await
    });
    tokio::time::sleep(Duration::from_millis(550)).await;
    tx.send(()).unwrap();
    let trace = handle.await.unwrap().unwrap();
    assert_eq!(trace.samples.len(), 5);
}

#[tokio::test]
async fn zero_window_rejected() {
    let clock = RunClock::start();
    assert!(sample_telemetry(
        &mut fixed(1.0),
        Duration::ZERO,
        Duration::from_millis(1),
        &clock
    )
    .await
    .is_err());
}
