use std::collections::BTreeMap;

use qers_core::metric::{default_catalog_entries, EnergyModel, OverheadModel};
use qers_core::sim::{LatencyDistribution, ProtocolParams};
use qers_core::{generate_scenario, validate_sample, ProtocolId, ScenarioSpec, SchemeCatalog};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_params(rng: &mut ChaCha8Rng, https: bool) -> ProtocolParams {
    let schemes = ["kem-l1", "kem-l3", "kem-l5", "sig-l2", "sig-l3", "sig-l5"];
    ProtocolParams {
        latency_mean_ms: rng.random_range(0.0..500.0),
        latency_stddev_ms: rng.random_range(0.0..200.0),
        latency_distribution: LatencyDistribution::TruncatedNormal,
        loss_probability: rng.random_range(0.0..=1.0),
        cpu_mean_pct: rng.random_range(0.0..=100.0),
        cpu_stddev_pct: rng.random_range(0.0..60.0),
        rssi_mean_dbm: rng.random_range(-100.0..0.0),
        rssi_stddev_db: rng.random_range(0.0..20.0),
        handshake_ms: https.then(|| rng.random_range(0.0..400.0)),
        handshake_stddev_ms: rng.random_range(0.0..100.0),
        scheme: schemes[rng.random_range(0..schemes.len())].to_string(),
    }
}

#[test]
fn ten_thousand_random_specs_yield_valid_samples() {
    let catalog = SchemeCatalog::from_entries(default_catalog_entries()).unwrap();
    let overhead = OverheadModel { bytes_to_ms: 0.001 };
    let energy = EnergyModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..10_000 {
        let interval_ms = [100, 250, 500, 1000][rng.random_range(0..4)];
        let spec = ScenarioSpec {
            label: "fuzz".into(),
            duration_s: rng.random_range(1..4),
            interval_ms,
            seed: rng.random(),
            messages_per_sample: rng.random_range(1..30),
            protocols: BTreeMap::from([
                (ProtocolId::Mqtt, random_params(&mut rng, false)),
                (ProtocolId::Http, random_params(&mut rng, false)),
                (ProtocolId::Https, random_params(&mut rng, true)),
            ]),
        };
        let series = generate_scenario(&spec, &catalog, &overhead, &energy).unwrap();
        for s in &series {
            assert_eq!(s.len() as u64, spec.duration_s * 1000 / interval_ms);
            for sample in &s.samples {
                let v = validate_sample(sample);
                assert!(v.is_empty(), "{sample:?}: {v:?}");
            }
        }
    }
}
