#![allow(dead_code)]

use qers_core::metric::{default_catalog_entries, OverheadModel};
use qers_core::{validate_sample, SchemeCatalog};
use qers_probe::{ProbeContext, ProbeOutcome, RunClock};

pub fn ctx() -> ProbeContext {
    ProbeContext {
        scenario: "desk".into(),
        catalog: SchemeCatalog::from_entries(default_catalog_entries()).unwrap(),
        overhead: OverheadModel { bytes_to_ms: 0.001 },
        clock: RunClock::start(),
    }
}

pub fn assert_all_valid(outcome: &ProbeOutcome) {
    for s in &outcome.series {
        assert!(
            s.timestamps_strictly_increasing() || s.len() <= 1,
            "{:?} timestamps",
            s.kind
        );
        for sample in &s.samples {
            let v = validate_sample(sample);
            assert!(v.is_empty(), "{sample:?}: {v:?}");
        }
    }
}
