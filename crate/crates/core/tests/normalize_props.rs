use proptest::prelude::*;
use qers_core::normalize::{derive_bounds, normalize, NormalizationBounds};
use qers_core::{MetricKind, MetricSeries, ProtocolId};

fn series(values: &[f64]) -> MetricSeries {
    MetricSeries::from_points(
        ProtocolId::Http,
        "close".into(),
        MetricKind::Latency,
        values.iter().enumerate().map(|(i, v)| (i as f64, *v)),
    )
}

fn bounds() -> impl Strategy<Value = NormalizationBounds> {
    (-1e6..1e6f64, 0.0..1e6f64).prop_map(|(min, width)| {
        NormalizationBounds::new(MetricKind::Latency, min, min + width).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn output_in_range(x in -1e7..1e7f64, b in bounds()) {
        let v = normalize(x, &b);
        prop_assert!((0.0..=100.0).contains(&v));
    }

    #[test]
    fn monotone(x in -1e7..1e7f64, dx in 0.0..1e6f64, b in bounds()) {
        prop_assert!(normalize(x, &b) <= normalize(x + dx, &b));
    }

    #[test]
    fn affine_invariance(values in proptest::collection::vec(-1e3..1e3f64, 1..50),
                         a in 1e-3..1e3f64, shift in -1e3..1e3f64) {
        let original = series(&values);
        let scaled: Vec<f64> = values.iter().map(|v| a * v + shift).collect();
        let transformed = series(&scaled);
        let b0 = derive_bounds(&original).unwrap();
        let b1 = derive_bounds(&transformed).unwrap();
        for (x, y) in values.iter().zip(&scaled) {
            prop_assert!((normalize(*x, &b0) - normalize(*y, &b1)).abs() < 1e-9);
        }
    }

    #[test]
    fn derived_extremes_map_to_ends(values in proptest::collection::vec(-1e3..1e3f64, 2..50)) {
        let b = derive_bounds(&series(&values)).unwrap();
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if min < max {
            prop_assert_eq!(normalize(min, &b), 0.0);
            prop_assert_eq!(normalize(max, &b), 100.0);
        } else {
            prop_assert_eq!(normalize(min, &b), 0.0);
        }
    }

    #[test]
    fn degenerate_bounds_zero(x in -1e7..1e7f64, c in -1e6..1e6f64) {
        let b = NormalizationBounds::new(MetricKind::Latency, c, c).unwrap();
        prop_assert_eq!(normalize(x, &b), 0.0);
    }
}
