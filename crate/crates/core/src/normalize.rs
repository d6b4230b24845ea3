//! Min–max scaling of raw metric values into the 0–100 score space.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{MetricKind, MetricSeries};

/// Upper end of the score space.
pub const MAX_SCORE: f64 = 100.0;

/// Resistance levels are declared, not measured, so their scale is fixed.
pub const RESISTANCE_BOUNDS: (f64, f64) = (1.0, 5.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationBounds {
    pub kind: MetricKind,
    pub min: f64,
    pub max: f64,
}

impl NormalizationBounds {
    pub fn new(kind: MetricKind, min: f64, max: f64) -> Result<Self> {
        if !(min <= max) {
            return Err(Error::InvalidBounds { kind, min, max });
        }
        Ok(NormalizationBounds { kind, min, max })
    }

    pub fn is_degenerate(&self) -> bool {
        self.max == self.min
    }

    /// Widens the bounds to cover `value`.
    pub fn include(&mut self, value: f64) {
        self.min = self.min.min(value);
        self.max = self.max.max(value);
    }

    pub fn resistance() -> Self {
        NormalizationBounds {
            kind: MetricKind::ProvenResistance,
            min: RESISTANCE_BOUNDS.0,
            max: RESISTANCE_BOUNDS.1,
        }
    }
}

/// Observed extrema of a single series.
pub fn derive_bounds(series: &MetricSeries) -> Result<NormalizationBounds> {
    derive_bounds_over(series.kind, std::iter::once(series))
}

/// Observed extrema across several series of the same kind.
pub fn derive_bounds_over<'a>(
    kind: MetricKind,
    series: impl IntoIterator<Item = &'a MetricSeries>,
) -> Result<NormalizationBounds> {
    let mut bounds: Option<NormalizationBounds> = None;
    for s in series {
        debug_assert_eq!(s.kind, kind);
        for v in s.values() {
            match bounds.as_mut() {
                Some(b) => b.include(v),
                None => {
                    bounds = Some(NormalizationBounds {
                        kind,
                        min: v,
                        max: v,
                    })
                }
            }
        }
    }
    bounds.ok_or_else(|| Error::EmptySeries(kind.to_string()))
}

/// `MS·(x − min)/(max − min)` clamped to `[0, MS]`; degenerate bounds give 0.
pub fn normalize(x: f64, bounds: &NormalizationBounds) -> f64 {
    if bounds.is_degenerate() {
        return 0.0;
    }
    let raw = MAX_SCORE * ((x - bounds.min) / (bounds.max - bounds.min));
    raw.clamp(0.0, MAX_SCORE)
}

/// Which samples share one set of bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundsScope {
    /// All protocols within a scenario share bounds per metric kind.
    #[default]
    Scenario,
    /// Every (protocol, scenario) group gets its own bounds.
    Protocol,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PinnedRange {
    pub min: f64,
    pub max: f64,
}

/// How bounds are obtained for a run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsPolicy {
    #[serde(default)]
    pub scope: BoundsScope,
    /// Explicit bounds that replace derived ones, so scores stay comparable across runs.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub pinned: BTreeMap<MetricKind, PinnedRange>,
}

impl BoundsPolicy {
    pub fn validate(&self) -> Result<()> {
        for (kind, r) in &self.pinned {
            if !(r.min.is_finite() && r.max.is_finite()) || r.min > r.max {
                return Err(Error::config(
                    format!("bounds.pinned.{kind}"),
                    format!("min {} must be <= max {}", r.min, r.max),
                ));
            }
        }
        Ok(())
    }

    /// Final bounds for `kind`, given the series that fall under one scope.
    pub fn bounds_for<'a>(
        &self,
        kind: MetricKind,
        series: impl IntoIterator<Item = &'a MetricSeries>,
    ) -> Result<NormalizationBounds> {
        if let Some(r) = self.pinned.get(&kind) {
            return NormalizationBounds::new(kind, r.min, r.max);
        }
        if kind == MetricKind::ProvenResistance {
            return Ok(NormalizationBounds::resistance());
        }
        derive_bounds_over(kind, series)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::ProtocolId;

    fn series(values: &[f64]) -> MetricSeries {
        MetricSeries::from_points(
            ProtocolId::Mqtt,
            "close".into(),
            MetricKind::Latency,
            values.iter().enumerate().map(|(i, v)| (i as f64, *v)),
        )
    }

    fn b(min: f64, max: f64) -> NormalizationBounds {
        NormalizationBounds::new(MetricKind::Latency, min, max).unwrap()
    }

    #[test]
    fn derive_examples() {
        let bounds = derive_bounds(&series(&[3.0, 7.0, 5.0])).unwrap();
        assert_eq!((bounds.min, bounds.max), (3.0, 7.0));
        let bounds = derive_bounds(&series(&[4.0])).unwrap();
        assert_eq!((bounds.min, bounds.max), (4.0, 4.0));
        assert!(matches!(
            derive_bounds(&series(&[])),
            Err(Error::EmptySeries(_))
        ));
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize(10.0, &b(10.0, 20.0)), 0.0);
        assert_eq!(normalize(20.0, &b(10.0, 20.0)), 100.0);
        assert_eq!(normalize(15.0, &b(10.0, 20.0)), 50.0);
        // raw 150, clamped
        assert_eq!(normalize(25.0, &b(10.0, 20.0)), 100.0);
        assert_eq!(normalize(5.0, &b(10.0, 20.0)), 0.0);
    }

    #[test]
    fn degenerate_bounds_give_zero() {
        assert_eq!(normalize(4.0, &b(4.0, 4.0)), 0.0);
        assert_eq!(normalize(1e9, &b(4.0, 4.0)), 0.0);
    }

    #[test]
    fn inverted_bounds_rejected() {
        assert!(NormalizationBounds::new(MetricKind::Latency, 2.0, 1.0).is_err());
    }

    #[test]
    fn resistance_scale_is_fixed() {
        let r = NormalizationBounds::resistance();
        assert_eq!(normalize(1.0, &r), 0.0);
        assert_eq!(normalize(3.0, &r), 50.0);
        assert_eq!(normalize(5.0, &r), 100.0);
        let policy = BoundsPolicy::default();
        let s = MetricSeries::from_points(
            ProtocolId::Https,
            "close".into(),
            MetricKind::ProvenResistance,
            [(0.0, 3.0)],
        );
        assert_eq!(
            policy
                .bounds_for(MetricKind::ProvenResistance, [&s])
                .unwrap(),
            r
        );
    }

    #[test]
    fn pinned_bounds_override_derived() {
        let mut policy = BoundsPolicy::default();
        policy.pinned.insert(
            MetricKind::Latency,
            PinnedRange {
                min: 0.0,
                max: 50.0,
            },
        );
        let s = series(&[3.0, 7.0]);
        assert_eq!(
            policy.bounds_for(MetricKind::Latency, [&s]).unwrap(),
            b(0.0, 50.0)
        );
        policy
            .pinned
            .insert(MetricKind::Latency, PinnedRange { min: 9.0, max: 1.0 });
        assert!(policy.validate().is_err());
    }
}
