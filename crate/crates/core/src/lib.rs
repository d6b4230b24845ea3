//! Quantum Encryption Resilience Score (QERS) scoring core.
//!
//! Raw protocol measurements are grouped into [`metric::MetricSeries`],
//! min–max normalized ([`normalize`]), and combined into Basic, Tuned and
//! Fusion scores ([`engine`]). [`sim`] produces deterministic synthetic
//! traces and [`report`] reads/writes CSV logs and report files.

pub mod config;
pub mod engine;
pub mod error;
pub mod metric;
pub mod normalize;
pub mod report;
pub mod sim;
pub mod stats;

pub use config::Config;
pub use engine::{
    classify, evaluate_run, score_basic, score_fusion, score_tuned, validate_weights,
    NormalizedMetrics, QersResult, ReadinessBand, WeightConfig,
};
pub use error::{Error, Result};
pub use metric::{
    lookup_key_size, validate_sample, MetricKind, MetricSample, MetricSeries, ProtocolId,
    ScenarioLabel, SchemeCatalog,
};
pub use normalize::{derive_bounds, normalize, BoundsPolicy, NormalizationBounds};
pub use sim::{builtin_presets, generate_scenario, ScenarioSpec};
