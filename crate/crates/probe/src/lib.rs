//! Live round-trip probes for MQTT, HTTP and HTTPS, telemetry providers,
//! and loopback servers to probe against.

pub mod clock;
pub mod error;
pub mod mqtt;
pub mod probe;
pub mod targets;
pub mod telemetry;
pub mod tls;

pub use clock::RunClock;
pub use error::{ProbeError, Result};
pub use probe::{
    complete_accounting, run_http_probe, run_https_probe, run_mqtt_probe, run_probe,
    HandshakeRecord, ProbeContext, ProbeOutcome,
};
pub use telemetry::{
    provider_from_config, sample_telemetry, sample_until, FixedProvider, HostProvider,
    SimulatedProvider, TelemetryProvider, TelemetrySample, TelemetryTrace,
};
