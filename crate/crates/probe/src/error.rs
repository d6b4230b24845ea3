use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error("target {target} unreachable: 0 of {attempts} requests completed (loss 1.0)")]
    TargetUnreachable { target: String, attempts: u32 },
    #[error("MQTT broker {target} unreachable: {reason}")]
    BrokerUnreachable { target: String, reason: String },
    #[error("subscription to `{topic}` failed: {reason}")]
    SubscribeFailed { topic: String, reason: String },
    #[error("TLS handshake with {target} failed: {reason}")]
    TlsHandshakeFailed { target: String, reason: String },
    #[error("certificate presented by {target} rejected: {reason}")]
    CertificateRejected { target: String, reason: String },
    #[error("telemetry provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("invalid probe setup: {0}")]
    Setup(String),
    #[error(transparent)]
    Core(#[from] qers_core::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = ProbeError> = std::result::Result<T, E>;
