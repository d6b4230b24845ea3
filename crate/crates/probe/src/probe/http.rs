use std::sync::Arc;
use std::time::{Duration, Instant};

use bytes::Bytes;
use http_body_util::{BodyExt, Full};
use hyper::client::conn::http1::SendRequest;
use hyper::{Method, Request};
use hyper_util::rt::TokioIo;
use qers_core::config::ProbeSpec;
use qers_core::{MetricKind, MetricSeries, ProtocolId};
use rustls::pki_types::ServerName;
use tokio::io::{AsyncRead, AsyncWrite};
use tokio::net::TcpStream;
use tokio_rustls::TlsConnector;

use super::{ticker, timing_series, Completed, HandshakeRecord, ProbeContext, ProbeOutcome};
use crate::clock::duration_ms;
use crate::error::{ProbeError, Result};
use crate::tls::{client_config, server_name};

trait Io: AsyncRead + AsyncWrite + Unpin + Send {}
impl<T: AsyncRead + AsyncWrite + Unpin + Send> Io for T {}

struct Tls {
    connector: TlsConnector,
    name: ServerName<'static>,
}

enum AttemptError {
    /// Counted as loss.
    Failed(String),
    /// Aborts the probe.
    Fatal(ProbeError),
}

struct Attempt {
    completed: Completed,
    /// Set when this request opened a new TLS session.
    handshake: Option<HandshakeRecord>,
}

struct Client<'a> {
    spec: &'a ProbeSpec,
    ctx: &'a ProbeContext,
    tls: Option<Tls>,
    sender: Option<SendRequest<Full<Bytes>>>,
    payload: Bytes,
    connections: u32,
}

fn classify_tls_error(target: &str, e: std::io::Error) -> AttemptError {
    match e
        .get_ref()
        .and_then(|inner| inner.downcast_ref::<rustls::Error>())
    {
        Some(rustls::Error::InvalidCertificate(reason)) => {
            AttemptError::Fatal(ProbeError::CertificateRejected {
                target: target.to_string(),
                reason: format!("{reason:?}"),
            })
        }
        Some(other) => AttemptError::Fatal(ProbeError::TlsHandshakeFailed {
            target: target.to_string(),
            reason: other.to_string(),
        }),
        None => AttemptError::Failed(e.to_string()),
    }
}

impl Client<'_> {
    async fn connect(&mut self) -> Result<Option<HandshakeRecord>, AttemptError> {
        let tcp = TcpStream::connect(&self.spec.target)
            .await
            .map_err(|e| AttemptError::Failed(e.to_string()))?;
        let _ = tcp.set_nodelay(true);
        self.connections += 1;
        let (io, handshake): (Box<dyn Io>, _) = match &self.tls {
            None => (Box::new(tcp), None),
            Some(tls) => {
                let t0 = Instant::now();
                let stream = tls
                    .connector
                    .connect(tls.name.clone(), tcp)
                    .await
                    .map_err(|e| classify_tls_error(&self.spec.target, e))?;
                let record = HandshakeRecord {
                    timestamp_ms: self.ctx.clock.ms_at(t0),
                    duration_ms: duration_ms(t0.elapsed()),
                };
                (Box::new(stream), Some(record))
            }
        };
        let (sender, conn) = hyper::client::conn::http1::handshake(TokioIo::new(io))
            .await
            .map_err(|e| AttemptError::Failed(e.to_string()))?;
        tokio::spawn(async move {
            let _ = conn.await;
        });
        self.sender = Some(sender);
        Ok(handshake)
    }

    async fn attempt(&mut self) -> Result<Attempt, AttemptError> {
        let reusable = match self.sender.as_mut() {
            Some(s) => s.ready().await.is_ok(),
            None => false,
        };
        let handshake = if reusable {
            None
        } else {
            self.connect().await?
        };
        let sender = self.sender.as_mut().expect("connected");
        let method = if self.payload.is_empty() {
            Method::GET
        } else {
            Method::POST
        };
        let request = Request::builder()
            .method(method)
            .uri(&self.spec.path)
            .header(hyper::header::HOST, &self.spec.target)
            .body(Full::new(self.payload.clone()))
            .map_err(|e| AttemptError::Fatal(ProbeError::Setup(e.to_string())))?;

        let t0 = Instant::now();
        let response = sender
            .send_request(request)
            .await
            .map_err(|e| AttemptError::Failed(e.to_string()))?;
        let status = response.status();
        response
            .into_body()
            .collect()
            .await
            .map_err(|e| AttemptError::Failed(e.to_string()))?;
        let latency_ms = duration_ms(t0.elapsed());
        if !status.is_success() {
            return Err(AttemptError::Failed(format!("status {status}")));
        }
        Ok(Attempt {
            completed: Completed {
                timestamp_ms: self.ctx.clock.ms_at(t0),
                latency_ms,
            },
            handshake,
        })
    }
}

async fn run(spec: &ProbeSpec, ctx: &ProbeContext, tls: Option<Tls>) -> Result<ProbeOutcome> {
    let protocol = if tls.is_some() {
        ProtocolId::Https
    } else {
        ProtocolId::Http
    };
    let overhead = match (&tls, &spec.scheme) {
        (Some(_), Some(scheme)) => Some(ctx.catalog.get(scheme)?.clone()),
        (Some(_), None) => return Err(ProbeError::Setup("HTTPS probes must name a scheme".into())),
        _ => None,
    };
    let mut client = Client {
        spec,
        ctx,
        tls,
        sender: None,
        payload: Bytes::from(vec![b'q'; spec.payload_bytes]),
        connections: 0,
    };
    let timeout = Duration::from_millis(spec.timeout_ms);
    let mut tick = ticker(spec.interval_ms);
    let mut done = Vec::new();
    let mut handshakes = Vec::new();
    let mut co = MetricSeries::new(protocol, ctx.scenario.clone(), MetricKind::CryptoOverhead);

    for _ in 0..spec.count {
        tick.tick().await;
        match tokio::time::timeout(timeout, client.attempt()).await {
            Ok(Ok(a)) => {
                if let Some(entry) = &overhead {
                    let hs_ms = a
                        .handshake
                        .map(|h| h.duration_ms + spec.synthetic_kem_delay_ms)
                        .unwrap_or(0.0);
                    let bytes = if a.handshake.is_some() {
                        entry.handshake_bytes()
                    } else {
                        0
                    };
                    co.push(
                        a.completed.timestamp_ms,
                        ctx.overhead.crypto_overhead_ms(hs_ms, bytes),
                    );
                }
                handshakes.extend(a.handshake);
                done.push(a.completed);
            }
            Ok(Err(AttemptError::Fatal(e))) => return Err(e),
            Ok(Err(AttemptError::Failed(reason))) => {
                tracing::debug!(target = %spec.target, %reason, "request failed");
                client.sender = None;
            }
            Err(_) => {
                tracing::debug!(target = %spec.target, "request timed out");
                client.sender = None;
            }
        }
        if !spec.reuse_connection {
            client.sender = None;
        }
    }

    if done.is_empty() {
        return Err(ProbeError::TargetUnreachable {
            target: spec.target.clone(),
            attempts: spec.count,
        });
    }
    let mut series = timing_series(protocol, ctx, &done, spec.count, ctx.clock.now_ms());
    if let Some(entry) = &overhead {
        series.push(co);
        let mut k = MetricSeries::new(protocol, ctx.scenario.clone(), MetricKind::KeySize);
        k.push(done[0].timestamp_ms, entry.public_key_bytes as f64);
        series.push(k);
    }
    Ok(ProbeOutcome {
        protocol,
        attempted: spec.count,
        completed: done.len() as u32,
        connections: client.connections,
        handshakes,
        series,
    })
}

/// Plain HTTP round trips: latency, jitter and packet loss.
pub async fn run_http_probe(spec: &ProbeSpec, ctx: &ProbeContext) -> Result<ProbeOutcome> {
    run(spec, ctx, None).await
}

/// HTTPS round trips. Handshake time is recorded separately and feeds crypto
/// overhead only; request latency starts after the session is established.
pub async fn run_https_probe(spec: &ProbeSpec, ctx: &ProbeContext) -> Result<ProbeOutcome> {
    let tls = Tls {
        connector: TlsConnector::from(Arc::clone(&client_config(spec)?)),
        name: server_name(spec)?,
    };
    run(spec, ctx, Some(tls)).await
}
