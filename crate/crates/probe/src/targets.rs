//! Loopback HTTP and HTTPS echo servers used as probe targets.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::State;
use axum::routing::{get, post};
use axum::Router;
use hyper_util::rt::TokioIo;
use hyper_util::service::TowerToHyperService;
use tokio::io::{AsyncRead, AsyncWrite};
use tokio::net::{TcpListener, ToSocketAddrs};
use tokio::task::JoinHandle;
use tokio_rustls::TlsAcceptor;

use crate::error::Result;
use crate::tls::{server_config, SelfSigned};

#[derive(Debug, Clone, Copy, Default)]
pub struct TargetConfig {
    /// Fixed delay before every response.
    pub response_delay_ms: u64,
    /// HTTPS only: delay between TCP accept and the TLS handshake.
    pub handshake_delay_ms: u64,
}

#[derive(Debug, Default)]
pub struct TargetStats {
    pub connections: AtomicU64,
    /// Completed TLS handshakes.
    pub handshakes: AtomicU64,
    pub failed_handshakes: AtomicU64,
    pub requests: AtomicU64,
}

pub struct TargetHandle {
    addr: SocketAddr,
    stats: Arc<TargetStats>,
    task: JoinHandle<()>,
}

impl TargetHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn stats(&self) -> &TargetStats {
        &self.stats
    }

    pub fn handshakes(&self) -> u64 {
        self.stats.handshakes.load(Ordering::SeqCst)
    }

    pub fn shutdown(self) {
        self.task.abort();
    }
}

impl Drop for TargetHandle {
    fn drop(&mut self) {
        self.task.abort();
    }
}

#[derive(Clone)]
struct AppState {
    delay: Duration,
    stats: Arc<TargetStats>,
}

async fn echo(State(state): State<AppState>, body: Bytes) -> Bytes {
    state.stats.requests.fetch_add(1, Ordering::Relaxed);
    if !state.delay.is_zero() {
        tokio::time::sleep(state.delay).await;
    }
    body
}

async fn health() -> &'static str {
    "ok"
}

fn router(state: AppState) -> Router {
    Router::new()
        .route("/echo", post(echo).get(echo))
        .route("/health", get(health))
        .with_state(state)
}

async fn serve_conn<I>(io: I, app: Router)
where
    I: AsyncRead + AsyncWrite + Unpin + Send + 'static,
{
    let service = TowerToHyperService::new(app);
    if let Err(e) = hyper::server::conn::http1::Builder::new()
        .serve_connection(TokioIo::new(io), service)
        .await
    {
        tracing::debug!(error = %e, "connection ended with error");
    }
}

pub async fn start_http_target(
    addr: impl ToSocketAddrs,
    config: TargetConfig,
) -> Result<TargetHandle> {
    start(addr, config, None).await
}

pub async fn start_https_target(
    addr: impl ToSocketAddrs,
    config: TargetConfig,
    cert: &SelfSigned,
) -> Result<TargetHandle> {
    let acceptor = TlsAcceptor::from(server_config(cert)?);
    start(addr, config, Some(acceptor)).await
}

async fn start(
    addr: impl ToSocketAddrs,
    config: TargetConfig,
    tls: Option<TlsAcceptor>,
) -> Result<TargetHandle> {
    let listener = TcpListener::bind(addr).await?;
    let addr = listener.local_addr()?;
    let stats = Arc::new(TargetStats::default());
    let app = router(AppState {
        delay: Duration::from_millis(config.response_delay_ms),
        stats: stats.clone(),
    });
    let handshake_delay = Duration::from_millis(config.handshake_delay_ms);
    let task_stats = stats.clone();
    let task = tokio::spawn(async move {
        loop {
            let Ok((stream, _)) = listener.accept().await else {
                continue;
            };
            let _ = stream.set_nodelay(true);
            task_stats.connections.fetch_add(1, Ordering::SeqCst);
            let (app, tls, stats) = (app.clone(), tls.clone(), task_stats.clone());
            tokio::spawn(async move {
                match tls {
                    None => serve_conn(stream, app).await,
                    Some(acceptor) => {
                        if !handshake_delay.is_zero() {
                            tokio::time::sleep(handshake_delay).await;
                        }
                        match acceptor.accept(stream).await {
                            Ok(tls_stream) => {
                                stats.handshakes.fetch_add(1, Ordering::SeqCst);
                                serve_conn(tls_stream, app).await;
                            }
                            Err(e) => {
                                stats.failed_handshakes.fetch_add(1, Ordering::SeqCst);
                                tracing::debug!(error = %e, "TLS accept failed");
                            }
                        }
                    }
                }
            });
        }
    });
    Ok(TargetHandle { addr, stats, task })
}
