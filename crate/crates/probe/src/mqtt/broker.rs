//! Loopback MQTT broker with optional seeded message dropping.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use bytes::BytesMut;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tokio::net::{TcpListener, TcpStream, ToSocketAddrs};
use tokio::sync::mpsc;
use tokio::task::JoinHandle;

use super::codec::{read_packet, topic_matches, write_packet, Packet, Publish};

#[derive(Debug, Clone, Copy, Default)]
pub struct BrokerConfig {
    /// Probability that a routed publication is silently discarded.
    pub drop_ratio: f64,
    pub seed: u64,
}

#[derive(Debug, Default)]
pub struct BrokerStats {
    pub connections: AtomicU64,
    pub routed: AtomicU64,
    pub dropped: AtomicU64,
}

struct Client {
    filters: Vec<(String, u8)>,
    tx: mpsc::UnboundedSender<Packet>,
    next_id: u16,
}

struct Shared {
    clients: HashMap<u64, Client>,
    rng: ChaCha8Rng,
    drop_ratio: f64,
}

pub struct BrokerHandle {
    addr: SocketAddr,
    stats: Arc<BrokerStats>,
    task: JoinHandle<()>,
}

impl BrokerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn stats(&self) -> &BrokerStats {
        &self.stats
    }

    pub fn shutdown(self) {
        self.task.abort();
    }
}

impl Drop for BrokerHandle {
    fn drop(&mut self) {
        self.task.abort();
    }
}

pub async fn start_broker(
    addr: impl ToSocketAddrs,
    config: BrokerConfig,
) -> std::io::Result<BrokerHandle> {
    let listener = TcpListener::bind(addr).await?;
    let addr = listener.local_addr()?;
    let stats = Arc::new(BrokerStats::default());
    let shared = Arc::new(Mutex::new(Shared {
        clients: HashMap::new(),
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        drop_ratio: config.drop_ratio.clamp(0.0, 1.0),
    }));
    let task_stats = stats.clone();
    let task = tokio::spawn(async move {
        let mut next_client = 0u64;
        loop {
            let Ok((stream, peer)) = listener.accept().await else {
                continue;
            };
            next_client += 1;
            task_stats.connections.fetch_add(1, Ordering::Relaxed);
            let (shared, stats, id) = (shared.clone(), task_stats.clone(), next_client);
            tokio::spawn(async move {
                if let Err(e) = serve_client(stream, id, shared.clone(), stats).await {
                    tracing::debug!(%peer, error = %e, "mqtt client closed");
                }
                shared.lock().unwrap().clients.remove(&id);
            });
        }
    });
    Ok(BrokerHandle { addr, stats, task })
}

fn valid_filter(f: &str) -> bool {
    !f.is_empty()
        && f.split('/').enumerate().all(|(i, level)| {
            let last = i == f.split('/').count() - 1;
            match level {
                "#" => last,
                "+" => true,
                l => !l.contains(['#', '+']),
            }
        })
}

async fn serve_client(
    stream: TcpStream,
    id: u64,
    shared: Arc<Mutex<Shared>>,
    stats: Arc<BrokerStats>,
) -> std::io::Result<()> {
    stream.set_nodelay(true)?;
    let (mut reader, mut writer) = stream.into_split();
    let mut buf = BytesMut::new();
    match read_packet(&mut reader, &mut buf).await? {
        Some(Packet::Connect { .. }) => {}
        _ => return Ok(()),
    }
    let (tx, mut rx) = mpsc::unbounded_channel::<Packet>();
    let writer_task = tokio::spawn(async move {
        while let Some(p) = rx.recv().await {
            if write_packet(&mut writer, &p).await.is_err() {
                break;
            }
        }
    });
    let _ = tx.send(Packet::ConnAck {
        session_present: false,
        code: 0,
    });
    shared.lock().unwrap().clients.insert(
        id,
        Client {
            filters: Vec::new(),
            tx: tx.clone(),
            next_id: 1,
        },
    );

    while let Some(packet) = read_packet(&mut reader, &mut buf).await? {
        match packet {
            Packet::Publish(p) => {
                match (p.qos, p.packet_id) {
                    (1, Some(pid)) => {
                        let _ = tx.send(Packet::PubAck(pid));
                    }
                    (2, Some(pid)) => {
                        let _ = tx.send(Packet::PubRec(pid));
                    }
                    _ => {}
                }
                route(&shared, &stats, p);
            }
            Packet::PubRel(pid) => {
                let _ = tx.send(Packet::PubComp(pid));
            }
            Packet::PubRec(pid) => {
                let _ = tx.send(Packet::PubRel(pid));
            }
            Packet::PubAck(_) | Packet::PubComp(_) => {}
            Packet::Subscribe { packet_id, filters } => {
                let mut codes = Vec::with_capacity(filters.len());
                let mut guard = shared.lock().unwrap();
                let client = guard.clients.get_mut(&id).expect("registered client");
                for (f, q) in filters {
                    if valid_filter(&f) && q <= 2 {
                        client.filters.retain(|(existing, _)| *existing != f);
                        client.filters.push((f, q));
                        codes.push(q);
                    } else {
                        codes.push(0x80);
                    }
                }
                drop(guard);
                let _ = tx.send(Packet::SubAck { packet_id, codes });
            }
            Packet::PingReq => {
                let _ = tx.send(Packet::PingResp);
            }
            Packet::Disconnect => break,
            _ => break,
        }
    }
    drop(tx);
    shared.lock().unwrap().clients.remove(&id);
    let _ = writer_task.await;
    Ok(())
}

fn route(shared: &Mutex<Shared>, stats: &BrokerStats, p: Publish) {
    let mut guard = shared.lock().unwrap();
    let s = &mut *guard;
    if s.drop_ratio > 0.0 && s.rng.random::<f64>() < s.drop_ratio {
        stats.dropped.fetch_add(1, Ordering::Relaxed);
        return;
    }
    stats.routed.fetch_add(1, Ordering::Relaxed);
    for client in s.clients.values_mut() {
        let granted = client
            .filters
            .iter()
            .filter(|(f, _)| topic_matches(f, &p.topic))
            .map(|(_, q)| *q)
            .max();
        let Some(granted) = granted else { continue };
        let qos = granted.min(p.qos);
        let packet_id = (qos > 0).then(|| {
            let id = client.next_id;
            client.next_id = client.next_id.checked_add(1).unwrap_or(1);
            id
        });
        let _ = client.tx.send(Packet::Publish(Publish {
            topic: p.topic.clone(),
            qos,
            retain: false,
            dup: false,
            packet_id,
            payload: p.payload.clone(),
        }));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filter_validation() {
        assert!(valid_filter("a/+/c"));
        assert!(valid_filter("a/#"));
        assert!(!valid_filter("a/#/c"));
        assert!(!valid_filter("a/b#"));
        assert!(!valid_filter(""));
    }
}
