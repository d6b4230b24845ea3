use std::time::{Duration, Instant};

use bytes::{BufMut, Bytes, BytesMut};
use qers_core::config::ProbeSpec;
use qers_core::ProtocolId;
use tokio::net::TcpStream;
use tokio::sync::mpsc;
use tokio::time::timeout;

use super::{ticker, timing_series, Completed, ProbeContext, ProbeOutcome};
use crate::clock::duration_ms;
use crate::error::{ProbeError, Result};
use crate::mqtt::codec::{read_packet, write_packet, Packet, Publish};

const MAGIC: &[u8; 4] = b"QERS";
const HEADER_LEN: usize = 16;

fn payload(nonce: u32, seq: u64, len: usize) -> Bytes {
    let mut buf = BytesMut::with_capacity(len.max(HEADER_LEN));
    buf.put_slice(MAGIC);
    buf.put_u32(nonce);
    buf.put_u64(seq);
    buf.resize(len.max(HEADER_LEN), b'q');
    buf.freeze()
}

fn parse_payload(nonce: u32, p: &[u8]) -> Option<u64> {
    if p.len() < HEADER_LEN || &p[..4] != MAGIC || p[4..8] != nonce.to_be_bytes() {
        return None;
    }
    Some(u64::from_be_bytes(p[8..16].try_into().ok()?))
}

/// Publish-to-echo round trips at the configured QoS. The probe subscribes to
/// the echo topic first; each message carries a sequence number and counts as
/// lost if its echo does not arrive within the timeout.
pub async fn run_mqtt_probe(spec: &ProbeSpec, ctx: &ProbeContext) -> Result<ProbeOutcome> {
    let wait = Duration::from_millis(spec.timeout_ms);
    let unreachable = |reason: String| ProbeError::BrokerUnreachable {
        target: spec.target.clone(),
        reason,
    };
    let stream = match timeout(wait, TcpStream::connect(&spec.target)).await {
        Ok(Ok(s)) => s,
        Ok(Err(e)) => return Err(unreachable(e.to_string())),
        Err(_) => return Err(unreachable("connect timed out".into())),
    };
    let _ = stream.set_nodelay(true);
    let (mut reader, mut writer) = stream.into_split();
    let mut buf = BytesMut::new();
    let nonce: u32 = rand::random();

    let connect = Packet::Connect {
        client_id: format!("qers-probe-{nonce:08x}"),
        keep_alive: 60,
        clean_session: true,
    };
    write_packet(&mut writer, &connect)
        .await
        .map_err(|e| unreachable(e.to_string()))?;
    match timeout(wait, read_packet(&mut reader, &mut buf)).await {
        Ok(Ok(Some(Packet::ConnAck { code: 0, .. }))) => {}
        Ok(Ok(Some(Packet::ConnAck { code, .. }))) => {
            return Err(unreachable(format!(
                "connection refused, return code {code}"
            )))
        }
        Ok(Ok(other)) => return Err(unreachable(format!("expected CONNACK, got {other:?}"))),
        Ok(Err(e)) => return Err(unreachable(e.to_string())),
        Err(_) => return Err(unreachable("no CONNACK within timeout".into())),
    }

    let topic = spec.echo_topic().to_string();
    let sub_failed = |reason: String| ProbeError::SubscribeFailed {
        topic: topic.clone(),
        reason,
    };
    let subscribe = Packet::Subscribe {
        packet_id: 1,
        filters: vec![(topic.clone(), spec.qos)],
    };
    write_packet(&mut writer, &subscribe)
        .await
        .map_err(|e| sub_failed(e.to_string()))?;
    match timeout(wait, read_packet(&mut reader, &mut buf)).await {
        Ok(Ok(Some(Packet::SubAck {
            packet_id: 1,
            codes,
        }))) if codes.first().is_some_and(|c| *c <= 2) => {}
        Ok(Ok(Some(Packet::SubAck { codes, .. }))) => {
            return Err(sub_failed(format!("broker returned {codes:?}")))
        }
        Ok(Ok(other)) => return Err(sub_failed(format!("expected SUBACK, got {other:?}"))),
        Ok(Err(e)) => return Err(sub_failed(e.to_string())),
        Err(_) => return Err(sub_failed("no SUBACK within timeout".into())),
    }

    let (out_tx, mut out_rx) = mpsc::unbounded_channel::<Packet>();
    let writer_task = tokio::spawn(async move {
        while let Some(p) = out_rx.recv().await {
            if write_packet(&mut writer, &p).await.is_err() {
                break;
            }
        }
    });
    let (echo_tx, mut echo_rx) = mpsc::unbounded_channel::<(u64, Instant)>();
    let acks = out_tx.clone();
    let reader_task = tokio::spawn(async move {
        while let Ok(Some(packet)) = read_packet(&mut reader, &mut buf).await {
            match packet {
                Packet::Publish(p) => {
                    let at = Instant::now();
                    match (p.qos, p.packet_id) {
                        (1, Some(id)) => {
                            let _ = acks.send(Packet::PubAck(id));
                        }
                        (2, Some(id)) => {
                            let _ = acks.send(Packet::PubRec(id));
                        }
                        _ => {}
                    }
                    if let Some(seq) = parse_payload(nonce, &p.payload) {
                        let _ = echo_tx.send((seq, at));
                    }
                }
                Packet::PubRel(id) => {
                    let _ = acks.send(Packet::PubComp(id));
                }
                Packet::PubRec(id) => {
                    let _ = acks.send(Packet::PubRel(id));
                }
                _ => {}
            }
        }
    });

    let mut tick = ticker(spec.interval_ms);
    let mut done = Vec::new();
    'outer: for seq in 0..spec.count as u64 {
        tick.tick().await;
        let publish = Publish {
            topic: spec.topic.clone(),
            qos: spec.qos,
            retain: false,
            dup: false,
            packet_id: (spec.qos > 0).then(|| (seq % 65_535) as u16 + 1),
            payload: payload(nonce, seq, spec.payload_bytes),
        };
        let t0 = Instant::now();
        if out_tx.send(Packet::Publish(publish)).is_err() {
            break;
        }
        let deadline = tokio::time::Instant::from_std(t0 + wait);
        loop {
            match tokio::time::timeout_at(deadline, echo_rx.recv()).await {
                Ok(Some((s, at))) if s == seq => {
                    done.push(Completed {
                        timestamp_ms: ctx.clock.ms_at(t0),
                        latency_ms: duration_ms(at.saturating_duration_since(t0)),
                    });
                    break;
                }
                Ok(Some(_)) => {}
                Ok(None) => {
                    tracing::warn!(target = %spec.target, "broker connection lost");
                    break 'outer;
                }
                Err(_) => break,
            }
        }
    }

    let _ = out_tx.send(Packet::Disconnect);
    drop(out_tx);
    reader_task.abort();
    let _ = timeout(Duration::from_millis(200), writer_task).await;

    Ok(ProbeOutcome {
        protocol: ProtocolId::Mqtt,
        attempted: spec.count,
        completed: done.len() as u32,
        connections: 1,
        handshakes: Vec::new(),
        series: timing_series(ProtocolId::Mqtt, ctx, &done, spec.count, ctx.clock.now_ms()),
    })
}
