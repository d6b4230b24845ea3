//! MQTT 3.1.1 packets needed by the probe and the loopback broker.

use bytes::{Buf, BufMut, Bytes, BytesMut};
use tokio::io::{AsyncRead, AsyncReadExt, AsyncWrite, AsyncWriteExt};

const MAX_REMAINING: usize = 268_435_455;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Publish {
    pub topic: String,
    pub qos: u8,
    pub retain: bool,
    pub dup: bool,
    /// Present iff `qos > 0`.
    pub packet_id: Option<u16>,
    pub payload: Bytes,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Packet {
    Connect {
        client_id: String,
        keep_alive: u16,
        clean_session: bool,
    },
    ConnAck {
        session_present: bool,
        code: u8,
    },
    Publish(Publish),
    PubAck(u16),
    PubRec(u16),
    PubRel(u16),
    PubComp(u16),
    Subscribe {
        packet_id: u16,
        filters: Vec<(String, u8)>,
    },
    SubAck {
        packet_id: u16,
        codes: Vec<u8>,
    },
    PingReq,
    PingResp,
    Disconnect,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("malformed remaining length")]
    BadLength,
    #[error("unsupported packet type {0:#04x}")]
    UnsupportedType(u8),
    #[error("malformed packet: {0}")]
    Malformed(&'static str),
}

fn put_str(buf: &mut BytesMut, s: &str) {
    buf.put_u16(s.len() as u16);
    buf.put_slice(s.as_bytes());
}

fn get_str(buf: &mut Bytes) -> Result<String, CodecError> {
    if buf.remaining() < 2 {
        return Err(CodecError::Malformed("short string length"));
    }
    let n = buf.get_u16() as usize;
    if buf.remaining() < n {
        return Err(CodecError::Malformed("short string"));
    }
    String::from_utf8(buf.split_to(n).to_vec()).map_err(|_| CodecError::Malformed("invalid utf-8"))
}

fn get_u16(buf: &mut Bytes) -> Result<u16, CodecError> {
    if buf.remaining() < 2 {
        return Err(CodecError::Malformed("short packet id"));
    }
    Ok(buf.get_u16())
}

fn put_remaining_length(buf: &mut BytesMut, mut len: usize) {
    loop {
        let mut byte = (len % 128) as u8;
        len /= 128;
        if len > 0 {
            byte |= 0x80;
        }
        buf.put_u8(byte);
        if len == 0 {
            break;
        }
    }
}

impl Packet {
    pub fn encode(&self, out: &mut BytesMut) {
        let mut body = BytesMut::new();
        let first = match self {
            Packet::Connect {
                client_id,
                keep_alive,
                clean_session,
            } => {
                put_str(&mut body, "MQTT");
                body.put_u8(4);
                body.put_u8(if *clean_session { 0x02 } else { 0 });
                body.put_u16(*keep_alive);
                put_str(&mut body, client_id);
                0x10
            }
            Packet::ConnAck {
                session_present,
                code,
            } => {
                body.put_u8(*session_present as u8);
                body.put_u8(*code);
                0x20
            }
            Packet::Publish(p) => {
                put_str(&mut body, &p.topic);
                if let Some(id) = p.packet_id {
                    body.put_u16(id);
                }
                body.put_slice(&p.payload);
                0x30 | (p.dup as u8) << 3 | (p.qos & 3) << 1 | p.retain as u8
            }
            Packet::PubAck(id) => {
                body.put_u16(*id);
                0x40
            }
            Packet::PubRec(id) => {
                body.put_u16(*id);
                0x50
            }
            Packet::PubRel(id) => {
                body.put_u16(*id);
                0x62
            }
            Packet::PubComp(id) => {
                body.put_u16(*id);
                0x70
            }
            Packet::Subscribe { packet_id, filters } => {
                body.put_u16(*packet_id);
                for (f, q) in filters {
                    put_str(&mut body, f);
                    body.put_u8(*q);
                }
                0x82
            }
            Packet::SubAck { packet_id, codes } => {
                body.put_u16(*packet_id);
                body.put_slice(codes);
                0x90
            }
            Packet::PingReq => 0xC0,
            Packet::PingResp => 0xD0,
            Packet::Disconnect => 0xE0,
        };
        out.put_u8(first);
        put_remaining_length(out, body.len());
        out.put_slice(&body);
    }

    /// Decodes one packet from the front of `buf`, or returns `None` if more bytes are needed.
    pub fn decode(buf: &mut BytesMut) -> Result<Option<Packet>, CodecError> {
        let mut len = 0usize;
        let mut mult = 1usize;
        let mut i = 1;
        loop {
            let Some(&byte) = buf.get(i) else {
                return Ok(None);
            };
            len += (byte & 0x7F) as usize * mult;
            i += 1;
            if byte & 0x80 == 0 {
                break;
            }
            mult *= 128;
            if i > 4 || len > MAX_REMAINING {
                return Err(CodecError::BadLength);
            }
        }
        if buf.len() < i + len {
            return Ok(None);
        }
        let first = buf[0];
        buf.advance(i);
        let mut body = buf.split_to(len).freeze();
        let b = &mut body;
        let packet = match first >> 4 {
            1 => {
                if get_str(b)? != "MQTT" {
                    return Err(CodecError::Malformed("protocol name"));
                }
                if b.remaining() < 4 {
                    return Err(CodecError::Malformed("short connect header"));
                }
                let _level = b.get_u8();
                let flags = b.get_u8();
                let keep_alive = b.get_u16();
                let client_id = get_str(b)?;
                Packet::Connect {
                    client_id,
                    keep_alive,
                    clean_session: flags & 0x02 != 0,
                }
            }
            2 => {
                if b.remaining() < 2 {
                    return Err(CodecError::Malformed("short connack"));
                }
                Packet::ConnAck {
                    session_present: b.get_u8() & 1 == 1,
                    code: b.get_u8(),
                }
            }
            3 => {
                let qos = (first >> 1) & 3;
                let topic = get_str(b)?;
                let packet_id = if qos > 0 { Some(get_u16(b)?) } else { None };
                Packet::Publish(Publish {
                    topic,
                    qos,
                    retain: first & 1 == 1,
                    dup: first & 0x08 != 0,
                    packet_id,
                    payload: b.clone(),
                })
            }
            4 => Packet::PubAck(get_u16(b)?),
            5 => Packet::PubRec(get_u16(b)?),
            6 => Packet::PubRel(get_u16(b)?),
            7 => Packet::PubComp(get_u16(b)?),
            8 => {
                let packet_id = get_u16(b)?;
                let mut filters = Vec::new();
                while b.has_remaining() {
                    let f = get_str(b)?;
                    if !b.has_remaining() {
                        return Err(CodecError::Malformed("missing requested qos"));
                    }
                    filters.push((f, b.get_u8()));
                }
                Packet::Subscribe { packet_id, filters }
            }
            9 => Packet::SubAck {
                packet_id: get_u16(b)?,
                codes: b.to_vec(),
            },
            12 => Packet::PingReq,
            13 => Packet::PingResp,
            14 => Packet::Disconnect,
            _ => return Err(CodecError::UnsupportedType(first)),
        };
        Ok(Some(packet))
    }
}

/// Reads the next packet; `Ok(None)` on a clean end of stream.
pub async fn read_packet<R: AsyncRead + Unpin>(
    reader: &mut R,
    buf: &mut BytesMut,
) -> std::io::Result<Option<Packet>> {
    loop {
        match Packet::decode(buf) {
            Ok(Some(p)) => return Ok(Some(p)),
            Ok(None) => {}
            Err(e) => return Err(std::io::Error::new(std::io::ErrorKind::InvalidData, e)),
        }
        if reader.read_buf(buf).await? == 0 {
            return if buf.is_empty() {
                Ok(None)
            } else {
                Err(std::io::ErrorKind::UnexpectedEof.into())
            };
        }
    }
}

pub async fn write_packet<W: AsyncWrite + Unpin>(
    writer: &mut W,
    packet: &Packet,
) -> std::io::Result<()> {
    let mut buf = BytesMut::new();
    packet.encode(&mut buf);
    writer.write_all(&buf).await
}

/// `+` matches one level, a trailing `#` matches the rest.
pub fn topic_matches(filter: &str, topic: &str) -> bool {
    let mut f = filter.split('/');
    let mut t = topic.split('/');
    loop {
        match (f.next(), t.next()) {
            (Some("#"), _) => return true,
            (Some("+"), Some(_)) => {}
            (Some(a), Some(b)) if a == b => {}
            (None, None) => return true,
            _ => return false,
        }
    }
}
