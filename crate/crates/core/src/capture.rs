//! Classic pcap reading and writing with Ethernet/IPv4/TCP/UDP decoding.
//!
//! Only the metadata the feature extractors need is decoded: addresses,
//! ports, transport, IP total length and transport payload length. Frames
//! that are not IPv4 carrying TCP or UDP are counted and skipped.

use std::fs;
use std::net::Ipv4Addr;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

const MAGIC_MICRO: u32 = 0xa1b2_c3d4;
const MAGIC_NANO: u32 = 0xa1b2_3c4d;
const GLOBAL_HEADER_LEN: usize = 24;
const RECORD_HEADER_LEN: usize = 16;
const ETH_HEADER_LEN: usize = 14;
const ETHERTYPE_IPV4: u16 = 0x0800;
const LINKTYPE_ETHERNET: u32 = 1;
const IPPROTO_TCP: u8 = 6;
const IPPROTO_UDP: u8 = 17;
const TCP_HEADER_LEN: u16 = 20;
const UDP_HEADER_LEN: u16 = 8;
const IPV4_HEADER_LEN: u16 = 20;
const FULL_SNAPLEN: u32 = 65535;
/// Ethernet + maximal IPv4 header + TCP header.
pub const MIN_SNAPLEN: u32 = 94;

pub const TCP_FIN: u8 = 0x01;
pub const TCP_SYN: u8 = 0x02;
pub const TCP_RST: u8 = 0x04;
pub const TCP_PSH: u8 = 0x08;
pub const TCP_ACK: u8 = 0x10;

#[derive(Debug, Error)]
pub enum CaptureError {
    #[error("unsupported capture format (magic {magic:#010x})")]
    UnsupportedFormat { magic: u32 },
    #[error("unsupported link type {0}; only Ethernet (1) is decoded")]
    UnsupportedLinkType(u32),
    #[error("corrupt capture at byte offset {offset}: {reason}")]
    CorruptCapture { offset: u64, reason: &'static str },
    #[error("record {index} cannot be encoded: {reason}")]
    InvalidRecord { index: usize, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transport {
    Tcp,
    Udp,
}

impl Transport {
    pub fn header_len(self) -> u16 {
        match self {
            Transport::Tcp => TCP_HEADER_LEN,
            Transport::Udp => UDP_HEADER_LEN,
        }
    }

    pub fn ip_proto(self) -> u8 {
        match self {
            Transport::Tcp => IPPROTO_TCP,
            Transport::Udp => IPPROTO_UDP,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Transport::Tcp => "tcp",
            Transport::Udp => "udp",
        }
    }
}

/// One decoded IPv4 packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketRecord {
    pub ts_micros: u64,
    pub src_ip: Ipv4Addr,
    pub dst_ip: Ipv4Addr,
    pub proto: Transport,
    pub src_port: u16,
    pub dst_port: u16,
    /// IP header plus payload, as carried in the IPv4 total length field.
    pub ip_total_len: u16,
    /// Transport payload bytes.
    pub payload_len: u16,
    /// TCP flag byte; always 0 for UDP.
    pub tcp_flags: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MagicVariant {
    MicroLe,
    MicroBe,
    NanoLe,
    NanoBe,
}

impl MagicVariant {
    fn is_nano(self) -> bool {
        matches!(self, MagicVariant::NanoLe | MagicVariant::NanoBe)
    }

    fn is_le(self) -> bool {
        matches!(self, MagicVariant::MicroLe | MagicVariant::NanoLe)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptureMeta {
    pub magic_variant: MagicVariant,
    pub link_type: u32,
    pub snaplen: u32,
}

/// Decoded content of one capture file.
#[derive(Debug, Clone, PartialEq)]
pub struct Capture {
    pub meta: CaptureMeta,
    pub records: Vec<PacketRecord>,
    /// Frames that were not IPv4 TCP/UDP, or too short to decode.
    pub skipped: usize,
}

impl Capture {
    pub fn frame_count(&self) -> usize {
        self.records.len() + self.skipped
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    le: bool,
}

impl Cursor<'_> {
    fn u32_at(&self, off: usize) -> u32 {
        let b = [self.buf[off], self.buf[off + 1], self.buf[off + 2], self.buf[off + 3]];
        if self.le {
            u32::from_le_bytes(b)
        } else {
            u32::from_be_bytes(b)
        }
    }
}

fn be16(b: &[u8], off: usize) -> u16 {
    u16::from_be_bytes([b[off], b[off + 1]])
}

/// Reads and decodes a pcap file.
pub fn read_pcap(path: impl AsRef<Path>) -> Result<Capture, CaptureError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| CaptureError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_pcap(&bytes)
}

/// Decodes an in-memory pcap image. Total on arbitrary input.
pub fn parse_pcap(bytes: &[u8]) -> Result<Capture, CaptureError> {
    if bytes.len() < 4 {
        return Err(CaptureError::UnsupportedFormat { magic: 0 });
    }
    let raw = u32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
    let variant = match raw {
        MAGIC_MICRO => MagicVariant::MicroLe,
        MAGIC_NANO => MagicVariant::NanoLe,
        m if m == MAGIC_MICRO.swap_bytes() => MagicVariant::MicroBe,
        m if m == MAGIC_NANO.swap_bytes() => MagicVariant::NanoBe,
        magic => return Err(CaptureError::UnsupportedFormat { magic }),
    };
    if bytes.len() < GLOBAL_HEADER_LEN {
        return Err(CaptureError::CorruptCapture {
            offset: 0,
            reason: "truncated global header",
        });
    }
    let cur = Cursor {
        buf: bytes,
        le: variant.is_le(),
    };
    let snaplen = cur.u32_at(16);
    let link_type = cur.u32_at(20);
    if link_type != LINKTYPE_ETHERNET {
        return Err(CaptureError::UnsupportedLinkType(link_type));
    }
    let meta = CaptureMeta {
        magic_variant: variant,
        link_type,
        snaplen,
    };

    let mut records = Vec::new();
    let mut skipped = 0;
    let mut off = GLOBAL_HEADER_LEN;
    while off < bytes.len() {
        if bytes.len() - off < RECORD_HEADER_LEN {
            return Err(CaptureError::CorruptCapture {
                offset: off as u64,
                reason: "truncated record header",
            });
        }
        let ts_sec = cur.u32_at(off) as u64;
        let ts_frac = cur.u32_at(off + 4) as u64;
        let incl_len = cur.u32_at(off + 8) as usize;
        let body = off + RECORD_HEADER_LEN;
        if incl_len > bytes.len() - body {
            return Err(CaptureError::CorruptCapture {
                offset: off as u64,
                reason: "truncated record body",
            });
        }
        let ts_micros = ts_sec * 1_000_000 + if variant.is_nano() { ts_frac / 1000 } else { ts_frac };
        match decode_frame(&bytes[body..body + incl_len], ts_micros) {
            Some(rec) => records.push(rec),
            None => skipped += 1,
        }
        off = body + incl_len;
    }
    Ok(Capture { meta, records, skipped })
}

/// Decodes one Ethernet frame; `None` for anything that is not a complete
/// IPv4 TCP/UDP header chain.
pub fn decode_frame(frame: &[u8], ts_micros: u64) -> Option<PacketRecord> {
    if frame.len() < ETH_HEADER_LEN || be16(frame, 12) != ETHERTYPE_IPV4 {
        return None;
    }
    let ip = &frame[ETH_HEADER_LEN..];
    if ip.len() < IPV4_HEADER_LEN as usize || ip[0] >> 4 != 4 {
        return None;
    }
    let ihl = ((ip[0] & 0x0f) as u16) * 4;
    let total_len = be16(ip, 2);
    if ihl < IPV4_HEADER_LEN || ip.len() < ihl as usize || total_len < ihl {
        return None;
    }
    // Non-first fragments carry no transport header.
    if be16(ip, 6) & 0x1fff != 0 {
        return None;
    }
    let proto = match ip[9] {
        IPPROTO_TCP => Transport::Tcp,
        IPPROTO_UDP => Transport::Udp,
        _ => return None,
    };
    let l4 = &ip[ihl as usize..];
    let (l4_len, tcp_flags) = match proto {
        Transport::Tcp => {
            if l4.len() < TCP_HEADER_LEN as usize {
                return None;
            }
            let doff = ((l4[12] >> 4) as u16) * 4;
            if doff < TCP_HEADER_LEN {
                return None;
            }
            (doff, l4[13])
        }
        Transport::Udp => {
            if l4.len() < UDP_HEADER_LEN as usize {
                return None;
            }
            (UDP_HEADER_LEN, 0)
        }
    };
    let payload_len = total_len.checked_sub(ihl + l4_len)?;
    Some(PacketRecord {
        ts_micros,
        src_ip: Ipv4Addr::new(ip[12], ip[13], ip[14], ip[15]),
        dst_ip: Ipv4Addr::new(ip[16], ip[17], ip[18], ip[19]),
        proto,
        src_port: be16(l4, 0),
        dst_port: be16(l4, 2),
        ip_total_len: total_len,
        payload_len,
        tcp_flags,
    })
}

fn ipv4_checksum(header: &[u8]) -> u16 {
    let mut sum: u32 = header.chunks(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as u32).sum();
    while sum >> 16 != 0 {
        sum = (sum & 0xffff) + (sum >> 16);
    }
    !(sum as u16)
}

/// Encodes records as a micro-second little-endian pcap image.
///
/// Headers are synthesized; the IPv4 header absorbs any bytes between the
/// transport header and `ip_total_len - payload_len` as zero options, so the
/// gap must be 20..=60 bytes and a multiple of 4. Payload bytes are zero.
pub fn encode_pcap(records: &[PacketRecord]) -> Result<Vec<u8>, CaptureError> {
    encode_pcap_with_snaplen(records, FULL_SNAPLEN)
}

/// Like [`encode_pcap`], but stores at most `snaplen` bytes of each frame.
/// The IPv4 total length still records the original size, so the image
/// decodes to the same records. `snaplen` must cover the largest header
/// chain (94 bytes).
pub fn encode_pcap_with_snaplen(records: &[PacketRecord], snaplen: u32) -> Result<Vec<u8>, CaptureError> {
    if !(MIN_SNAPLEN..=FULL_SNAPLEN).contains(&snaplen) {
        return Err(CaptureError::InvalidRecord {
            index: 0,
            reason: format!("snaplen {snaplen} outside {MIN_SNAPLEN}..={FULL_SNAPLEN}"),
        });
    }
    let mut out = Vec::with_capacity(GLOBAL_HEADER_LEN + records.len() * 96);
    out.extend_from_slice(&MAGIC_MICRO.to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&4u16.to_le_bytes());
    out.extend_from_slice(&0i32.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    out.extend_from_slice(&snaplen.to_le_bytes());
    out.extend_from_slice(&LINKTYPE_ETHERNET.to_le_bytes());

    let mut prev_ts = 0;
    for (index, r) in records.iter().enumerate() {
        let invalid = |reason: String| CaptureError::InvalidRecord { index, reason };
        if r.ts_micros < prev_ts {
            return Err(invalid("records are not time-ordered".into()));
        }
        prev_ts = r.ts_micros;
        let ts_sec = u32::try_from(r.ts_micros / 1_000_000)
            .map_err(|_| invalid("timestamp beyond the 32-bit seconds range".into()))?;
        let l4_len = r.proto.header_len();
        let ihl = r
            .ip_total_len
            .checked_sub(r.payload_len)
            .and_then(|v| v.checked_sub(l4_len))
            .filter(|v| (IPV4_HEADER_LEN..=60).contains(v) && v % 4 == 0)
            .ok_or_else(|| {
                invalid(format!(
                    "ip_total_len {} and payload_len {} leave no valid IPv4 header length",
                    r.ip_total_len, r.payload_len
                ))
            })?;
        if r.proto == Transport::Udp && r.tcp_flags != 0 {
            return Err(invalid("UDP record carries TCP flags".into()));
        }

        let frame_len = ETH_HEADER_LEN + r.ip_total_len as usize;
        let incl_len = frame_len.min(snaplen as usize);
        out.extend_from_slice(&ts_sec.to_le_bytes());
        out.extend_from_slice(&((r.ts_micros % 1_000_000) as u32).to_le_bytes());
        out.extend_from_slice(&(incl_len as u32).to_le_bytes());
        out.extend_from_slice(&(frame_len as u32).to_le_bytes());

        let start = out.len();
        out.extend_from_slice(&[0x02, 0, 0, 0, 0, 0x02, 0x02, 0, 0, 0, 0, 0x01]);
        out.extend_from_slice(&ETHERTYPE_IPV4.to_be_bytes());

        let ip_start = out.len();
        out.push(0x40 | (ihl / 4) as u8);
        out.push(0);
        out.extend_from_slice(&r.ip_total_len.to_be_bytes());
        out.extend_from_slice(&0u16.to_be_bytes());
        out.extend_from_slice(&0x4000u16.to_be_bytes());
        out.push(64);
        out.push(r.proto.ip_proto());
        out.extend_from_slice(&0u16.to_be_bytes());
        out.extend_from_slice(&r.src_ip.octets());
        out.extend_from_slice(&r.dst_ip.octets());
        out.resize(ip_start + ihl as usize, 0);
        let csum = ipv4_checksum(&out[ip_start..ip_start + ihl as usize]);
        out[ip_start + 10..ip_start + 12].copy_from_slice(&csum.to_be_bytes());

        out.extend_from_slice(&r.src_port.to_be_bytes());
        out.extend_from_slice(&r.dst_port.to_be_bytes());
        match r.proto {
            Transport::Tcp => {
                out.extend_from_slice(&[0; 8]);
                out.push(0x50);
                out.push(r.tcp_flags);
                out.extend_from_slice(&0xffffu16.to_be_bytes());
                out.extend_from_slice(&[0; 4]);
            }
            Transport::Udp => {
                out.extend_from_slice(&(UDP_HEADER_LEN + r.payload_len).to_be_bytes());
                out.extend_from_slice(&[0; 2]);
            }
        }
        out.resize(start + frame_len, 0);
        out.truncate(start + incl_len);
    }
    Ok(out)
}

/// Writes records to `path` as a micro-second little-endian pcap.
pub fn write_pcap(records: &[PacketRecord], path: impl AsRef<Path>) -> Result<(), CaptureError> {
    let bytes = encode_pcap(records)?;
    let path = path.as_ref();
    fs::write(path, bytes).map_err(|source| CaptureError::Io {
        path: path.to_path_buf(),
        source,
    })
}
