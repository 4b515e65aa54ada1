//! Bidirectional five-tuple flow assembly.

use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};

use crate::capture::{PacketRecord, Transport, TCP_ACK, TCP_FIN, TCP_PSH, TCP_RST};
use crate::labels::FlowLabels;

/// Oriented five-tuple. The initiator is the sender of the first packet.
///
/// Equality and hashing ignore orientation: a key and its mirror compare
/// equal.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FlowKey {
    pub initiator_ip: Ipv4Addr,
    pub responder_ip: Ipv4Addr,
    pub proto: Transport,
    pub initiator_port: u16,
    pub responder_port: u16,
}

type Endpoint = (Ipv4Addr, u16);

impl FlowKey {
    pub fn from_record(r: &PacketRecord) -> Self {
        FlowKey {
            initiator_ip: r.src_ip,
            responder_ip: r.dst_ip,
            proto: r.proto,
            initiator_port: r.src_port,
            responder_port: r.dst_port,
        }
    }

    fn canonical(&self) -> (Transport, Endpoint, Endpoint) {
        let a = (self.initiator_ip, self.initiator_port);
        let b = (self.responder_ip, self.responder_port);
        if a <= b {
            (self.proto, a, b)
        } else {
            (self.proto, b, a)
        }
    }

    pub fn mirrored(&self) -> Self {
        FlowKey {
            initiator_ip: self.responder_ip,
            responder_ip: self.initiator_ip,
            proto: self.proto,
            initiator_port: self.responder_port,
            responder_port: self.initiator_port,
        }
    }

    fn direction_of(&self, r: &PacketRecord) -> Direction {
        if (r.src_ip, r.src_port) == (self.initiator_ip, self.initiator_port) {
            Direction::FromInitiator
        } else {
            Direction::FromResponder
        }
    }
}

impl PartialEq for FlowKey {
    fn eq(&self, other: &Self) -> bool {
        self.canonical() == other.canonical()
    }
}

impl Eq for FlowKey {}

impl Hash for FlowKey {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.canonical().hash(state)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    FromInitiator,
    FromResponder,
}

/// +1 for packets sent by the initiator, -1 otherwise.
pub fn direction_sign(direction: Direction) -> i32 {
    match direction {
        Direction::FromInitiator => 1,
        Direction::FromResponder => -1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowPacket {
    pub ts_micros: u64,
    pub direction: Direction,
    /// IP total length in bytes.
    pub size: u32,
    /// Transport payload in bytes.
    pub payload: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flow {
    pub key: FlowKey,
    pub packets: Vec<FlowPacket>,
    #[serde(default, skip_serializing_if = "FlowLabels::is_empty")]
    pub labels: FlowLabels,
}

impl Flow {
    pub fn start_ts(&self) -> u64 {
        self.packets.first().map_or(0, |p| p.ts_micros)
    }

    pub fn end_ts(&self) -> u64 {
        self.packets.last().map_or(0, |p| p.ts_micros)
    }

    pub fn duration_s(&self) -> f64 {
        (self.end_ts() - self.start_ts()) as f64 * 1e-6
    }

    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }

    /// Re-materializes the flow as packet records with synthetic TCP flags
    /// (PSH|ACK on data segments, bare ACK otherwise).
    pub fn to_records(&self) -> Vec<PacketRecord> {
        let hdr = 20 + self.key.proto.header_len() as u32;
        self.packets
            .iter()
            .map(|p| {
                let (src, dst) = match p.direction {
                    Direction::FromInitiator => (
                        (self.key.initiator_ip, self.key.initiator_port),
                        (self.key.responder_ip, self.key.responder_port),
                    ),
                    Direction::FromResponder => (
                        (self.key.responder_ip, self.key.responder_port),
                        (self.key.initiator_ip, self.key.initiator_port),
                    ),
                };
                let payload = p.size.saturating_sub(hdr);
                let tcp_flags = match self.key.proto {
                    Transport::Tcp if payload > 0 => TCP_PSH | TCP_ACK,
                    Transport::Tcp => TCP_ACK,
                    Transport::Udp => 0,
                };
                PacketRecord {
                    ts_micros: p.ts_micros,
                    src_ip: src.0,
                    dst_ip: dst.0,
                    proto: self.key.proto,
                    src_port: src.1,
                    dst_port: dst.1,
                    ip_total_len: p.size as u16,
                    payload_len: payload as u16,
                    tcp_flags,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssemblyConfig {
    /// A gap longer than this between two packets of a tuple starts a new flow.
    pub idle_timeout_s: u64,
    /// FIN from both sides, or any RST, ends the flow.
    pub tcp_close_ends_flow: bool,
}

impl Default for AssemblyConfig {
    fn default() -> Self {
        AssemblyConfig {
            idle_timeout_s: 600,
            tcp_close_ends_flow: true,
        }
    }
}

struct Building {
    flow: Flow,
    seq: usize,
    fin_init: bool,
    fin_resp: bool,
    closed: bool,
}

/// Groups packets into bidirectional flows, emitted in order of first packet.
///
/// Input is stably re-sorted by timestamp first, so slightly out-of-order
/// captures are tolerated.
pub fn assemble(packets: &[PacketRecord], cfg: &AssemblyConfig) -> Vec<Flow> {
    let timeout_us = cfg.idle_timeout_s.max(1).saturating_mul(1_000_000);
    let mut order: Vec<&PacketRecord> = packets.iter().collect();
    order.sort_by_key(|r| r.ts_micros);

    let mut active: HashMap<FlowKey, Building> = HashMap::new();
    let mut done: Vec<(u64, usize, Flow)> = Vec::new();
    let mut next_seq = 0;

    for r in order {
        let key = FlowKey::from_record(r);
        if let Some(b) = active.get(&key) {
            if b.closed || r.ts_micros - b.flow.end_ts() > timeout_us {
                let b = active.remove(&key).expect("present");
                done.push((b.flow.start_ts(), b.seq, b.flow));
            }
        }
        let b = active.entry(key).or_insert_with(|| {
            next_seq += 1;
            Building {
                flow: Flow {
                    key,
                    packets: Vec::new(),
                    labels: FlowLabels::default(),
                },
                seq: next_seq,
                fin_init: false,
                fin_resp: false,
                closed: false,
            }
        });
        let direction = b.flow.key.direction_of(r);
        b.flow.packets.push(FlowPacket {
            ts_micros: r.ts_micros,
            direction,
            size: r.ip_total_len as u32,
            payload: r.payload_len as u32,
        });
        if cfg.tcp_close_ends_flow && r.proto == Transport::Tcp {
            if r.tcp_flags & TCP_FIN != 0 {
                match direction {
                    Direction::FromInitiator => b.fin_init = true,
                    Direction::FromResponder => b.fin_resp = true,
                }
            }
            if r.tcp_flags & TCP_RST != 0 || (b.fin_init && b.fin_resp) {
                b.closed = true;
            }
        }
    }
    done.extend(active.into_values().map(|b| (b.flow.start_ts(), b.seq, b.flow)));
    done.sort_by_key(|(start, seq, _)| (*start, *seq));
    done.into_iter().map(|(_, _, f)| f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capture::TCP_SYN;

    fn rec(ts: u64, src: (u8, u16), dst: (u8, u16), proto: Transport, flags: u8) -> PacketRecord {
        PacketRecord {
            ts_micros: ts,
            src_ip: Ipv4Addr::new(10, 0, 0, src.0),
            dst_ip: Ipv4Addr::new(10, 0, 0, dst.0),
            proto,
            src_port: src.1,
            dst_port: dst.1,
            ip_total_len: 100,
            payload_len: 60,
            tcp_flags: flags,
        }
    }

    #[test]
    fn bidirectional_grouping() {
        let pkts = [
            rec(0, (1, 1111), (2, 2222), Transport::Tcp, TCP_SYN),
            rec(10, (2, 2222), (1, 1111), Transport::Tcp, TCP_ACK),
        ];
        let flows = assemble(&pkts, &AssemblyConfig::default());
        assert_eq!(flows.len(), 1);
        let dirs: Vec<_> = flows[0].packets.iter().map(|p| p.direction).collect();
        assert_eq!(dirs, vec![Direction::FromInitiator, Direction::FromResponder]);
        assert_eq!(flows[0].key.initiator_port, 1111);
    }

    #[test]
    fn distinct_ports_are_distinct_flows() {
        let pkts = [
            rec(0, (1, 1111), (2, 2222), Transport::Tcp, 0),
            rec(1, (1, 1112), (2, 2222), Transport::Tcp, 0),
        ];
        assert_eq!(assemble(&pkts, &AssemblyConfig::default()).len(), 2);
    }

    #[test]
    fn idle_timeout_splits() {
        let pkts = [
            rec(0, (1, 53), (2, 53), Transport::Udp, 0),
            rec(700_000_000, (1, 53), (2, 53), Transport::Udp, 0),
        ];
        let flows = assemble(&pkts, &AssemblyConfig::default());
        assert_eq!(flows.len(), 2);
        assert!(flows.iter().all(|f| f.len() == 1));
        // exactly at the timeout stays together
        let pkts = [
            rec(0, (1, 53), (2, 53), Transport::Udp, 0),
            rec(600_000_000, (2, 53), (1, 53), Transport::Udp, 0),
        ];
        assert_eq!(assemble(&pkts, &AssemblyConfig::default()).len(), 1);
    }

    #[test]
    fn fin_fin_and_rst_close() {
        let a = (1, 1000);
        let b = (2, 80);
        let pkts = [
            rec(0, a, b, Transport::Tcp, TCP_ACK),
            rec(1, a, b, Transport::Tcp, TCP_FIN | TCP_ACK),
            rec(2, b, a, Transport::Tcp, TCP_FIN | TCP_ACK),
            rec(3, a, b, Transport::Tcp, TCP_ACK),
            rec(4, b, a, Transport::Tcp, TCP_RST),
            rec(5, a, b, Transport::Tcp, TCP_ACK),
        ];
        let flows = assemble(&pkts, &AssemblyConfig::default());
        let lens: Vec<_> = flows.iter().map(Flow::len).collect();
        assert_eq!(lens, vec![3, 2, 1]);
        // the second flow starts with the initiator's ack
        assert_eq!(flows[1].key.initiator_port, 1000);
        assert_eq!(flows[1].packets[1].direction, Direction::FromResponder);

        let cfg = AssemblyConfig {
            tcp_close_ends_flow: false,
            ..Default::default()
        };
        assert_eq!(assemble(&pkts, &cfg).len(), 1);
    }

    #[test]
    fn out_of_order_input_is_sorted() {
        let pkts = [
            rec(500, (2, 2222), (1, 1111), Transport::Tcp, 0),
            rec(0, (1, 1111), (2, 2222), Transport::Tcp, 0),
        ];
        let flows = assemble(&pkts, &AssemblyConfig::default());
        assert_eq!(flows[0].key.initiator_ip, Ipv4Addr::new(10, 0, 0, 1));
        assert_eq!(flows[0].start_ts(), 0);
    }

    #[test]
    fn signs() {
        assert_eq!(direction_sign(Direction::FromInitiator), 1);
        assert_eq!(direction_sign(Direction::FromResponder), -1);
        for d in [Direction::FromInitiator, Direction::FromResponder] {
            assert_eq!(direction_sign(d) * direction_sign(d), 1);
        }
    }

    #[test]
    fn key_equality_ignores_orientation() {
        let k = FlowKey::from_record(&rec(0, (1, 1), (2, 2), Transport::Udp, 0));
        assert_eq!(k, k.mirrored());
        let other = FlowKey::from_record(&rec(0, (1, 1), (2, 2), Transport::Tcp, 0));
        assert_ne!(k, other);
    }
}
