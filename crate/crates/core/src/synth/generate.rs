use std::net::Ipv4Addr;

use rand::Rng;
use rand_distr::{Distribution, LogNormal};

use super::profiles::{AppProfile, TunnelProfile};
use super::SynthError;
use crate::capture::Transport;
use crate::flow::{Direction, Flow, FlowKey, FlowPacket};
use crate::labels::FlowLabels;
use crate::seed::{derive_seed, rng_for};

/// Smallest MTU the generator accepts.
pub const MIN_MTU: u16 = 576;
/// Connection setup of every TCP flow: SYN, SYN-ACK, ACK.
pub const TCP_SETUP: [i64; 3] = [60, -60, 52];
/// First capture timestamp of generated corpora, in seconds.
pub const EPOCH_S: u64 = 1_600_000_000;

/// Where a flow sits in its corpus; fixes addresses and start time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlowSlot {
    pub index: u64,
    pub seed: u64,
}

impl FlowSlot {
    pub fn initiator_ip(&self) -> Ipv4Addr {
        let i = self.index as u32;
        Ipv4Addr::new(10, (i >> 16) as u8, (i >> 8) as u8, i as u8)
    }
}

/// IP sizes of one message of `payload` bytes after segmentation and
/// padding of the trailing segment. Every size is at most `mtu`.
pub fn segment_sizes(profile: &TunnelProfile, payload: u64, mtu: u16) -> Result<Vec<u32>, SynthError> {
    let cap = profile.segment_capacity(mtu);
    if mtu < MIN_MTU || cap == 0 {
        return Err(SynthError::InvalidMtu {
            mtu,
            overhead: profile.per_packet_overhead,
        });
    }
    let g = profile.record_granularity as u64;
    let full = payload / cap as u64;
    let rem = payload % cap as u64;
    let mut out = vec![profile.per_packet_overhead + cap; full as usize];
    if rem > 0 {
        let padded = (rem.div_ceil(g) * g).min(cap as u64);
        out.push(profile.per_packet_overhead + padded as u32);
    }
    Ok(out)
}

/// One logical message before segmentation.
#[derive(Debug, Clone, Copy)]
struct Message {
    from: Direction,
    payload: u64,
    /// Seconds of client think time before the message.
    think_s: f64,
}

fn jittered<R: Rng>(size: i64, jitter: u32, rng: &mut R) -> u64 {
    let j = jitter as i64;
    (size.unsigned_abs() as i64 + rng.random_range(-j..=j)) as u64
}

fn direction(signed: i64) -> Direction {
    if signed > 0 {
        Direction::FromInitiator
    } else {
        Direction::FromResponder
    }
}

/// Draws the message structure of one flow. Uses its own stream so that the
/// structure does not depend on the MTU.
fn plan_messages<R: Rng>(app: &AppProfile, rng: &mut R) -> Vec<Message> {
    let mut out = Vec::new();
    for &c in &app.control_exchange {
        out.push(Message {
            from: direction(c),
            payload: jittered(c, app.control_jitter, rng),
            think_s: 0.0,
        });
    }
    let turns = app.turns.sample(rng);
    for t in 0..turns {
        let think_s = if t == 0 { 0.0 } else { app.think_time(rng) };
        let req = app.request_size.sample(rng);
        let resp = app.response_size.sample(rng);
        out.push(Message {
            from: Direction::FromInitiator,
            payload: req,
            think_s,
        });
        out.push(Message {
            from: Direction::FromResponder,
            payload: resp,
            think_s: 0.0,
        });
    }
    for &c in &app.closing_exchange {
        out.push(Message {
            from: direction(c),
            payload: jittered(c, app.control_jitter, rng),
            think_s: 0.0,
        });
    }
    out.retain(|m| m.payload > 0);
    out
}

fn flip(d: Direction) -> Direction {
    match d {
        Direction::FromInitiator => Direction::FromResponder,
        Direction::FromResponder => Direction::FromInitiator,
    }
}

struct Clock {
    now_us: u64,
}

impl Clock {
    fn advance(&mut self, seconds: f64) -> u64 {
        self.now_us += ((seconds * 1e6).round() as u64).max(1);
        self.now_us
    }
}

/// Generates one labeled flow: TCP connection setup (TCP profiles only), the
/// handshake template clipped to `mtu`, then the application messages, each
/// padded, segmented and acknowledged every second data packet.
pub fn generate_flow(profile: &TunnelProfile, app: &AppProfile, mtu: u16, slot: FlowSlot) -> Result<Flow, SynthError> {
    // fail early on an unusable MTU even when the app sends nothing large
    segment_sizes(profile, 1, mtu)?;
    let mut plan_rng = rng_for(derive_seed(slot.seed, 0));
    let mut time_rng = rng_for(derive_seed(slot.seed, 1));
    let messages = plan_messages(app, &mut plan_rng);
    let initiator_port = plan_rng.random_range(32768..61000u16);

    let rtt_s = LogNormal::new(0.03f64.ln(), 0.6)
        .expect("constant")
        .sample(&mut time_rng);
    let bits_per_s = LogNormal::new(5e7f64.ln(), 0.5)
        .expect("constant")
        .sample(&mut time_rng);
    let start_us = (EPOCH_S + slot.index * 2) * 1_000_000 + time_rng.random_range(0..1_000_000);

    let hdr = profile.min_packet();
    let mut packets = Vec::new();
    let mut clock = Clock { now_us: start_us };
    let push = |packets: &mut Vec<FlowPacket>, ts: u64, d: Direction, size: u32| {
        packets.push(FlowPacket {
            ts_micros: ts,
            direction: d,
            size,
            payload: size - hdr,
        })
    };
    let setup: &[i64] = if profile.transport == Transport::Tcp {
        &TCP_SETUP
    } else {
        &[]
    };
    let mut first = true;
    for &s in setup.iter().chain(&profile.handshake_template) {
        let ts = if first {
            clock.now_us
        } else {
            clock.advance(rtt_s / 2.0)
        };
        first = false;
        let size = (s.unsigned_abs() as u32).min(mtu as u32);
        push(&mut packets, ts, direction(s), size);
    }
    for m in &messages {
        let ts = if first {
            clock.now_us
        } else {
            clock.advance(m.think_s + rtt_s / 2.0 + time_rng.random_range(0.0..0.002))
        };
        first = false;
        let sizes = segment_sizes(profile, m.payload, mtu)?;
        let n = sizes.len();
        for (i, size) in sizes.into_iter().enumerate() {
            let ts = if i == 0 {
                ts
            } else {
                clock.advance(size as f64 * 8.0 / bits_per_s * time_rng.random_range(1.0..1.3))
            };
            push(&mut packets, ts, m.from, size);
            if n >= 2 && (i % 2 == 1 || i + 1 == n) {
                for &ack in &profile.ack_sizes {
                    let ack_ts = clock.advance(time_rng.random_range(0.00002..0.0001));
                    push(&mut packets, ack_ts, flip(m.from), ack);
                }
            }
        }
    }

    let labels = match profile.kind {
        Some(k) => FlowLabels::tunneled(k, app.kind),
        None => FlowLabels::untunneled(app.kind),
    }
    .with_mtu(mtu);
    let responder_ip = match profile.kind {
        Some(k) => Ipv4Addr::new(198, 51, 100, 1 + k as u8),
        None => Ipv4Addr::new(203, 0, 113, 1 + app.kind as u8),
    };
    Ok(Flow {
        key: FlowKey {
            initiator_ip: slot.initiator_ip(),
            responder_ip,
            proto: profile.transport,
            initiator_port,
            responder_port: profile.server_port.unwrap_or(app.server_port),
        },
        packets,
        labels,
    })
}
