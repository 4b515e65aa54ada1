use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::net::Ipv4Addr;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::capture::{encode_pcap_with_snaplen, CaptureError, Transport};
use crate::flow::{Direction, Flow, FlowKey, FlowPacket};
use crate::labels::FlowLabels;

/// Compact line format of a stored flow: timestamps as deltas, sizes signed
/// by direction, payloads only when they differ from the header-implied
/// value.
#[derive(Serialize, Deserialize)]
struct StoredFlow {
    key: FlowKey,
    #[serde(default, skip_serializing_if = "FlowLabels::is_empty")]
    labels: FlowLabels,
    ts: Vec<u64>,
    sizes: Vec<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    payloads: Option<Vec<u32>>,
}

fn implied_payload(proto: Transport, size: u32) -> u32 {
    size.saturating_sub(20 + proto.header_len() as u32)
}

/// Writes one JSON object per flow.
pub fn write_flows<W: Write>(flows: &[Flow], mut out: W) -> Result<(), SynthError> {
    for f in flows {
        let mut prev = 0;
        let ts = f
            .packets
            .iter()
            .map(|p| {
                let d = p.ts_micros - prev;
                prev = p.ts_micros;
                d
            })
            .collect();
        let sizes = f
            .packets
            .iter()
            .map(|p| match p.direction {
                Direction::FromInitiator => p.size as i64,
                Direction::FromResponder => -(p.size as i64),
            })
            .collect();
        let payloads = f
            .packets
            .iter()
            .any(|p| p.payload != implied_payload(f.key.proto, p.size))
            .then(|| f.packets.iter().map(|p| p.payload).collect());
        let line = StoredFlow {
            key: f.key,
            labels: f.labels.clone(),
            ts,
            sizes,
            payloads,
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads flows written by [`write_flows`]. Blank lines are skipped.
pub fn read_flows<R: BufRead>(input: R) -> Result<Vec<Flow>, SynthError> {
    let mut flows = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fmt = |reason: String| SynthError::Format { line: n + 1, reason };
        let s: StoredFlow = serde_json::from_str(&line).map_err(|e| fmt(e.to_string()))?;
        if s.ts.len() != s.sizes.len() || s.payloads.as_ref().is_some_and(|p| p.len() != s.sizes.len()) {
            return Err(fmt("packet arrays differ in length".into()));
        }
        let mut now: u64 = 0;
        let mut packets = Vec::with_capacity(s.sizes.len());
        for (i, (&dt, &sz)) in s.ts.iter().zip(&s.sizes).enumerate() {
            now = now.checked_add(dt).ok_or_else(|| fmt("timestamp overflow".into()))?;
            if sz == 0 || sz.unsigned_abs() > u16::MAX as u64 {
                return Err(fmt(format!("packet size {sz} out of range")));
            }
            let size = sz.unsigned_abs() as u32;
            packets.push(FlowPacket {
                ts_micros: now,
                direction: if sz > 0 {
                    Direction::FromInitiator
                } else {
                    Direction::FromResponder
                },
                size,
                payload: s
                    .payloads
                    .as_ref()
                    .map_or_else(|| implied_payload(s.key.proto, size), |p| p[i]),
            });
        }
        flows.push(Flow {
            key: s.key,
            packets,
            labels: s.labels,
        });
    }
    Ok(flows)
}

/// Label sidecar of an exported capture, keyed by oriented five-tuple and
/// first-packet timestamp.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelManifest {
    pub entries: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub initiator_ip: Ipv4Addr,
    pub initiator_port: u16,
    pub responder_ip: Ipv4Addr,
    pub responder_port: u16,
    pub proto: Transport,
    pub start_ts_micros: u64,
    pub labels: FlowLabels,
}

type EntryKey = (Ipv4Addr, u16, Ipv4Addr, u16, Transport, u64);

fn entry_key(k: &FlowKey, start: u64) -> EntryKey {
    (
        k.initiator_ip,
        k.initiator_port,
        k.responder_ip,
        k.responder_port,
        k.proto,
        start,
    )
}

impl LabelManifest {
    pub fn from_flows(flows: &[Flow]) -> Self {
        LabelManifest {
            entries: flows
                .iter()
                .map(|f| ManifestEntry {
                    initiator_ip: f.key.initiator_ip,
                    initiator_port: f.key.initiator_port,
                    responder_ip: f.key.responder_ip,
                    responder_port: f.key.responder_port,
                    proto: f.key.proto,
                    start_ts_micros: f.start_ts(),
                    labels: f.labels.clone(),
                })
                .collect(),
        }
    }

    /// Attaches labels to matching flows; returns how many matched.
    pub fn apply(&self, flows: &mut [Flow]) -> usize {
        let index: HashMap<EntryKey, &FlowLabels> = self
            .entries
            .iter()
            .map(|e| {
                (
                    (
                        e.initiator_ip,
                        e.initiator_port,
                        e.responder_ip,
                        e.responder_port,
                        e.proto,
                        e.start_ts_micros,
                    ),
                    &e.labels,
                )
            })
            .collect();
        let mut matched = 0;
        for f in flows {
            if let Some(l) = index.get(&entry_key(&f.key, f.start_ts())) {
                f.labels = (*l).clone();
                matched += 1;
            }
        }
        matched
    }
}

/// Writes every packet of `flows` into one time-ordered capture truncated to
/// `snaplen` bytes per frame, and returns the matching label manifest.
pub fn export_pcap(flows: &[Flow], path: impl AsRef<Path>, snaplen: u32) -> Result<LabelManifest, SynthError> {
    let mut records: Vec<_> = flows.iter().flat_map(|f| f.to_records()).collect();
    records.sort_by_key(|r| r.ts_micros);
    let bytes = encode_pcap_with_snaplen(&records, snaplen)?;
    let path = path.as_ref();
    std::fs::write(path, bytes).map_err(|source| CaptureError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(LabelManifest::from_flows(flows))
}
