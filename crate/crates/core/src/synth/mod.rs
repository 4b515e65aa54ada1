//! Seeded synthetic corpora: per-tunnel handshake templates and
//! encapsulation overheads, per-application message processes, and MTU
//! segmentation.

mod export;
mod generate;
mod profiles;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use export::{export_pcap, read_flows, write_flows, LabelManifest, ManifestEntry};
pub use generate::{generate_flow, segment_sizes, FlowSlot, EPOCH_S, MIN_MTU, TCP_SETUP};
pub use profiles::{AppProfile, CountRange, ProfileSet, SizeDist, TunnelProfile};

use crate::capture::CaptureError;
use crate::flow::Flow;
use crate::labels::{AppKind, TunnelKind};
use crate::seed::derive_path;

/// The six MTU values of the reference testbed.
pub const DEFAULT_MTUS: [u16; 6] = [1500, 1472, 1420, 1400, 1300, 1200];

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("mtu {mtu} cannot carry payload with {overhead} bytes of overhead (minimum mtu 576)")]
    InvalidMtu { mtu: u16, overhead: u32 },
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("corpus file line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error(transparent)]
    Capture(#[from] CaptureError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Corpus shape. Every (tunnel, mtu, app) cell gets `flows_per_cell` flows;
/// untunneled flows get the same count per (mtu, app) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub mtus: Vec<u16>,
    pub flows_per_cell: usize,
    pub apps: Vec<AppKind>,
    pub tunnels: Vec<TunnelKind>,
    pub include_untunneled: bool,
    pub master_seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset_tag: Option<String>,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            mtus: DEFAULT_MTUS.to_vec(),
            flows_per_cell: 100,
            apps: AppKind::ALL.to_vec(),
            tunnels: TunnelKind::ALL.to_vec(),
            include_untunneled: true,
            master_seed: 0,
            dataset_tag: None,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidConfig(m.to_string()));
        if self.flows_per_cell == 0 {
            return bad("flows_per_cell must be at least 1");
        }
        if self.mtus.is_empty() || self.apps.is_empty() {
            return bad("need at least one mtu and one application");
        }
        if self.tunnels.is_empty() && !self.include_untunneled {
            return bad("no traffic class selected");
        }
        if let Some(&m) = self.mtus.iter().find(|&&m| m < MIN_MTU) {
            return Err(SynthError::InvalidMtu { mtu: m, overhead: 0 });
        }
        Ok(())
    }

    /// Number of flows [`generate_corpus`] returns.
    pub fn corpus_size(&self) -> usize {
        let classes = self.tunnels.len() + usize::from(self.include_untunneled);
        classes * self.mtus.len() * self.apps.len() * self.flows_per_cell
    }
}

/// Generates the corpus in (tunnel, mtu, app, flow) order, untunneled flows
/// last. Deterministic in `cfg` and `profiles`, independent of thread count.
pub fn generate_corpus(cfg: &GenConfig, profiles: &ProfileSet) -> Result<Vec<Flow>, SynthError> {
    cfg.validate()?;
    profiles.validate()?;
    let mut jobs = Vec::with_capacity(cfg.corpus_size());
    let classes: Vec<Option<TunnelKind>> = cfg
        .tunnels
        .iter()
        .copied()
        .map(Some)
        .chain(cfg.include_untunneled.then_some(None))
        .collect();
    for (ci, class) in classes.iter().enumerate() {
        let tunnel = match class {
            Some(k) => profiles.tunnel(*k)?,
            None => &profiles.plain,
        };
        for (mi, &mtu) in cfg.mtus.iter().enumerate() {
            for (ai, &app) in cfg.apps.iter().enumerate() {
                let app = match class {
                    Some(_) => profiles.app(app)?,
                    None => profiles.background_app(app)?,
                };
                for f in 0..cfg.flows_per_cell {
                    let path = [ci as u64, mi as u64, ai as u64, f as u64];
                    let slot = FlowSlot {
                        index: jobs.len() as u64,
                        seed: derive_path(cfg.master_seed, &path),
                    };
                    jobs.push((tunnel, app, mtu, slot));
                }
            }
        }
    }
    jobs.into_par_iter()
        .map(|(tunnel, app, mtu, slot)| {
            let mut flow = generate_flow(tunnel, app, mtu, slot)?;
            if let Some(tag) = &cfg.dataset_tag {
                flow.labels.dataset_tag = Some(tag.clone());
            }
            Ok(flow)
        })
        .collect()
}
