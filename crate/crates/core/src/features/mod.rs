//! Flow feature families and the feature-matrix builder.
//!
//! Every family maps a [`Flow`] to a fixed-width numeric vector with stable
//! column names of the form `<family>[<filter>]_<index>`. A [`FeatureSpec`]
//! concatenates families in declaration order and appends a one-hot
//! transport column pair (`proto_tcp`, `proto_udp`).

mod burst;
mod matrix;
mod stats;
mod vectors;

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use burst::{compute_bursts, Burst};
pub use matrix::{build_matrix, render_real, FeatureMatrix, LABEL_COLUMNS};
pub use stats::{stat_summary, StatSummary};
pub use vectors::{
    family_series, flow_stats_features, kgram_vector, netflow_v5_features, netflow_v9_features, nfirst_vector,
    NamedVector,
};

use crate::capture::Transport;
use crate::flow::{Direction, Flow};
use crate::scalar::Scalar;

/// Default N for detection and tunnel classification.
pub const DEFAULT_N: usize = 50;
/// Default N for application classification.
pub const DEFAULT_APP_N: usize = 150;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("invalid feature spec: {0}")]
    InvalidSpec(String),
    #[error("unknown feature spec `{0}`")]
    UnknownSpec(String),
    #[error("non-finite value in row {row}, column `{column}`")]
    NonFinite { row: usize, column: String },
    #[error("row {row} has {got} values, expected {expected}")]
    RowWidth { row: usize, got: usize, expected: usize },
    #[error("csv line {line}: {reason}")]
    CsvFormat { line: usize, reason: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionFilter {
    #[default]
    Both,
    FromInitiatorOnly,
    FromResponderOnly,
}

impl DirectionFilter {
    pub fn keeps(self, d: Direction) -> bool {
        match self {
            DirectionFilter::Both => true,
            DirectionFilter::FromInitiatorOnly => d == Direction::FromInitiator,
            DirectionFilter::FromResponderOnly => d == Direction::FromResponder,
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            DirectionFilter::Both => "both",
            DirectionFilter::FromInitiatorOnly => "src",
            DirectionFilter::FromResponderOnly => "dst",
        }
    }
}

/// Per-packet or per-burst series usable as N-first features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NFirstKind {
    Size,
    Direction,
    SignedSize,
    Iat,
    Elapsed,
    PacketBurst,
    ByteBurst,
}

impl NFirstKind {
    pub const ALL: [NFirstKind; 7] = [
        NFirstKind::Size,
        NFirstKind::Direction,
        NFirstKind::SignedSize,
        NFirstKind::Iat,
        NFirstKind::Elapsed,
        NFirstKind::PacketBurst,
        NFirstKind::ByteBurst,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NFirstKind::Size => "size",
            NFirstKind::Direction => "direction",
            NFirstKind::SignedSize => "signed_size",
            NFirstKind::Iat => "iat",
            NFirstKind::Elapsed => "elapsed",
            NFirstKind::PacketBurst => "packet_burst",
            NFirstKind::ByteBurst => "byte_burst",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KgramMode {
    /// Only the k-gram windows.
    Standalone,
    /// Byte-burst unigrams followed by the k-gram windows.
    Combined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetflowVariant {
    Base,
    Ext,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    NFirst {
        kind: NFirstKind,
        n: usize,
        #[serde(default)]
        filter: DirectionFilter,
    },
    ByteBurstKgram {
        k: usize,
        n: usize,
        #[serde(default)]
        filter: DirectionFilter,
        mode: KgramMode,
    },
    FlowStats,
    NetflowV5 {
        variant: NetflowVariant,
    },
    NetflowV9 {
        variant: NetflowVariant,
    },
}

impl Family {
    pub fn nfirst(kind: NFirstKind, n: usize) -> Self {
        Family::NFirst {
            kind,
            n,
            filter: DirectionFilter::Both,
        }
    }

    /// Same family with its N replaced; families without N are unchanged.
    pub fn with_n(self, new_n: usize) -> Self {
        match self {
            Family::NFirst { kind, filter, .. } => Family::NFirst { kind, n: new_n, filter },
            Family::ByteBurstKgram { k, filter, mode, .. } => Family::ByteBurstKgram {
                k,
                n: new_n,
                filter,
                mode,
            },
            other => other,
        }
    }

    fn validate(&self) -> Result<(), FeatureError> {
        match *self {
            Family::NFirst { n: 0, .. } | Family::ByteBurstKgram { n: 0, .. } => {
                Err(FeatureError::InvalidSpec(format!("{self}: N must be at least 1")))
            }
            Family::ByteBurstKgram { k, .. } if !(2..=3).contains(&k) => {
                Err(FeatureError::InvalidSpec(format!("{self}: k must be 2 or 3")))
            }
            _ => Ok(()),
        }
    }

    pub fn column_names(&self) -> Vec<String> {
        let indexed = |stem: String, count: usize| (0..count).map(move |i| format!("{stem}_{i}"));
        match *self {
            Family::NFirst { kind, n, filter } => indexed(format!("{}[{}]", kind.name(), filter.short()), n).collect(),
            Family::ByteBurstKgram { k, n, filter, mode } => {
                let mut names = Vec::new();
                if mode == KgramMode::Combined {
                    names.extend(indexed(format!("byte_burst[{}]", filter.short()), n));
                }
                names.extend(indexed(format!("byte_burst_{k}gram[{}]", filter.short()), k * n));
                names
            }
            Family::FlowStats => {
                let probe: NamedVector<f64> = flow_stats_features(&Flow::empty_probe());
                probe.iter().map(|(n, _)| format!("flow_stats[both]_{n}")).collect()
            }
            Family::NetflowV5 { variant } => netflow_v5_features::<f64>(&Flow::empty_probe(), variant)
                .iter()
                .map(|(n, _)| format!("netflow_v5[both]_{n}"))
                .collect(),
            Family::NetflowV9 { variant } => netflow_v9_features::<f64>(&Flow::empty_probe(), variant)
                .iter()
                .map(|(n, _)| {
                    let filter = if n.ends_with("_incoming") {
                        "dst"
                    } else if n.ends_with("_outgoing") {
                        "src"
                    } else {
                        "both"
                    };
                    format!("netflow_v9[{filter}]_{n}")
                })
                .collect(),
        }
    }

    pub fn width(&self) -> usize {
        match *self {
            Family::NFirst { n, .. } => n,
            Family::ByteBurstKgram { k, n, mode, .. } => k * n + if mode == KgramMode::Combined { n } else { 0 },
            _ => self.column_names().len(),
        }
    }

    /// Appends this family's values for `flow` to `out`.
    pub fn extend_values<T: Scalar>(&self, flow: &Flow, out: &mut Vec<T>) {
        match *self {
            Family::NFirst { kind, n, filter } => out.extend(nfirst_vector::<T>(flow, kind, n, filter)),
            Family::ByteBurstKgram { k, n, filter, mode } => {
                let series: Vec<T> = family_series(flow, NFirstKind::ByteBurst, filter);
                if mode == KgramMode::Combined {
                    out.extend(nfirst_vector::<T>(flow, NFirstKind::ByteBurst, n, filter));
                }
                out.extend(kgram_vector(&series, k, n));
            }
            Family::FlowStats => out.extend(flow_stats_features::<T>(flow).into_iter().map(|(_, v)| v)),
            Family::NetflowV5 { variant } => {
                out.extend(netflow_v5_features::<T>(flow, variant).into_iter().map(|(_, v)| v))
            }
            Family::NetflowV9 { variant } => {
                out.extend(netflow_v9_features::<T>(flow, variant).into_iter().map(|(_, v)| v))
            }
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::NFirst { kind, n, filter } => write!(f, "{}[{}] N={n}", kind.name(), filter.short()),
            Family::ByteBurstKgram { k, n, filter, mode } => {
                let m = match mode {
                    KgramMode::Standalone => "only",
                    KgramMode::Combined => "with unigrams",
                };
                write!(f, "byte_burst_{k}gram[{}] N={n} ({m})", filter.short())
            }
            Family::FlowStats => f.write_str("flow_stats"),
            Family::NetflowV5 { variant } => write!(f, "netflow_v5 {variant:?}"),
            Family::NetflowV9 { variant } => write!(f, "netflow_v9 {variant:?}"),
        }
    }
}

impl Flow {
    /// Empty flow used only to enumerate named-vector column names.
    fn empty_probe() -> Flow {
        Flow {
            key: crate::flow::FlowKey {
                initiator_ip: std::net::Ipv4Addr::UNSPECIFIED,
                responder_ip: std::net::Ipv4Addr::UNSPECIFIED,
                proto: Transport::Tcp,
                initiator_port: 0,
                responder_port: 0,
            },
            packets: Vec::new(),
            labels: Default::default(),
        }
    }
}

fn default_true() -> bool {
    true
}

/// Ordered list of feature families.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub families: Vec<Family>,
    #[serde(default = "default_true")]
    pub always_append_protocol_onehot: bool,
}

impl FeatureSpec {
    pub fn new(families: Vec<Family>) -> Self {
        FeatureSpec {
            families,
            always_append_protocol_onehot: true,
        }
    }

    /// Names accepted by [`FeatureSpec::named`].
    pub const NAMES: &'static [&'static str] = &[
        "fs2",
        "size",
        "direction",
        "signed_size",
        "iat",
        "elapsed",
        "packet_burst",
        "byte_burst",
        "size_src",
        "size_dst",
        "byte_burst_src",
        "byte_burst_dst",
        "byte_burst_2gram",
        "byte_burst_3gram",
        "byte_burst_with_2gram",
        "byte_burst_with_3gram",
        "flow_stats",
        "netflow_v5",
        "netflow_v5_ext",
        "netflow_v9",
        "netflow_v9_ext",
    ];

    /// Built-in spec by name, with `n` for the N-first families.
    ///
    /// `fs2` is signed packet size plus signed byte burst.
    pub fn named(name: &str, n: usize) -> Result<Self, FeatureError> {
        use DirectionFilter::*;
        let nf = |kind, filter| Family::NFirst { kind, n, filter };
        let kgram = |k, mode| Family::ByteBurstKgram {
            k,
            n,
            filter: Both,
            mode,
        };
        let families = match name {
            "fs2" => vec![nf(NFirstKind::SignedSize, Both), nf(NFirstKind::ByteBurst, Both)],
            "size" => vec![nf(NFirstKind::Size, Both)],
            "direction" => vec![nf(NFirstKind::Direction, Both)],
            "signed_size" => vec![nf(NFirstKind::SignedSize, Both)],
            "iat" => vec![nf(NFirstKind::Iat, Both)],
            "elapsed" => vec![nf(NFirstKind::Elapsed, Both)],
            "packet_burst" => vec![nf(NFirstKind::PacketBurst, Both)],
            "byte_burst" => vec![nf(NFirstKind::ByteBurst, Both)],
            "size_src" => vec![nf(NFirstKind::Size, FromInitiatorOnly)],
            "size_dst" => vec![nf(NFirstKind::Size, FromResponderOnly)],
            "byte_burst_src" => vec![nf(NFirstKind::ByteBurst, FromInitiatorOnly)],
            "byte_burst_dst" => vec![nf(NFirstKind::ByteBurst, FromResponderOnly)],
            "byte_burst_2gram" => vec![kgram(2, KgramMode::Standalone)],
            "byte_burst_3gram" => vec![kgram(3, KgramMode::Standalone)],
            "byte_burst_with_2gram" => vec![kgram(2, KgramMode::Combined)],
            "byte_burst_with_3gram" => vec![kgram(3, KgramMode::Combined)],
            "flow_stats" => vec![Family::FlowStats],
            "netflow_v5" => vec![Family::NetflowV5 {
                variant: NetflowVariant::Base,
            }],
            "netflow_v5_ext" => vec![Family::NetflowV5 {
                variant: NetflowVariant::Ext,
            }],
            "netflow_v9" => vec![Family::NetflowV9 {
                variant: NetflowVariant::Base,
            }],
            "netflow_v9_ext" => vec![Family::NetflowV9 {
                variant: NetflowVariant::Ext,
            }],
            other => return Err(FeatureError::UnknownSpec(other.to_string())),
        };
        let spec = FeatureSpec::new(families);
        spec.validate()?;
        Ok(spec)
    }

    /// The same families with every N-first length set to `n`.
    pub fn with_n(&self, n: usize) -> Self {
        FeatureSpec {
            families: self.families.iter().map(|f| f.with_n(n)).collect(),
            always_append_protocol_onehot: self.always_append_protocol_onehot,
        }
    }

    /// A built-in name, or an inline JSON spec when `arg` starts with `{`.
    /// `n` applies to built-in names only.
    pub fn from_arg(arg: &str, n: usize) -> Result<Self, FeatureError> {
        if arg.trim_start().starts_with('{') {
            let spec: FeatureSpec = serde_json::from_str(arg).map_err(|e| FeatureError::InvalidSpec(e.to_string()))?;
            spec.validate()?;
            Ok(spec)
        } else {
            Self::named(arg, n)
        }
    }

    /// Checks N and k ranges, duplicate families and column-name clashes.
    pub fn validate(&self) -> Result<(), FeatureError> {
        let mut seen = HashSet::new();
        for f in &self.families {
            f.validate()?;
            if !seen.insert(*f) {
                return Err(FeatureError::InvalidSpec(format!("duplicate family {f}")));
            }
        }
        let names = self.column_names();
        let mut unique = HashSet::new();
        for n in &names {
            if !unique.insert(n.as_str()) {
                return Err(FeatureError::InvalidSpec(format!("column `{n}` produced twice")));
            }
        }
        Ok(())
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.families.iter().flat_map(Family::column_names).collect();
        if self.always_append_protocol_onehot {
            names.push("proto_tcp".into());
            names.push("proto_udp".into());
        }
        names
    }

    pub fn width(&self) -> usize {
        self.families.iter().map(Family::width).sum::<usize>() + if self.always_append_protocol_onehot { 2 } else { 0 }
    }

    /// One feature row for `flow`.
    pub fn row<T: Scalar>(&self, flow: &Flow) -> Vec<T> {
        let mut out = Vec::with_capacity(self.width());
        for f in &self.families {
            f.extend_values(flow, &mut out);
        }
        if self.always_append_protocol_onehot {
            let tcp = flow.key.proto == Transport::Tcp;
            out.push(if tcp { T::one() } else { T::zero() });
            out.push(if tcp { T::zero() } else { T::one() });
        }
        out
    }
}

#[cfg(test)]
mod tests;
