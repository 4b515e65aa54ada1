use super::burst::compute_bursts;
use super::stats::stat_summary;
use super::{DirectionFilter, NFirstKind, NetflowVariant};
use crate::flow::{direction_sign, Direction, Flow, FlowPacket};
use crate::scalar::Scalar;

fn micros_to_s<T: Scalar>(us: u64) -> T {
    T::of(us as f64 * 1e-6)
}

fn filtered(flow: &Flow, filter: DirectionFilter) -> impl Iterator<Item = &FlowPacket> {
    flow.packets.iter().filter(move |p| filter.keeps(p.direction))
}

/// Full (untruncated) series of one per-packet or per-burst family.
pub fn family_series<T: Scalar>(flow: &Flow, kind: NFirstKind, filter: DirectionFilter) -> Vec<T> {
    let sign = |d: Direction| T::of(direction_sign(d) as f64);
    match kind {
        NFirstKind::Size => filtered(flow, filter).map(|p| T::of(p.size as f64)).collect(),
        NFirstKind::Direction => filtered(flow, filter).map(|p| sign(p.direction)).collect(),
        NFirstKind::SignedSize => filtered(flow, filter)
            .map(|p| sign(p.direction) * T::of(p.size as f64))
            .collect(),
        NFirstKind::Iat => {
            let ts: Vec<u64> = filtered(flow, filter).map(|p| p.ts_micros).collect();
            ts.windows(2).map(|w| micros_to_s(w[1] - w[0])).collect()
        }
        NFirstKind::Elapsed => {
            let t0 = flow.start_ts();
            filtered(flow, filter).map(|p| micros_to_s(p.ts_micros - t0)).collect()
        }
        NFirstKind::PacketBurst => compute_bursts(flow, filter)
            .iter()
            .map(|b| T::of(b.packet_count as f64))
            .collect(),
        NFirstKind::ByteBurst => compute_bursts(flow, filter)
            .iter()
            .map(|b| {
                let v = T::of(b.byte_total as f64);
                if filter == DirectionFilter::Both {
                    sign(b.direction) * v
                } else {
                    v
                }
            })
            .collect(),
    }
}

/// First `n` values of the family series, right-padded with zeros.
pub fn nfirst_vector<T: Scalar>(flow: &Flow, kind: NFirstKind, n: usize, filter: DirectionFilter) -> Vec<T> {
    let mut v = family_series(flow, kind, filter);
    v.resize(n, T::zero());
    v
}

/// Sliding windows of width `k` over the first `n` positions, flattened.
pub fn kgram_vector<T: Scalar>(values: &[T], k: usize, n: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(k * n);
    for i in 0..n {
        for j in 0..k {
            out.push(values.get(i + j).copied().unwrap_or_else(T::zero));
        }
    }
    out
}

pub type NamedVector<T> = Vec<(&'static str, T)>;

/// Whole-flow statistics over both directions.
pub fn flow_stats_features<T: Scalar>(flow: &Flow) -> NamedVector<T> {
    let sizes: Vec<T> = family_series(flow, NFirstKind::Size, DirectionFilter::Both);
    let iats: Vec<T> = family_series(flow, NFirstKind::Iat, DirectionFilter::Both);
    let s = stat_summary(&sizes);
    let i = stat_summary(&iats);
    vec![
        ("pkt_count", T::of(flow.len() as f64)),
        ("size_total", s.total),
        ("size_min", s.min),
        ("size_max", s.max),
        ("size_mean", s.mean),
        ("size_std", s.std),
        ("duration", T::of(flow.duration_s())),
        ("iat_min", i.min),
        ("iat_max", i.max),
        ("iat_mean", i.mean),
        ("iat_std", i.std),
    ]
}

/// Fields a Netflow v5 record carries: count, bytes, mean size, duration;
/// the extended variant adds mean inter-arrival time.
pub fn netflow_v5_features<T: Scalar>(flow: &Flow, variant: NetflowVariant) -> NamedVector<T> {
    let count = flow.len() as f64;
    let bytes: u64 = flow.packets.iter().map(|p| p.size as u64).sum();
    let mean = if count > 0.0 { bytes as f64 / count } else { 0.0 };
    let mut v = vec![
        ("pkt_count", T::of(count)),
        ("byte_total", T::of(bytes as f64)),
        ("mean_size", T::of(mean)),
        ("duration", T::of(flow.duration_s())),
    ];
    if variant == NetflowVariant::Ext {
        let iats: Vec<T> = family_series(flow, NFirstKind::Iat, DirectionFilter::Both);
        v.push(("mean_iat", stat_summary(&iats).mean));
    }
    v
}

/// Netflow v9 template fields: count and bytes over both directions,
/// min/max size of responder packets, duration; the extended variant splits
/// count and bytes per direction.
pub fn netflow_v9_features<T: Scalar>(flow: &Flow, variant: NetflowVariant) -> NamedVector<T> {
    let bytes_of = |f: DirectionFilter| filtered(flow, f).map(|p| p.size as u64).sum::<u64>() as f64;
    let count_of = |f: DirectionFilter| filtered(flow, f).count() as f64;
    let incoming: Vec<T> = family_series(flow, NFirstKind::Size, DirectionFilter::FromResponderOnly);
    let inc = stat_summary(&incoming);
    let mut v = vec![
        ("pkt_count", T::of(flow.len() as f64)),
        ("byte_total", T::of(bytes_of(DirectionFilter::Both))),
        ("min_size_incoming", inc.min),
        ("max_size_incoming", inc.max),
        ("duration", T::of(flow.duration_s())),
    ];
    if variant == NetflowVariant::Ext {
        v.push((
            "pkt_count_outgoing",
            T::of(count_of(DirectionFilter::FromInitiatorOnly)),
        ));
        v.push((
            "pkt_count_incoming",
            T::of(count_of(DirectionFilter::FromResponderOnly)),
        ));
        v.push((
            "byte_total_outgoing",
            T::of(bytes_of(DirectionFilter::FromInitiatorOnly)),
        ));
        v.push((
            "byte_total_incoming",
            T::of(bytes_of(DirectionFilter::FromResponderOnly)),
        ));
    }
    v
}
