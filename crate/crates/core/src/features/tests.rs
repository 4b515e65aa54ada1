use std::net::Ipv4Addr;

use proptest::prelude::*;

use super::*;
use crate::flow::{FlowKey, FlowPacket};

fn flow_from(signed: &[i64], ts_s: &[f64], proto: Transport) -> Flow {
    let hdr = 20 + proto.header_len() as u32;
    Flow {
        key: FlowKey {
            initiator_ip: Ipv4Addr::new(10, 0, 0, 1),
            responder_ip: Ipv4Addr::new(10, 0, 0, 2),
            proto,
            initiator_port: 40000,
            responder_port: 443,
        },
        packets: signed
            .iter()
            .zip(ts_s)
            .map(|(&s, &t)| FlowPacket {
                ts_micros: (t * 1e6).round() as u64,
                direction: if s > 0 {
                    Direction::FromInitiator
                } else {
                    Direction::FromResponder
                },
                size: s.unsigned_abs() as u32,
                payload: (s.unsigned_abs() as u32).saturating_sub(hdr),
            })
            .collect(),
        labels: Default::default(),
    }
}

fn flow(signed: &[i64]) -> Flow {
    let ts: Vec<f64> = (0..signed.len()).map(|i| i as f64 * 0.01).collect();
    flow_from(signed, &ts, Transport::Tcp)
}

#[test]
fn bursts_of_example_flow() {
    let f = flow(&[1500, 1500, -52, 1500, -52, -52]);
    let b = compute_bursts(&f, DirectionFilter::Both);
    assert_eq!(b.iter().map(|b| b.packet_count).collect::<Vec<_>>(), vec![2, 1, 1, 2]);
    assert_eq!(
        b.iter().map(|b| b.byte_total).collect::<Vec<_>>(),
        vec![3000, 52, 1500, 104]
    );
    let resp = compute_bursts(&f, DirectionFilter::FromResponderOnly);
    assert_eq!(resp.iter().map(|b| b.byte_total).collect::<Vec<_>>(), vec![52, 104]);
}

#[test]
fn single_packet_burst() {
    let b = compute_bursts(&flow(&[-77]), DirectionFilter::Both);
    assert_eq!(b.len(), 1);
    assert_eq!((b[0].packet_count, b[0].byte_total), (1, 77));
}

#[test]
fn nfirst_examples() {
    let f = flow(&[100, 200, 300]);
    let v: Vec<f64> = nfirst_vector(&f, NFirstKind::Size, 5, DirectionFilter::Both);
    assert_eq!(v, vec![100.0, 200.0, 300.0, 0.0, 0.0]);

    let f = flow_from(&[100, -100, 100], &[0.0, 0.1, 0.4], Transport::Udp);
    let v: Vec<f64> = nfirst_vector(&f, NFirstKind::Iat, 2, DirectionFilter::Both);
    assert!((v[0] - 0.1).abs() < 1e-12 && (v[1] - 0.3).abs() < 1e-12);
    let e: Vec<f64> = nfirst_vector(&f, NFirstKind::Elapsed, 3, DirectionFilter::FromInitiatorOnly);
    assert!((e[1] - 0.4).abs() < 1e-12);

    let f = flow(&[1500, 1500, -52, 1500, -52, -52]);
    let v: Vec<f64> = nfirst_vector(&f, NFirstKind::ByteBurst, 3, DirectionFilter::Both);
    assert_eq!(v, vec![3000.0, -52.0, 1500.0]);
    let v: Vec<f64> = nfirst_vector(&f, NFirstKind::ByteBurst, 3, DirectionFilter::FromResponderOnly);
    assert_eq!(v, vec![52.0, 104.0, 0.0]);
    let v: Vec<f64> = nfirst_vector(&f, NFirstKind::PacketBurst, 4, DirectionFilter::Both);
    assert_eq!(v, vec![2.0, 1.0, 1.0, 2.0]);
    let v: Vec<f64> = nfirst_vector(&f, NFirstKind::Direction, 4, DirectionFilter::Both);
    assert_eq!(v, vec![1.0, 1.0, -1.0, 1.0]);
}

#[test]
fn kgram_examples() {
    assert_eq!(
        kgram_vector(&[3000.0, -52.0, 1500.0], 2, 2),
        vec![3000.0, -52.0, -52.0, 1500.0]
    );
    assert_eq!(kgram_vector(&[3000.0], 3, 1), vec![3000.0, 0.0, 0.0]);
    let s = [5.0, 6.0, 7.0];
    assert_eq!(kgram_vector(&s, 2, 1), s[..2].to_vec());
}

fn values(v: NamedVector<f64>) -> Vec<f64> {
    v.into_iter().map(|(_, x)| x).collect()
}

#[test]
fn flow_stats_two_packets() {
    let f = flow_from(&[60, -40], &[0.0, 1.0], Transport::Tcp);
    let v = values(flow_stats_features(&f));
    assert_eq!(v, vec![2.0, 100.0, 40.0, 60.0, 50.0, 10.0, 1.0, 1.0, 1.0, 1.0, 0.0]);

    let one = values(flow_stats_features(&flow(&[99])));
    assert_eq!(one[0], 1.0);
    assert_eq!(one[6..], [0.0; 5]);
}

#[test]
fn flow_stats_self_concatenation_doubles_totals_only() {
    let f = flow_from(&[60, -40, 80], &[0.0, 0.5, 1.0], Transport::Tcp);
    let mut doubled = f.clone();
    doubled.packets.extend(f.packets.iter().copied());
    doubled.packets.sort_by_key(|p| p.ts_micros);
    let a = flow_stats_features::<f64>(&f);
    let b = flow_stats_features::<f64>(&doubled);
    assert_eq!(b[0].1, 2.0 * a[0].1);
    assert_eq!(b[1].1, 2.0 * a[1].1);
    for j in [2, 3, 4, 6] {
        assert_eq!(a[j].1, b[j].1, "{}", a[j].0);
    }
}

#[test]
fn netflow_v5_variants() {
    let f = flow_from(&[60, -40], &[0.0, 1.0], Transport::Tcp);
    assert_eq!(
        values(netflow_v5_features(&f, NetflowVariant::Base)),
        vec![2.0, 100.0, 50.0, 1.0]
    );
    assert_eq!(
        values(netflow_v5_features(&f, NetflowVariant::Ext)),
        vec![2.0, 100.0, 50.0, 1.0, 1.0]
    );
    let single = flow(&[321]);
    assert_eq!(
        values(netflow_v5_features(&single, NetflowVariant::Ext)),
        vec![1.0, 321.0, 321.0, 0.0, 0.0]
    );
}

#[test]
fn netflow_v9_variants() {
    let f = flow_from(&[60, -40, -80], &[0.0, 0.5, 2.0], Transport::Tcp);
    assert_eq!(
        values(netflow_v9_features(&f, NetflowVariant::Base)),
        vec![3.0, 180.0, 40.0, 80.0, 2.0]
    );
    let ext = values(netflow_v9_features(&f, NetflowVariant::Ext));
    assert_eq!(ext[5..], [1.0, 2.0, 60.0, 120.0]);
    let outgoing_only = flow(&[60, 70]);
    let v = values(netflow_v9_features(&outgoing_only, NetflowVariant::Base));
    assert_eq!(v[2..4], [0.0, 0.0]);
}

#[test]
fn build_matrix_signed_size_row() {
    let spec = FeatureSpec::new(vec![Family::nfirst(NFirstKind::SignedSize, 2)]);
    let m: FeatureMatrix<f64> = build_matrix(&[flow(&[60, -40])], &spec).unwrap();
    assert_eq!(m.row(0), &[60.0, -40.0, 1.0, 0.0]);
    assert_eq!(
        m.column_names(),
        &["signed_size[both]_0", "signed_size[both]_1", "proto_tcp", "proto_udp"]
    );
}

#[test]
fn spec_arity() {
    assert_eq!(FeatureSpec::named("netflow_v5", 50).unwrap().width(), 6);
    assert_eq!(FeatureSpec::new(vec![]).width(), 2);
    assert_eq!(FeatureSpec::named("fs2", 50).unwrap().width(), 102);
    assert_eq!(FeatureSpec::named("byte_burst_with_3gram", 10).unwrap().width(), 40 + 2);
    for name in FeatureSpec::NAMES {
        let s = FeatureSpec::named(name, 7).unwrap();
        assert_eq!(s.column_names().len(), s.width(), "{name}");
        let m: FeatureMatrix<f32> = build_matrix(&[flow(&[60, -40, 70])], &s).unwrap();
        assert_eq!(m.n_cols(), s.width());
    }
    let empty: FeatureMatrix<f64> = build_matrix(&[flow(&[1])], &FeatureSpec::new(vec![])).unwrap();
    assert_eq!(empty.n_cols(), 2);
}

#[test]
fn invalid_specs() {
    let dup = FeatureSpec::new(vec![Family::FlowStats, Family::FlowStats]);
    assert!(matches!(dup.validate(), Err(FeatureError::InvalidSpec(_))));
    let clash = FeatureSpec::new(vec![
        Family::nfirst(NFirstKind::ByteBurst, 3),
        Family::ByteBurstKgram {
            k: 2,
            n: 3,
            filter: DirectionFilter::Both,
            mode: KgramMode::Combined,
        },
    ]);
    assert!(clash.validate().is_err());
    let zero_n = FeatureSpec::new(vec![Family::nfirst(NFirstKind::Size, 0)]);
    assert!(build_matrix::<f64, _>(&[flow(&[1])], &zero_n).is_err());
    let bad_k = FeatureSpec::new(vec![Family::ByteBurstKgram {
        k: 4,
        n: 1,
        filter: DirectionFilter::Both,
        mode: KgramMode::Standalone,
    }]);
    assert!(bad_k.validate().is_err());
    assert!(matches!(
        FeatureSpec::named("tls", 5),
        Err(FeatureError::UnknownSpec(_))
    ));
}

#[test]
fn spec_json_round_trip() {
    let spec = FeatureSpec::named("byte_burst_with_2gram", 4).unwrap();
    let json = serde_json::to_string(&spec).unwrap();
    assert_eq!(serde_json::from_str::<FeatureSpec>(&json).unwrap(), spec);
    let inline: FeatureSpec =
        serde_json::from_str(r#"{"families":[{"family":"n_first","kind":"size","n":3}]}"#).unwrap();
    assert!(inline.always_append_protocol_onehot);
    assert_eq!(inline.width(), 5);
}

#[test]
fn csv_round_trip_with_labels() {
    use crate::labels::{AppKind, FlowLabels, TunnelKind};
    let mut a = flow_from(&[60, -40], &[0.0, 1.0 / 3.0], Transport::Udp);
    a.labels = FlowLabels::tunneled(TunnelKind::Wireguard, AppKind::Web)
        .with_mtu(1420)
        .with_tag("synth");
    let b = flow(&[1500]);
    let spec = FeatureSpec::named("iat", 2).unwrap();
    let m: FeatureMatrix<f64> = build_matrix(&[a, b], &spec).unwrap();
    let mut buf = Vec::new();
    m.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("iat[both]_0,iat[both]_1,proto_tcp,proto_udp,label_class,"));
    assert!(text.contains("0.333333,0,0,1,tunneled,wireguard,web,1420,synth"));
    let back = FeatureMatrix::<f64>::read_csv(&buf[..]).unwrap();
    assert_eq!(back.row_labels(), m.row_labels());
    let mut again = Vec::new();
    back.write_csv(&mut again).unwrap();
    assert_eq!(again, buf);
}

#[test]
fn non_finite_rows_rejected() {
    let err = FeatureMatrix::<f64>::from_plain(vec![vec![1.0, f64::NAN]]).unwrap_err();
    assert!(matches!(err, FeatureError::NonFinite { row: 0, .. }));
}

fn naive_bursts(signed: &[i64]) -> Vec<i64> {
    let mut out: Vec<i64> = Vec::new();
    let mut i = 0;
    while i < signed.len() {
        let mut j = i;
        let mut total = 0;
        while j < signed.len() && signed[j].signum() == signed[i].signum() {
            total += signed[j];
            j += 1;
        }
        out.push(total);
        i = j;
    }
    out
}

fn signed_sizes() -> impl Strategy<Value = Vec<i64>> {
    prop::collection::vec(
        (1i64..1500, any::<bool>()).prop_map(|(s, up)| if up { s } else { -s }),
        1..60,
    )
}

proptest! {
    #[test]
    fn bursts_match_naive_rescan(s in signed_sizes()) {
        let got: Vec<f64> = family_series(&flow(&s), NFirstKind::ByteBurst, DirectionFilter::Both);
        let want: Vec<f64> = naive_bursts(&s).into_iter().map(|v| v as f64).collect();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn burst_conservation(s in signed_sizes()) {
        let f = flow(&s);
        let b = compute_bursts(&f, DirectionFilter::Both);
        prop_assert_eq!(b.iter().map(|b| b.packet_count as usize).sum::<usize>(), s.len());
        prop_assert_eq!(b.iter().map(|b| b.byte_total as i64).sum::<i64>(), s.iter().map(|v| v.abs()).sum::<i64>());
        prop_assert!(b.windows(2).all(|w| w[0].direction != w[1].direction));
    }

    #[test]
    fn zero_pad_prefix(s in signed_sizes(), n in 1usize..40, extra in 1usize..20) {
        let f = flow(&s);
        for kind in NFirstKind::ALL {
            let short: Vec<f64> = nfirst_vector(&f, kind, n, DirectionFilter::Both);
            let long: Vec<f64> = nfirst_vector(&f, kind, n + extra, DirectionFilter::Both);
            prop_assert_eq!(&long[..n], &short[..]);
        }
    }

    #[test]
    fn sign_coherence(s in signed_sizes(), n in 1usize..80) {
        let f = flow(&s);
        let size: Vec<f64> = nfirst_vector(&f, NFirstKind::Size, n, DirectionFilter::Both);
        let dir: Vec<f64> = nfirst_vector(&f, NFirstKind::Direction, n, DirectionFilter::Both);
        let signed: Vec<f64> = nfirst_vector(&f, NFirstKind::SignedSize, n, DirectionFilter::Both);
        for i in 0..n {
            if size[i] != 0.0 && dir[i] != 0.0 {
                prop_assert_eq!(signed[i], size[i] * dir[i]);
            }
        }
    }

    #[test]
    fn one_hot_sums_to_one(s in signed_sizes(), udp in any::<bool>()) {
        let proto = if udp { Transport::Udp } else { Transport::Tcp };
        let ts: Vec<f64> = (0..s.len()).map(|i| i as f64).collect();
        let m: FeatureMatrix<f64> = build_matrix(&[flow_from(&s, &ts, proto)], &FeatureSpec::named("fs2", 5).unwrap()).unwrap();
        let w = m.n_cols();
        prop_assert_eq!(m.get(0, w - 2) + m.get(0, w - 1), 1.0);
    }

    #[test]
    fn rendering_is_stable(v in -1e9f64..1e9) {
        let once = render_real(v);
        let twice = render_real(once.parse().unwrap());
        prop_assert_eq!(once, twice);
    }
}
