use super::*;
use crate::labels::TunnelKind;
use crate::learners::ForestParams;
use crate::synth::{generate_corpus, GenConfig, ProfileSet};

fn corpus(profiles: &str, mtus: Vec<u16>, fpc: usize, seed: u64) -> Vec<Flow> {
    let cfg = GenConfig {
        mtus,
        flows_per_cell: fpc,
        master_seed: seed,
        ..Default::default()
    };
    generate_corpus(&cfg, &ProfileSet::builtin(profiles).unwrap()).unwrap()
}

fn specs(names: &[&str]) -> Vec<(String, FeatureSpec)> {
    names
        .iter()
        .map(|n| (n.to_string(), FeatureSpec::named(n, 20).unwrap()))
        .collect()
}

fn forest() -> Hyperparams {
    Hyperparams::RandomForest(ForestParams {
        n_trees: 10,
        ..ForestParams::default()
    })
}

#[test]
fn cross_domain_covers_both_directions() {
    let a = corpus("default", vec![1500], 4, 1);
    let b = corpus("alt", vec![1500], 4, 2);
    let sp = specs(&["signed_size", "netflow_v5"]);
    let rep = cross_domain_eval(("A", &a), ("B", &b), &sp, &forest(), 7).unwrap();
    assert_eq!(rep.axis, ShiftAxis::Dataset);
    assert_eq!(rep.stage, StageId::Detection);
    assert_eq!(rep.cells.len(), 2 * 2 * 2);
    for c in &rep.cells {
        assert_eq!(c.scores.len(), SHIFT_REPEATS);
        assert!((0.0..=1.0).contains(&c.mean));
        assert!(c.ci99 >= 0.0);
    }
    for spec in ["signed_size", "netflow_v5"] {
        for (tr, te) in [("A", "A"), ("A", "B"), ("B", "B"), ("B", "A")] {
            assert!(rep.cell(spec, tr, te).is_some(), "{spec} {tr} {te}");
        }
    }
    let d = rep.score_drop("signed_size", "A", "B").unwrap();
    let c = rep.cell("signed_size", "A", "A").unwrap().mean - rep.cell("signed_size", "A", "B").unwrap().mean;
    assert_eq!(d, c);
    let again = cross_domain_eval(("A", &a), ("B", &b), &sp, &forest(), 7).unwrap();
    assert_eq!(rep, again);
    let json = serde_json::to_string(&rep).unwrap();
    assert_eq!(serde_json::from_str::<ShiftReport>(&json).unwrap(), rep);
}

#[test]
fn mtu_matrix_shape_and_pivot() {
    let flows = corpus("default", vec![1500, 1300, 1200], 3, 5);
    let sp = specs(&["signed_size"]);
    let rep = mtu_matrix(&flows, 1300, &[1500, 1200], &sp, StageId::Detection, &forest(), 3).unwrap();
    assert_eq!(rep.axis, ShiftAxis::Mtu);
    assert_eq!(rep.test_domains(), vec!["1300", "1500", "1200"]);
    assert!(rep.diagonal_is_max("signed_size", "1300").is_some());

    let rep = mtu_matrix(&flows, 1300, &[1500, 1300, 1200], &sp, StageId::Detection, &forest(), 3).unwrap();
    assert_eq!(rep.test_domains(), vec!["1500", "1300", "1200"]);
    let mut buf = Vec::new();
    rep.write_pivot_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "spec,train,1500,1300,1200");
    assert!(lines[1].starts_with("signed_size,1300,"));
    assert_eq!(lines.len(), 2);
}

#[test]
fn diagonal_uses_held_out_rows() {
    let flows = corpus("default", vec![1500, 1200], 5, 8);
    let sp = specs(&["signed_size"]);
    let stage = StageId::TunnelClassification;
    let rep = mtu_matrix(&flows, 1500, &[1200], &sp, stage, &forest(), 4).unwrap();
    assert_eq!(rep.metric, "f1_macro");

    let rows: Vec<&Flow> = flows
        .iter()
        .filter(|f| f.labels.mtu == Some(1500) && f.labels.tunnel_kind.is_some())
        .collect();
    let y: Vec<String> = rows.iter().map(|f| f.labels.tunnel_kind.unwrap().to_string()).collect();
    let (fit_rows, held) = stratified_split(&y, SHIFT_TEST_FRACTION, derive_path(4, &[0, 0, 0])).unwrap();
    assert_eq!(held.len(), 30);
    let x = build_matrix::<f64, _>(&rows, &sp[0].1).unwrap();
    let model = fit(
        &forest(),
        &x.select_rows(&fit_rows),
        &pick(&y, &fit_rows),
        derive_path(4, &[0, 0, 1]),
    )
    .unwrap();
    let pred = model.predict(&x.select_rows(&held)).unwrap();
    let cm = ConfusionMatrix::from_labels(&pick(&y, &held), &pred);
    let diag = rep.cell("signed_size", "1500", "1500").unwrap();
    assert_eq!(diag.scores[0], crate::eval::f1_macro(&cm));

    let other: Vec<&Flow> = flows
        .iter()
        .filter(|f| f.labels.mtu == Some(1200) && f.labels.tunnel_kind.is_some())
        .collect();
    let yo: Vec<String> = other
        .iter()
        .map(|f| f.labels.tunnel_kind.unwrap().to_string())
        .collect();
    let pred = model
        .predict(&build_matrix::<f64, _>(&other, &sp[0].1).unwrap())
        .unwrap();
    let off = rep.cell("signed_size", "1500", "1200").unwrap();
    assert_eq!(
        off.scores[0],
        crate::eval::f1_macro(&ConfusionMatrix::from_labels(&yo, &pred))
    );
}

#[test]
fn error_paths() {
    let flows = corpus("default", vec![1500], 3, 9);
    let sp = specs(&["signed_size"]);
    assert!(matches!(
        mtu_matrix(&flows, 1400, &[1500], &sp, StageId::Detection, &forest(), 1),
        Err(ShiftError::MissingStratum(1400))
    ));
    assert!(matches!(
        mtu_matrix(&flows, 1500, &[], &[], StageId::Detection, &forest(), 1),
        Err(ShiftError::NoSpecs)
    ));
    let tunneled_only: Vec<Flow> = flows
        .iter()
        .filter(|f| f.labels.tunnel_kind.is_some())
        .cloned()
        .collect();
    assert!(matches!(
        cross_domain_eval(("A", &flows), ("B", &tunneled_only), &sp, &forest(), 1),
        Err(ShiftError::DegenerateDomain { ref domain, classes: 1, .. }) if domain == "B"
    ));
    let ssh_only: Vec<Flow> = flows
        .iter()
        .filter(|f| f.labels.tunnel_kind == Some(TunnelKind::Ssh))
        .cloned()
        .collect();
    assert!(matches!(
        mtu_matrix(&ssh_only, 1500, &[], &sp, StageId::TunnelClassification, &forest(), 1),
        Err(ShiftError::DegenerateDomain { classes: 1, .. })
    ));
}
