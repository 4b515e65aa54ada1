use std::collections::HashSet;
use std::sync::Mutex;

use proptest::prelude::*;
use rand::Rng;

use super::*;
use crate::features::FeatureMatrix;
use crate::learners::{AlgorithmId, Hyperparams, TreeParams};
use crate::seed::rng_for;

fn v(s: &[&str]) -> Vec<String> {
    s.iter().map(|x| x.to_string()).collect()
}

/// Two classes separated along every column.
fn separable(n: usize, d: usize, seed: u64) -> (FeatureMatrix<f64>, Vec<String>) {
    let mut rng = rng_for(seed);
    let rows = (0..n)
        .map(|i| {
            (0..d)
                .map(|_| (i % 2) as f64 * 10.0 + rng.random_range(0.0..1.0))
                .collect()
        })
        .collect();
    let y = (0..n)
        .map(|i| if i % 2 == 0 { "neg" } else { "pos" }.to_string())
        .collect();
    (FeatureMatrix::from_plain(rows).unwrap(), y)
}

#[test]
fn f1_binary_examples() {
    let cm = ConfusionMatrix::from_labels(&v(&["T", "T", "N", "N"]), &v(&["T", "N", "T", "N"]));
    assert_eq!(cm.counts, vec![vec![1, 1], vec![1, 1]]);
    assert_eq!(f1_binary(&cm, "T"), 0.5);
    let perfect = ConfusionMatrix::from_labels(&v(&["T", "N"]), &v(&["T", "N"]));
    assert_eq!(f1_binary(&perfect, "T"), 1.0);
    let never = ConfusionMatrix::from_labels(&v(&["N", "N"]), &v(&["N", "N"]));
    assert_eq!(f1_binary(&never, "T"), 0.0);
}

#[test]
fn f1_macro_examples() {
    let cm = ConfusionMatrix::from_labels(&v(&["A", "B", "C"]), &v(&["A", "B", "C"]));
    assert_eq!(f1_macro(&cm), 1.0);
    let cm = ConfusionMatrix::from_labels(&v(&["A", "A", "B"]), &v(&["A", "A", "A"]));
    // A: P=2/3, R=1 -> 0.8; B never predicted -> 0
    assert!((f1_macro(&cm) - 0.4).abs() < 1e-15);
    let cm = ConfusionMatrix::from_labels(&v(&["A", "B"]), &v(&["A", "A"]));
    assert!((f1_macro(&cm) - (2.0 / 3.0) / 2.0).abs() < 1e-15);
}

#[test]
fn kfold_examples() {
    let y: Vec<&str> = [["A"; 6], ["B"; 6]].concat();
    let folds = stratified_kfold(&y, 3, 4).unwrap();
    for f in &folds {
        assert_eq!(f.iter().filter(|&&i| y[i] == "A").count(), 2);
        assert_eq!(f.len(), 4);
    }
    let all: Vec<usize> = {
        let mut a: Vec<usize> = folds.concat();
        a.sort();
        a
    };
    assert_eq!(all, (0..12).collect::<Vec<_>>());
    let small: Vec<&str> = [vec!["A"; 10], vec!["B"; 2]].concat();
    match stratified_kfold(&small, 5, 0) {
        Err(EvalError::Stratification { class, count: 2, k: 5 }) => assert_eq!(class, "B"),
        other => panic!("{other:?}"),
    }
    assert_eq!(stratified_kfold(&y, 3, 4).unwrap(), folds);
}

#[test]
fn split_and_subsample() {
    let y: Vec<&str> = [vec!["A"; 20], vec!["B"; 10]].concat();
    let (train, test) = stratified_split(&y, 0.3, 1).unwrap();
    assert_eq!(test.iter().filter(|&&i| y[i] == "A").count(), 6);
    assert_eq!(test.iter().filter(|&&i| y[i] == "B").count(), 3);
    assert_eq!(train.len() + test.len(), 30);
    let sub = stratified_subsample(&y, &train, 9, 2).unwrap();
    assert_eq!(sub.len(), 9);
    assert_eq!(sub.iter().filter(|&&i| y[i] == "B").count(), 3);
    assert_eq!(stratified_subsample(&y, &train, train.len(), 2).unwrap(), train);
    assert!(matches!(
        stratified_subsample(&y, &train, 99, 2),
        Err(EvalError::InvalidSize { size: 99, .. })
    ));
}

#[test]
fn ci99_matches_hand_computation() {
    let s = [0.9, 1.0, 0.9, 1.0, 1.0];
    assert!((mean(&s) - 0.96).abs() < 1e-12);
    let want = 4.604094 * 0.003f64.sqrt() / 5f64.sqrt();
    assert!((ci99(&s) - want).abs() < 1e-5, "{}", ci99(&s));
    assert_eq!(ci99(&[1.0; 5]), 0.0);
    assert_eq!(ci99(&[0.3]), 0.0);
}

fn dt(min_samples_split: usize) -> Hyperparams {
    Hyperparams::DecisionTree(TreeParams {
        min_samples_split,
        ..Default::default()
    })
}

#[test]
fn grid_search_examples() {
    let (x, y) = separable(60, 2, 3);
    let m = Metric::binary("pos");
    assert_eq!(grid_search(&[dt(7)], &x, &y, 3, &m, 0).unwrap(), dt(7));
    assert_eq!(grid_search(&[dt(1000), dt(2)], &x, &y, 3, &m, 0).unwrap(), dt(2));
    let twins = [dt(2), dt(2)];
    let scores = grid_scores(&twins, &x, &y, &(0..60).collect::<Vec<_>>(), 3, &m, 0).unwrap();
    assert_eq!(scores[0], scores[1]);
    assert!(grid_search(&[], &x, &y, 3, &m, 0).is_err());
}

type Event = (usize, Phase, Vec<usize>, Vec<usize>);

#[test]
fn nested_cv_separable_and_isolated() {
    let (x, y) = separable(50, 3, 9);
    let cfg = NestedCv::new(Metric::binary("pos"), 17);
    let seen: Mutex<Vec<Event>> = Mutex::new(Vec::new());
    let obs = |a: &Access<'_>| {
        seen.lock()
            .unwrap()
            .push((a.outer_fold, a.phase, a.fit_rows.to_vec(), a.score_rows.to_vec()))
    };
    let grid = vec![Hyperparams::RandomForest(crate::learners::ForestParams {
        n_trees: 10,
        ..Default::default()
    })];
    let r = nested_cv(&grid, &x, &y, &cfg, Some(&obs)).unwrap();
    assert_eq!(r.fold_scores, vec![1.0; 5]);
    assert_eq!(r.ci99, 0.0);
    assert_eq!(r.algorithm, AlgorithmId::RandomForest);
    let log = seen.into_inner().unwrap();
    assert_eq!(log.len(), 5 * 3 + 5);
    for (fold, phase, fit_rows, score_rows) in &log {
        if *phase == Phase::Inner {
            let outer_test: HashSet<usize> = log
                .iter()
                .find(|e| e.0 == *fold && e.1 == Phase::Refit)
                .unwrap()
                .3
                .iter()
                .copied()
                .collect();
            assert!(fit_rows.iter().chain(score_rows).all(|i| !outer_test.contains(i)));
        }
    }
    let again = nested_cv(&grid, &x, &y, &cfg, None).unwrap();
    assert_eq!(
        serde_json::to_string(&again).unwrap(),
        serde_json::to_string(&r).unwrap()
    );
}

#[test]
fn nested_cv_chance_level_on_shuffled_labels() {
    let mut rng = rng_for(5);
    let rows: Vec<Vec<f64>> = (0..200)
        .map(|_| vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)])
        .collect();
    let x = FeatureMatrix::from_plain(rows).unwrap();
    let y: Vec<&str> = (0..200).map(|i| if i % 2 == 0 { "a" } else { "b" }).collect();
    let r = nested_cv(
        &[Hyperparams::default_for(AlgorithmId::GaussianNb)],
        &x,
        &y,
        &NestedCv::new(Metric::binary("b"), 1),
        None,
    )
    .unwrap();
    assert!((0.3..=0.7).contains(&r.mean), "{}", r.mean);
}

#[test]
fn learning_curve_contract() {
    let (x, y) = separable(80, 2, 2);
    let m = Metric::binary("pos");
    let p = Hyperparams::default_for(AlgorithmId::DecisionTree);
    let pts = learning_curve(&p, &x, &y, &[56, 4, 20], 0.3, &m, 8).unwrap();
    assert_eq!(pts.iter().map(|p| p.size).collect::<Vec<_>>(), vec![4, 20, 56]);
    assert!(pts[2].mean >= pts[0].mean - 0.05);
    // the full training split reproduces a plain train/test evaluation
    let (train, test) = stratified_split(&y, 0.3, crate::seed::derive_path(8, &[0])).unwrap();
    let (_, cm) = fit_and_score(&p, &x, &y, &train, &test, 0).unwrap();
    assert_eq!(pts[2].scores, vec![m.score(&cm); CURVE_REPEATS]);
    assert!(matches!(
        learning_curve(&p, &x, &y, &[57], 0.3, &m, 8),
        Err(EvalError::InvalidSize {
            size: 57,
            available: 56
        })
    ));
}

#[test]
fn summary_csv() {
    let (x, y) = separable(30, 1, 0);
    let r = nested_cv(
        &[Hyperparams::default_for(AlgorithmId::DecisionTree)],
        &x,
        &y,
        &NestedCv::new(Metric::F1Macro, 0),
        None,
    )
    .unwrap()
    .with_feature_spec("fs2");
    let mut buf = Vec::new();
    write_summary_csv(&[r], &mut buf).unwrap();
    assert_eq!(
        String::from_utf8(buf).unwrap(),
        "algorithm,feature_spec,metric,mean,ci99\nDT,fs2,f1_macro,1,0\n"
    );
}

fn direct_f1(truth: &[u8], pred: &[u8], pos: u8) -> f64 {
    let tp = truth.iter().zip(pred).filter(|(t, p)| **t == pos && **p == pos).count() as f64;
    let fp = truth.iter().zip(pred).filter(|(t, p)| **t != pos && **p == pos).count() as f64;
    let fn_ = truth.iter().zip(pred).filter(|(t, p)| **t == pos && **p != pos).count() as f64;
    if tp == 0.0 {
        0.0
    } else {
        2.0 * tp / (2.0 * tp + fp + fn_)
    }
}

proptest! {
    #[test]
    fn f1_matches_direct_formula(pairs in prop::collection::vec((0u8..4, 0u8..4), 1..80)) {
        let (t, p): (Vec<u8>, Vec<u8>) = pairs.into_iter().unzip();
        let ts: Vec<String> = t.iter().map(|c| c.to_string()).collect();
        let ps: Vec<String> = p.iter().map(|c| c.to_string()).collect();
        let cm = ConfusionMatrix::from_labels(&ts, &ps);
        prop_assert_eq!(cm.total(), t.len() as u64);
        let b = f1_binary(&cm, "1");
        prop_assert!((b - direct_f1(&t, &p, 1)).abs() < 1e-12);
        let present: Vec<u8> = (0..4).filter(|c| t.contains(c) || p.contains(c)).collect();
        let want = present.iter().map(|&c| direct_f1(&t, &p, c)).sum::<f64>() / present.len() as f64;
        prop_assert!((f1_macro(&cm) - want).abs() < 1e-12);
    }

    #[test]
    fn kfold_partitions_and_balances(counts in prop::collection::vec(5usize..30, 1..4), k in 2usize..6, seed in any::<u64>()) {
        let y: Vec<String> = counts.iter().enumerate().flat_map(|(c, &n)| vec![format!("c{c}"); n]).collect();
        let folds = stratified_kfold(&y, k, seed).unwrap();
        let mut all: Vec<usize> = folds.concat();
        all.sort();
        prop_assert_eq!(all, (0..y.len()).collect::<Vec<_>>());
        for c in 0..counts.len() {
            let name = format!("c{c}");
            let per: Vec<usize> = folds.iter().map(|f| f.iter().filter(|&&i| y[i] == name).count()).collect();
            prop_assert!(per.iter().max().unwrap() - per.iter().min().unwrap() <= 1);
        }
    }
}
