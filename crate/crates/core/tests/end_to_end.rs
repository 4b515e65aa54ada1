use tunnelflow::capture::read_pcap;
use tunnelflow::eval::{nested_cv, NestedCv};
use tunnelflow::features::{build_matrix, FeatureMatrix, FeatureSpec};
use tunnelflow::flow::{assemble, AssemblyConfig, Flow};
use tunnelflow::learners::{AlgorithmId, Hyperparams};
use tunnelflow::pipeline::{stage_dataset, StageId};
use tunnelflow::synth::{export_pcap, generate_corpus, read_flows, write_flows, GenConfig, ProfileSet};
use tunnelflow::Scalar;

fn small_corpus() -> Vec<Flow> {
    let cfg = GenConfig {
        mtus: vec![1500, 1300],
        flows_per_cell: 4,
        master_seed: 21,
        ..GenConfig::default()
    };
    generate_corpus(&cfg, &ProfileSet::builtin("default").unwrap()).unwrap()
}

#[test]
fn pcap_export_reassembles_to_the_same_flows() {
    let flows = small_corpus();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("corpus.pcap");
    let manifest = export_pcap(&flows, &path, 96).unwrap();

    let capture = read_pcap(&path).unwrap();
    assert_eq!(capture.skipped, 0);
    let mut rebuilt = assemble(&capture.records, &AssemblyConfig::default());
    assert_eq!(manifest.apply(&mut rebuilt), flows.len());

    let mut expected = flows.clone();
    expected.sort_by_key(|f| (f.start_ts(), f.key.initiator_port));
    rebuilt.sort_by_key(|f| (f.start_ts(), f.key.initiator_port));
    assert_eq!(rebuilt, expected);
}

#[test]
fn jsonl_round_trip_keeps_features() {
    let flows = small_corpus();
    let mut buf = Vec::new();
    write_flows(&flows, &mut buf).unwrap();
    let back = read_flows(buf.as_slice()).unwrap();
    assert_eq!(back, flows);

    let spec = FeatureSpec::named("fs2", 20).unwrap();
    let a: FeatureMatrix<f64> = build_matrix(&flows, &spec).unwrap();
    let b: FeatureMatrix<f64> = build_matrix(&back, &spec).unwrap();
    let (mut x, mut y) = (Vec::new(), Vec::new());
    a.write_csv(&mut x).unwrap();
    b.write_csv(&mut y).unwrap();
    assert_eq!(x, y);
}

fn detection_cv<T: Scalar>(flows: &[Flow]) -> Vec<f64> {
    let spec = FeatureSpec::named("fs2", 10).unwrap();
    let ds: FeatureMatrix<T> = build_matrix(flows, &spec).unwrap();
    let (x, y) = stage_dataset(&ds, StageId::Detection).unwrap();
    let grid = [Hyperparams::default_for(AlgorithmId::DecisionTree)];
    let cfg = NestedCv::new(StageId::Detection.metric(), 5);
    nested_cv(&grid, &x, &y, &cfg, None).unwrap().fold_scores
}

#[test]
fn detection_nested_cv_in_both_precisions() {
    let flows = small_corpus();
    let wide = detection_cv::<f64>(&flows);
    let narrow = detection_cv::<f32>(&flows);
    assert_eq!(wide.len(), 5);
    assert_eq!(narrow.len(), 5);
    for s in wide.iter().chain(&narrow) {
        assert!(*s > 0.8, "fold score {s}");
    }
}
