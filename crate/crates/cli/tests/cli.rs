use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_tunnelflow"));
    c.env_remove("TUNNELFLOW_OUT_DIR");
    c
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out-dir").arg(out).output().unwrap()
}

fn ok(args: &[&str], out: &Path) {
    let o = run(args, out);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

/// A small two-MTU corpus written as flows.jsonl.
fn corpus(tmp: &TempDir) -> PathBuf {
    let dir = tmp.path().join("data");
    ok(
        &["synth", "--seed", "1", "--flows-per-cell", "3", "--mtus", "1500,1200"],
        &dir,
    );
    dir.join("flows.jsonl")
}

fn report(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn nestedcv_reports_five_fold_scores() {
    let tmp = TempDir::new().unwrap();
    let flows = corpus(&tmp);
    let out = tmp.path().join("cv");
    ok(&["nestedcv", "-i", s(&flows), "--seed", "2"], &out);
    let r = report(&out.join("nestedcv.json"));
    assert_eq!(r["tool"], "tunnelflow");
    assert_eq!(r["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(r["seed"], 2);
    assert_eq!(r["config"]["outer_k"], 5);
    assert_eq!(r["report"][0]["fold_scores"].as_array().unwrap().len(), 5);
    let csv = fs::read_to_string(out.join("nestedcv.csv")).unwrap();
    assert!(csv.starts_with("algorithm,feature_spec,metric,mean,ci99\n"));
}

#[test]
fn extract_fs2_has_102_feature_columns() {
    let tmp = TempDir::new().unwrap();
    let flows = corpus(&tmp);
    let target = tmp.path().join("x.csv");
    ok(
        &[
            "extract",
            "-i",
            s(&flows),
            "--spec",
            "fs2",
            "--n",
            "50",
            "-o",
            s(&target),
        ],
        tmp.path(),
    );
    let header = fs::read_to_string(&target).unwrap().lines().next().unwrap().to_string();
    let features = header.split(',').filter(|c| !c.starts_with("label_")).count();
    assert_eq!(features, 102);

    let again = tmp.path().join("y.csv");
    ok(
        &["extract", "-i", s(&flows), "--spec", "fs2", "-o", s(&again)],
        tmp.path(),
    );
    assert_eq!(fs::read(&target).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn extract_reads_pcap_with_manifest() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("cap");
    ok(
        &[
            "synth",
            "--seed",
            "3",
            "--flows-per-cell",
            "1",
            "--mtus",
            "1500",
            "--pcap",
        ],
        &dir,
    );
    let target = tmp.path().join("x.csv");
    ok(
        &[
            "extract",
            "-i",
            s(&dir.join("corpus.pcap")),
            "--labels",
            s(&dir.join("labels.json")),
            "-o",
            s(&target),
        ],
        tmp.path(),
    );
    let text = fs::read_to_string(&target).unwrap();
    let rows = text.lines().count() - 1;
    let flows = fs::read_to_string(dir.join("flows.jsonl")).unwrap().lines().count();
    assert_eq!(rows, flows);
    assert!(text.lines().skip(1).all(|l| l.contains("tunneled")));
}

#[test]
fn input_errors_exit_2() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("nope.pcap");
    assert_eq!(run(&["extract", "-i", s(&missing)], tmp.path()).status.code(), Some(2));
    assert_eq!(run(&["extract", "--bogus"], tmp.path()).status.code(), Some(2));

    let garbage = tmp.path().join("bad.jsonl");
    fs::write(&garbage, "not json\n").unwrap();
    assert_eq!(run(&["extract", "-i", s(&garbage)], tmp.path()).status.code(), Some(2));

    let truncated = tmp.path().join("short.pcap");
    fs::write(&truncated, [0xd4, 0xc3, 0xb2]).unwrap();
    let o = run(&["extract", "-i", s(&truncated)], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error: "));

    assert_eq!(
        run(&["--jobs", "0", "extract", "-i", s(&garbage)], tmp.path())
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn experiment_errors_exit_1() {
    let tmp = TempDir::new().unwrap();
    let flows = corpus(&tmp);
    let o = run(
        &["nestedcv", "-i", s(&flows), "--outer-k", "50"],
        &tmp.path().join("cv"),
    );
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(
        &["dg", "-i", s(&flows), "--axis", "mtu", "--test-mtus", "1400"],
        &tmp.path().join("dg"),
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn importance_top_20_is_descending() {
    let tmp = TempDir::new().unwrap();
    let flows = corpus(&tmp);
    let out = tmp.path().join("imp");
    ok(&["importance", "-i", s(&flows), "--top", "20"], &out);
    let text = fs::read_to_string(out.join("importance.csv")).unwrap();
    let values: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(values.len(), 20);
    assert!(values.windows(2).all(|w| w[0] >= w[1]));
    let r = report(&out.join("importance.json"));
    assert_eq!(r["report"].as_array().map(Vec::len), Some(20));

    let o = run(&["importance", "-i", s(&flows), "--alg", "gnb"], &out);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn dg_mtu_report_has_six_columns() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("data");
    ok(&["synth", "--seed", "4", "--flows-per-cell", "2"], &dir);
    let out = tmp.path().join("dg");
    ok(
        &[
            "dg",
            "-i",
            s(&dir.join("flows.jsonl")),
            "--axis",
            "mtu",
            "--train",
            "1500",
        ],
        &out,
    );
    let text = fs::read_to_string(out.join("dg.csv")).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    assert_eq!(header[..2], ["spec", "train"]);
    assert_eq!(header.len() - 2, 6);
    assert_eq!(text.lines().count(), 1 + 3);
}

#[test]
fn config_file_fills_flags_and_command_line_wins() {
    let tmp = TempDir::new().unwrap();
    let flows = corpus(&tmp);
    let cfg = tmp.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"seed": 9, "nestedcv": {"outer_k": 4, "inner_k": 2}, "sweep": {"n": [1]}}"#,
    )
    .unwrap();
    let out = tmp.path().join("cv");
    ok(
        &["--config", s(&cfg), "nestedcv", "-i", s(&flows), "--inner-k", "3"],
        &out,
    );
    let r = report(&out.join("nestedcv.json"));
    assert_eq!(r["seed"], 9);
    assert_eq!(r["config"]["outer_k"], 4);
    assert_eq!(r["config"]["inner_k"], 3);

    fs::write(&cfg, r#"{"no_such_flag": 1}"#).unwrap();
    let o = run(&["--config", s(&cfg), "nestedcv", "-i", s(&flows)], &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no_such_flag"));
}

#[test]
fn env_sets_default_output_dir() {
    let tmp = TempDir::new().unwrap();
    let flows = corpus(&tmp);
    let env_dir = tmp.path().join("from-env");
    let o = bin()
        .env("TUNNELFLOW_OUT_DIR", &env_dir)
        .args(["extract", "-i", s(&flows)])
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(env_dir.join("features.csv").exists());
}

#[test]
fn reruns_are_identical_across_job_counts() {
    let tmp = TempDir::new().unwrap();
    let flows = corpus(&tmp);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let args = [
        "sweep",
        "-i",
        s(&flows),
        "--family",
        "signed_size,netflow_v5",
        "--n",
        "1,10",
        "--seed",
        "7",
    ];
    ok(&args, &a);
    let mut single = vec!["--jobs", "1"];
    single.extend(args);
    ok(&single, &b);
    for name in ["sweep.csv", "sweep.json"] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
}
