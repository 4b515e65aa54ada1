use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use tunnelflow::capture::read_pcap;
use tunnelflow::eval::{learning_curve, nested_cv, stratified_split, write_summary_csv, NestedCv};
use tunnelflow::features::{build_matrix, render_real, FeatureMatrix, FeatureSpec};
use tunnelflow::flow::{assemble, AssemblyConfig, Flow};
use tunnelflow::learners::{fit, Hyperparams};
use tunnelflow::pipeline::{
    feature_sweep, run_pipeline, stage_dataset, stage_scores, train_pipeline, write_predictions, write_sweep_csv,
    PipelineConfig, PipelineModels, StageId,
};
use tunnelflow::seed::derive_path;
use tunnelflow::shift::{cross_domain_eval, mtu_matrix};
use tunnelflow::synth::{export_pcap, generate_corpus, read_flows, write_flows, GenConfig, LabelManifest, ProfileSet};

use crate::args::*;
use crate::error::CliError;

type Result<T> = std::result::Result<T, CliError>;

/// Wrapper of every JSON report.
#[derive(Serialize)]
struct Envelope<'a, C, R> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    seed: u64,
    config: &'a C,
    report: R,
}

struct Out<'a> {
    dir: &'a Path,
    command: &'static str,
}

impl Out<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn create(&self, path: &Path) -> Result<BufWriter<File>> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| CliError::write(parent, e))?;
        }
        File::create(path)
            .map(BufWriter::new)
            .map_err(|e| CliError::write(path, e))
    }

    /// Runs `body` on a fresh file; the body's errors keep their kind.
    fn with_file<F>(&self, name: &str, body: F) -> Result<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<()>,
    {
        let path = self.path(name);
        let mut w = self.create(&path)?;
        body(&mut w)?;
        w.flush().map_err(|e| CliError::write(&path, e))
    }

    fn report<C: Serialize, R: Serialize>(&self, name: &str, seed: u64, config: &C, report: R) -> Result<()> {
        let env = Envelope {
            tool: "tunnelflow",
            version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            seed,
            config,
            report,
        };
        let path = self.path(name);
        self.with_file(name, |w| {
            serde_json::to_writer_pretty(&mut *w, &env).map_err(|e| CliError::write(&path, e.into()))?;
            w.write_all(b"\n").map_err(|e| CliError::write(&path, e))
        })
    }
}

fn io_err<E: std::fmt::Display>(path: &Path) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Input(format!("{}: {e}", path.display()))
}

fn is_capture(path: &Path) -> bool {
    matches!(
        path.extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref(),
        Some("pcap" | "cap")
    )
}

fn read_manifest(path: &Path) -> Result<LabelManifest> {
    let file = File::open(path).map_err(io_err(path))?;
    serde_json::from_reader(BufReader::new(file)).map_err(io_err(path))
}

/// Flows from flow files and captures, in argument order.
fn load_flows(paths: &[PathBuf], labels: Option<&Path>) -> Result<Vec<Flow>> {
    let mut flows = Vec::new();
    for path in paths {
        if is_capture(path) {
            let capture = read_pcap(path).map_err(|e| CliError::from(e).in_file(path))?;
            flows.extend(assemble(&capture.records, &AssemblyConfig::default()));
        } else {
            let file = File::open(path).map_err(io_err(path))?;
            let read = read_flows(BufReader::new(file)).map_err(|e| CliError::from(e).in_file(path))?;
            flows.extend(read);
        }
    }
    if let Some(m) = labels {
        read_manifest(m)?.apply(&mut flows);
    }
    Ok(flows)
}

fn load(inputs: &InputArgs) -> Result<Vec<Flow>> {
    load_flows(&inputs.input, inputs.labels.as_deref())
}

/// A spec from a name or inline JSON, with its display name.
fn spec_arg(arg: &str, n: usize) -> Result<(String, FeatureSpec)> {
    let spec = FeatureSpec::from_arg(arg, n)?;
    let name = if arg.trim_start().starts_with('{') {
        "inline".to_string()
    } else {
        arg.to_string()
    };
    Ok((name, spec))
}

fn stage_matrix(flows: &[Flow], spec: &FeatureSpec, stage: StageId) -> Result<(FeatureMatrix<f64>, Vec<String>)> {
    let ds = build_matrix::<f64, _>(flows, spec)?;
    Ok(stage_dataset(&ds, stage)?)
}

pub fn run(cli: &Cli) -> Result<()> {
    let out = Out {
        dir: &cli.out_dir,
        command: cli.command.name(),
    };
    match &cli.command {
        Command::Synth(a) => synth(a, &out),
        Command::Extract(a) => extract(a, &out),
        Command::Nestedcv(a) => nestedcv(a, &out),
        Command::Sweep(a) => sweep(a, &out),
        Command::Curve(a) => curve(a, &out),
        Command::Pipeline(a) => pipeline(a, &out),
        Command::Dg(a) => dg(a, &out),
        Command::Importance(a) => importance(a, &out),
    }
}

fn load_profiles(arg: &str) -> Result<ProfileSet> {
    if ProfileSet::BUILTIN.contains(&arg) {
        return Ok(ProfileSet::builtin(arg)?);
    }
    let path = Path::new(arg);
    let file = File::open(path).map_err(io_err(path))?;
    let set: ProfileSet = serde_json::from_reader(BufReader::new(file)).map_err(io_err(path))?;
    set.validate().map_err(|e| CliError::from(e).in_file(path))?;
    Ok(set)
}

fn class_key(f: &Flow) -> String {
    let l = &f.labels;
    let part = |s: Option<String>| s.unwrap_or_default();
    format!(
        "{}/{}/{}",
        part(l.traffic_class.map(|c| c.to_string())),
        part(l.tunnel_kind.map(|c| c.to_string())),
        part(l.app_kind.map(|c| c.to_string()))
    )
}

fn synth(a: &SynthArgs, out: &Out<'_>) -> Result<()> {
    let profiles = load_profiles(&a.profiles)?;
    let cfg = GenConfig {
        mtus: a.mtus.clone(),
        flows_per_cell: a.flows_per_cell,
        include_untunneled: !a.no_untunneled,
        master_seed: a.seed,
        dataset_tag: a.tag.clone(),
        ..GenConfig::default()
    };
    let flows = generate_corpus(&cfg, &profiles)?;
    out.with_file("flows.jsonl", |w| write_flows(&flows, w).map_err(CliError::from))?;
    if a.pcap {
        let path = out.path("corpus.pcap");
        fs::create_dir_all(out.dir).map_err(|e| CliError::write(out.dir, e))?;
        let manifest = export_pcap(&flows, &path, a.snaplen)?;
        out.with_file("labels.json", |w| {
            serde_json::to_writer(&mut *w, &manifest).map_err(|e| CliError::write(&out.path("labels.json"), e.into()))
        })?;
    }
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for f in &flows {
        *counts.entry(class_key(f)).or_default() += 1;
    }
    #[derive(Serialize)]
    struct Report<'a> {
        generator: &'a GenConfig,
        flows: usize,
        packets: usize,
        counts: BTreeMap<String, usize>,
    }
    let report = Report {
        generator: &cfg,
        flows: flows.len(),
        packets: flows.iter().map(Flow::len).sum(),
        counts,
    };
    out.report("synth.json", a.seed, a, report)
}

fn extract(a: &ExtractArgs, out: &Out<'_>) -> Result<()> {
    let flows = load(&a.inputs)?;
    let (_, spec) = spec_arg(&a.spec, a.n)?;
    let x = build_matrix::<f64, _>(&flows, &spec)?;
    let path = a.output.clone().unwrap_or_else(|| out.path("features.csv"));
    let mut w = out.create(&path)?;
    x.write_csv(&mut w)
        .map_err(|e| CliError::Experiment(format!("{}: {e}", path.display())))?;
    w.flush().map_err(|e| CliError::write(&path, e))
}

fn nestedcv(a: &NestedCvArgs, out: &Out<'_>) -> Result<()> {
    let flows = load(&a.inputs)?;
    let (name, spec) = spec_arg(&a.spec, a.n.unwrap_or(a.stage.default_n()))?;
    let (x, y) = stage_matrix(&flows, &spec, a.stage)?;
    let cfg = NestedCv {
        outer_k: a.outer_k,
        inner_k: a.inner_k,
        ..NestedCv::new(a.stage.metric(), a.seed)
    };
    let mut reports = Vec::new();
    for &alg in &a.algs {
        let grid = match a.grid {
            GridChoice::Default => Hyperparams::default_grid(alg),
            GridChoice::Fixed => vec![Hyperparams::default_for(alg)],
        };
        reports.push(nested_cv(&grid, &x, &y, &cfg, None)?.with_feature_spec(name.clone()));
    }
    out.with_file("nestedcv.csv", |w| Ok(write_summary_csv(&reports, w)?))?;
    out.report("nestedcv.json", a.seed, a, &reports)
}

fn sweep(a: &SweepArgs, out: &Out<'_>) -> Result<()> {
    let flows = load(&a.inputs)?;
    let families = a
        .families
        .iter()
        .map(|f| Ok((f.clone(), FeatureSpec::named(f, 1)?)))
        .collect::<Result<Vec<_>>>()?;
    let rows = feature_sweep::<f64>(&flows, a.stage, &families, &a.n_values, &a.algs, a.seed)?;
    out.with_file("sweep.csv", |w| Ok(write_sweep_csv(&rows, w)?))?;
    out.report("sweep.json", a.seed, a, &rows)
}

fn curve(a: &CurveArgs, out: &Out<'_>) -> Result<()> {
    let flows = load(&a.inputs)?;
    let (_, spec) = spec_arg(&a.spec, a.n.unwrap_or(a.stage.default_n()))?;
    let (x, y) = stage_matrix(&flows, &spec, a.stage)?;
    let params = Hyperparams::default_for(a.alg);
    let points = learning_curve(&params, &x, &y, &a.sizes, a.test_fraction, &a.stage.metric(), a.seed)?;
    out.with_file("curve.csv", |w| {
        let mut c = csv::Writer::from_writer(w);
        let err = |e: csv::Error| CliError::Experiment(e.to_string());
        c.write_record(["size", "mean", "ci99"]).map_err(err)?;
        for p in &points {
            c.write_record([p.size.to_string(), render_real(p.mean), render_real(p.ci99)])
                .map_err(err)?;
        }
        c.flush().map_err(|e| CliError::Experiment(e.to_string()))
    })?;
    out.report("curve.json", a.seed, a, &points)
}

fn pipeline(a: &PipelineArgs, out: &Out<'_>) -> Result<()> {
    let flows = load(&a.inputs)?;
    let (train, test, holdout) = if a.test.is_empty() {
        let keys: Vec<String> = flows.iter().map(class_key).collect();
        let (tr, te) = stratified_split(&keys, a.holdout, derive_path(a.seed, &[0]))?;
        let pick = |idx: &[usize]| idx.iter().map(|&i| flows[i].clone()).collect::<Vec<_>>();
        (pick(&tr), pick(&te), true)
    } else {
        let test = load_flows(&a.test, a.test_labels.as_deref())?;
        (flows, test, false)
    };
    let (_, spec) = spec_arg(&a.spec, a.stage_n)?;
    let cfg = PipelineConfig {
        stage_n: a.stage_n,
        app_n: a.app_n,
        ..PipelineConfig::new(spec, Hyperparams::default_for(a.alg), derive_path(a.seed, &[1]))
    };
    let models: PipelineModels<f64> = train_pipeline(&train, &cfg)?;
    let preds = run_pipeline(&test, &models)?;
    let labeled = test.iter().all(|f| f.labels.traffic_class.is_some());
    let scores = if labeled {
        Some(stage_scores(&test, &models)?)
    } else {
        None
    };
    out.with_file("predictions.jsonl", |w| Ok(write_predictions(&preds, w)?))?;
    out.report("models.json", a.seed, a, &models)?;
    #[derive(Serialize)]
    struct Report<'a> {
        holdout: bool,
        train_flows: usize,
        test_flows: usize,
        pipeline: &'a PipelineConfig,
        stages: Option<Vec<tunnelflow::pipeline::StageScore>>,
    }
    let report = Report {
        holdout,
        train_flows: train.len(),
        test_flows: test.len(),
        pipeline: &cfg,
        stages: scores,
    };
    out.report("pipeline.json", a.seed, a, report)
}

/// The dataset tag shared by all flows, else the first file's stem.
fn domain_name(flows: &[Flow], paths: &[PathBuf]) -> String {
    let first = flows.first().and_then(|f| f.labels.dataset_tag.clone());
    if first.is_some() && flows.iter().all(|f| f.labels.dataset_tag == first) {
        return first.unwrap_or_default();
    }
    paths
        .first()
        .and_then(|p| p.file_stem())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn dg(a: &DgArgs, out: &Out<'_>) -> Result<()> {
    let flows = load(&a.inputs)?;
    let specs = a
        .specs
        .iter()
        .map(|s| Ok((s.clone(), FeatureSpec::named(s, a.n)?)))
        .collect::<Result<Vec<_>>>()?;
    let params = Hyperparams::default_for(a.alg);
    let report = match a.axis {
        Axis::Mtu => mtu_matrix(&flows, a.train, &a.test_mtus, &specs, a.stage, &params, a.seed)?,
        Axis::Dataset => {
            if a.against.is_empty() {
                return Err(CliError::Input("--axis dataset needs --against <flows>".into()));
            }
            if a.stage != StageId::Detection {
                return Err(CliError::Input(
                    "--axis dataset supports the detection stage only".into(),
                ));
            }
            let other = load_flows(&a.against, a.against_labels.as_deref())?;
            let (mut ta, mut tb) = (domain_name(&flows, &a.inputs.input), domain_name(&other, &a.against));
            if ta == tb {
                ta.push_str("-a");
                tb.push_str("-b");
            }
            cross_domain_eval((&ta, &flows), (&tb, &other), &specs, &params, a.seed)?
        }
    };
    out.with_file("dg.csv", |w| Ok(report.write_pivot_csv(w)?))?;
    out.report("dg.json", a.seed, a, &report)
}

fn importance(a: &ImportanceArgs, out: &Out<'_>) -> Result<()> {
    let flows = load(&a.inputs)?;
    let (_, spec) = spec_arg(&a.spec, a.n.unwrap_or(a.stage.default_n()))?;
    let (x, y) = stage_matrix(&flows, &spec, a.stage)?;
    let params = Hyperparams::default_for(a.alg);
    if !a.alg.is_tree_based() {
        return Err(CliError::Input(format!(
            "{} does not expose impurity-based importances",
            a.alg
        )));
    }
    let model = fit(&params, &x, &y, a.seed)?;
    let imp = model.mdi_importance()?;
    let mut ranked: Vec<(usize, f64)> = imp.iter().copied().enumerate().collect();
    ranked.sort_by(|p, q| q.1.total_cmp(&p.1).then(p.0.cmp(&q.0)));
    ranked.truncate(a.top);
    #[derive(Serialize)]
    struct Entry<'a> {
        rank: usize,
        feature: &'a str,
        importance: f64,
    }
    let entries: Vec<Entry<'_>> = ranked
        .iter()
        .enumerate()
        .map(|(r, &(j, v))| Entry {
            rank: r + 1,
            feature: &x.column_names()[j],
            importance: v,
        })
        .collect();
    out.with_file("importance.csv", |w| {
        let mut c = csv::Writer::from_writer(w);
        let err = |e: csv::Error| CliError::Experiment(e.to_string());
        c.write_record(["rank", "feature", "importance"]).map_err(err)?;
        for e in &entries {
            c.write_record([e.rank.to_string(), e.feature.to_string(), render_real(e.importance)])
                .map_err(err)?;
        }
        c.flush().map_err(|e| CliError::Experiment(e.to_string()))
    })?;
    out.report("importance.json", a.seed, a, &entries)
}
