//! The six subcommands. Each writes its result files under `--out` and
//! returns their paths.
//!
//! Seeds: every run takes one user seed; the split, model init, pool and
//! suite streams add fixed offsets (see `fatra_core::rng`). `synth` samples
//! the training graph from `seed + 5` and the suite base from
//! `seed + 5 + 2^32`.

use std::fs;
use std::path::{Path, PathBuf};

use fatra_core::pipeline::{
    evaluate, make_sync_suite, random_split, train_baseline, train_fatragnn, RunRecord, TrainConfig, Variant,
};
use fatra_core::rng::{SPLIT, SYNTH};
use fatra_core::theory::{check_eo_lipschitz, check_shift, random_instance, sample_gaussian_graph, verify_pair_bound, BoundCertificate, Verdict};
use fatra_core::{AttributedGraph, Backbone, FatraModel, MetricsRecord};
use rayon::prelude::*;
use serde_json::Value;

use crate::checkpoint;
use crate::config::{Experiment, Method, SpecSection, SuiteEntry, SuiteFile};
use crate::dataset::{self, write_dataset, Summary, MANIFEST_FILE};
use crate::error::{io_err, CliError, Result};
use crate::records;
use crate::report::{mean_std, Cell, Format, Table};

/// Flags shared by every subcommand.
#[derive(Clone, Debug, PartialEq)]
pub struct Common {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub format: Format,
}

impl Common {
    fn experiment(&self) -> Result<Experiment> {
        match &self.config {
            Some(path) => Experiment::load(path),
            None => Experiment::parse("", Path::new("<defaults>")),
        }
    }

    fn seeds(&self, exp: &Experiment) -> Vec<u64> {
        match self.seed {
            Some(s) => vec![s],
            None => exp.seeds.clone(),
        }
    }

    fn out_dir(&self) -> Result<&Path> {
        fs::create_dir_all(&self.out).map_err(io_err(&self.out))?;
        Ok(&self.out)
    }
}

/// Training graph (unsplit) and named testing graphs.
pub struct Data {
    pub train: AttributedGraph,
    pub tests: Vec<(String, AttributedGraph)>,
}

fn ingest_verbose(name: &str, m: &dataset::DatasetManifest) -> Result<AttributedGraph> {
    let ingested = dataset::ingest(m)?;
    for w in &ingested.warnings {
        eprintln!("warning: {w}");
    }
    println!("{name}: {}", ingested.summary);
    Ok(ingested.graph)
}

pub fn load_data(exp: &Experiment) -> Result<Data> {
    let train = ingest_verbose("train", &exp.train_manifest()?)?;
    let tests = load_tests(exp)?;
    Ok(Data { train, tests })
}

fn load_tests(exp: &Experiment) -> Result<Vec<(String, AttributedGraph)>> {
    exp.test_manifests()?.into_iter().map(|(name, m)| Ok((name.clone(), ingest_verbose(&name, &m)?))).collect()
}

pub fn split_for(g: &AttributedGraph, seed: u64) -> Result<AttributedGraph> {
    let (train, val) = random_split(g.n(), seed.wrapping_add(SPLIT));
    Ok(g.clone().with_split(train, val)?)
}

/// Trains one model and evaluates it on every testing graph.
pub fn run_one(method: Method, g: &AttributedGraph, tests: &[(String, AttributedGraph)], config: &TrainConfig) -> Result<(FatraModel, RunRecord)> {
    let g = split_for(g, config.seed)?;
    let (model, mut record) = match method {
        Method::Fatragnn => train_fatragnn(&g, config)?,
        Method::Gcn => train_baseline(&g, Backbone::Gcn, config)?,
        Method::Mlp => train_baseline(&g, Backbone::Mlp, config)?,
    };
    record.tests = evaluate_all(&model, tests)?;
    Ok((model, record))
}

fn evaluate_all(model: &FatraModel, tests: &[(String, AttributedGraph)]) -> Result<Vec<(String, MetricsRecord)>> {
    tests.iter().map(|(name, t)| Ok((name.clone(), evaluate(model, t)?))).collect()
}

const METRIC_HEADERS: [&str; 5] = ["ACC", "ROC-AUC", "ΔDP", "ΔEO", "s"];

fn metric_cells(m: &MetricsRecord) -> Vec<Cell> {
    [m.acc, m.roc_auc, m.delta_dp, m.delta_eo, m.composite].into_iter().map(Cell::Num).collect()
}

fn headers(lead: &[&str]) -> Vec<String> {
    lead.iter().chain(METRIC_HEADERS.iter()).map(|s| s.to_string()).collect()
}

/// Mean over testing graphs, metric by metric.
fn mean_record(tests: &[(String, MetricsRecord)]) -> [f64; 5] {
    let mut acc = [0.0; 5];
    for (_, m) in tests {
        for (a, v) in acc.iter_mut().zip([m.acc, m.roc_auc, m.delta_dp, m.delta_eo, m.composite]) {
            *a += v;
        }
    }
    acc.map(|a| a / tests.len() as f64)
}

fn write_text(path: PathBuf, text: &str) -> Result<PathBuf> {
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(path)
}

pub fn train(common: &Common) -> Result<Vec<PathBuf>> {
    let exp = common.experiment()?;
    let data = load_data(&exp)?;
    let seeds = common.seeds(&exp);
    let runs: Vec<(FatraModel, RunRecord)> = seeds
        .par_iter()
        .map(|&seed| run_one(exp.method, &data.train, &data.tests, &exp.train_config(seed)))
        .collect::<Result<_>>()?;

    let out = common.out_dir()?;
    let mut written = Vec::new();
    let mut table = Table::new(headers(&["seed", "graph"]));
    for (model, record) in &runs {
        let s = record.seed;
        let ckpt = out.join(format!("checkpoint_seed{s}.txt"));
        checkpoint::save(model, &ckpt)?;
        written.push(ckpt);
        written.push(write_text(out.join(format!("run_seed{s}.json")), &format!("{}\n", records::run(record)))?);
        for (name, m) in &record.tests {
            let mut row = vec![Cell::Text(s.to_string()), Cell::Text(name.clone())];
            row.extend(metric_cells(m));
            table.push(row);
        }
    }
    written.push(table.write(out, "metrics", common.format)?);

    let mut summary = Table::new(headers(&["graph"]));
    for (i, (name, _)) in data.tests.iter().enumerate() {
        let mut row = vec![Cell::Text(name.clone())];
        for k in 0..5 {
            let values: Vec<f64> = runs.iter().map(|(_, r)| metric_array(&r.tests[i].1)[k]).collect();
            let (mean, std) = mean_std(&values);
            row.push(Cell::Spread(mean, std));
        }
        summary.push(row);
    }
    written.push(summary.write(out, "summary", common.format)?);
    Ok(written)
}

fn metric_array(m: &MetricsRecord) -> [f64; 5] {
    [m.acc, m.roc_auc, m.delta_dp, m.delta_eo, m.composite]
}

pub fn eval(common: &Common, checkpoint_path: &Path) -> Result<Vec<PathBuf>> {
    let exp = common.experiment()?;
    let model = checkpoint::load(checkpoint_path)?;
    let tests = load_tests(&exp)?;
    let results = evaluate_all(&model, &tests)?;
    let out = common.out_dir()?;
    let mut table = Table::new(headers(&["graph"]));
    for (name, m) in &results {
        let mut row = vec![Cell::Text(name.clone())];
        row.extend(metric_cells(m));
        table.push(row);
    }
    let json: Vec<Value> = results
        .iter()
        .map(|(name, m)| {
            let mut v = records::metrics(m);
            v["graph"] = Value::from(name.as_str());
            v
        })
        .collect();
    Ok(vec![table.write(out, "metrics", common.format)?, write_text(out.join("metrics.jsonl"), &records::json_lines(&json))?])
}

/// Parses `a:b:step` into the inclusive grid `a, a+step, …, b`.
pub fn parse_targets(s: &str) -> std::result::Result<Vec<f64>, String> {
    let parts: Vec<f64> = s.split(':').map(|p| p.trim().parse::<f64>().map_err(|_| format!("bad number `{p}`"))).collect::<std::result::Result<_, _>>()?;
    let [a, b, step] = parts[..] else {
        return Err("expected a:b:step".into());
    };
    if !(step > 0.0) || b < a {
        return Err("need step > 0 and a <= b".into());
    }
    let count = ((b - a) / step + 1e-9).floor() as usize + 1;
    // Round to suppress accumulation noise such as 0.30000000000000004.
    Ok((0..count).map(|i| ((a + i as f64 * step) * 1e9).round() / 1e9 + 0.0).collect())
}

/// Default synthetic graph: 1000 nodes, 16 channels, a 0.5 group-mean
/// gap, labels thresholded on the first channel with 5% noise.
pub fn default_spec(signed_balance: f64) -> SpecSection {
    SpecSection {
        nodes: 1000,
        dim: 16,
        mu1: 0.5,
        mu0: 0.0,
        sigma1: 1.0,
        sigma0: 1.0,
        signed_balance,
        group_fraction: 0.5,
        mean_degree: 10.0,
        label_channel: Some(0),
        label_threshold: 0.25,
        label_flip: 0.05,
        positive_rate: 0.5,
    }
}

pub const DEFAULT_TARGETS: [f64; 5] = [-0.4, -0.2, 0.0, 0.2, 0.4];
/// Signed balance of the default training graph.
pub const DEFAULT_TRAIN_BALANCE: f64 = 0.15;

pub fn synth(common: &Common, targets: Option<Vec<f64>>) -> Result<Vec<PathBuf>> {
    let exp = common.experiment()?;
    let seed = common.seeds(&exp)[0];
    let s = &exp.synth;
    let train_seed = seed.wrapping_add(SYNTH);
    let base_seed = train_seed.wrapping_add(1 << 32);
    let targets = targets.unwrap_or_else(|| if s.targets.is_empty() { DEFAULT_TARGETS.to_vec() } else { s.targets.clone() });

    let base = match (&s.base, &s.base_dataset) {
        (Some(_), Some(_)) => return Err(CliError::Usage("[synth] takes `base` or `base_dataset`, not both".into())),
        (_, Some(entry)) => ingest_verbose("base", &entry.manifest(&exp.dir)?)?,
        (spec, None) => sample_gaussian_graph(&spec.clone().unwrap_or_else(|| default_spec(0.0)).to_spec(base_seed))?,
    };
    let train_graph = if s.base_dataset.is_some() && s.train.is_none() {
        None
    } else {
        let spec = s.train.clone().unwrap_or_else(|| default_spec(DEFAULT_TRAIN_BALANCE));
        Some(sample_gaussian_graph(&spec.to_spec(train_seed))?)
    };
    let suite = make_sync_suite(&base, &targets, seed)?;

    let out = common.out_dir()?;
    let mut written = Vec::new();
    let mut index = SuiteFile::default();
    let mut report = Table::new(["graph", "target u'", "achieved u'", "|error|", "nodes", "edges", "u", "α"]);
    let mut describe = |name: &str, g: &AttributedGraph, target: Option<f64>| -> Result<SuiteEntry> {
        write_dataset(g, &out.join(name))?;
        written.push(out.join(name).join(MANIFEST_FILE));
        let sm = Summary::of(g);
        report.push(vec![
            Cell::Text(name.to_string()),
            target.map_or(Cell::Text("-".into()), Cell::Num),
            Cell::Num(sm.signed_balance),
            target.map_or(Cell::Text("-".into()), |t| Cell::Num((sm.signed_balance - t).abs())),
            Cell::Text(sm.nodes.to_string()),
            Cell::Text(sm.edges.to_string()),
            Cell::Num(sm.balance),
            Cell::Num(sm.homophily),
        ]);
        Ok(SuiteEntry { name: name.to_string(), manifest: Path::new(name).join(MANIFEST_FILE), target, signed_balance: sm.signed_balance })
    };
    if let Some(g) = &train_graph {
        index.train = Some(describe("train", g, None)?);
    }
    for (i, sg) in suite.iter().enumerate() {
        index.test.push(describe(&format!("g{i}"), &sg.graph, Some(sg.target))?);
    }
    let text = toml::to_string(&index).map_err(|e| CliError::Usage(e.to_string()))?;
    written.push(write_text(out.join("suite.toml"), &text)?);
    written.push(report.write(out, "suite_report", common.format)?);
    Ok(written)
}

/// Specs for the pair-distance certificate when none are configured:
/// 1000 nodes, 400 channels, gaps {0, 0.5} × balances {0, 0.3}.
pub fn default_pair_specs() -> Vec<SpecSection> {
    let mut out = Vec::new();
    for gap in [0.0, 0.5] {
        for u in [0.0, 0.3] {
            out.push(SpecSection { dim: 400, mu1: gap, label_channel: None, signed_balance: u, ..default_spec(u) });
        }
    }
    out
}

pub fn theory_check(common: &Common) -> Result<Vec<PathBuf>> {
    let exp = common.experiment()?;
    let seed = common.seeds(&exp)[0];
    let th = &exp.theory;
    let specs = if th.pair_specs.is_empty() { default_pair_specs() } else { th.pair_specs.clone() };

    let pair_certs: Vec<(BoundCertificate, String)> = specs
        .par_iter()
        .enumerate()
        .map(|(i, sp)| {
            let spec = sp.to_spec(seed.wrapping_add(SYNTH).wrapping_add(i as u64));
            let ctx = format!("spec{i} n={} dim={} gap={} u'={}", spec.n, spec.dim, spec.mu1 - spec.mu0, spec.signed_balance);
            Ok((verify_pair_bound(&spec, th.delta, th.trials)?, ctx))
        })
        .collect::<Result<_>>()?;
    let model_certs: Vec<Vec<(BoundCertificate, String)>> = (0..th.instances)
        .into_par_iter()
        .map(|i| {
            let inst = random_instance(seed.wrapping_mul(1 << 20).wrapping_add(i as u64))?;
            let ctx = format!("instance{i}");
            let mut out = vec![(check_eo_lipschitz(&inst.train, &inst.model)?, ctx.clone())];
            for c in check_shift(&inst.train, &inst.test, &inst.model)? {
                out.push((c, ctx.clone()));
            }
            for c in check_shift(&inst.train, &inst.train, &inst.model)? {
                out.push((c, format!("{ctx} identical")));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let all: Vec<(BoundCertificate, String)> = pair_certs.into_iter().chain(model_certs.into_iter().flatten()).collect();

    let out = common.out_dir()?;
    let json: Vec<Value> = all.iter().map(|(c, ctx)| records::certificate(c, ctx)).collect();
    let mut written = vec![write_text(out.join("certificates.jsonl"), &records::json_lines(&json))?];

    let mut table = Table::new(["theorem", "checked", "holds", "violated", "skipped", "min slack"]);
    let mut ids: Vec<&str> = Vec::new();
    for (c, _) in &all {
        if !ids.contains(&c.theorem.id()) {
            ids.push(c.theorem.id());
        }
    }
    for id in ids {
        let certs: Vec<&BoundCertificate> = all.iter().map(|(c, _)| c).filter(|c| c.theorem.id() == id).collect();
        let count = |v: Verdict| certs.iter().filter(|c| c.verdict == v).count();
        let slack = certs.iter().filter(|c| c.verdict != Verdict::Skipped).map(|c| c.slack).fold(f64::INFINITY, f64::min);
        table.push(vec![
            Cell::Text(id.to_string()),
            Cell::Text(certs.len().to_string()),
            Cell::Text(count(Verdict::Holds).to_string()),
            Cell::Text(count(Verdict::Violated).to_string()),
            Cell::Text(count(Verdict::Skipped).to_string()),
            if slack.is_finite() { Cell::Num(slack) } else { Cell::Text("-".into()) },
        ]);
    }
    written.push(table.write(out, "theory_summary", common.format)?);
    Ok(written)
}

pub fn ablate(common: &Common) -> Result<Vec<PathBuf>> {
    let exp = common.experiment()?;
    let data = load_data(&exp)?;
    let seeds = common.seeds(&exp);
    let jobs: Vec<(Variant, u64)> = Variant::ALL.iter().flat_map(|&v| seeds.iter().map(move |&s| (v, s))).collect();
    let runs: Vec<RunRecord> = jobs
        .par_iter()
        .map(|&(v, seed)| {
            let config = exp.train_config(seed).with_variant(v);
            Ok(run_one(Method::Fatragnn, &data.train, &data.tests, &config)?.1)
        })
        .collect::<Result<_>>()?;

    let out = common.out_dir()?;
    let mut table = Table::new(["variant", "ACC", "ROC-AUC", "ΔDP", "ΔEO"]);
    let mut long = Table::new(headers(&["variant", "seed", "graph"]));
    for (vi, v) in Variant::ALL.iter().enumerate() {
        let chunk = &runs[vi * seeds.len()..(vi + 1) * seeds.len()];
        let per_seed: Vec<[f64; 5]> = chunk.iter().map(|r| mean_record(&r.tests)).collect();
        let mut row = vec![Cell::Text(v.label().to_string())];
        for k in 0..4 {
            let (mean, std) = mean_std(&per_seed.iter().map(|m| m[k]).collect::<Vec<_>>());
            row.push(Cell::Spread(mean, std));
        }
        table.push(row);
        for r in chunk {
            for (name, m) in &r.tests {
                let mut row = vec![Cell::Text(v.label().to_string()), Cell::Text(r.seed.to_string()), Cell::Text(name.clone())];
                row.extend(metric_cells(m));
                long.push(row);
            }
        }
    }
    let json: Vec<Value> = runs.iter().map(records::run).collect();
    Ok(vec![
        table.write(out, "ablation", common.format)?,
        long.write(out, "ablation_runs", common.format)?,
        write_text(out.join("runs.jsonl"), &records::json_lines(&json))?,
    ])
}

/// Cartesian product of the sweep grid, keys in sorted order.
pub fn grid_points(grid: &std::collections::BTreeMap<String, Vec<toml::Value>>) -> Vec<Vec<(String, toml::Value)>> {
    let mut points: Vec<Vec<(String, toml::Value)>> = vec![Vec::new()];
    for (key, values) in grid {
        points = points
            .into_iter()
            .flat_map(|p| values.iter().map(move |v| {
                let mut q = p.clone();
                q.push((key.clone(), v.clone()));
                q
            }))
            .collect();
    }
    points
}

pub fn sweep(common: &Common) -> Result<Vec<PathBuf>> {
    let exp = common.experiment()?;
    if exp.sweep.grid.is_empty() {
        return Err(CliError::Config { path: exp.path.clone(), message: "`sweep.grid` is empty".into() });
    }
    let data = load_data(&exp)?;
    let seeds = common.seeds(&exp);
    let points = grid_points(&exp.sweep.grid);
    let mut configs = Vec::new();
    for point in &points {
        let mut e = exp.clone();
        for (k, v) in point {
            e.overrides = e.with_override(k, v)?;
        }
        let c = e.train_config(0);
        c.validate().map_err(|err| CliError::Config { path: exp.path.clone(), message: format!("sweep point {point:?}: {err}") })?;
        configs.push(e);
    }
    let jobs: Vec<(usize, u64)> = (0..points.len()).flat_map(|p| seeds.iter().map(move |&s| (p, s))).collect();
    let runs: Vec<RunRecord> = jobs
        .par_iter()
        .map(|&(p, seed)| Ok(run_one(exp.method, &data.train, &data.tests, &configs[p].train_config(seed))?.1))
        .collect::<Result<_>>()?;

    let out = common.out_dir()?;
    let keys: Vec<&str> = exp.sweep.grid.keys().map(String::as_str).collect();
    let mut head = vec!["point"];
    head.extend(&keys);
    head.extend(["seed", "ΔEO", "ACC"]);
    let mut table = Table::new(head);
    for (&(p, seed), r) in jobs.iter().zip(&runs) {
        let m = mean_record(&r.tests);
        let mut row = vec![Cell::Text(p.to_string())];
        row.extend(points[p].iter().map(|(_, v)| Cell::Text(v.to_string())));
        row.extend([Cell::Text(seed.to_string()), Cell::Num(m[3]), Cell::Num(m[0])]);
        table.push(row);
    }
    let json: Vec<Value> = runs.iter().map(records::run).collect();
    Ok(vec![table.write(out, "sweep", common.format)?, write_text(out.join("runs.jsonl"), &records::json_lines(&json))?])
}
