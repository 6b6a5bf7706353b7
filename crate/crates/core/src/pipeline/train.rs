use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::{contract, Result};
use crate::graph::{group_mean_gap, group_mean_gap_rms, mask_indices, AttributedGraph, GroupIndex};
use crate::metrics::{accuracy, MetricsRecord};
use crate::model::{Backbone, FatraModel, GraphView, LossBundle};
use crate::ndmath::SparseOperator;
use crate::rng::INIT;

use super::config::TrainConfig;
use super::pool::{build_graph_pool, PoolGraph};

/// Optimiser step groups executed, by schedule slot.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepCounters {
    pub t1: usize,
    pub t2: usize,
    pub t3: usize,
    pub t4: usize,
    pub t5: usize,
}

impl StepCounters {
    pub fn total(&self) -> usize {
        self.t1 + self.t2 + self.t3 + self.t4 + self.t5
    }
}

/// What happened in one epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Per-slot mean loss over the epoch's steps.
    pub losses: LossBundle,
    pub val: MetricsRecord,
    /// Hard-label training accuracy in percent after the epoch.
    pub train_acc: f64,
    /// Pool index used for T4/T5, if generation ran.
    pub pool_index: Option<usize>,
    /// Signed and root-mean-square per-channel group-mean gap of `Γ(X)`.
    pub generated_gap: Option<(f64, f64)>,
}

/// Full history of a run plus the selected checkpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub method: String,
    pub seed: u64,
    pub config: TrainConfig,
    pub epochs: Vec<EpochRecord>,
    /// Epoch with the highest validation composite (earliest on ties).
    pub selected_epoch: usize,
    pub counters: StepCounters,
    /// Named test-graph results, filled in by the caller.
    pub tests: Vec<(String, MetricsRecord)>,
}

impl RunRecord {
    pub fn selected(&self) -> &EpochRecord {
        &self.epochs[self.selected_epoch]
    }
}

struct Prepared {
    view: GraphView,
    train: Vec<usize>,
    val: Vec<usize>,
    groups: GroupIndex,
}

fn prepare(g: &AttributedGraph, model: &FatraModel) -> Result<Prepared> {
    let train = g.train_nodes();
    let val = g.val_nodes();
    if train.is_empty() || val.is_empty() {
        return Err(contract("training and validation masks must be nonempty"));
    }
    let groups = GroupIndex::build(g.sensitive(), g.labels(), Some(g.train_mask()));
    if !groups.all_eo_nonempty() {
        return Err(contract("every (sensitive, label) group must appear among training nodes"));
    }
    let val_groups = GroupIndex::build(g.sensitive(), g.labels(), Some(g.val_mask()));
    if val_groups.sensitive_empty().contains(&true) || val.iter().all(|&i| g.labels()[i] == g.labels()[val[0]]) {
        return Err(contract("validation nodes must cover both sensitive groups and both labels"));
    }
    Ok(Prepared { view: model.view(g)?, train, val, groups })
}

fn epoch_metrics(model: &FatraModel, p: &Prepared) -> Result<(MetricsRecord, f64)> {
    let pred = model.predict_view(&p.view)?;
    let val = MetricsRecord::evaluate(&pred, &p.view.labels, &p.view.sensitive, &p.val)?;
    let train_pred = pred.select(&p.train);
    let train_labels: Vec<u8> = p.train.iter().map(|&i| p.view.labels[i]).collect();
    Ok((val, 100.0 * accuracy(&train_pred, &train_labels)?))
}

fn mean_of(sum: f64, count: usize) -> f64 {
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// The five-step adversarial / generative schedule. `g` must carry its
/// train and validation masks. Returns the checkpoint with the best
/// validation composite score.
pub fn train_fatragnn(g: &AttributedGraph, config: &TrainConfig) -> Result<(FatraModel, RunRecord)> {
    config.validate()?;
    let mut model = FatraModel::new(config.dims(g.feature_dim()), Backbone::Gcn, config.lr, config.tau, config.seed.wrapping_add(INIT));
    let p = prepare(g, &model)?;
    let c = config.components;

    let pool: Vec<Arc<SparseOperator>> = if !c.generation {
        Vec::new()
    } else if !c.modification {
        alloc::vec![g.mean_aggregator()]
    } else {
        build_graph_pool(g, config.edit_ratio, config.pool_size, config.seed)?
            .iter()
            .map(|PoolGraph { edges, .. }| Arc::new(crate::graph::mean_aggregator(g.n(), edges)))
            .collect()
    };

    let mut counters = StepCounters::default();
    let mut epochs = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, FatraModel)> = None;
    for epoch in 0..config.epochs {
        let mut sums = LossBundle::default();
        if c.adversarial {
            for _ in 0..config.t1 {
                sums.adversarial += model.discriminator_step(&p.view, &p.train)?;
                counters.t1 += 1;
            }
            for _ in 0..config.t2 {
                model.encoder_adversarial_step(&p.view, &p.train)?;
                counters.t2 += 1;
            }
        }
        for _ in 0..config.t3 {
            sums.classification += model.classification_step(&p.view, &p.train)?;
            counters.t3 += 1;
        }
        let mut pool_index = None;
        if c.generation && !pool.is_empty() {
            let k = (epoch / config.swap_period) % pool.len();
            pool_index = Some(k);
            let agg = Some(&pool[k]);
            for _ in 0..config.t4 {
                sums.generator += model.generator_step(&p.view, agg, &p.groups)?;
                counters.t4 += 1;
            }
            if c.alignment {
                for _ in 0..config.t5 {
                    sums.alignment += model.alignment_step(&p.view, agg, &p.groups)?;
                    counters.t5 += 1;
                }
            }
        }
        let losses = LossBundle {
            adversarial: mean_of(sums.adversarial, if c.adversarial { config.t1 } else { 0 }),
            classification: mean_of(sums.classification, config.t3),
            generator: mean_of(sums.generator, if pool_index.is_some() { config.t4 } else { 0 }),
            alignment: mean_of(sums.alignment, if pool_index.is_some() && c.alignment { config.t5 } else { 0 }),
        };
        let generated_gap = if c.generation {
            let x = model.generate(&p.view.features)?;
            Some((group_mean_gap(&x, &p.view.sensitive), group_mean_gap_rms(&x, &p.view.sensitive)))
        } else {
            None
        };
        let (val, train_acc) = epoch_metrics(&model, &p)?;
        if best.as_ref().is_none_or(|(s, _, _)| val.composite > *s) {
            best = Some((val.composite, epoch, model.clone()));
        }
        epochs.push(EpochRecord { epoch, losses, val, train_acc, pool_index, generated_gap });
    }
    finish(best, "fatragnn", config, epochs, counters)
}

fn finish(
    best: Option<(f64, usize, FatraModel)>,
    method: &str,
    config: &TrainConfig,
    epochs: Vec<EpochRecord>,
    counters: StepCounters,
) -> Result<(FatraModel, RunRecord)> {
    let (_, selected_epoch, model) = best.ok_or_else(|| contract("at least one epoch is required"))?;
    let record = RunRecord { method: String::from(method), seed: config.seed, config: config.clone(), epochs, selected_epoch, counters, tests: Vec::new() };
    Ok((model, record))
}

/// Classification-only training (T3 steps each epoch) with a GCN or an
/// edge-blind MLP encoder.
pub fn train_baseline(g: &AttributedGraph, kind: Backbone, config: &TrainConfig) -> Result<(FatraModel, RunRecord)> {
    config.validate()?;
    let mut model = FatraModel::new(config.dims(g.feature_dim()), kind, config.lr, config.tau, config.seed.wrapping_add(INIT));
    let p = prepare(g, &model)?;
    let mut counters = StepCounters::default();
    let mut epochs = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, FatraModel)> = None;
    for epoch in 0..config.epochs {
        let mut sum = 0.0;
        for _ in 0..config.t3 {
            sum += model.classification_step(&p.view, &p.train)?;
            counters.t3 += 1;
        }
        let (val, train_acc) = epoch_metrics(&model, &p)?;
        if best.as_ref().is_none_or(|(s, _, _)| val.composite > *s) {
            best = Some((val.composite, epoch, model.clone()));
        }
        let losses = LossBundle { classification: mean_of(sum, config.t3), ..LossBundle::default() };
        epochs.push(EpochRecord { epoch, losses, val, train_acc, pool_index: None, generated_gap: None });
    }
    let method = match kind {
        Backbone::Gcn => "gcn",
        Backbone::Mlp => "mlp",
    };
    finish(best, method, config, epochs, counters)
}

/// Metrics over every node of a test graph.
pub fn evaluate(model: &FatraModel, g: &AttributedGraph) -> Result<MetricsRecord> {
    let pred = model.predict(g)?;
    MetricsRecord::evaluate_all(&pred, g.labels(), g.sensitive())
}

/// Metrics over the nodes selected by `mask`.
pub fn evaluate_masked(model: &FatraModel, g: &AttributedGraph, mask: &[bool]) -> Result<MetricsRecord> {
    let pred = model.predict(g)?;
    MetricsRecord::evaluate(&pred, g.labels(), g.sensitive(), &mask_indices(mask))
}
