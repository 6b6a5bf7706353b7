use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::error::{contract, Result};
use crate::graph::{sensitive_balance, AttributedGraph, Edge};
use crate::rng::{stream, POOL, SUITE};
use crate::structure::{edit_edges, retarget_signed_balance, EditReport, PairKind};

/// How a pool structure was derived from the training structure.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    Unmodified,
    /// Add same-group edges, remove cross-group edges.
    Segregate,
    /// Add cross-group edges, remove same-group edges.
    Mix,
}

/// One modified structure of the graph pool.
#[derive(Clone, Debug, PartialEq)]
pub struct PoolGraph {
    pub edges: Vec<Edge>,
    pub strategy: Strategy,
    pub report: EditReport,
    pub mean_balance: f64,
    pub mean_signed: f64,
}

impl PoolGraph {
    fn new(sensitive: &[u8], edges: Vec<Edge>, strategy: Strategy, report: EditReport) -> Self {
        let stats = sensitive_balance(sensitive, &edges);
        Self { edges, strategy, report, mean_balance: stats.mean_balance, mean_signed: stats.mean_signed }
    }
}

/// `count` structures, alternating the two strategies, each adding and
/// removing `⌊r·|E|⌋` edges, in a seeded shuffled order. Shortfalls are
/// recorded in each entry's report.
pub fn build_graph_pool(g: &AttributedGraph, ratio: f64, count: usize, seed: u64) -> Result<Vec<PoolGraph>> {
    if count == 0 {
        return Err(contract("pool size must be at least 1"));
    }
    if !(0.0..=1.0).contains(&ratio) {
        return Err(contract("edit ratio must lie in [0, 1]"));
    }
    let edits = libm::floor(ratio * g.num_edges() as f64) as usize;
    if ratio > 0.0 && edits == 0 {
        return Err(contract("edit ratio times edge count is below one edge"));
    }
    let mut rng = stream(seed, POOL);
    let s = g.sensitive();
    let mut pool: Vec<PoolGraph> = (0..count)
        .map(|i| {
            if edits == 0 {
                return PoolGraph::new(s, g.edges().to_vec(), Strategy::Unmodified, EditReport::default());
            }
            let (strategy, add) = if i % 2 == 0 { (Strategy::Segregate, PairKind::Same) } else { (Strategy::Mix, PairKind::Cross) };
            let (edges, report) = edit_edges(s, g.edges(), add, edits, add.opposite(), edits, &mut rng);
            PoolGraph::new(s, edges, strategy, report)
        })
        .collect();
    pool.shuffle(&mut rng);
    Ok(pool)
}

/// A structure-shifted copy of a base graph.
#[derive(Clone, Debug, PartialEq)]
pub struct SuiteGraph {
    pub graph: AttributedGraph,
    pub target: f64,
    pub achieved: f64,
}

/// Tolerance the suite aims for internally; the contract is ±0.05.
pub const SUITE_TOL: f64 = 0.02;

/// Rewires `base` to each target mean signed balance. Features, labels and
/// masks are untouched; the edge count is preserved.
pub fn make_sync_suite(base: &AttributedGraph, targets: &[f64], seed: u64) -> Result<Vec<SuiteGraph>> {
    targets
        .iter()
        .enumerate()
        .map(|(i, &target)| {
            let mut rng = stream(seed.wrapping_add(i as u64), SUITE);
            let (edges, achieved) = retarget_signed_balance(base.sensitive(), base.edges(), target, SUITE_TOL, &mut rng)?;
            Ok(SuiteGraph { graph: base.with_edges(edges)?, target, achieved })
        })
        .collect()
}
