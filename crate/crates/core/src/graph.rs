//! Attributed graphs, mean aggregation and structural fairness statistics.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::ndmath::{CsrMatrix, Matrix, SparseOperator};

/// Undirected edge stored with the smaller endpoint first.
pub type Edge = (usize, usize);

/// What was discarded while canonicalising an edge list.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EdgeCleanup {
    pub self_loops: usize,
    pub duplicates: usize,
}

/// Orders endpoints, drops self-loops and repeated pairs, and sorts.
pub fn canonical_edges(n: usize, raw: impl IntoIterator<Item = Edge>) -> Result<(Vec<Edge>, EdgeCleanup)> {
    let mut set = BTreeSet::new();
    let mut cleanup = EdgeCleanup::default();
    for (a, b) in raw {
        if a >= n || b >= n {
            return Err(Error::InvalidGraph(format!("edge ({a}, {b}) out of range for {n} nodes")));
        }
        if a == b {
            cleanup.self_loops += 1;
            continue;
        }
        if !set.insert((a.min(b), a.max(b))) {
            cleanup.duplicates += 1;
        }
    }
    Ok((set.into_iter().collect(), cleanup))
}

/// Node features, binary sensitive attribute and label, undirected edges
/// and the train/validation split.
#[derive(Clone, Debug, PartialEq)]
pub struct AttributedGraph {
    edges: Vec<Edge>,
    features: Matrix,
    sensitive: Vec<u8>,
    labels: Vec<u8>,
    sensitive_channel: Option<usize>,
    train_mask: Vec<bool>,
    val_mask: Vec<bool>,
}

impl AttributedGraph {
    /// Validates and canonicalises. Self-loops and duplicate pairs are
    /// dropped; use [`canonical_edges`] first to learn how many.
    pub fn new(features: Matrix, edges: Vec<Edge>, sensitive: Vec<u8>, labels: Vec<u8>) -> Result<Self> {
        let n = features.rows();
        if sensitive.len() != n || labels.len() != n {
            return Err(Error::InvalidGraph(format!(
                "{} feature rows but {} sensitive values and {} labels",
                n,
                sensitive.len(),
                labels.len()
            )));
        }
        if let Some(i) = sensitive.iter().position(|&f| f > 1) {
            return Err(Error::InvalidGraph(format!("sensitive value at node {i} is not binary")));
        }
        if let Some(i) = labels.iter().position(|&y| y > 1) {
            return Err(Error::InvalidGraph(format!("label at node {i} is not binary")));
        }
        if !features.is_finite() {
            return Err(Error::InvalidGraph("non-finite feature".into()));
        }
        let (edges, _) = canonical_edges(n, edges)?;
        Ok(Self {
            edges,
            features,
            sensitive,
            labels,
            sensitive_channel: None,
            train_mask: vec![false; n],
            val_mask: vec![false; n],
        })
    }

    /// Declares that feature column `t` duplicates the sensitive attribute.
    pub fn with_sensitive_channel(mut self, t: usize) -> Result<Self> {
        if t >= self.features.cols() {
            return Err(Error::InvalidGraph(format!("sensitive channel {t} out of range")));
        }
        for i in 0..self.n() {
            if self.features.get(i, t) != f64::from(self.sensitive[i]) {
                return Err(Error::InvalidGraph(format!("column {t} differs from the sensitive attribute at node {i}")));
            }
        }
        self.sensitive_channel = Some(t);
        Ok(self)
    }

    /// Removes the sensitive channel from the features, if one is declared.
    pub fn drop_sensitive_channel(mut self) -> Self {
        if let Some(t) = self.sensitive_channel.take() {
            self.features = self.features.without_column(t);
        }
        self
    }

    pub fn with_split(mut self, train_mask: Vec<bool>, val_mask: Vec<bool>) -> Result<Self> {
        let n = self.n();
        if train_mask.len() != n || val_mask.len() != n {
            return Err(Error::InvalidGraph("mask length differs from node count".into()));
        }
        if train_mask.iter().zip(&val_mask).any(|(&a, &b)| a && b) {
            return Err(Error::InvalidGraph("train and validation masks overlap".into()));
        }
        self.train_mask = train_mask;
        self.val_mask = val_mask;
        Ok(self)
    }

    /// Same nodes, different structure.
    pub fn with_edges(&self, edges: Vec<Edge>) -> Result<Self> {
        let (edges, _) = canonical_edges(self.n(), edges)?;
        Ok(Self { edges, ..self.clone() })
    }

    /// Same structure, different features. Drops the sensitive-channel tag.
    pub fn with_features(&self, features: Matrix) -> Result<Self> {
        if features.rows() != self.n() {
            return Err(Error::Dimension { op: "with_features", lhs: self.features.shape(), rhs: features.shape() });
        }
        Ok(Self { features, sensitive_channel: None, ..self.clone() })
    }

    pub fn n(&self) -> usize {
        self.features.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn sensitive(&self) -> &[u8] {
        &self.sensitive
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn sensitive_channel(&self) -> Option<usize> {
        self.sensitive_channel
    }

    pub fn train_mask(&self) -> &[bool] {
        &self.train_mask
    }

    pub fn val_mask(&self) -> &[bool] {
        &self.val_mask
    }

    pub fn train_nodes(&self) -> Vec<usize> {
        mask_indices(&self.train_mask)
    }

    pub fn val_nodes(&self) -> Vec<usize> {
        mask_indices(&self.val_mask)
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        adjacency(self.n(), &self.edges)
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n()];
        for &(a, b) in &self.edges {
            d[a] += 1;
            d[b] += 1;
        }
        d
    }

    /// `D̃⁻¹Ã` as a sparse operator (self-loops added here only).
    pub fn mean_aggregator(&self) -> Arc<SparseOperator> {
        Arc::new(mean_aggregator(self.n(), &self.edges))
    }

    /// Aggregated features `H = D̃⁻¹ÃX`.
    pub fn aggregate(&self) -> Matrix {
        mean_aggregator(self.n(), &self.edges)
            .apply(&self.features)
            .expect("aggregator shape matches features")
    }

    pub fn sensitive_balance(&self) -> BalanceStats {
        sensitive_balance(&self.sensitive, &self.edges)
    }

    /// Mean fraction of same-group nodes in each closed neighbourhood.
    pub fn sensitive_homophily(&self) -> f64 {
        let stats = self.sensitive_balance();
        mean(&stats.same_fraction)
    }

    pub fn group_partition(&self) -> GroupIndex {
        GroupIndex::build(&self.sensitive, &self.labels, None)
    }

    /// Partition restricted to the nodes where `mask` is set.
    pub fn group_partition_masked(&self, mask: &[bool]) -> GroupIndex {
        GroupIndex::build(&self.sensitive, &self.labels, Some(mask))
    }
}

pub fn mask_indices(mask: &[bool]) -> Vec<usize> {
    mask.iter().enumerate().filter_map(|(i, &m)| m.then_some(i)).collect()
}

pub fn adjacency(n: usize, edges: &[Edge]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    for list in &mut adj {
        list.sort_unstable();
    }
    adj
}

/// Row-normalised `A + I`.
pub fn mean_aggregator(n: usize, edges: &[Edge]) -> SparseOperator {
    let adj = adjacency(n, edges);
    let rows = adj
        .into_iter()
        .enumerate()
        .map(|(i, nb)| {
            let w = 1.0 / (nb.len() + 1) as f64;
            let mut row: Vec<(usize, f64)> = nb.into_iter().map(|j| (j, w)).collect();
            let pos = row.partition_point(|&(j, _)| j < i);
            row.insert(pos, (i, w));
            row
        })
        .collect();
    SparseOperator::new(CsrMatrix::from_row_entries(n, rows))
}

/// Per-node closed-neighbourhood composition.
#[derive(Clone, Debug, PartialEq)]
pub struct BalanceStats {
    /// `p_i`: share of `N_i ∪ {i}` in node i's sensitive group.
    pub same_fraction: Vec<f64>,
    /// `s_i = p_i − q_i`.
    pub signed: Vec<f64>,
    /// `u_i = |p_i − q_i|`.
    pub balance: Vec<f64>,
    /// `u`, the mean of `u_i`.
    pub mean_balance: f64,
    /// `u'`, the mean of `s_i`.
    pub mean_signed: f64,
}

pub fn sensitive_balance(sensitive: &[u8], edges: &[Edge]) -> BalanceStats {
    let n = sensitive.len();
    let mut same = vec![1usize; n];
    let mut total = vec![1usize; n];
    for &(a, b) in edges {
        total[a] += 1;
        total[b] += 1;
        if sensitive[a] == sensitive[b] {
            same[a] += 1;
            same[b] += 1;
        }
    }
    let same_fraction: Vec<f64> = same.iter().zip(&total).map(|(&s, &t)| s as f64 / t as f64).collect();
    let signed: Vec<f64> = same
        .iter()
        .zip(&total)
        .map(|(&s, &t)| (2.0 * s as f64 - t as f64) / t as f64)
        .collect();
    let balance: Vec<f64> = signed.iter().map(|s| s.abs()).collect();
    BalanceStats {
        mean_balance: mean(&balance),
        mean_signed: mean(&signed),
        same_fraction,
        signed,
        balance,
    }
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Sensitive groups `V_f` and EO groups `V_f^y`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupIndex {
    /// Indexed by sensitive value f.
    pub sensitive: [Vec<usize>; 2],
    /// Indexed `[f][y]`.
    pub eo: [[Vec<usize>; 2]; 2],
}

impl GroupIndex {
    pub fn build(sensitive: &[u8], labels: &[u8], mask: Option<&[bool]>) -> Self {
        let mut g = Self { sensitive: Default::default(), eo: Default::default() };
        for (i, (&f, &y)) in sensitive.iter().zip(labels).enumerate() {
            if mask.is_some_and(|m| !m[i]) {
                continue;
            }
            g.sensitive[f as usize].push(i);
            g.eo[f as usize][y as usize].push(i);
        }
        g
    }

    pub fn eo_group(&self, f: usize, y: usize) -> &[usize] {
        &self.eo[f][y]
    }

    pub fn sensitive_empty(&self) -> [bool; 2] {
        [self.sensitive[0].is_empty(), self.sensitive[1].is_empty()]
    }

    /// `[f][y]` flags for empty EO groups.
    pub fn eo_empty(&self) -> [[bool; 2]; 2] {
        [
            [self.eo[0][0].is_empty(), self.eo[0][1].is_empty()],
            [self.eo[1][0].is_empty(), self.eo[1][1].is_empty()],
        ]
    }

    pub fn all_eo_nonempty(&self) -> bool {
        self.eo.iter().flatten().all(|g| !g.is_empty())
    }

    pub fn len(&self) -> usize {
        self.sensitive[0].len() + self.sensitive[1].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Mean over channels of `mean(X[V₁]) − mean(X[V₀])`.
pub fn group_mean_gap(features: &Matrix, sensitive: &[u8]) -> f64 {
    let diff = group_mean_difference(features, sensitive);
    mean(&diff)
}

/// Root-mean-square over channels of the group mean difference.
pub fn group_mean_gap_rms(features: &Matrix, sensitive: &[u8]) -> f64 {
    let diff = group_mean_difference(features, sensitive);
    libm::sqrt(mean(&diff.iter().map(|d| d * d).collect::<Vec<_>>()))
}

fn group_mean_difference(features: &Matrix, sensitive: &[u8]) -> Vec<f64> {
    let cols = features.cols();
    let mut sums = [vec![0.0; cols], vec![0.0; cols]];
    let mut counts = [0usize; 2];
    for (i, &f) in sensitive.iter().enumerate() {
        counts[f as usize] += 1;
        for (s, v) in sums[f as usize].iter_mut().zip(features.row(i)) {
            *s += v;
        }
    }
    (0..cols)
        .map(|c| {
            let m1 = if counts[1] > 0 { sums[1][c] / counts[1] as f64 } else { 0.0 };
            let m0 = if counts[0] > 0 { sums[0][c] / counts[0] as f64 } else { 0.0 };
            m1 - m0
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(x: Matrix, edges: Vec<Edge>, f: Vec<u8>) -> AttributedGraph {
        let n = f.len();
        AttributedGraph::new(x, edges, f, vec![0; n]).unwrap()
    }

    #[test]
    fn isolated_node_keeps_features() {
        let g = graph(Matrix::from_rows(&[[5.0, 7.0]]), vec![], vec![1]);
        assert_eq!(g.aggregate(), Matrix::from_rows(&[[5.0, 7.0]]));
    }

    #[test]
    fn single_edge_averages() {
        let g = graph(Matrix::from_rows(&[[2.0], [0.0]]), vec![(0, 1)], vec![0, 1]);
        // Dense oracle: (A + I) row-normalised times X.
        let dense = Matrix::from_rows(&[[0.5, 0.5], [0.5, 0.5]]);
        assert_eq!(g.aggregate(), dense.matmul(g.features()).unwrap());
        assert_eq!(g.aggregate(), Matrix::from_rows(&[[1.0], [1.0]]));
    }

    #[test]
    fn complete_graph_constant_features() {
        let n = 5;
        let edges = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let g = graph(Matrix::filled(n, 3, 1.25), edges, vec![0, 1, 0, 1, 1]);
        assert!(g.aggregate().as_slice().iter().all(|&v| (v - 1.25).abs() < 1e-15));
    }

    #[test]
    fn balance_examples() {
        let g = graph(Matrix::zeros(3, 1), vec![(0, 1)], vec![1, 1, 0]);
        assert_eq!(g.sensitive_balance().balance[0], 1.0);
        let g = graph(Matrix::zeros(2, 1), vec![(0, 1)], vec![1, 0]);
        assert_eq!(g.sensitive_balance().balance[0], 0.0);
    }

    #[test]
    fn path_balance_matches_hand_count() {
        // 0-1-2-3 with F = [1,1,0,0]
        // node0: {0,1} same 2/2 -> u=1
        // node1: {0,1,2} same 2/3 -> s=1/3
        // node2: {1,2,3} same 2/3 -> s=1/3
        // node3: {2,3} same 2/2 -> u=1
        let g = graph(Matrix::zeros(4, 1), vec![(0, 1), (1, 2), (2, 3)], vec![1, 1, 0, 0]);
        let s = g.sensitive_balance();
        let expected = [1.0, 1.0 / 3.0, 1.0 / 3.0, 1.0];
        for (a, b) in s.balance.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((s.mean_balance - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn homophily_edge_cases() {
        let g = graph(Matrix::zeros(1, 1), vec![], vec![0]);
        assert_eq!(g.sensitive_homophily(), 1.0);
        let g = graph(Matrix::zeros(4, 1), vec![(0, 1), (2, 3)], vec![0, 0, 1, 1]);
        assert_eq!(g.sensitive_homophily(), 1.0);
    }

    #[test]
    fn partition_examples() {
        let g = AttributedGraph::new(Matrix::zeros(4, 1), vec![], vec![0, 0, 1, 1], vec![0, 1, 0, 1]).unwrap();
        let p = g.group_partition();
        assert_eq!(p.eo, [[vec![0], vec![1]], [vec![2], vec![3]]]);
        let g = AttributedGraph::new(Matrix::zeros(3, 1), vec![], vec![1, 1, 1], vec![0, 1, 0]).unwrap();
        assert_eq!(g.group_partition().sensitive_empty(), [true, false]);
    }

    #[test]
    fn invalid_graphs() {
        assert!(AttributedGraph::new(Matrix::zeros(2, 1), vec![(0, 2)], vec![0, 1], vec![0, 1]).is_err());
        assert!(AttributedGraph::new(Matrix::zeros(2, 1), vec![], vec![0, 2], vec![0, 1]).is_err());
        let (edges, c) = canonical_edges(3, [(0, 0), (1, 0), (0, 1), (2, 1)]).unwrap();
        assert_eq!(edges, vec![(0, 1), (1, 2)]);
        assert_eq!(c, EdgeCleanup { self_loops: 1, duplicates: 1 });
    }

    #[test]
    fn sensitive_channel_checked() {
        let x = Matrix::from_rows(&[[0.3, 1.0], [0.1, 0.0]]);
        let g = AttributedGraph::new(x, vec![], vec![1, 0], vec![0, 0]).unwrap();
        let g = g.with_sensitive_channel(1).unwrap();
        assert_eq!(g.clone().drop_sensitive_channel().features(), &Matrix::from_rows(&[[0.3], [0.1]]));
        assert!(g.with_sensitive_channel(0).is_err());
    }
}
