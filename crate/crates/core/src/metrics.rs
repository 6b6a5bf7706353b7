//! Group fairness metrics, ranking quality, and representation distances.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::GroupIndex;
use crate::ndmath::{dot, l2_distance, l2_norm, Matrix};

/// Threshold turning a score into a hard label.
pub const DECISION_THRESHOLD: f64 = 0.5;

/// Per-node positive-class probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct Predictions {
    scores: Vec<f64>,
}

impl Predictions {
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        if let Some(i) = scores.iter().position(|s| !(0.0..=1.0).contains(s)) {
            return Err(crate::error::contract(alloc::format!("score at {i} outside [0, 1]")));
        }
        Ok(Self { scores })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn hard(&self) -> Vec<u8> {
        self.scores.iter().map(|&s| u8::from(s >= DECISION_THRESHOLD)).collect()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        Self { scores: idx.iter().map(|&i| self.scores[i]).collect() }
    }
}

/// Equalized-odds gap together with which label terms were skipped.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EoGap {
    pub value: f64,
    /// `skipped[y]` when either EO group with label y is empty.
    pub skipped: [bool; 2],
}

/// `½ Σ_y |P(ŷ=y | y, f=1) − P(ŷ=y | y, f=0)|` over hard labels.
///
/// A label term is skipped when one of its two EO groups is empty; the ½
/// factor is kept so skipped terms never inflate the value.
pub fn delta_eo(pred: &Predictions, labels: &[u8], sensitive: &[u8]) -> Result<EoGap> {
    let hard = pred.hard();
    let rates = |y: u8| -> [Option<f64>; 2] {
        let mut hits = [0usize; 2];
        let mut counts = [0usize; 2];
        for ((&h, &l), &f) in hard.iter().zip(labels).zip(sensitive) {
            if l == y {
                counts[f as usize] += 1;
                hits[f as usize] += usize::from(h == y);
            }
        }
        [0, 1].map(|f| (counts[f] > 0).then(|| hits[f] as f64 / counts[f] as f64))
    };
    eo_from_rates([rates(0), rates(1)])
}

/// Same as [`delta_eo`] but on probabilities: `P(ŷ=1)` is the score and
/// `P(ŷ=0)` its complement.
pub fn soft_delta_eo(pred: &Predictions, labels: &[u8], sensitive: &[u8]) -> Result<EoGap> {
    let rates = |y: u8| -> [Option<f64>; 2] {
        let mut sums = [0.0; 2];
        let mut counts = [0usize; 2];
        for ((&s, &l), &f) in pred.scores.iter().zip(labels).zip(sensitive) {
            if l == y {
                counts[f as usize] += 1;
                sums[f as usize] += if y == 1 { s } else { 1.0 - s };
            }
        }
        [0, 1].map(|f| (counts[f] > 0).then(|| sums[f] / counts[f] as f64))
    };
    eo_from_rates([rates(0), rates(1)])
}

/// `rates[y][f]` is the per-group agreement rate for label y.
fn eo_from_rates(rates: [[Option<f64>; 2]; 2]) -> Result<EoGap> {
    let mut value = 0.0;
    let mut skipped = [false; 2];
    for y in 0..2 {
        match (rates[y][1], rates[y][0]) {
            (Some(r1), Some(r0)) => value += 0.5 * (r1 - r0).abs(),
            _ => skipped[y] = true,
        }
    }
    if skipped == [true, true] {
        return Err(Error::UndefinedMetric("equalized odds needs both sensitive groups under some label".into()));
    }
    Ok(EoGap { value, skipped })
}

/// `|P(ŷ=1 | f=1) − P(ŷ=1 | f=0)|` over hard labels.
pub fn delta_dp(pred: &Predictions, sensitive: &[u8]) -> Result<f64> {
    let hard = pred.hard();
    let mut pos = [0usize; 2];
    let mut counts = [0usize; 2];
    for (&h, &f) in hard.iter().zip(sensitive) {
        counts[f as usize] += 1;
        pos[f as usize] += h as usize;
    }
    if counts.contains(&0) {
        return Err(Error::UndefinedMetric("demographic parity needs both sensitive groups".into()));
    }
    Ok((pos[1] as f64 / counts[1] as f64 - pos[0] as f64 / counts[0] as f64).abs())
}

pub fn accuracy(pred: &Predictions, labels: &[u8]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::UndefinedMetric("accuracy of an empty set".into()));
    }
    let hits = pred.hard().iter().zip(labels).filter(|(h, l)| h == l).count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half. Computed from average ranks in `O(n log n)`.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric("ROC-AUC needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1 ..= j+1 share their average.
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            if labels[k] == 1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// One evaluation, all values in percent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsRecord {
    pub acc: f64,
    pub roc_auc: f64,
    pub delta_dp: f64,
    pub delta_eo: f64,
    pub composite: f64,
    /// Label terms dropped from ΔEO because an EO group was empty.
    pub eo_skipped: [bool; 2],
}

impl MetricsRecord {
    pub fn from_percent(acc: f64, roc_auc: f64, delta_dp: f64, delta_eo: f64, eo_skipped: [bool; 2]) -> Self {
        Self { acc, roc_auc, delta_dp, delta_eo, composite: acc + roc_auc - delta_dp - delta_eo, eo_skipped }
    }

    /// Scores every metric on the nodes in `idx`.
    pub fn evaluate(pred: &Predictions, labels: &[u8], sensitive: &[u8], idx: &[usize]) -> Result<Self> {
        let p = pred.select(idx);
        let y: Vec<u8> = idx.iter().map(|&i| labels[i]).collect();
        let f: Vec<u8> = idx.iter().map(|&i| sensitive[i]).collect();
        let eo = delta_eo(&p, &y, &f)?;
        Ok(Self::from_percent(
            100.0 * accuracy(&p, &y)?,
            100.0 * roc_auc(p.scores(), &y)?,
            100.0 * delta_dp(&p, &f)?,
            100.0 * eo.value,
            eo.skipped,
        ))
    }

    pub fn evaluate_all(pred: &Predictions, labels: &[u8], sensitive: &[u8]) -> Result<Self> {
        let idx: Vec<usize> = (0..labels.len()).collect();
        Self::evaluate(pred, labels, sensitive, &idx)
    }
}

/// Directed Hausdorff distance `max_{a∈from} min_{b∈to} ‖x_a − y_b‖₂`.
pub fn max_min_distance(from: &Matrix, from_idx: &[usize], to: &Matrix, to_idx: &[usize]) -> Option<f64> {
    if from_idx.is_empty() || to_idx.is_empty() {
        return None;
    }
    let mut worst: f64 = 0.0;
    for &a in from_idx {
        let ra = from.row(a);
        let nearest = to_idx
            .iter()
            .map(|&b| l2_distance(ra, to.row(b)))
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(nearest);
    }
    Some(worst)
}

/// `η_y = max_{a∈V₁^y} min_{b∈V₀^y} ‖h_a − h_b‖₂`.
pub fn eta(h: &Matrix, groups: &GroupIndex, y: usize) -> Result<f64> {
    max_min_distance(h, &groups.eo[1][y], h, &groups.eo[0][y])
        .ok_or_else(|| Error::UndefinedMetric(alloc::format!("eta_{y} needs both EO groups with label {y}")))
}

/// Per-`[f][y]` quantities; `None` where a group pair was empty.
pub type PerEoGroup = [[Option<f64>; 2]; 2];

/// `ε_f^y = max_{j∈K_f^y} min_{i∈J_f^y} ‖z_i − z_j‖₂` for all four EO groups.
pub fn epsilon(z_train: &Matrix, z_test: &Matrix, groups_train: &GroupIndex, groups_test: &GroupIndex) -> Result<PerEoGroup> {
    width_check(z_train, z_test, "epsilon")?;
    Ok([0, 1].map(|f| [0, 1].map(|y| max_min_distance(z_test, &groups_test.eo[f][y], z_train, &groups_train.eo[f][y]))))
}

/// `γ_f = max_{j∈K_f} min_{i∈J_f} ‖z_i − z_j‖₂`.
pub fn gamma(z_train: &Matrix, z_test: &Matrix, groups_train: &GroupIndex, groups_test: &GroupIndex) -> Result<[Option<f64>; 2]> {
    width_check(z_train, z_test, "gamma")?;
    Ok([0, 1].map(|f| max_min_distance(z_test, &groups_test.sensitive[f], z_train, &groups_train.sensitive[f])))
}

/// `λ_f^y`: mean cosine similarity over all cross pairs of the matching EO
/// groups, computed as the inner product of the two groups' mean unit rows.
/// Zero rows contribute zero.
pub fn lambda_sim(z_j: &Matrix, z_k: &Matrix, groups_j: &GroupIndex, groups_k: &GroupIndex) -> Result<PerEoGroup> {
    width_check(z_j, z_k, "lambda_sim")?;
    let unit_mean = |z: &Matrix, idx: &[usize]| -> Vec<f64> {
        let mut acc = alloc::vec![0.0; z.cols()];
        for &i in idx {
            let r = z.row(i);
            let norm = l2_norm(r);
            if norm > 1e-12 {
                for (a, v) in acc.iter_mut().zip(r) {
                    *a += v / norm;
                }
            }
        }
        acc.iter_mut().for_each(|a| *a /= idx.len() as f64);
        acc
    };
    Ok([0, 1].map(|f| {
        [0, 1].map(|y| {
            let (a, b) = (&groups_j.eo[f][y], &groups_k.eo[f][y]);
            (!a.is_empty() && !b.is_empty()).then(|| dot(&unit_mean(z_j, a), &unit_mean(z_k, b)))
        })
    }))
}

/// Number of all-zero rows among the given nodes; these carry no direction.
pub fn zero_rows(z: &Matrix, idx: &[usize]) -> usize {
    idx.iter().filter(|&&i| l2_norm(z.row(i)) <= 1e-12).count()
}

fn width_check(a: &Matrix, b: &Matrix, op: &'static str) -> Result<()> {
    if a.cols() != b.cols() {
        return Err(Error::Dimension { op, lhs: a.shape(), rhs: b.shape() });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn preds(v: &[f64]) -> Predictions {
        Predictions::new(v.to_vec()).unwrap()
    }

    #[test]
    fn eo_perfect_predictions() {
        let y = [0, 1, 1, 0, 1, 0];
        let f = [0, 0, 1, 1, 1, 0];
        let p = preds(&y.map(f64::from));
        assert_eq!(delta_eo(&p, &y, &f).unwrap().value, 0.0);
    }

    #[test]
    fn eo_skips_missing_label() {
        let p = preds(&[1.0, 0.0, 1.0, 1.0]);
        let gap = delta_eo(&p, &[1, 1, 1, 1], &[1, 1, 0, 0]).unwrap();
        assert_eq!(gap.value, 0.25);
        assert_eq!(gap.skipped, [true, false]);
    }

    #[test]
    fn eo_undefined_without_groups() {
        let p = preds(&[1.0, 0.0]);
        assert!(matches!(delta_eo(&p, &[1, 0], &[1, 1]), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn dp_examples() {
        assert_eq!(delta_dp(&preds(&[1.0; 4]), &[1, 1, 0, 0]).unwrap(), 0.0);
        assert_eq!(delta_dp(&preds(&[1.0, 1.0, 1.0, 0.0]), &[1, 1, 0, 0]).unwrap(), 0.5);
        assert!(delta_dp(&preds(&[1.0, 0.0]), &[1, 1]).is_err());
    }

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc(&[0.9, 0.8, 0.3, 0.1], &[1, 1, 0, 0]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.4; 5], &[1, 0, 1, 0, 0]).unwrap(), 0.5);
        assert!(roc_auc(&[0.1, 0.2], &[1, 1]).is_err());
    }

    #[test]
    fn composite_identity() {
        let m = MetricsRecord::from_percent(70.0, 65.5, 3.25, 1.5, [false; 2]);
        assert!((m.composite - (70.0 + 65.5 - 3.25 - 1.5)).abs() < 1e-9);
    }

    #[test]
    fn distances() {
        let h = Matrix::from_rows(&[[0.0, 0.0], [3.0, 4.0]]);
        let g = GroupIndex { sensitive: [vec![0], vec![1]], eo: [[vec![], vec![0]], [vec![], vec![1]]] };
        assert_eq!(eta(&h, &g, 1).unwrap(), 5.0);
        assert!(eta(&h, &g, 0).is_err());
        let same = Matrix::filled(2, 2, 1.0);
        assert_eq!(eta(&same, &g, 1).unwrap(), 0.0);

        let z_train = Matrix::from_rows(&[[1.0, 2.0]]);
        let z_test = Matrix::from_rows(&[[1.5, 2.0]]);
        let one = GroupIndex { sensitive: [vec![0], vec![]], eo: [[vec![0], vec![]], [vec![], vec![]]] };
        let e = epsilon(&z_train, &z_test, &one, &one).unwrap();
        assert_eq!(e[0][0], Some(0.5));
        assert_eq!(e[1][1], None);
        assert_eq!(gamma(&z_train, &z_train, &one, &one).unwrap()[0], Some(0.0));
    }

    #[test]
    fn lambda_parallel_and_orthogonal() {
        let z = Matrix::from_rows(&[[0.6, 0.8], [0.6, 0.8]]);
        let g = GroupIndex { sensitive: [vec![0, 1], vec![]], eo: [[vec![0, 1], vec![]], [vec![], vec![]]] };
        let l = lambda_sim(&z, &z, &g, &g).unwrap();
        assert!((l[0][0].unwrap() - 1.0).abs() < 1e-15);
        let zk = Matrix::from_rows(&[[-0.8, 0.6], [-0.8, 0.6]]);
        assert_eq!(lambda_sim(&z, &zk, &g, &g).unwrap()[0][0], Some(0.0));
    }
}
