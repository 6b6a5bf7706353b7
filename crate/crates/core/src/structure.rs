//! Combinatorial edge edits that move a graph's sensitive balance.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{sensitive_balance, Edge};

/// Whether a node pair lies inside one sensitive group or across the two.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairKind {
    Same,
    Cross,
}

impl PairKind {
    pub fn of(sensitive: &[u8], a: usize, b: usize) -> Self {
        if sensitive[a] == sensitive[b] {
            Self::Same
        } else {
            Self::Cross
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            Self::Same => Self::Cross,
            Self::Cross => Self::Same,
        }
    }
}

/// Requested versus applied edits. A shortfall means there were not enough
/// candidate pairs (to add) or edges (to remove) of the requested kind.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EditReport {
    pub added: usize,
    pub removed: usize,
    pub add_shortfall: usize,
    pub remove_shortfall: usize,
}

impl EditReport {
    pub fn degenerate(&self) -> bool {
        self.add_shortfall > 0 || self.remove_shortfall > 0
    }
}

fn groups(sensitive: &[u8]) -> [Vec<usize>; 2] {
    let mut g: [Vec<usize>; 2] = Default::default();
    for (i, &f) in sensitive.iter().enumerate() {
        g[f as usize].push(i);
    }
    g
}

fn pair_capacity(groups: &[Vec<usize>; 2], kind: PairKind) -> usize {
    let (a, b) = (groups[0].len(), groups[1].len());
    match kind {
        PairKind::Same => a * a.saturating_sub(1) / 2 + b * b.saturating_sub(1) / 2,
        PairKind::Cross => a * b,
    }
}

fn ordered(a: usize, b: usize) -> Edge {
    (a.min(b), a.max(b))
}

/// Uniformly random pair of the given kind (may already be an edge).
fn random_pair(groups: &[Vec<usize>; 2], kind: PairKind, rng: &mut impl Rng) -> Edge {
    match kind {
        PairKind::Cross => {
            let a = groups[0][rng.random_range(0..groups[0].len())];
            let b = groups[1][rng.random_range(0..groups[1].len())];
            ordered(a, b)
        }
        PairKind::Same => {
            let pairs = |k: usize| k * k.saturating_sub(1) / 2;
            let (w0, w1) = (pairs(groups[0].len()), pairs(groups[1].len()));
            let g = if rng.random_range(0..w0 + w1) < w0 { &groups[0] } else { &groups[1] };
            let i = rng.random_range(0..g.len());
            let mut j = rng.random_range(0..g.len() - 1);
            if j >= i {
                j += 1;
            }
            ordered(g[i], g[j])
        }
    }
}

/// Adds up to `add_count` new pairs of kind `add` and removes up to
/// `remove_count` existing edges of kind `remove`. Output is sorted.
pub fn edit_edges(
    sensitive: &[u8],
    edges: &[Edge],
    add: PairKind,
    add_count: usize,
    remove: PairKind,
    remove_count: usize,
    rng: &mut impl Rng,
) -> (Vec<Edge>, EditReport) {
    let original: BTreeSet<Edge> = edges.iter().copied().collect();
    let mut report = EditReport::default();

    let mut removable: Vec<Edge> = edges.iter().copied().filter(|&(a, b)| PairKind::of(sensitive, a, b) == remove).collect();
    removable.shuffle(rng);
    let take = remove_count.min(removable.len());
    report.removed = take;
    report.remove_shortfall = remove_count - take;
    let dropped: BTreeSet<Edge> = removable[..take].iter().copied().collect();

    let g = groups(sensitive);
    let existing = original.iter().filter(|&&(a, b)| PairKind::of(sensitive, a, b) == add).count();
    let free = pair_capacity(&g, add) - existing;
    let mut added = BTreeSet::new();
    if add_count > 0 && free > 0 {
        if free <= add_count.saturating_mul(4) {
            // Few candidates: enumerate them all.
            let mut candidates = Vec::with_capacity(free);
            for a in 0..sensitive.len() {
                for b in a + 1..sensitive.len() {
                    if PairKind::of(sensitive, a, b) == add && !original.contains(&(a, b)) {
                        candidates.push((a, b));
                    }
                }
            }
            candidates.shuffle(rng);
            added.extend(candidates.into_iter().take(add_count));
        } else {
            while added.len() < add_count {
                let e = random_pair(&g, add, rng);
                if !original.contains(&e) {
                    added.insert(e);
                }
            }
        }
    }
    report.added = added.len();
    report.add_shortfall = add_count - added.len();

    let mut out: Vec<Edge> = original.difference(&dropped).copied().chain(added).collect();
    out.sort_unstable();
    (out, report)
}

/// Estimated `[min, max]` of the mean signed balance reachable with the
/// current edge count.
pub fn signed_balance_range(sensitive: &[u8], edge_count: usize) -> (f64, f64) {
    let n = sensitive.len() as f64;
    if n == 0.0 {
        return (0.0, 0.0);
    }
    let g = groups(sensitive);
    let d = 2.0 * edge_count as f64 / n;
    let at = |same_edges: usize| 2.0 * (n + 2.0 * same_edges as f64) / (n * (d + 1.0)) - 1.0;
    let same_max = edge_count.min(pair_capacity(&g, PairKind::Same));
    let cross_max = edge_count.min(pair_capacity(&g, PairKind::Cross));
    (at(edge_count - cross_max), at(same_max))
}

/// Swaps cross-group edges for same-group ones (or the reverse) until the
/// mean signed balance `u'` is within `tol` of `target`. The edge count is
/// preserved.
pub fn retarget_signed_balance(sensitive: &[u8], edges: &[Edge], target: f64, tol: f64, rng: &mut impl Rng) -> Result<(Vec<Edge>, f64)> {
    let (min, max) = signed_balance_range(sensitive, edges.len());
    let infeasible = || Error::Infeasible { target, min, max };
    if !(-1.0..=1.0).contains(&target) || target < min - tol || target > max + tol {
        return Err(infeasible());
    }
    let n = sensitive.len() as f64;
    let d = 2.0 * edges.len() as f64 / n;
    let per_swap = 8.0 / (n * (d + 1.0));
    let mut current = edges.to_vec();
    for _ in 0..500 {
        let achieved = sensitive_balance(sensitive, &current).mean_signed;
        let gap = target - achieved;
        if gap.abs() <= tol {
            return Ok((current, achieved));
        }
        let swaps = ((0.7 * gap.abs() / per_swap) as usize).max(1);
        let add = if gap > 0.0 { PairKind::Same } else { PairKind::Cross };
        let (next, report) = edit_edges(sensitive, &current, add, swaps, add.opposite(), swaps, rng);
        if report.added == 0 || report.removed == 0 {
            return Err(infeasible());
        }
        current = next;
    }
    Err(infeasible())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use alloc::vec;

    #[test]
    fn edits_respect_kinds() {
        let s = [0, 0, 0, 1, 1, 1];
        let edges = vec![(0, 3), (1, 4), (0, 1)];
        let (out, report) = edit_edges(&s, &edges, PairKind::Same, 2, PairKind::Cross, 1, &mut seeded(1));
        assert_eq!(report, EditReport { added: 2, removed: 1, add_shortfall: 0, remove_shortfall: 0 });
        assert_eq!(out.len(), 4);
        let cross = out.iter().filter(|&&(a, b)| PairKind::of(&s, a, b) == PairKind::Cross).count();
        assert_eq!(cross, 1);
    }

    #[test]
    fn saturated_same_group_is_flagged() {
        let s = [0, 0, 1, 1];
        let edges = vec![(0, 1), (2, 3), (0, 2)];
        let (out, report) = edit_edges(&s, &edges, PairKind::Same, 1, PairKind::Cross, 1, &mut seeded(0));
        assert_eq!(report.add_shortfall, 1);
        assert!(report.degenerate());
        assert_eq!(out, vec![(0, 1), (2, 3)]);
    }

    #[test]
    fn out_of_range_target() {
        let s = [0, 1];
        assert!(matches!(retarget_signed_balance(&s, &[(0, 1)], 0.9, 0.01, &mut seeded(0)), Err(Error::Infeasible { .. })));
    }
}
