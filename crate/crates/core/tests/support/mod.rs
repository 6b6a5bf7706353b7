//! Oracles shared by the integration tests and the acceptance runner:
//! random tape compositions checked against central differences, and
//! brute-force re-implementations of every metric.
#![allow(dead_code)]

use std::sync::Arc;

use fatra_core::graph::{mean_aggregator, GroupIndex};
use fatra_core::metrics::{self, Predictions};
use fatra_core::model::{adversarial_objective, alignment_loss, classification_loss, soft_eo_on};
use fatra_core::ndmath::{Matrix, SparseOperator, Tape, Var};
use fatra_core::rng::{normal, seeded, Rng};
use rand::Rng as _;

pub const FD_STEP: f64 = 1e-5;
/// Denominator floor for relative errors of near-zero gradients.
pub const REL_FLOOR: f64 = 1e-3;

fn random_matrix(rows: usize, cols: usize, scale: f64, rng: &mut Rng) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| scale * normal(rng)).collect()).unwrap()
}

/// A randomly drawn network plus loss head over at most 8-wide matrices.
pub struct Composition {
    x: Matrix,
    x2: Matrix,
    target: Matrix,
    agg: Option<Arc<SparseOperator>>,
    activation: u8,
    pub head: u8,
    sensitive: Vec<u8>,
    labels: Vec<u8>,
    nodes: Vec<usize>,
    picks: Vec<usize>,
    pub params: Vec<Matrix>,
}

pub const HEADS: u8 = 10;

impl Composition {
    pub fn sample(seed: u64) -> Self {
        let mut rng = seeded(seed);
        let n = rng.random_range(4..=8);
        let [d, h, k, m] = [0; 4].map(|_| rng.random_range(1..=8usize));
        let x = random_matrix(n, d, 1.0, &mut rng);
        let x2 = random_matrix(n, d, 1.0, &mut rng);
        let target = random_matrix(n, k, 1.0, &mut rng);
        let agg = rng.random_bool(0.6).then(|| {
            let edges: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
            let kept: Vec<_> = edges.into_iter().filter(|_| rng.random_bool(0.4)).collect();
            Arc::new(mean_aggregator(n, &kept))
        });
        // The first four nodes cover every (f, y) pair.
        let sensitive: Vec<u8> = (0..n).map(|i| if i < 4 { (i / 2) as u8 } else { rng.random_range(0..2) }).collect();
        let labels: Vec<u8> = (0..n).map(|i| if i < 4 { (i % 2) as u8 } else { rng.random_range(0..2) }).collect();
        let nodes: Vec<usize> = (0..n).filter(|i| *i < 4 || rng.random_bool(0.5)).collect();
        let picks: Vec<usize> = (0..rng.random_range(1..=n)).map(|_| rng.random_range(0..n)).collect();
        let shapes = [(d, h), (1, h), (h, k), (1, k), (k, m), (1, m), (m, 1), (1, 1)];
        let params = shapes.iter().map(|&(r, c)| random_matrix(r, c, 0.6, &mut rng)).collect();
        Self {
            x,
            x2,
            target,
            agg,
            activation: rng.random_range(0..3),
            head: rng.random_range(0..HEADS),
            sensitive,
            labels,
            nodes,
            picks,
            params,
        }
    }

    fn body(&self, tape: &mut Tape, p: &[Var], x: &Matrix) -> fatra_core::Result<Var> {
        let mut o = tape.constant(x.clone());
        if let Some(a) = &self.agg {
            o = tape.sparse_mul(a, o)?;
        }
        o = tape.matmul(o, p[0])?;
        o = tape.add_row_bias(o, p[1])?;
        o = match self.activation {
            0 => tape.relu(o),
            1 => tape.sigmoid(o),
            _ => o,
        };
        if let Some(a) = &self.agg {
            o = tape.sparse_mul(a, o)?;
        }
        o = tape.matmul(o, p[2])?;
        tape.add_row_bias(o, p[3])
    }

    fn head_mlp(tape: &mut Tape, p: &[Var], o: Var) -> fatra_core::Result<Var> {
        let h = tape.matmul(o, p[4])?;
        let h = tape.add_row_bias(h, p[5])?;
        let h = tape.relu(h);
        let h = tape.matmul(h, p[6])?;
        tape.add_row_bias(h, p[7])
    }

    /// Records the composition with `params` as trainable leaves.
    pub fn record(&self, params: &[Matrix]) -> fatra_core::Result<(Tape, Vec<Var>, Var)> {
        let mut tape = Tape::new();
        let p: Vec<Var> = params.iter().map(|m| tape.param(m.clone())).collect();
        let o = self.body(&mut tape, &p, &self.x)?;
        let groups = GroupIndex::build(&self.sensitive, &self.labels, None);
        let head4 = [p[4], p[5], p[6], p[7]];
        let loss = match self.head {
            0 => {
                let f = tape.frobenius_sq(o);
                tape.scale(f, 0.1)
            }
            1 => {
                let s = tape.sigmoid(o);
                tape.mean(s)
            }
            2 => classification_loss(&mut tape, head4, o, &self.labels, &self.nodes)?,
            3 => adversarial_objective(&mut tape, head4, o, &self.sensitive, &self.nodes)?,
            4 => {
                let logits = Self::head_mlp(&mut tape, &p, o)?;
                let probs = tape.sigmoid(logits);
                soft_eo_on(&mut tape, probs, &groups)?.0
            }
            5 => {
                let o2 = self.body(&mut tape, &p, &self.x2)?;
                alignment_loss(&mut tape, o, o2, &groups, &groups)?.0
            }
            6 => {
                let r = tape.row_normalize(o);
                let c = tape.column_mean(r);
                tape.frobenius_sq(c)
            }
            7 => {
                let t = tape.transpose(o);
                let g = tape.matmul(t, o)?;
                tape.mean(g)
            }
            8 => {
                let sel = tape.select_rows(o, &self.picks)?;
                let cat = tape.concat_rows(&[o, sel])?;
                let r = tape.row_mean(cat);
                let s = tape.sigmoid(r);
                let l = tape.ln(s);
                tape.mean(l)
            }
            _ => {
                let t = tape.constant(self.target.clone());
                let d = tape.sub(o, t)?;
                let sq = tape.mul(d, d)?;
                tape.mean(sq)
            }
        };
        Ok((tape, p, loss))
    }

    fn value(&self, params: &[Matrix]) -> f64 {
        let (tape, _, loss) = self.record(params).unwrap();
        tape.value(loss).item()
    }

    /// Largest `|analytic − numeric| / max(|analytic|, |numeric|, REL_FLOOR)`
    /// over every parameter entry.
    pub fn max_relative_error(&self) -> f64 {
        let (tape, vars, loss) = self.record(&self.params).unwrap();
        let grads = tape.backward(loss).unwrap();
        let mut worst: f64 = 0.0;
        for (pi, var) in vars.iter().enumerate() {
            let analytic = grads.get_or_zeros(*var, self.params[pi].shape());
            for e in 0..self.params[pi].len() {
                let mut plus = self.params.clone();
                plus[pi].as_mut_slice()[e] += FD_STEP;
                let mut minus = self.params.clone();
                minus[pi].as_mut_slice()[e] -= FD_STEP;
                let numeric = (self.value(&plus) - self.value(&minus)) / (2.0 * FD_STEP);
                let a = analytic.as_slice()[e];
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_FLOOR);
                worst = worst.max(rel);
            }
        }
        worst
    }
}

/// Runs `count` compositions; returns the worst error and its seed.
pub fn gradient_suite(count: u64) -> (f64, u64) {
    (0..count).map(|s| (Composition::sample(s).max_relative_error(), s)).fold((0.0, 0), |a, b| if b.0 > a.0 { b } else { a })
}

// ---- brute-force metric oracles ----

fn hard(s: f64) -> u8 {
    u8::from(s >= 0.5)
}

fn rate(hits: usize, total: usize) -> Option<f64> {
    (total > 0).then(|| hits as f64 / total as f64)
}

pub fn oracle_eo(scores: &[f64], y: &[u8], f: &[u8]) -> Option<f64> {
    let mut terms = Vec::new();
    for label in 0..2u8 {
        let per_group: Vec<Option<f64>> = (0..2u8)
            .map(|g| {
                let members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == label && f[i] == g).collect();
                rate(members.iter().filter(|&&i| hard(scores[i]) == label).count(), members.len())
            })
            .collect();
        if let (Some(r0), Some(r1)) = (per_group[0], per_group[1]) {
            terms.push((r1 - r0).abs());
        }
    }
    (!terms.is_empty()).then(|| terms.iter().sum::<f64>() / 2.0)
}

pub fn oracle_dp(scores: &[f64], f: &[u8]) -> Option<f64> {
    let r = |g: u8| {
        let members: Vec<usize> = (0..f.len()).filter(|&i| f[i] == g).collect();
        rate(members.iter().filter(|&&i| hard(scores[i]) == 1).count(), members.len())
    };
    Some((r(1)? - r(0)?).abs())
}

pub fn oracle_acc(scores: &[f64], y: &[u8]) -> Option<f64> {
    rate((0..y.len()).filter(|&i| hard(scores[i]) == y[i]).count(), y.len())
}

/// Pairwise count over every positive/negative pair.
pub fn oracle_auc(scores: &[f64], y: &[u8]) -> Option<f64> {
    let (mut wins, mut pairs) = (0.0, 0usize);
    for i in 0..y.len() {
        for j in 0..y.len() {
            if y[i] == 1 && y[j] == 0 {
                pairs += 1;
                wins += if scores[i] > scores[j] {
                    1.0
                } else if scores[i] == scores[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    (pairs > 0).then(|| wins / pairs as f64)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `max_{a ∈ from} min_{b ∈ to} ‖a − b‖` by double loop.
pub fn oracle_max_min(from: &Matrix, a_idx: &[usize], to: &Matrix, b_idx: &[usize]) -> Option<f64> {
    if a_idx.is_empty() || b_idx.is_empty() {
        return None;
    }
    let mut best = f64::NEG_INFINITY;
    for &a in a_idx {
        let mut nearest = f64::INFINITY;
        for &b in b_idx {
            nearest = nearest.min(dist(from.row(a), to.row(b)));
        }
        best = best.max(nearest);
    }
    Some(best)
}

fn members(f: &[u8], y: &[u8], g: u8, label: Option<u8>) -> Vec<usize> {
    (0..f.len()).filter(|&i| f[i] == g && label.is_none_or(|l| y[i] == l)).collect()
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na <= 1e-12 || nb <= 1e-12 {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb)
}

/// Mean cosine similarity over all cross pairs, by double loop.
pub fn oracle_lambda(zj: &Matrix, aj: &[usize], zk: &Matrix, ak: &[usize]) -> Option<f64> {
    if aj.is_empty() || ak.is_empty() {
        return None;
    }
    let mut total = 0.0;
    for &i in aj {
        for &k in ak {
            total += cosine(zj.row(i), zk.row(k));
        }
    }
    Some(total / (aj.len() * ak.len()) as f64)
}

fn diff(a: Option<f64>, b: Option<f64>) -> f64 {
    match (a, b) {
        (Some(a), Some(b)) => (a - b).abs(),
        (None, None) => 0.0,
        _ => f64::INFINITY,
    }
}

struct Instance {
    scores: Vec<f64>,
    y: Vec<u8>,
    f: Vec<u8>,
    z: Matrix,
    z2: Matrix,
    y2: Vec<u8>,
    f2: Vec<u8>,
}

fn instance(seed: u64) -> Instance {
    let mut rng = seeded(seed);
    let n = rng.random_range(1..=12);
    let n2 = rng.random_range(1..=12);
    let dim = rng.random_range(1..=4);
    // Coarse scores half of the time so ties and the exact threshold occur.
    let coarse = rng.random_bool(0.5);
    let scores = (0..n).map(|_| if coarse { rng.random_range(0..=8) as f64 / 8.0 } else { rng.random::<f64>() }).collect();
    let bits = |rng: &mut Rng, n: usize| -> Vec<u8> { (0..n).map(|_| rng.random_range(0..2)).collect() };
    let (y, f, y2, f2) = (bits(&mut rng, n), bits(&mut rng, n), bits(&mut rng, n2), bits(&mut rng, n2));
    let mut z = random_matrix(n, dim, 1.0, &mut rng);
    if rng.random_bool(0.2) {
        z.row_mut(0).iter_mut().for_each(|v| *v = 0.0);
    }
    let z2 = random_matrix(n2, dim, 1.0, &mut rng);
    Instance { scores, y, f, z, z2, y2, f2 }
}

/// Largest deviation between library and oracle over `count` random
/// instances (infinite if one side is undefined and the other is not),
/// with the name of the offending metric.
pub fn metric_suite(count: u64) -> (f64, &'static str) {
    let mut worst = (0.0, "none");
    let mut note = |d: f64, name: &'static str| {
        if d > worst.0 || d.is_nan() {
            worst = (if d.is_nan() { f64::INFINITY } else { d }, name);
        }
    };
    for seed in 0..count {
        let t = instance(seed);
        let p = Predictions::new(t.scores.clone()).unwrap();
        note(diff(metrics::delta_eo(&p, &t.y, &t.f).ok().map(|g| g.value), oracle_eo(&t.scores, &t.y, &t.f)), "delta_eo");
        note(diff(metrics::delta_dp(&p, &t.f).ok(), oracle_dp(&t.scores, &t.f)), "delta_dp");
        note(diff(metrics::accuracy(&p, &t.y).ok(), oracle_acc(&t.scores, &t.y)), "accuracy");
        note(diff(metrics::roc_auc(&t.scores, &t.y).ok(), oracle_auc(&t.scores, &t.y)), "roc_auc");

        let g1 = GroupIndex::build(&t.f, &t.y, None);
        let g2 = GroupIndex::build(&t.f2, &t.y2, None);
        for label in 0..2u8 {
            let want = oracle_max_min(&t.z, &members(&t.f, &t.y, 1, Some(label)), &t.z, &members(&t.f, &t.y, 0, Some(label)));
            note(diff(metrics::eta(&t.z, &g1, label as usize).ok(), want), "eta");
        }
        let eps = metrics::epsilon(&t.z, &t.z2, &g1, &g2).unwrap();
        let lam = metrics::lambda_sim(&t.z, &t.z2, &g1, &g2).unwrap();
        let gam = metrics::gamma(&t.z, &t.z2, &g1, &g2).unwrap();
        for g in 0..2u8 {
            for label in 0..2u8 {
                let train = members(&t.f, &t.y, g, Some(label));
                let test = members(&t.f2, &t.y2, g, Some(label));
                note(diff(eps[g as usize][label as usize], oracle_max_min(&t.z2, &test, &t.z, &train)), "epsilon");
                note(diff(lam[g as usize][label as usize], oracle_lambda(&t.z, &train, &t.z2, &test)), "lambda");
            }
            let want = oracle_max_min(&t.z2, &members(&t.f2, &t.y2, g, None), &t.z, &members(&t.f, &t.y, g, None));
            note(diff(gam[g as usize], want), "gamma");
        }
    }
    worst
}
