//! Gaussian graph sampling and empirical certificates for the aggregation
//! distance bounds, the Lipschitz equalized-odds bound and the cross-graph
//! shift bounds.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{contract, Error, Result};
use crate::graph::{sensitive_balance, AttributedGraph, Edge, GroupIndex};
use crate::metrics;
use crate::model::{Backbone, Dims, FatraModel, LearningRates};
use crate::ndmath::{spectral_norm, Matrix, DEFAULT_ITERS, DEFAULT_TOL};
use crate::rng::{normal, seeded};
use crate::structure::{edit_edges, retarget_signed_balance, PairKind};

/// Slack added to the right-hand side of the Lipschitz bounds.
pub const BOUND_EPS: f64 = 1e-9;

/// How labels are drawn for a synthetic graph.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LabelRule {
    /// Independent coin with the given probability of label 1.
    Coin { positive_rate: f64 },
    /// `y = 1[x_channel > threshold]`, each label then flipped with
    /// probability `flip`.
    Threshold { channel: usize, threshold: f64, flip: f64 },
}

/// Two-group Gaussian feature model plus a two-block wiring rule.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub dim: usize,
    pub mu1: f64,
    pub mu0: f64,
    pub sigma1: f64,
    pub sigma0: f64,
    /// Target mean signed balance `u'`.
    pub signed_balance: f64,
    /// Fraction of nodes with f = 1.
    pub group_fraction: f64,
    pub mean_degree: f64,
    pub labels: LabelRule,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(n: usize, dim: usize, seed: u64) -> Self {
        Self {
            n,
            dim,
            mu1: 0.0,
            mu0: 0.0,
            sigma1: 1.0,
            sigma0: 1.0,
            signed_balance: 0.0,
            group_fraction: 0.5,
            mean_degree: 10.0,
            labels: LabelRule::Coin { positive_rate: 0.5 },
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.n >= 2
            && self.dim >= 1
            && self.sigma1 > 0.0
            && self.sigma0 > 0.0
            && (-1.0..=1.0).contains(&self.signed_balance)
            && self.group_fraction > 0.0
            && self.group_fraction < 1.0
            && self.mean_degree >= 0.0
            && self.mu1.is_finite()
            && self.mu0.is_finite();
        if !ok {
            return Err(contract("synthetic spec out of range"));
        }
        match self.labels {
            LabelRule::Coin { positive_rate } if !(0.0..=1.0).contains(&positive_rate) => Err(contract("label rate outside [0, 1]")),
            LabelRule::Threshold { channel, flip, .. } if channel >= self.dim || !(0.0..=1.0).contains(&flip) => {
                Err(contract("threshold label rule out of range"))
            }
            _ => Ok(()),
        }
    }
}

/// Sensitive attribute: the first `round(fraction·n)` nodes get f = 1
/// after a seeded shuffle.
fn sample_sensitive(n: usize, fraction: f64, rng: &mut impl Rng) -> Vec<u8> {
    use rand::seq::SliceRandom;
    let ones = (libm::round(fraction * n as f64) as usize).clamp(1, n - 1);
    let mut s: Vec<u8> = (0..n).map(|i| u8::from(i < ones)).collect();
    s.shuffle(rng);
    s
}

/// Wires a two-block structure whose mean signed balance is close to the
/// target, then refines it by edge swaps to within 0.01.
fn sample_structure(sensitive: &[u8], target: f64, mean_degree: f64, rng: &mut impl Rng) -> Result<Vec<Edge>> {
    let n = sensitive.len() as f64;
    let m = libm::round(n * mean_degree / 2.0) as usize;
    if m == 0 {
        return Ok(Vec::new());
    }
    // With roughly equal degrees, mean p ≈ (n + 2·m_same) / (n(d+1)).
    let same = libm::round((((1.0 + target) / 2.0) * n * (mean_degree + 1.0) - n) / 2.0).clamp(0.0, m as f64) as usize;
    let (edges, _) = edit_edges(sensitive, &[], PairKind::Same, same, PairKind::Cross, 0, rng);
    let (edges, _) = edit_edges(sensitive, &edges, PairKind::Cross, m - same, PairKind::Same, 0, rng);
    let (edges, _) = retarget_signed_balance(sensitive, &edges, target, 0.01, rng)?;
    Ok(edges)
}

/// Draws a graph: features `N(μ_f, σ_f²)` i.i.d. per channel, structure
/// targeting `spec.signed_balance`, labels per `spec.labels`.
pub fn sample_gaussian_graph(spec: &SyntheticSpec) -> Result<AttributedGraph> {
    spec.validate()?;
    let mut rng = seeded(spec.seed);
    let sensitive = sample_sensitive(spec.n, spec.group_fraction, &mut rng);
    let edges = sample_structure(&sensitive, spec.signed_balance, spec.mean_degree, &mut rng)?;
    let mut data = Vec::with_capacity(spec.n * spec.dim);
    for &f in &sensitive {
        let (mu, sigma) = if f == 1 { (spec.mu1, spec.sigma1) } else { (spec.mu0, spec.sigma0) };
        data.extend((0..spec.dim).map(|_| mu + sigma * normal(&mut rng)));
    }
    let features = Matrix::from_vec(spec.n, spec.dim, data)?;
    let labels = (0..spec.n)
        .map(|i| match spec.labels {
            LabelRule::Coin { positive_rate } => u8::from(rng.random::<f64>() < positive_rate),
            LabelRule::Threshold { channel, threshold, flip } => {
                let y = u8::from(features.get(i, channel) > threshold);
                if rng.random::<f64>() < flip {
                    1 - y
                } else {
                    y
                }
            }
        })
        .collect();
    AttributedGraph::new(features, edges, sensitive, labels)
}

/// Which inequality a certificate checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Theorem {
    /// Squared aggregated distance of a cross-group pair.
    PairDistance,
    /// ΔEO against the Lipschitz product times the mean η.
    EoLipschitz,
    /// ΔEO shift between two graphs against the EO-group distances.
    EoShift,
    /// ΔDP shift between two graphs against the sensitive-group distances.
    DpShift,
}

impl Theorem {
    pub fn id(self) -> &'static str {
        match self {
            Self::PairDistance => "pair-distance",
            Self::EoLipschitz => "eo-lipschitz",
            Self::EoShift => "eo-shift",
            Self::DpShift => "dp-shift",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    Violated,
    /// A required group was empty; nothing was checked.
    Skipped,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Holds => "holds",
            Self::Violated => "violated",
            Self::Skipped => "skipped",
        }
    }
}

/// Bound terms, the observed quantity and the verdict.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundCertificate {
    pub theorem: Theorem,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub observed: f64,
    pub verdict: Verdict,
    /// Distance from the observed value to the violated side (positive
    /// when the bound holds).
    pub slack: f64,
    /// Some terms were skipped because of empty groups.
    pub partial: bool,
    /// Named intermediate quantities.
    pub terms: Vec<(String, f64)>,
}

impl BoundCertificate {
    fn upper_only(theorem: Theorem, observed: f64, bound: f64, partial: bool, terms: Vec<(String, f64)>) -> Self {
        let slack = bound - observed;
        Self {
            theorem,
            lower: None,
            upper: Some(bound),
            observed,
            verdict: if observed <= bound + BOUND_EPS { Verdict::Holds } else { Verdict::Violated },
            slack,
            partial,
            terms,
        }
    }

    fn skipped(theorem: Theorem, terms: Vec<(String, f64)>) -> Self {
        Self { theorem, lower: None, upper: None, observed: f64::NAN, verdict: Verdict::Skipped, slack: f64::NAN, partial: true, terms }
    }

    pub fn holds(&self) -> bool {
        self.verdict == Verdict::Holds
    }

    pub fn term(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|(k, _)| k == name).map(|&(_, v)| v)
    }
}

fn term(name: &str, v: f64) -> (String, f64) {
    (String::from(name), v)
}

/// `(lower, upper)` on the squared aggregated distance:
/// `(σ₁²+σ₀²)ζ(1 ∓ c√(log(2/δ)/ζ)) + ζu²(μ₁−μ₀)²` with c = 2 below and 4 above.
pub fn eta_bounds(sigma1: f64, sigma0: f64, dim: usize, mean_gap: f64, u: f64, delta: f64) -> Result<(f64, f64)> {
    if !(delta > 0.0 && delta < 1.0) || dim == 0 {
        return Err(contract("delta must lie in (0, 1) and dimension be positive"));
    }
    let z = dim as f64;
    let root = libm::sqrt(libm::log(2.0 / delta) / z);
    let var = (sigma1 * sigma1 + sigma0 * sigma0) * z;
    let shift = z * u * u * mean_gap * mean_gap;
    Ok((var * (1.0 - 2.0 * root) + shift, var * (1.0 + 4.0 * root) + shift))
}

/// [`eta_bounds`] for a spec, using its target signed balance as `u`.
pub fn spec_eta_bounds(spec: &SyntheticSpec, delta: f64) -> Result<(f64, f64)> {
    eta_bounds(spec.sigma1, spec.sigma0, spec.dim, spec.mu1 - spec.mu0, spec.signed_balance, delta)
}

/// One cross-group pair drawn for the distance certificate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairSample {
    /// `‖h_a − h_b‖²`.
    pub dist_sq: f64,
    /// Per-channel variance of `h_a − h_b` under the feature model
    /// (the aggregation weights make it smaller than `σ₁² + σ₀²`).
    pub variance: f64,
    /// `‖h_a − h_b − E[h_a − h_b]‖²`.
    pub centred_sq: f64,
    /// Measured `u'` of the sampled structure.
    pub signed_balance: f64,
}

/// Draws `trials` independent (structure, pair, features) samples. Only
/// the closed neighbourhoods of the chosen pair need features, so the rest
/// of the graph is never materialised.
pub fn pair_samples(spec: &SyntheticSpec, trials: usize) -> Result<Vec<PairSample>> {
    spec.validate()?;
    let mut out = Vec::with_capacity(trials);
    for t in 0..trials {
        let mut rng = seeded(spec.seed.wrapping_add(t as u64));
        let sensitive = sample_sensitive(spec.n, spec.group_fraction, &mut rng);
        let edges = sample_structure(&sensitive, spec.signed_balance, spec.mean_degree, &mut rng)?;
        let stats = sensitive_balance(&sensitive, &edges);
        let adj = crate::graph::adjacency(spec.n, &edges);
        let pick = |f: u8, rng: &mut crate::rng::Rng| loop {
            let i = rng.random_range(0..spec.n);
            if sensitive[i] == f {
                break i;
            }
        };
        let a = pick(1, &mut rng);
        let b = pick(0, &mut rng);
        // Weight of each contributing node in h_a − h_b.
        let mut weights: Vec<(usize, f64)> = Vec::new();
        for (node, sign) in [(a, 1.0), (b, -1.0)] {
            let w = sign / (adj[node].len() + 1) as f64;
            for j in core::iter::once(node).chain(adj[node].iter().copied()) {
                match weights.iter_mut().find(|(k, _)| *k == j) {
                    Some(e) => e.1 += w,
                    None => weights.push((j, w)),
                }
            }
        }
        let (mut mean, mut variance) = (0.0, 0.0);
        for &(j, w) in &weights {
            let (mu, sigma) = if sensitive[j] == 1 { (spec.mu1, spec.sigma1) } else { (spec.mu0, spec.sigma0) };
            mean += w * mu;
            variance += w * w * sigma * sigma;
        }
        let (mut dist_sq, mut centred_sq) = (0.0, 0.0);
        for _ in 0..spec.dim {
            let mut d = 0.0;
            for &(j, w) in &weights {
                let (mu, sigma) = if sensitive[j] == 1 { (spec.mu1, spec.sigma1) } else { (spec.mu0, spec.sigma0) };
                d += w * (mu + sigma * normal(&mut rng));
            }
            dist_sq += d * d;
            centred_sq += (d - mean) * (d - mean);
        }
        out.push(PairSample { dist_sq, variance, centred_sq, signed_balance: stats.mean_signed });
    }
    Ok(out)
}

/// `2√(δ(1−δ)/trials)`.
pub fn binomial_tolerance(delta: f64, trials: usize) -> f64 {
    2.0 * libm::sqrt(delta * (1.0 - delta) / trials as f64)
}

/// Certifies the squared-distance bounds on pre-drawn samples. Holds iff
/// the in-bound fraction is at least `1 − δ − tolerance`.
///
/// Also records, as the `model-consistent-fraction` term, the fraction of
/// samples satisfying the same concentration bound with each pair's true
/// aggregated variance and mean in place of `σ₁² + σ₀²` and `u(μ₁−μ₀)`.
pub fn certify_pairs(spec: &SyntheticSpec, samples: &[PairSample], delta: f64) -> Result<BoundCertificate> {
    if samples.is_empty() {
        return Err(contract("no samples"));
    }
    let (lower, upper) = spec_eta_bounds(spec, delta)?;
    let count = samples.len() as f64;
    let inside = samples.iter().filter(|s| (lower..=upper).contains(&s.dist_sq)).count() as f64 / count;
    let root = libm::sqrt(libm::log(2.0 / delta) / spec.dim as f64);
    let consistent = samples
        .iter()
        .filter(|s| {
            let v = s.variance * spec.dim as f64;
            (v * (1.0 - 2.0 * root)..=v * (1.0 + 4.0 * root)).contains(&s.centred_sq)
        })
        .count() as f64
        / count;
    let tolerance = binomial_tolerance(delta, samples.len());
    let required = 1.0 - delta - tolerance;
    let mean_dist = samples.iter().map(|s| s.dist_sq).sum::<f64>() / count;
    let mean_u = samples.iter().map(|s| s.signed_balance).sum::<f64>() / count;
    Ok(BoundCertificate {
        theorem: Theorem::PairDistance,
        lower: Some(lower),
        upper: Some(upper),
        observed: inside,
        verdict: if inside >= required { Verdict::Holds } else { Verdict::Violated },
        slack: inside - required,
        partial: false,
        terms: vec![
            term("delta", delta),
            term("trials", count),
            term("required-fraction", required),
            term("mean-distance-sq", mean_dist),
            term("mean-signed-balance", mean_u),
            term("model-consistent-fraction", consistent),
        ],
    })
}

/// Draws `trials` pair samples and certifies them.
pub fn verify_pair_bound(spec: &SyntheticSpec, delta: f64, trials: usize) -> Result<BoundCertificate> {
    if trials < 100 {
        return Err(contract("at least 100 trials are required"));
    }
    certify_pairs(spec, &pair_samples(spec, trials)?, delta)
}

/// Spectral-norm products `(L₁, L₂)` for the encoder and classifier
/// weight stacks. ReLU and sigmoid are 1-Lipschitz, biases do not matter.
pub fn lipschitz_estimates(model: &FatraModel) -> (f64, f64) {
    let prod = |ws: [&Matrix; 2]| ws.iter().map(|w| spectral_norm(w, DEFAULT_ITERS, DEFAULT_TOL)).product::<f64>();
    (prod(model.encoder_weights()), prod(model.classifier_weights()))
}

/// Classifier probabilities on the encoder applied node-wise to the
/// aggregated features `H` of `g`.
fn pointwise_scores(model: &FatraModel, h: &Matrix) -> Result<Vec<f64>> {
    let z = model.encode_pointwise(h)?;
    Ok(model.classify(&z)?.scores().to_vec())
}

/// Soft ΔEO, with `mean ω(z)[y]` in place of hard rates. `None` per
/// skipped label.
fn soft_eo(scores: &[f64], groups: &GroupIndex) -> (f64, [bool; 2]) {
    let mean = |idx: &[usize]| idx.iter().map(|&i| scores[i]).sum::<f64>() / idx.len() as f64;
    let mut total = 0.0;
    let mut skipped = [false; 2];
    for y in 0..2 {
        let (g1, g0) = (&groups.eo[1][y], &groups.eo[0][y]);
        if g1.is_empty() || g0.is_empty() {
            skipped[y] = true;
            continue;
        }
        total += 0.5 * (mean(g1) - mean(g0)).abs();
    }
    (total, skipped)
}

fn soft_dp(scores: &[f64], groups: &GroupIndex) -> Option<f64> {
    let mean = |idx: &[usize]| idx.iter().map(|&i| scores[i]).sum::<f64>() / idx.len() as f64;
    let [g0, g1] = &groups.sensitive;
    (!g0.is_empty() && !g1.is_empty()).then(|| (mean(g1) - mean(g0)).abs())
}

/// ΔEO ≤ L₁L₂(η₀+η₁)/2 with the encoder applied node-wise to `H`.
/// ΔEO is the soft (probability) form the inequality is stated for.
pub fn check_eo_lipschitz(g: &AttributedGraph, model: &FatraModel) -> Result<BoundCertificate> {
    let h = g.aggregate();
    let groups = g.group_partition();
    let (l1, l2) = lipschitz_estimates(model);
    let mut terms = vec![term("l1", l1), term("l2", l2)];
    let mut eta_sum = 0.0;
    for y in 0..2 {
        match metrics::eta(&h, &groups, y) {
            Ok(e) => {
                terms.push(term(if y == 0 { "eta0" } else { "eta1" }, e));
                eta_sum += e;
            }
            Err(Error::UndefinedMetric(_)) => return Ok(BoundCertificate::skipped(Theorem::EoLipschitz, terms)),
            Err(e) => return Err(e),
        }
    }
    let scores = pointwise_scores(model, &h)?;
    let (eo, _) = soft_eo(&scores, &groups);
    Ok(BoundCertificate::upper_only(Theorem::EoLipschitz, eo, l1 * l2 * eta_sum / 2.0, false, terms))
}

/// Cross-graph bounds on given representations: ΔEO^K − ΔEO^J ≤ L₂Σε and
/// ΔDP^K − ΔDP^J ≤ L₂Σγ. `J` is the training side, `K` the test side.
pub fn check_shift_on(
    model: &FatraModel,
    z_train: &Matrix,
    groups_train: &GroupIndex,
    z_test: &Matrix,
    groups_test: &GroupIndex,
) -> Result<[BoundCertificate; 2]> {
    let (_, l2) = lipschitz_estimates(model);
    let s_train = model.classify(z_train)?;
    let s_test = model.classify(z_test)?;

    let eps = metrics::epsilon(z_train, z_test, groups_train, groups_test)?;
    let mut eo_terms = vec![term("l2", l2)];
    let mut eps_sum = 0.0;
    let mut partial = false;
    for (f, row) in eps.iter().enumerate() {
        for (y, e) in row.iter().enumerate() {
            let name = ["epsilon00", "epsilon01", "epsilon10", "epsilon11"][2 * f + y];
            match e {
                Some(e) => {
                    eo_terms.push(term(name, *e));
                    eps_sum += e;
                }
                None => partial = true,
            }
        }
    }
    let (eo_train, skip_j) = soft_eo(s_train.scores(), groups_train);
    let (eo_test, skip_k) = soft_eo(s_test.scores(), groups_test);
    eo_terms.push(term("eo-train", eo_train));
    eo_terms.push(term("eo-test", eo_test));
    let eo_cert = if skip_j == [true; 2] || skip_k == [true; 2] {
        BoundCertificate::skipped(Theorem::EoShift, eo_terms)
    } else {
        let partial = partial || skip_j.contains(&true) || skip_k.contains(&true);
        BoundCertificate::upper_only(Theorem::EoShift, eo_test - eo_train, l2 * eps_sum, partial, eo_terms)
    };

    let gam = metrics::gamma(z_train, z_test, groups_train, groups_test)?;
    let mut dp_terms = vec![term("l2", l2)];
    let mut gamma_sum = 0.0;
    let mut dp_partial = false;
    for (f, g) in gam.iter().enumerate() {
        match g {
            Some(g) => {
                dp_terms.push(term(if f == 0 { "gamma0" } else { "gamma1" }, *g));
                gamma_sum += g;
            }
            None => dp_partial = true,
        }
    }
    let dp_cert = match (soft_dp(s_train.scores(), groups_train), soft_dp(s_test.scores(), groups_test)) {
        (Some(dj), Some(dk)) => {
            dp_terms.push(term("dp-train", dj));
            dp_terms.push(term("dp-test", dk));
            BoundCertificate::upper_only(Theorem::DpShift, dk - dj, l2 * gamma_sum, dp_partial, dp_terms)
        }
        _ => BoundCertificate::skipped(Theorem::DpShift, dp_terms),
    };
    Ok([eo_cert, dp_cert])
}

/// [`check_shift_on`] with representations from the model's encoder.
pub fn check_shift(g_train: &AttributedGraph, g_test: &AttributedGraph, model: &FatraModel) -> Result<[BoundCertificate; 2]> {
    let z_train = model.encode(g_train)?;
    let z_test = model.encode(g_test)?;
    check_shift_on(model, &z_train, &g_train.group_partition(), &z_test, &g_test.group_partition())
}

/// A random model with a training and a shifted testing graph, for
/// checking the model-level bounds.
#[derive(Clone, Debug)]
pub struct BoundInstance {
    pub train: AttributedGraph,
    pub test: AttributedGraph,
    pub model: FatraModel,
}

/// Draws a small instance whose graphs have every EO group nonempty:
/// 20–60 nodes, 2–8 channels, independent feature means and balances.
pub fn random_instance(seed: u64) -> Result<BoundInstance> {
    let mut rng = seeded(seed);
    let dim = rng.random_range(2..=8);
    let draw = |rng: &mut crate::rng::Rng| -> Result<AttributedGraph> {
        loop {
            let mut spec = SyntheticSpec::new(rng.random_range(20..=60), dim, rng.random());
            spec.mu1 = rng.random_range(-1.0..1.0);
            spec.mu0 = rng.random_range(-1.0..1.0);
            spec.sigma1 = rng.random_range(0.5..1.5);
            spec.sigma0 = rng.random_range(0.5..1.5);
            spec.signed_balance = rng.random_range(-0.3..0.3);
            spec.mean_degree = rng.random_range(2.0..6.0);
            // Sparse small graphs cannot always reach the balance; redraw.
            match sample_gaussian_graph(&spec) {
                Ok(g) if g.group_partition().all_eo_nonempty() => return Ok(g),
                Ok(_) | Err(Error::Infeasible { .. }) => {}
                Err(e) => return Err(e),
            }
        }
    };
    let train = draw(&mut rng)?;
    let test = draw(&mut rng)?;
    let model = FatraModel::new(Dims::new(dim), Backbone::Gcn, LearningRates::default(), 1.0, rng.random());
    Ok(BoundInstance { train, test, model })
}
