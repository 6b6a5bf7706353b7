//! The encoder, classifier, discriminator and feature generator, plus the
//! losses that train them.

use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{contract, Error, Result};
use crate::graph::{AttributedGraph, GroupIndex};
use crate::metrics::Predictions;
use crate::ndmath::{adam_step, AdamState, Gradients, Matrix, SparseOperator, Tape, Var};
use crate::rng::seeded;

/// A trainable matrix with its optimizer state.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub value: Matrix,
    pub adam: AdamState,
}

impl Param {
    pub fn new(value: Matrix) -> Self {
        let adam = AdamState::for_param(&value);
        Self { value, adam }
    }

    fn glorot(rows: usize, cols: usize, rng: &mut impl Rng) -> Self {
        let limit = libm::sqrt(6.0 / (rows + cols) as f64);
        let data = (0..rows * cols).map(|_| rng.random_range(-limit..limit)).collect();
        Self::new(Matrix::from_vec(rows, cols, data).expect("sized"))
    }

    fn zeros(rows: usize, cols: usize) -> Self {
        Self::new(Matrix::zeros(rows, cols))
    }

    fn bind(&self, tape: &mut Tape, trainable: bool) -> Var {
        if trainable {
            tape.param(self.value.clone())
        } else {
            tape.constant(self.value.clone())
        }
    }

    fn update(&mut self, grads: &Gradients, var: Var, lr: f64) -> Result<()> {
        let g = grads.get_or_zeros(var, self.value.shape());
        adam_step(&mut self.value, &g, &mut self.adam, lr)
    }
}

/// How the encoder mixes neighbour information.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Backbone {
    /// Two mean-aggregation graph convolutions.
    Gcn,
    /// Same layers without aggregation; edges are ignored.
    Mlp,
}

/// Two-layer graph convolution `Z = ReLU(Â·ReLU(Â·X·W₁)·W₂)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Encoder {
    pub w1: Param,
    pub w2: Param,
}

/// `in → hidden (ReLU) → out`, with biases.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub w1: Param,
    pub b1: Param,
    pub w2: Param,
    pub b2: Param,
}

impl Mlp {
    fn new(input: usize, hidden: usize, output: usize, rng: &mut impl Rng) -> Self {
        Self {
            w1: Param::glorot(input, hidden, rng),
            b1: Param::zeros(1, hidden),
            w2: Param::glorot(hidden, output, rng),
            b2: Param::zeros(1, output),
        }
    }

    fn params(&self) -> [&Param; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    fn params_mut(&mut self) -> [&mut Param; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    fn bind(&self, tape: &mut Tape, trainable: bool) -> [Var; 4] {
        self.params().map(|p| p.bind(tape, trainable))
    }

    fn update(&mut self, grads: &Gradients, vars: [Var; 4], lr: f64) -> Result<()> {
        for (p, v) in self.params_mut().into_iter().zip(vars) {
            p.update(grads, v, lr)?;
        }
        Ok(())
    }

    /// Pre-activation output `ReLU(xW₁ + b₁)W₂ + b₂`.
    fn forward(tape: &mut Tape, vars: [Var; 4], x: Var) -> Result<Var> {
        let [w1, b1, w2, b2] = vars;
        let h = tape.matmul(x, w1)?;
        let h = tape.add_row_bias(h, b1)?;
        let h = tape.relu(h);
        let o = tape.matmul(h, w2)?;
        tape.add_row_bias(o, b2)
    }
}

/// Layer widths. Defaults: hidden 16, representation 16, heads 16.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dims {
    pub input: usize,
    pub hidden: usize,
    pub embed: usize,
    pub classifier_hidden: usize,
    pub discriminator_hidden: usize,
    pub generator_hidden: usize,
}

impl Dims {
    pub fn new(input: usize) -> Self {
        Self { input, hidden: 16, embed: 16, classifier_hidden: 16, discriminator_hidden: 16, generator_hidden: 16 }
    }
}

/// Learning rates for ρ, ξ, ω and Γ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LearningRates {
    pub encoder: f64,
    pub discriminator: f64,
    pub classifier: f64,
    pub generator: f64,
}

impl Default for LearningRates {
    /// Bail row of the published hyperparameter table.
    fn default() -> Self {
        Self { encoder: 0.005, discriminator: 0.001, classifier: 0.005, generator: 0.05 }
    }
}

/// Encoder ρ, classifier ω, discriminator ξ and generator Γ.
#[derive(Clone, Debug, PartialEq)]
pub struct FatraModel {
    pub dims: Dims,
    pub backbone: Backbone,
    pub encoder: Encoder,
    pub classifier: Mlp,
    pub discriminator: Mlp,
    /// Residual: `Γ(X) = X + MLP(X)`; the output layer starts at zero so
    /// Γ starts as the identity.
    pub generator: Mlp,
    pub lr: LearningRates,
    /// Weight of `‖Γ(X) − X‖_F²` in the generator objective.
    pub tau: f64,
}

/// A graph prepared for repeated forward passes.
#[derive(Clone, Debug)]
pub struct GraphView {
    pub features: Matrix,
    pub aggregator: Option<Arc<SparseOperator>>,
    pub sensitive: Vec<u8>,
    pub labels: Vec<u8>,
}

impl GraphView {
    pub fn new(g: &AttributedGraph, backbone: Backbone) -> Self {
        Self {
            features: g.features().clone(),
            aggregator: matches!(backbone, Backbone::Gcn).then(|| g.mean_aggregator()),
            sensitive: g.sensitive().to_vec(),
            labels: g.labels().to_vec(),
        }
    }

    pub fn n(&self) -> usize {
        self.features.rows()
    }
}

/// Values of the four objectives; a loss whose step did not run is 0.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBundle {
    /// Discriminator log-likelihood `E[f log ξ + (1−f) log(1−ξ)]`.
    pub adversarial: f64,
    /// Mean binary cross-entropy of ω on the training nodes.
    pub classification: f64,
    /// Soft ΔEO on the generated graph minus `τ‖Γ(X)−X‖_F²`.
    pub generator: f64,
    /// `−Σ λ_f^y`.
    pub alignment: f64,
}

impl FatraModel {
    pub fn new(dims: Dims, backbone: Backbone, lr: LearningRates, tau: f64, seed: u64) -> Self {
        let mut rng = seeded(seed);
        let encoder = Encoder {
            w1: Param::glorot(dims.input, dims.hidden, &mut rng),
            w2: Param::glorot(dims.hidden, dims.embed, &mut rng),
        };
        let classifier = Mlp::new(dims.embed, dims.classifier_hidden, 1, &mut rng);
        let discriminator = Mlp::new(dims.embed, dims.discriminator_hidden, 1, &mut rng);
        let mut generator = Mlp::new(dims.input, dims.generator_hidden, dims.input, &mut rng);
        generator.w2 = Param::zeros(dims.generator_hidden, dims.input);
        Self { dims, backbone, encoder, classifier, discriminator, generator, lr, tau }
    }

    pub fn view(&self, g: &AttributedGraph) -> Result<GraphView> {
        if g.feature_dim() != self.dims.input {
            return Err(Error::Dimension {
                op: "encode",
                lhs: (g.n(), g.feature_dim()),
                rhs: (self.dims.input, self.dims.hidden),
            });
        }
        Ok(GraphView::new(g, self.backbone))
    }

    fn bind_encoder(&self, tape: &mut Tape, trainable: bool) -> [Var; 2] {
        [self.encoder.w1.bind(tape, trainable), self.encoder.w2.bind(tape, trainable)]
    }

    /// Records the encoder on `tape`.
    pub fn encode_on(tape: &mut Tape, enc: [Var; 2], agg: Option<&Arc<SparseOperator>>, x: Var) -> Result<Var> {
        let mut h = x;
        for w in enc {
            if let Some(a) = agg {
                h = tape.sparse_mul(a, h)?;
            }
            h = tape.matmul(h, w)?;
            h = tape.relu(h);
        }
        Ok(h)
    }

    /// Representations `Z` of every node.
    pub fn encode(&self, g: &AttributedGraph) -> Result<Matrix> {
        let view = self.view(g)?;
        self.encode_view(&view)
    }

    pub fn encode_view(&self, view: &GraphView) -> Result<Matrix> {
        let mut tape = Tape::new();
        let enc = self.bind_encoder(&mut tape, false);
        let x = tape.constant(view.features.clone());
        let z = Self::encode_on(&mut tape, enc, view.aggregator.as_ref(), x)?;
        Ok(tape.value(z).clone())
    }

    /// The encoder's layers applied to each row of `h` independently, i.e.
    /// with the aggregation already done.
    pub fn encode_pointwise(&self, h: &Matrix) -> Result<Matrix> {
        let mut tape = Tape::new();
        let enc = self.bind_encoder(&mut tape, false);
        let x = tape.constant(h.clone());
        let z = Self::encode_on(&mut tape, enc, None, x)?;
        Ok(tape.value(z).clone())
    }

    /// Classifier probabilities for given representations.
    pub fn classify(&self, z: &Matrix) -> Result<Predictions> {
        let mut tape = Tape::new();
        let vars = self.classifier.bind(&mut tape, false);
        let zv = tape.constant(z.clone());
        let logits = Mlp::forward(&mut tape, vars, zv)?;
        let p = tape.sigmoid(logits);
        Predictions::new(tape.value(p).as_slice().to_vec())
    }

    pub fn predict(&self, g: &AttributedGraph) -> Result<Predictions> {
        self.classify(&self.encode(g)?)
    }

    pub fn predict_view(&self, view: &GraphView) -> Result<Predictions> {
        self.classify(&self.encode_view(view)?)
    }

    /// Discriminator probabilities `ξ(z)`.
    pub fn discriminate(&self, z: &Matrix) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let vars = self.discriminator.bind(&mut tape, false);
        let zv = tape.constant(z.clone());
        let logits = Mlp::forward(&mut tape, vars, zv)?;
        let p = tape.sigmoid(logits);
        Ok(tape.value(p).as_slice().to_vec())
    }

    /// `Γ(X)`.
    pub fn generate(&self, x: &Matrix) -> Result<Matrix> {
        let mut tape = Tape::new();
        let vars = self.generator.bind(&mut tape, false);
        let xv = tape.constant(x.clone());
        let out = Self::generator_on(&mut tape, vars, xv)?;
        Ok(tape.value(out).clone())
    }

    fn generator_on(tape: &mut Tape, vars: [Var; 4], x: Var) -> Result<Var> {
        let delta = Mlp::forward(tape, vars, x)?;
        tape.add(x, delta)
    }

    /// T1: one discriminator update with the encoder frozen. Returns the
    /// discriminator log-likelihood before the update.
    pub fn discriminator_step(&mut self, view: &GraphView, nodes: &[usize]) -> Result<f64> {
        let mut tape = Tape::new();
        let enc = self.bind_encoder(&mut tape, false);
        let disc = self.discriminator.bind(&mut tape, true);
        let x = tape.constant(view.features.clone());
        let z = Self::encode_on(&mut tape, enc, view.aggregator.as_ref(), x)?;
        let ll = adversarial_objective(&mut tape, disc, z, &view.sensitive, nodes)?;
        // Ascend the log-likelihood.
        let root = tape.scale(ll, -1.0);
        let grads = tape.backward(root)?;
        self.discriminator.update(&grads, disc, self.lr.discriminator)?;
        Ok(tape.value(ll).item())
    }

    /// T2: one encoder update descending the discriminator log-likelihood
    /// with the discriminator frozen.
    pub fn encoder_adversarial_step(&mut self, view: &GraphView, nodes: &[usize]) -> Result<f64> {
        let mut tape = Tape::new();
        let enc = self.bind_encoder(&mut tape, true);
        let disc = self.discriminator.bind(&mut tape, false);
        let x = tape.constant(view.features.clone());
        let z = Self::encode_on(&mut tape, enc, view.aggregator.as_ref(), x)?;
        let ll = adversarial_objective(&mut tape, disc, z, &view.sensitive, nodes)?;
        let grads = tape.backward(ll)?;
        self.update_encoder(&grads, enc)?;
        Ok(tape.value(ll).item())
    }

    /// T3: joint encoder + classifier update on the classification loss.
    pub fn classification_step(&mut self, view: &GraphView, nodes: &[usize]) -> Result<f64> {
        let mut tape = Tape::new();
        let enc = self.bind_encoder(&mut tape, true);
        let cls = self.classifier.bind(&mut tape, true);
        let x = tape.constant(view.features.clone());
        let z = Self::encode_on(&mut tape, enc, view.aggregator.as_ref(), x)?;
        let loss = classification_loss(&mut tape, cls, z, &view.labels, nodes)?;
        let grads = tape.backward(loss)?;
        self.update_encoder(&grads, enc)?;
        self.classifier.update(&grads, cls, self.lr.classifier)?;
        Ok(tape.value(loss).item())
    }

    /// T4: one generator update ascending the generator objective on the
    /// structure `pool_agg`, with ρ and ω frozen. `groups` are the training
    /// nodes' EO groups.
    pub fn generator_step(&mut self, view: &GraphView, pool_agg: Option<&Arc<SparseOperator>>, groups: &GroupIndex) -> Result<f64> {
        let mut tape = Tape::new();
        let enc = self.bind_encoder(&mut tape, false);
        let cls = self.classifier.bind(&mut tape, false);
        let gen = self.generator.bind(&mut tape, true);
        let objective = self.generator_objective_on(&mut tape, enc, cls, gen, view, pool_agg, groups)?;
        let root = tape.scale(objective, -1.0);
        let grads = tape.backward(root)?;
        self.generator.update(&grads, gen, self.lr.generator)?;
        Ok(tape.value(objective).item())
    }

    #[allow(clippy::too_many_arguments)]
    fn generator_objective_on(
        &self,
        tape: &mut Tape,
        enc: [Var; 2],
        cls: [Var; 4],
        gen: [Var; 4],
        view: &GraphView,
        pool_agg: Option<&Arc<SparseOperator>>,
        groups: &GroupIndex,
    ) -> Result<Var> {
        let x = tape.constant(view.features.clone());
        let xg = Self::generator_on(tape, gen, x)?;
        let z = Self::encode_on(tape, enc, pool_agg, xg)?;
        let logits = Mlp::forward(tape, cls, z)?;
        let probs = tape.sigmoid(logits);
        let (eo, _) = soft_eo_on(tape, probs, groups)?;
        let diff = tape.sub(xg, x)?;
        let reg = tape.frobenius_sq(diff);
        let reg = tape.scale(reg, self.tau);
        tape.sub(eo, reg)
    }

    /// Generator objective without updating anything.
    pub fn generator_objective(&self, view: &GraphView, pool_agg: Option<&Arc<SparseOperator>>, groups: &GroupIndex) -> Result<f64> {
        let mut tape = Tape::new();
        let enc = self.bind_encoder(&mut tape, false);
        let cls = self.classifier.bind(&mut tape, false);
        let gen = self.generator.bind(&mut tape, false);
        let v = self.generator_objective_on(&mut tape, enc, cls, gen, view, pool_agg, groups)?;
        Ok(tape.value(v).item())
    }

    /// T5: one encoder update maximising `Σ λ_f^y` between the training
    /// graph and the generated graph `(pool structure, Γ(X))`.
    pub fn alignment_step(&mut self, view: &GraphView, pool_agg: Option<&Arc<SparseOperator>>, groups: &GroupIndex) -> Result<f64> {
        let generated = self.generate(&view.features)?;
        let mut tape = Tape::new();
        let enc = self.bind_encoder(&mut tape, true);
        let x = tape.constant(view.features.clone());
        let xg = tape.constant(generated);
        let z = Self::encode_on(&mut tape, enc, view.aggregator.as_ref(), x)?;
        let zg = Self::encode_on(&mut tape, enc, pool_agg, xg)?;
        let (loss, _) = alignment_loss(&mut tape, z, zg, groups, groups)?;
        let grads = tape.backward(loss)?;
        self.update_encoder(&grads, enc)?;
        Ok(tape.value(loss).item())
    }

    fn update_encoder(&mut self, grads: &Gradients, enc: [Var; 2]) -> Result<()> {
        self.encoder.w1.update(grads, enc[0], self.lr.encoder)?;
        self.encoder.w2.update(grads, enc[1], self.lr.encoder)
    }

    /// Encoder weights ρ in layer order.
    pub fn encoder_weights(&self) -> [&Matrix; 2] {
        [&self.encoder.w1.value, &self.encoder.w2.value]
    }

    /// Classifier weights ω in layer order (biases excluded).
    pub fn classifier_weights(&self) -> [&Matrix; 2] {
        [&self.classifier.w1.value, &self.classifier.w2.value]
    }

    /// Every parameter with a stable name, for checkpoints and comparisons.
    pub fn named_params(&self) -> Vec<(&'static str, &Param)> {
        let mut out = alloc::vec![("encoder.w1", &self.encoder.w1), ("encoder.w2", &self.encoder.w2)];
        for (prefix, mlp) in [("classifier", &self.classifier), ("discriminator", &self.discriminator), ("generator", &self.generator)] {
            for (suffix, p) in ["w1", "b1", "w2", "b2"].into_iter().zip(mlp.params()) {
                out.push((mlp_name(prefix, suffix), p));
            }
        }
        out
    }

    pub fn named_params_mut(&mut self) -> Vec<(&'static str, &mut Param)> {
        let mut out: Vec<(&'static str, &mut Param)> =
            alloc::vec![("encoder.w1", &mut self.encoder.w1), ("encoder.w2", &mut self.encoder.w2)];
        for (prefix, mlp) in [
            ("classifier", &mut self.classifier),
            ("discriminator", &mut self.discriminator),
            ("generator", &mut self.generator),
        ] {
            for (suffix, p) in ["w1", "b1", "w2", "b2"].into_iter().zip(mlp.params_mut()) {
                out.push((mlp_name(prefix, suffix), p));
            }
        }
        out
    }
}

fn mlp_name(prefix: &str, suffix: &str) -> &'static str {
    match (prefix, suffix) {
        ("classifier", "w1") => "classifier.w1",
        ("classifier", "b1") => "classifier.b1",
        ("classifier", "w2") => "classifier.w2",
        ("classifier", "b2") => "classifier.b2",
        ("discriminator", "w1") => "discriminator.w1",
        ("discriminator", "b1") => "discriminator.b1",
        ("discriminator", "w2") => "discriminator.w2",
        ("discriminator", "b2") => "discriminator.b2",
        ("generator", "w1") => "generator.w1",
        ("generator", "b1") => "generator.b1",
        ("generator", "w2") => "generator.w2",
        _ => "generator.b2",
    }
}

/// Mean of `t log p + (1−t) log(1−p)` over the selected rows of a column
/// of probabilities.
fn log_likelihood(tape: &mut Tape, probs: Var, targets: &[u8], nodes: &[usize]) -> Result<Var> {
    if nodes.is_empty() {
        return Err(contract("loss over an empty node set"));
    }
    let p = tape.select_rows(probs, nodes)?;
    let t: Vec<f64> = nodes.iter().map(|&i| f64::from(targets[i])).collect();
    let t_pos = tape.constant(Matrix::column(&t));
    let t_neg = tape.constant(Matrix::column(&t.iter().map(|v| 1.0 - v).collect::<Vec<_>>()));
    let ones = tape.constant(Matrix::ones(nodes.len(), 1));
    let log_p = tape.ln(p);
    let neg_p = tape.scale(p, -1.0);
    let q = tape.add(ones, neg_p)?;
    let log_q = tape.ln(q);
    let a = tape.mul(t_pos, log_p)?;
    let b = tape.mul(t_neg, log_q)?;
    let s = tape.add(a, b)?;
    Ok(tape.mean(s))
}

/// Discriminator log-likelihood of the sensitive attribute.
pub fn adversarial_objective(tape: &mut Tape, disc: [Var; 4], z: Var, sensitive: &[u8], nodes: &[usize]) -> Result<Var> {
    let logits = Mlp::forward(tape, disc, z)?;
    let probs = tape.sigmoid(logits);
    log_likelihood(tape, probs, sensitive, nodes)
}

/// Mean binary cross-entropy of the classifier on `nodes`.
pub fn classification_loss(tape: &mut Tape, cls: [Var; 4], z: Var, labels: &[u8], nodes: &[usize]) -> Result<Var> {
    let logits = Mlp::forward(tape, cls, z)?;
    let probs = tape.sigmoid(logits);
    let ll = log_likelihood(tape, probs, labels, nodes)?;
    Ok(tape.scale(ll, -1.0))
}

/// Differentiable ΔEO on probabilities: `½ Σ_y |mean_{J₁^y} p − mean_{J₀^y} p|`.
/// The absolute value is taken through the sign of the forward value.
pub fn soft_eo_on(tape: &mut Tape, probs: Var, groups: &GroupIndex) -> Result<(Var, [bool; 2])> {
    let mut total: Option<Var> = None;
    let mut skipped = [false; 2];
    for y in 0..2 {
        let (g1, g0) = (&groups.eo[1][y], &groups.eo[0][y]);
        if g1.is_empty() || g0.is_empty() {
            skipped[y] = true;
            continue;
        }
        let p1 = tape.select_rows(probs, g1)?;
        let m1 = tape.mean(p1);
        let p0 = tape.select_rows(probs, g0)?;
        let m0 = tape.mean(p0);
        let d = tape.sub(m1, m0)?;
        let sign = if tape.value(d).item() >= 0.0 { 0.5 } else { -0.5 };
        let term = tape.scale(d, sign);
        total = Some(match total {
            Some(t) => tape.add(t, term)?,
            None => term,
        });
    }
    let total = match total {
        Some(t) => t,
        None => tape.constant(Matrix::scalar(0.0)),
    };
    Ok((total, skipped))
}

/// `−Σ_{f,y} λ_f^y` via the inner product of groupwise mean unit rows.
/// Returns the loss and `[f][y]` skip flags for empty groups.
pub fn alignment_loss(tape: &mut Tape, z_j: Var, z_k: Var, groups_j: &GroupIndex, groups_k: &GroupIndex) -> Result<(Var, [[bool; 2]; 2])> {
    let uj = tape.row_normalize(z_j);
    let uk = tape.row_normalize(z_k);
    let mut total: Option<Var> = None;
    let mut skipped = [[false; 2]; 2];
    for f in 0..2 {
        for y in 0..2 {
            let (a, b) = (&groups_j.eo[f][y], &groups_k.eo[f][y]);
            if a.is_empty() || b.is_empty() {
                skipped[f][y] = true;
                continue;
            }
            let ra = tape.select_rows(uj, a)?;
            let ma = tape.column_mean(ra);
            let rb = tape.select_rows(uk, b)?;
            let mb = tape.column_mean(rb);
            let mbt = tape.transpose(mb);
            let lambda = tape.matmul(ma, mbt)?;
            total = Some(match total {
                Some(t) => tape.add(t, lambda)?,
                None => lambda,
            });
        }
    }
    let total = match total {
        Some(t) => t,
        None => tape.constant(Matrix::scalar(0.0)),
    };
    Ok((tape.scale(total, -1.0), skipped))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn toy_graph() -> AttributedGraph {
        let x = Matrix::from_rows(&[[1.0, 0.5], [0.2, -0.3], [-1.0, 0.8], [0.4, 0.4], [0.0, -1.0], [0.9, 0.1]]);
        AttributedGraph::new(x, vec![(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5)], vec![0, 0, 1, 1, 0, 1], vec![0, 1, 0, 1, 1, 0]).unwrap()
    }

    #[test]
    fn zero_weights_give_zero_representation() {
        let g = toy_graph();
        let mut m = FatraModel::new(Dims::new(2), Backbone::Gcn, LearningRates::default(), 1.0, 3);
        m.encoder.w1.value = Matrix::zeros(2, 16);
        m.encoder.w2.value = Matrix::zeros(16, 16);
        assert!(m.encode(&g).unwrap().as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn isolated_node_is_plain_mlp() {
        let x = Matrix::from_rows(&[[0.7, -0.2, 1.1]]);
        let g = AttributedGraph::new(x.clone(), vec![], vec![1], vec![0]).unwrap();
        let m = FatraModel::new(Dims::new(3), Backbone::Gcn, LearningRates::default(), 1.0, 5);
        let relu = |m: Matrix| m.map(|v| v.max(0.0));
        let h = relu(x.matmul(&m.encoder.w1.value).unwrap());
        let z = relu(h.matmul(&m.encoder.w2.value).unwrap());
        assert_eq!(m.encode(&g).unwrap(), z);
    }

    #[test]
    fn width_mismatch() {
        let m = FatraModel::new(Dims::new(3), Backbone::Gcn, LearningRates::default(), 1.0, 5);
        assert!(matches!(m.encode(&toy_graph()), Err(Error::Dimension { .. })));
    }

    #[test]
    fn generator_starts_as_identity() {
        let g = toy_graph();
        let m = FatraModel::new(Dims::new(2), Backbone::Gcn, LearningRates::default(), 1.0, 5);
        assert_eq!(&m.generate(g.features()).unwrap(), g.features());
    }

    #[test]
    fn uninformative_discriminator() {
        let mut tape = Tape::new();
        let disc = [
            tape.constant(Matrix::zeros(2, 3)),
            tape.constant(Matrix::zeros(1, 3)),
            tape.constant(Matrix::zeros(3, 1)),
            tape.constant(Matrix::zeros(1, 1)),
        ];
        let z = tape.constant(Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]));
        let ll = adversarial_objective(&mut tape, disc, z, &[0, 1], &[0, 1]).unwrap();
        assert!((tape.value(ll).item() - libm::log(0.5)).abs() < 1e-15);
    }

    #[test]
    fn bce_at_half_is_log2() {
        let mut tape = Tape::new();
        let cls = [
            tape.constant(Matrix::zeros(2, 3)),
            tape.constant(Matrix::zeros(1, 3)),
            tape.constant(Matrix::zeros(3, 1)),
            tape.constant(Matrix::zeros(1, 1)),
        ];
        let z = tape.constant(Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [0.0, 1.0]]));
        let loss = classification_loss(&mut tape, cls, z, &[0, 1, 1], &[0, 2]).unwrap();
        assert!((tape.value(loss).item() - libm::log(2.0)).abs() < 1e-15);
        assert!(classification_loss(&mut tape, cls, z, &[0, 1, 1], &[]).is_err());
    }

    #[test]
    fn orthogonal_alignment_is_zero() {
        let mut tape = Tape::new();
        let zj = tape.constant(Matrix::from_rows(&[[1.0, 0.0], [2.0, 0.0], [0.0, 3.0], [1.0, 1.0]]));
        let zk = tape.constant(Matrix::from_rows(&[[0.0, 1.0], [0.0, 5.0], [4.0, 0.0], [1.0, -1.0]]));
        let g = GroupIndex { sensitive: [vec![0, 1], vec![2, 3]], eo: [[vec![0], vec![1]], [vec![2], vec![3]]] };
        let (loss, skipped) = alignment_loss(&mut tape, zj, zk, &g, &g).unwrap();
        assert_eq!(tape.value(loss).item(), 0.0);
        assert_eq!(skipped, [[false; 2]; 2]);
    }
}
