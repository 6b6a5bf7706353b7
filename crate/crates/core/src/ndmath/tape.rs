//! Reverse-mode differentiation over dense matrices.
//!
//! A [`Tape`] is a Wengert list: every primitive appends a node holding its
//! forward value, and [`Tape::backward`] walks the list in reverse to
//! accumulate adjoints. Insertion order is a topological order because a
//! node can only reference handles that already exist.

use alloc::string::ToString;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use super::{Matrix, SparseOperator};
use crate::error::{contract, Error, Result};

/// Arguments to `ln` are clamped to this floor.
pub const LOG_FLOOR: f64 = 1e-12;

/// Rows with a smaller norm are left at zero by `row-l2-normalize`.
const NORM_FLOOR: f64 = 1e-12;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Operation kinds understood by the tape.
#[derive(Clone, Debug)]
pub enum Primitive {
    MatMul,
    Add,
    Subtract,
    Multiply,
    Scale(f64),
    Relu,
    Sigmoid,
    Ln,
    RowMean,
    ColumnMean,
    Mean,
    FrobeniusSq,
    RowNormalize,
    Transpose,
    SelectRows(Arc<[usize]>),
    ConcatRows,
    /// `x + 1·b` with `b` a 1×cols row.
    AddRowBias,
    /// `S · x` for a constant sparse `S`.
    SparseMul(Arc<SparseOperator>),
}

impl Primitive {
    /// Parses the name of a parameter-free primitive.
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "matmul" => Self::MatMul,
            "add" => Self::Add,
            "subtract" => Self::Subtract,
            "elementwise-multiply" => Self::Multiply,
            "relu" => Self::Relu,
            "sigmoid" => Self::Sigmoid,
            "natural-log" | "ln" => Self::Ln,
            "row-mean" => Self::RowMean,
            "column-mean" => Self::ColumnMean,
            "full-mean" => Self::Mean,
            "frobenius-norm-squared" => Self::FrobeniusSq,
            "row-l2-normalize" => Self::RowNormalize,
            "transpose" => Self::Transpose,
            "concat-rows" => Self::ConcatRows,
            "add-row-bias" => Self::AddRowBias,
            other => return Err(Error::UnsupportedOp(other.to_string())),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::MatMul => "matmul",
            Self::Add => "add",
            Self::Subtract => "subtract",
            Self::Multiply => "elementwise-multiply",
            Self::Scale(_) => "scalar-multiply",
            Self::Relu => "relu",
            Self::Sigmoid => "sigmoid",
            Self::Ln => "natural-log",
            Self::RowMean => "row-mean",
            Self::ColumnMean => "column-mean",
            Self::Mean => "full-mean",
            Self::FrobeniusSq => "frobenius-norm-squared",
            Self::RowNormalize => "row-l2-normalize",
            Self::Transpose => "transpose",
            Self::SelectRows(_) => "select-rows",
            Self::ConcatRows => "concat-rows",
            Self::AddRowBias => "add-row-bias",
            Self::SparseMul(_) => "sparse-matmul",
        }
    }

    fn arity(&self) -> Option<usize> {
        match self {
            Self::MatMul | Self::Add | Self::Subtract | Self::Multiply | Self::AddRowBias => Some(2),
            Self::ConcatRows => None,
            _ => Some(1),
        }
    }
}

#[derive(Clone, Debug)]
enum Kind {
    Leaf,
    Op(Primitive),
}

#[derive(Clone, Debug)]
struct Node {
    kind: Kind,
    parents: Vec<Var>,
    value: Matrix,
    is_param: bool,
    requires_grad: bool,
}

/// Recorded computation. Single owner; `Send` so it can move across threads.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Result of [`Tape::backward`].
#[derive(Clone, Debug)]
pub struct Gradients {
    adjoints: Vec<Option<Matrix>>,
    params: Vec<bool>,
}

impl Gradients {
    /// Gradient for a parameter leaf; `None` for anything else.
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        if self.params.get(v.0).copied().unwrap_or(false) {
            self.adjoints[v.0].as_ref()
        } else {
            None
        }
    }

    /// Gradient for a parameter, or zeros of `shape` when the parameter
    /// did not influence the root.
    pub fn get_or_zeros(&self, v: Var, shape: (usize, usize)) -> Matrix {
        self.get(v).cloned().unwrap_or_else(|| Matrix::zeros(shape.0, shape.1))
    }

    /// Adjoint of any node reached during the backward sweep.
    pub fn adjoint(&self, v: Var) -> Option<&Matrix> {
        self.adjoints.get(v.0).and_then(Option::as_ref)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push_leaf(&mut self, value: Matrix, is_param: bool) -> Var {
        self.nodes.push(Node {
            kind: Kind::Leaf,
            parents: Vec::new(),
            value,
            is_param,
            requires_grad: is_param,
        });
        Var(self.nodes.len() - 1)
    }

    /// Leaf that receives a gradient.
    pub fn param(&mut self, value: Matrix) -> Var {
        self.push_leaf(value, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push_leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    pub fn apply(&mut self, op: Primitive, inputs: &[Var]) -> Result<Var> {
        if let Some(n) = op.arity() {
            if inputs.len() != n {
                return Err(contract(alloc::format!(
                    "{} expects {} inputs, got {}",
                    op.name(),
                    n,
                    inputs.len()
                )));
            }
        } else if inputs.is_empty() {
            return Err(contract(alloc::format!("{} expects at least one input", op.name())));
        }
        for v in inputs {
            if v.0 >= self.nodes.len() {
                return Err(contract(alloc::format!("handle {} is not on this tape", v.0)));
            }
        }
        let value = self.forward(&op, inputs)?;
        debug_assert!(value.is_finite(), "{} produced a non-finite value", op.name());
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            kind: Kind::Op(op),
            parents: inputs.to_vec(),
            value,
            is_param: false,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn forward(&self, op: &Primitive, inputs: &[Var]) -> Result<Matrix> {
        let x = self.value(inputs[0]);
        Ok(match op {
            Primitive::MatMul => x.matmul(self.value(inputs[1]))?,
            Primitive::Add => x.add(self.value(inputs[1]))?,
            Primitive::Subtract => x.sub(self.value(inputs[1]))?,
            Primitive::Multiply => x.hadamard(self.value(inputs[1]))?,
            Primitive::Scale(c) => x.scale(*c),
            Primitive::Relu => x.map(|v| if v > 0.0 { v } else { 0.0 }),
            Primitive::Sigmoid => x.map(sigmoid),
            Primitive::Ln => x.map(|v| libm::log(v.max(LOG_FLOOR))),
            Primitive::RowMean => {
                let mut out = Matrix::zeros(x.rows(), 1);
                let inv = if x.cols() == 0 { 0.0 } else { 1.0 / x.cols() as f64 };
                for i in 0..x.rows() {
                    out.set(i, 0, x.row(i).iter().sum::<f64>() * inv);
                }
                out
            }
            Primitive::ColumnMean => x.column_means(),
            Primitive::Mean => Matrix::scalar(x.mean()),
            Primitive::FrobeniusSq => Matrix::scalar(x.frobenius_sq()),
            Primitive::RowNormalize => {
                let mut out = x.clone();
                for i in 0..out.rows() {
                    let row = out.row_mut(i);
                    let norm = super::l2_norm(row);
                    if norm > NORM_FLOOR {
                        row.iter_mut().for_each(|v| *v /= norm);
                    } else {
                        row.iter_mut().for_each(|v| *v = 0.0);
                    }
                }
                out
            }
            Primitive::Transpose => x.transpose(),
            Primitive::SelectRows(idx) => {
                if let Some(&bad) = idx.iter().find(|&&i| i >= x.rows()) {
                    return Err(Error::Dimension { op: "select-rows", lhs: x.shape(), rhs: (bad, 0) });
                }
                x.select_rows(idx)
            }
            Primitive::ConcatRows => {
                let cols = x.cols();
                let mut data = Vec::new();
                let mut rows = 0;
                for v in inputs {
                    let m = self.value(*v);
                    if m.cols() != cols {
                        return Err(Error::Dimension { op: "concat-rows", lhs: x.shape(), rhs: m.shape() });
                    }
                    data.extend_from_slice(m.as_slice());
                    rows += m.rows();
                }
                Matrix::from_vec(rows, cols, data)?
            }
            Primitive::AddRowBias => {
                let b = self.value(inputs[1]);
                if b.rows() != 1 || b.cols() != x.cols() {
                    return Err(Error::Dimension { op: "add-row-bias", lhs: x.shape(), rhs: b.shape() });
                }
                let mut out = x.clone();
                for i in 0..out.rows() {
                    for (o, bv) in out.row_mut(i).iter_mut().zip(b.as_slice()) {
                        *o += bv;
                    }
                }
                out
            }
            Primitive::SparseMul(s) => s.apply(x)?,
        })
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Primitive::MatMul, &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Primitive::Add, &[a, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Primitive::Subtract, &[a, b])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Primitive::Multiply, &[a, b])
    }

    pub fn add_row_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        self.apply(Primitive::AddRowBias, &[x, b])
    }

    pub fn sparse_mul(&mut self, s: &Arc<SparseOperator>, x: Var) -> Result<Var> {
        self.apply(Primitive::SparseMul(Arc::clone(s)), &[x])
    }

    pub fn select_rows(&mut self, x: Var, idx: &[usize]) -> Result<Var> {
        self.apply(Primitive::SelectRows(Arc::from(idx)), &[x])
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        self.apply(Primitive::ConcatRows, parts)
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        self.unary(Primitive::Scale(c), x)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(Primitive::Relu, x)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(Primitive::Sigmoid, x)
    }

    pub fn ln(&mut self, x: Var) -> Var {
        self.unary(Primitive::Ln, x)
    }

    pub fn row_mean(&mut self, x: Var) -> Var {
        self.unary(Primitive::RowMean, x)
    }

    pub fn column_mean(&mut self, x: Var) -> Var {
        self.unary(Primitive::ColumnMean, x)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        self.unary(Primitive::Mean, x)
    }

    pub fn frobenius_sq(&mut self, x: Var) -> Var {
        self.unary(Primitive::FrobeniusSq, x)
    }

    pub fn row_normalize(&mut self, x: Var) -> Var {
        self.unary(Primitive::RowNormalize, x)
    }

    pub fn transpose(&mut self, x: Var) -> Var {
        self.unary(Primitive::Transpose, x)
    }

    /// Shape-agnostic unary primitives cannot fail on a valid handle.
    fn unary(&mut self, op: Primitive, x: Var) -> Var {
        self.apply(op, &[x]).expect("unary primitive on a valid handle")
    }

    /// Accumulates `∂root/∂node` for every node that depends on a parameter.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        let root_shape = self.shape(root);
        if root_shape != (1, 1) {
            return Err(contract(alloc::format!("backward needs a 1x1 root, got {:?}", root_shape)));
        }
        let mut adjoints: Vec<Option<Matrix>> = vec![None; root.0 + 1];
        adjoints[root.0] = Some(Matrix::ones(1, 1));
        for i in (0..=root.0).rev() {
            let node = &self.nodes[i];
            let Kind::Op(op) = &node.kind else { continue };
            if !node.requires_grad {
                continue;
            }
            let Some(g) = adjoints[i].take() else { continue };
            self.propagate(op, node, &g, &mut adjoints)?;
            adjoints[i] = Some(g);
        }
        let params = self.nodes.iter().map(|n| n.is_param).collect();
        adjoints.resize(self.nodes.len(), None);
        Ok(Gradients { adjoints, params })
    }

    fn propagate(&self, op: &Primitive, node: &Node, g: &Matrix, adj: &mut [Option<Matrix>]) -> Result<()> {
        let p = &node.parents;
        let y = &node.value;
        let val = |k: usize| self.value(p[k]);
        let needs = |k: usize| self.nodes[p[k].0].requires_grad;
        let send = |k: usize, contribution: Matrix, adj: &mut [Option<Matrix>]| -> Result<()> {
            let slot = &mut adj[p[k].0];
            match slot {
                Some(acc) => acc.add_assign(&contribution),
                None => {
                    *slot = Some(contribution);
                    Ok(())
                }
            }
        };
        match op {
            Primitive::MatMul => {
                if needs(0) {
                    send(0, g.matmul_t(val(1))?, adj)?;
                }
                if needs(1) {
                    send(1, val(0).t_matmul(g)?, adj)?;
                }
            }
            Primitive::Add => {
                for k in 0..2 {
                    if needs(k) {
                        send(k, g.clone(), adj)?;
                    }
                }
            }
            Primitive::Subtract => {
                if needs(0) {
                    send(0, g.clone(), adj)?;
                }
                if needs(1) {
                    send(1, g.scale(-1.0), adj)?;
                }
            }
            Primitive::Multiply => {
                if needs(0) {
                    send(0, g.hadamard(val(1))?, adj)?;
                }
                if needs(1) {
                    send(1, g.hadamard(val(0))?, adj)?;
                }
            }
            Primitive::Scale(c) => send(0, g.scale(*c), adj)?,
            Primitive::Relu => {
                let d = val(0).zip_with(g, "relu", |x, gv| if x > 0.0 { gv } else { 0.0 })?;
                send(0, d, adj)?;
            }
            Primitive::Sigmoid => {
                let d = y.zip_with(g, "sigmoid", |s, gv| gv * s * (1.0 - s))?;
                send(0, d, adj)?;
            }
            Primitive::Ln => {
                let d = val(0).zip_with(g, "ln", |x, gv| if x > LOG_FLOOR { gv / x } else { 0.0 })?;
                send(0, d, adj)?;
            }
            Primitive::RowMean => {
                let x = val(0);
                let inv = if x.cols() == 0 { 0.0 } else { 1.0 / x.cols() as f64 };
                let mut d = Matrix::zeros(x.rows(), x.cols());
                for i in 0..x.rows() {
                    let gi = g.get(i, 0) * inv;
                    d.row_mut(i).iter_mut().for_each(|v| *v = gi);
                }
                send(0, d, adj)?;
            }
            Primitive::ColumnMean => {
                let x = val(0);
                let inv = if x.rows() == 0 { 0.0 } else { 1.0 / x.rows() as f64 };
                let mut d = Matrix::zeros(x.rows(), x.cols());
                for i in 0..x.rows() {
                    for (o, gv) in d.row_mut(i).iter_mut().zip(g.as_slice()) {
                        *o = gv * inv;
                    }
                }
                send(0, d, adj)?;
            }
            Primitive::Mean => {
                let x = val(0);
                let c = if x.is_empty() { 0.0 } else { g.item() / x.len() as f64 };
                send(0, Matrix::filled(x.rows(), x.cols(), c), adj)?;
            }
            Primitive::FrobeniusSq => send(0, val(0).scale(2.0 * g.item()), adj)?,
            Primitive::RowNormalize => {
                let x = val(0);
                let mut d = Matrix::zeros(x.rows(), x.cols());
                for i in 0..x.rows() {
                    let norm = super::l2_norm(x.row(i));
                    if norm <= NORM_FLOOR {
                        continue;
                    }
                    let yi = y.row(i);
                    let gi = g.row(i);
                    let proj = super::dot(yi, gi);
                    for ((o, &yv), &gv) in d.row_mut(i).iter_mut().zip(yi).zip(gi) {
                        *o = (gv - yv * proj) / norm;
                    }
                }
                send(0, d, adj)?;
            }
            Primitive::Transpose => send(0, g.transpose(), adj)?,
            Primitive::SelectRows(idx) => {
                let x = val(0);
                let mut d = Matrix::zeros(x.rows(), x.cols());
                for (k, &i) in idx.iter().enumerate() {
                    for (o, gv) in d.row_mut(i).iter_mut().zip(g.row(k)) {
                        *o += gv;
                    }
                }
                send(0, d, adj)?;
            }
            Primitive::ConcatRows => {
                let mut offset = 0;
                for k in 0..p.len() {
                    let rows = val(k).rows();
                    if needs(k) {
                        let idx: Vec<usize> = (offset..offset + rows).collect();
                        send(k, g.select_rows(&idx), adj)?;
                    }
                    offset += rows;
                }
            }
            Primitive::AddRowBias => {
                if needs(0) {
                    send(0, g.clone(), adj)?;
                }
                if needs(1) {
                    let sums = g.column_means().scale(g.rows() as f64);
                    send(1, sums, adj)?;
                }
            }
            Primitive::SparseMul(s) => send(0, s.apply_transpose(g)?, adj)?,
        }
        Ok(())
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_forward() {
        let mut t = Tape::new();
        let x = t.constant(Matrix::from_rows(&[[-1.0, 2.0]]));
        let y = t.relu(x);
        assert_eq!(t.value(y), &Matrix::from_rows(&[[0.0, 2.0]]));
    }

    #[test]
    fn identity_matmul_forward() {
        let mut t = Tape::new();
        let i = t.constant(Matrix::identity(2));
        let m = t.constant(Matrix::from_rows(&[[3.0, 4.0], [5.0, 6.0]]));
        let y = t.matmul(i, m).unwrap();
        assert_eq!(t.value(y), &Matrix::from_rows(&[[3.0, 4.0], [5.0, 6.0]]));
    }

    #[test]
    fn sigmoid_at_zero() {
        let mut t = Tape::new();
        let x = t.constant(Matrix::scalar(0.0));
        let y = t.sigmoid(x);
        assert_eq!(t.value(y).item(), 0.5);
    }

    #[test]
    fn ln_is_clamped() {
        let mut t = Tape::new();
        let x = t.constant(Matrix::from_rows(&[[0.0, -3.0]]));
        let y = t.ln(x);
        assert!(t.value(y).as_slice().iter().all(|&v| v == libm::log(LOG_FLOOR)));
    }

    #[test]
    fn frobenius_gradient() {
        let mut t = Tape::new();
        let w = t.param(Matrix::from_rows(&[[1.0, 2.0]]));
        let r = t.frobenius_sq(w);
        let g = t.backward(r).unwrap();
        assert_eq!(g.get(w).unwrap(), &Matrix::from_rows(&[[2.0, 4.0]]));
        assert_eq!(g.adjoint(r).unwrap(), &Matrix::ones(1, 1));
    }

    #[test]
    fn constants_get_no_entry() {
        let mut t = Tape::new();
        let w = t.param(Matrix::from_rows(&[[1.0, 2.0]]));
        let c = t.constant(Matrix::from_rows(&[[3.0, 4.0]]));
        let s = t.mul(w, c).unwrap();
        let r = t.mean(s);
        let g = t.backward(r).unwrap();
        assert!(g.get(c).is_none());
        assert_eq!(g.get(w).unwrap(), &Matrix::from_rows(&[[1.5, 2.0]]));
    }

    #[test]
    fn errors() {
        let mut t = Tape::new();
        let a = t.constant(Matrix::zeros(2, 3));
        let b = t.constant(Matrix::zeros(2, 3));
        match t.matmul(a, b) {
            Err(Error::Dimension { op, lhs, rhs }) => {
                assert_eq!((op, lhs, rhs), ("matmul", (2, 3), (2, 3)));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(Primitive::from_name("softmax"), Err(Error::UnsupportedOp(_))));
        assert!(matches!(t.backward(a), Err(Error::Contract(_))));
    }

    #[test]
    fn zero_row_normalizes_to_zero() {
        let mut t = Tape::new();
        let x = t.param(Matrix::from_rows(&[[0.0, 0.0], [3.0, 4.0]]));
        let y = t.row_normalize(x);
        assert_eq!(t.value(y), &Matrix::from_rows(&[[0.0, 0.0], [0.6, 0.8]]));
        let s = t.mean(y);
        let g = t.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap().row(0), &[0.0, 0.0]);
    }
}
