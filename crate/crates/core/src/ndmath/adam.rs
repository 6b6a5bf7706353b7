use super::Matrix;
use crate::error::{Error, Result};

/// Moment accumulators for one parameter matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    m: Matrix,
    v: Matrix,
    step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            m: Matrix::zeros(rows, cols),
            v: Matrix::zeros(rows, cols),
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn for_param(param: &Matrix) -> Self {
        Self::new(param.rows(), param.cols())
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &Matrix {
        &self.m
    }

    pub fn second_moment(&self) -> &Matrix {
        &self.v
    }

    /// Restores accumulators, e.g. from a checkpoint.
    pub fn from_parts(m: Matrix, v: Matrix, step: u64) -> Result<Self> {
        if m.shape() != v.shape() {
            return Err(Error::Dimension { op: "adam_state", lhs: m.shape(), rhs: v.shape() });
        }
        Ok(Self { m, v, step, beta1: 0.9, beta2: 0.999, eps: 1e-8 })
    }
}

/// One bias-corrected Adam update applied to `param` in place.
pub fn adam_step(param: &mut Matrix, grad: &Matrix, state: &mut AdamState, lr: f64) -> Result<()> {
    if param.shape() != grad.shape() || param.shape() != state.m.shape() {
        return Err(Error::Dimension { op: "adam_step", lhs: param.shape(), rhs: grad.shape() });
    }
    if !(lr > 0.0) {
        return Err(crate::error::contract("adam learning rate must be positive"));
    }
    state.step += 1;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - libm::pow(b1, state.step as f64);
    let c2 = 1.0 - libm::pow(b2, state.step as f64);
    let m = state.m.as_mut_slice();
    let v = state.v.as_mut_slice();
    for (((p, &g), mi), vi) in param.as_mut_slice().iter_mut().zip(grad.as_slice()).zip(m).zip(v) {
        *mi = b1 * *mi + (1.0 - b1) * g;
        *vi = b2 * *vi + (1.0 - b2) * g * g;
        let m_hat = *mi / c1;
        let v_hat = *vi / c2;
        *p -= lr * m_hat / (libm::sqrt(v_hat) + state.eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_identity() {
        let mut p = Matrix::from_rows(&[[1.5, -2.0], [0.25, 3.0]]);
        let before = p.clone();
        let mut s = AdamState::for_param(&p);
        for _ in 0..5 {
            adam_step(&mut p, &Matrix::zeros(2, 2), &mut s, 0.1).unwrap();
        }
        assert_eq!(p, before);
        assert_eq!(s.step(), 5);
    }

    #[test]
    fn first_step_closed_form() {
        for g in [0.3, 1.0, 7.5] {
            let mut p = Matrix::scalar(0.0);
            let mut s = AdamState::new(1, 1);
            adam_step(&mut p, &Matrix::scalar(g), &mut s, 0.01).unwrap();
            let expected = -0.01 * g / (g + 1e-8);
            assert!((p.item() - expected).abs() < 1e-15);
            assert!((p.item() + 0.01).abs() < 1e-9);
        }
    }

    #[test]
    fn deterministic() {
        let run = || {
            let mut p = Matrix::from_rows(&[[0.1, 0.2]]);
            let mut s = AdamState::for_param(&p);
            for k in 0..10 {
                let g = Matrix::from_rows(&[[k as f64 * 0.3 - 1.0, 0.7]]);
                adam_step(&mut p, &g, &mut s, 0.05).unwrap();
            }
            p
        };
        assert_eq!(run().as_slice(), run().as_slice());
    }

    #[test]
    fn shape_mismatch() {
        let mut p = Matrix::zeros(2, 2);
        let mut s = AdamState::new(2, 2);
        assert!(matches!(
            adam_step(&mut p, &Matrix::zeros(1, 2), &mut s, 0.1),
            Err(Error::Dimension { .. })
        ));
    }
}
