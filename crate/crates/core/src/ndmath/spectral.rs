use alloc::vec;

use super::{l2_norm, Matrix};

pub const DEFAULT_ITERS: usize = 200;
pub const DEFAULT_TOL: f64 = 1e-9;

/// Largest singular value by power iteration on `WᵀW`, started from the
/// normalised all-ones vector.
pub fn spectral_norm(w: &Matrix, max_iters: usize, tol: f64) -> f64 {
    let n = w.cols();
    if w.is_empty() || w.max_abs() == 0.0 {
        return 0.0;
    }
    let mut v = vec![1.0 / libm::sqrt(n as f64); n];
    let mut sigma = 0.0;
    let mut wv = vec![0.0; w.rows()];
    let mut next = vec![0.0; n];
    for it in 0..max_iters.max(1) {
        for (i, o) in wv.iter_mut().enumerate() {
            *o = super::dot(w.row(i), &v);
        }
        next.iter_mut().for_each(|x| *x = 0.0);
        for (i, &a) in wv.iter().enumerate() {
            for (o, &wij) in next.iter_mut().zip(w.row(i)) {
                *o += a * wij;
            }
        }
        let norm = l2_norm(&next);
        if norm == 0.0 {
            // Start vector orthogonal to the row space: restart on a basis vector.
            if it == 0 {
                v = vec![0.0; n];
                let c = (0..n)
                    .max_by(|&a, &b| column_norm(w, a).total_cmp(&column_norm(w, b)))
                    .unwrap_or(0);
                v[c] = 1.0;
                continue;
            }
            break;
        }
        next.iter_mut().for_each(|x| *x /= norm);
        core::mem::swap(&mut v, &mut next);
        let new_sigma = libm::sqrt(norm);
        let done = (new_sigma - sigma).abs() <= tol * new_sigma.max(1.0);
        sigma = new_sigma;
        if done {
            break;
        }
    }
    // Rayleigh value of the final iterate.
    for (i, o) in wv.iter_mut().enumerate() {
        *o = super::dot(w.row(i), &v);
    }
    l2_norm(&wv).max(0.0)
}

fn column_norm(w: &Matrix, c: usize) -> f64 {
    libm::sqrt((0..w.rows()).map(|i| w.get(i, c) * w.get(i, c)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_diagonal() {
        assert!((spectral_norm(&Matrix::identity(3), DEFAULT_ITERS, DEFAULT_TOL) - 1.0).abs() < 1e-12);
        let d = Matrix::from_rows(&[[3.0, 0.0], [0.0, 1.0]]);
        assert!((spectral_norm(&d, DEFAULT_ITERS, DEFAULT_TOL) - 3.0).abs() < 1e-9);
    }

    #[test]
    fn zero_matrix() {
        assert_eq!(spectral_norm(&Matrix::zeros(3, 2), DEFAULT_ITERS, DEFAULT_TOL), 0.0);
    }

    #[test]
    fn start_vector_orthogonal_to_rows() {
        let w = Matrix::from_rows(&[[1.0, -1.0]]);
        let s = spectral_norm(&w, DEFAULT_ITERS, DEFAULT_TOL);
        assert!((s - libm::sqrt(2.0)).abs() < 1e-12);
    }
}
