use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::rng::{stream, SPLIT};

/// Fractions of nodes used for training and validation.
pub const TRAIN_FRACTION: f64 = 0.5;
pub const VAL_FRACTION: f64 = 0.25;

/// Seeded uniform split into disjoint `(train, val)` masks; the remainder
/// is unused.
pub fn random_split(n: usize, seed: u64) -> (Vec<bool>, Vec<bool>) {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(seed, SPLIT));
    let n_train = libm::round(TRAIN_FRACTION * n as f64) as usize;
    let n_val = libm::round(VAL_FRACTION * n as f64) as usize;
    let mut train = vec![false; n];
    let mut val = vec![false; n];
    for &i in &order[..n_train] {
        train[i] = true;
    }
    for &i in &order[n_train..n_train + n_val] {
        val[i] = true;
    }
    (train, val)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_and_disjointness() {
        let (t, v) = random_split(100, 7);
        assert_eq!(t.iter().filter(|&&b| b).count(), 50);
        assert_eq!(v.iter().filter(|&&b| b).count(), 25);
        assert!(t.iter().zip(&v).all(|(a, b)| !(a & b)));
        assert_eq!(random_split(100, 7), (t, v));
    }
}
