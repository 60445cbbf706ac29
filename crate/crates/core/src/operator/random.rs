//! Random heredity tensors for property checks and sweeps.
//!
//! [`random_b_bistochastic`] draws tensors whose cumulative offspring mass
//! satisfies, for every pair `i <= j` and every `k`,
//! `sum_{m <= k} P[ij,m] <= (1[i <= k] + 1[j <= k]) / 2`. Writing
//! `U_k(x) = sum_{i,j} x_i x_j (1[i <= k] + 1[j <= k]) / 2` shows this is
//! enough for `U_k(V(x)) <= U_k(x)` on the whole simplex.

use rand::{Rng, RngExt};
use rand_distr::{Distribution, Exp1};

use super::{HeredityTensor, QsoOperator};

/// Bounds used by [`random_b_bistochastic`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBistochasticBounds {
    /// Upper bound on `P[kk,k]` for `k < n`. Values below 1 keep the
    /// self-coefficient condition of the uniqueness criterion.
    pub self_max: f64,
    /// Upper bound on the mass a mixed pair `i < j` sends to types
    /// `i..j-1`. At most 1/2; below 1/2 also bounds `P[kj,k]`.
    pub cross_max: f64,
    /// Probability that an individual weight is forced to zero, producing
    /// sparse tensors like the hand-written examples.
    pub sparsity: f64,
}

impl BBistochasticBounds {
    /// Satisfies the uniqueness conditions with a margin.
    pub fn unique() -> Self {
        BBistochasticBounds { self_max: 0.95, cross_max: 0.45, sparsity: 0.2 }
    }

    /// Any b-bistochastic tensor of this construction, including `P[kk,k] = 1`.
    pub fn general() -> Self {
        BBistochasticBounds { self_max: 1.0, cross_max: 0.5, sparsity: 0.2 }
    }
}

fn weights<R: Rng + ?Sized>(len: usize, sparsity: f64, rng: &mut R) -> Vec<f64> {
    let mut w: Vec<f64> = (0..len)
        .map(|_| if rng.random::<f64>() < sparsity { 0.0 } else { Exp1.sample(rng) })
        .collect();
    let s: f64 = w.iter().sum();
    if s == 0.0 {
        let at = rng.random_range(0..len);
        w[at] = 1.0;
        return w;
    }
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// A random b-bistochastic operator within `bounds`.
pub fn random_b_bistochastic<R: Rng + ?Sized>(n: usize, bounds: BBistochasticBounds, rng: &mut R) -> QsoOperator {
    let mut t = HeredityTensor::zeros(n).expect("n >= 2");
    let last = n - 1;
    t.set(last, last, last, 1.0);
    for i in 0..last {
        // diagonal pair: mass on types i..n-1, with the self share bounded
        let s = bounds.self_max * rng.random::<f64>();
        t.set(i, i, i, s);
        let rest = weights(last - i, bounds.sparsity, rng);
        for (off, w) in rest.into_iter().enumerate() {
            t.set(i, i, i + 1 + off, (1.0 - s) * w);
        }
        for j in i + 1..n {
            let low = bounds.cross_max * rng.random::<f64>();
            let below = weights(j - i, bounds.sparsity, rng);
            for (off, w) in below.into_iter().enumerate() {
                t.set(i, j, i + off, low * w);
            }
            let above = weights(n - j, bounds.sparsity, rng);
            for (off, w) in above.into_iter().enumerate() {
                t.set(i, j, j + off, (1.0 - low) * w);
            }
        }
    }
    QsoOperator::new(t, false).expect("construction yields a valid tensor")
}

/// A random q.s.o. with every pair distribution drawn uniformly from the
/// simplex (no order structure).
pub fn random_tensor<R: Rng + ?Sized>(n: usize, rng: &mut R) -> QsoOperator {
    let mut t = HeredityTensor::zeros(n).expect("n >= 2");
    for i in 0..n {
        for j in i..n {
            let w = weights(n, 0.0, rng);
            for (k, v) in w.into_iter().enumerate() {
                t.set(i, j, k, v);
            }
        }
    }
    QsoOperator::new(t, false).expect("construction yields a valid tensor")
}

/// A random q.s.o. whose pair distributions all lie within `spread` of a
/// common distribution, so the contraction modulus is at most `2 * spread`.
pub fn random_near_constant<R: Rng + ?Sized>(n: usize, spread: f64, rng: &mut R) -> QsoOperator {
    let base = weights(n, 0.0, rng);
    let mut t = HeredityTensor::zeros(n).expect("n >= 2");
    for i in 0..n {
        for j in i..n {
            let w = weights(n, 0.0, rng);
            for k in 0..n {
                t.set(i, j, k, (1.0 - spread) * base[k] + spread * w[k]);
            }
        }
    }
    QsoOperator::new(t, false).expect("construction yields a valid tensor")
}
