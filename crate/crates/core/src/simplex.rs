//! Points of the probability simplex, the b-order, and classical majorization.
//!
//! A point of `S^{n-1}` is a vector of `n >= 2` nonnegative coordinates summing
//! to one. The b-order compares prefix sums `U_k(x) = x_1 + ... + x_k` for
//! `k = 1..n-1`; classical majorization is the b-order applied after sorting
//! both vectors in non-increasing order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{QsoError, Result};

/// Default membership tolerance for simplex points.
pub const EPS_SIMPLEX: f64 = 1e-12;
/// Default slack for order comparisons.
pub const EPS_ORDER: f64 = 1e-12;

/// A probability vector on `S^{n-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SimplexPoint(Vec<f64>);

impl SimplexPoint {
    /// Validates with [`EPS_SIMPLEX`], clamps small negatives to zero and
    /// renormalizes.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(coords, EPS_SIMPLEX)
    }

    pub fn with_tolerance(mut coords: Vec<f64>, eps: f64) -> Result<Self> {
        if coords.len() < 2 {
            return Err(QsoError::DimensionTooSmall(coords.len()));
        }
        for (i, &c) in coords.iter().enumerate() {
            if !c.is_finite() {
                return Err(QsoError::NonFiniteCoordinate { index: i + 1 });
            }
            if c < -eps {
                return Err(QsoError::NegativeCoordinate { index: i + 1, value: c });
            }
        }
        let sum: f64 = coords.iter().sum();
        if (sum - 1.0).abs() > eps {
            return Err(QsoError::SumDeviation { sum });
        }
        for c in coords.iter_mut() {
            if *c < 0.0 {
                *c = 0.0;
            }
        }
        let sum: f64 = coords.iter().sum();
        for c in coords.iter_mut() {
            *c /= sum;
        }
        Ok(SimplexPoint(coords))
    }

    /// Projects an arbitrary finite nonnegative-mass vector onto the simplex
    /// by clamping negatives and renormalizing. Used for iteration output,
    /// where round-off may push coordinates slightly out.
    pub(crate) fn from_raw(mut coords: Vec<f64>) -> Self {
        for c in coords.iter_mut() {
            if *c < 0.0 || !c.is_finite() {
                *c = 0.0;
            }
        }
        let sum: f64 = coords.iter().sum();
        if sum > 0.0 {
            for c in coords.iter_mut() {
                *c /= sum;
            }
        }
        SimplexPoint(coords)
    }

    /// The vertex `e_i` (0-based `i`).
    pub fn vertex(n: usize, i: usize) -> Result<Self> {
        if n < 2 {
            return Err(QsoError::DimensionTooSmall(n));
        }
        if i >= n {
            return Err(QsoError::IndexOutOfRange { index: i + 1, lo: 1, hi: n });
        }
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        Ok(SimplexPoint(v))
    }

    /// The distinguished vertex `(0, ..., 0, 1)`.
    pub fn last_vertex(n: usize) -> Result<Self> {
        Self::vertex(n, n.saturating_sub(1))
    }

    pub fn barycenter(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(QsoError::DimensionTooSmall(n));
        }
        Ok(SimplexPoint(vec![1.0 / n as f64; n]))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// `U_k(x)`, the sum of the first `k` coordinates, for `1 <= k <= n-1`.
    pub fn partial_sum(&self, k: usize) -> Result<f64> {
        let n = self.dim();
        if k < 1 || k > n - 1 {
            return Err(QsoError::IndexOutOfRange { index: k, lo: 1, hi: n - 1 });
        }
        Ok(self.0[..k].iter().sum())
    }

    /// All prefix sums `U_1, ..., U_{n-1}`.
    pub fn partial_sums(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.0[..self.dim() - 1]
            .iter()
            .map(|c| {
                acc += c;
                acc
            })
            .collect()
    }

    /// Stable non-increasing rearrangement.
    pub fn rearrange_desc(&self) -> SimplexPoint {
        let mut v = self.0.clone();
        // sort_by is stable; reversing the comparator keeps ties in place
        v.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
        SimplexPoint(v)
    }

    /// 0-based indices of the nonzero coordinates.
    pub fn support(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn in_relative_interior(&self) -> bool {
        self.in_relative_interior_with(EPS_SIMPLEX)
    }

    pub fn in_relative_interior_with(&self, eps: f64) -> bool {
        self.0.iter().all(|&c| c > eps)
    }

    pub fn l1_distance(&self, other: &SimplexPoint) -> Result<f64> {
        check_same_dim(self, other)?;
        Ok(l1(&self.0, &other.0))
    }
}

impl TryFrom<Vec<f64>> for SimplexPoint {
    type Error = QsoError;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        SimplexPoint::new(v)
    }
}

impl From<SimplexPoint> for Vec<f64> {
    fn from(p: SimplexPoint) -> Self {
        p.0
    }
}

pub(crate) fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn check_same_dim(x: &SimplexPoint, y: &SimplexPoint) -> Result<()> {
    if x.dim() != y.dim() {
        return Err(QsoError::DimensionMismatch { expected: x.dim(), got: y.dim() });
    }
    Ok(())
}

/// Outcome of an order comparison.
///
/// `first_violating_index` is the 1-based `k` of the first prefix sum that
/// breaks the order, and `gap = U_k(y) - U_k(x)` there (negative on failure).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderVerdict {
    pub holds: bool,
    pub first_violating_index: Option<usize>,
    pub gap: f64,
}

impl OrderVerdict {
    fn holds() -> Self {
        OrderVerdict { holds: true, first_violating_index: None, gap: 0.0 }
    }
}

/// `x <=^b y`: every prefix sum of `x` is at most the one of `y`.
pub fn b_leq(x: &SimplexPoint, y: &SimplexPoint) -> Result<OrderVerdict> {
    b_leq_with(x, y, EPS_ORDER)
}

pub fn b_leq_with(x: &SimplexPoint, y: &SimplexPoint, eps: f64) -> Result<OrderVerdict> {
    check_same_dim(x, y)?;
    Ok(b_leq_slices(&x.0, &y.0, eps))
}

pub(crate) fn b_leq_slices(x: &[f64], y: &[f64], eps: f64) -> OrderVerdict {
    let (mut ux, mut uy) = (0.0, 0.0);
    for k in 0..x.len() - 1 {
        ux += x[k];
        uy += y[k];
        if ux > uy + eps {
            return OrderVerdict { holds: false, first_violating_index: Some(k + 1), gap: uy - ux };
        }
    }
    OrderVerdict::holds()
}

/// Classical majorization `x ≺ y`.
pub fn majorizes(x: &SimplexPoint, y: &SimplexPoint) -> Result<OrderVerdict> {
    b_leq(&x.rearrange_desc(), &y.rearrange_desc())
}

/// `count` points drawn by normalizing i.i.d. standard exponentials from a
/// ChaCha8 stream seeded with `seed`.
pub fn sample_simplex(n: usize, count: usize, seed: u64) -> Result<Vec<SimplexPoint>> {
    if n < 2 {
        return Err(QsoError::DimensionTooSmall(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count).map(|_| sample_one(n, &mut rng)).collect())
}

pub(crate) fn sample_one<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> SimplexPoint {
    let e: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    SimplexPoint::from_raw(e)
}

/// All lattice points `(k_1/r, ..., k_n/r)` with `sum k_i = r`, in
/// lexicographically decreasing order of `(k_1, ..., k_n)`.
pub fn grid_simplex(n: usize, resolution: usize) -> Result<Vec<SimplexPoint>> {
    if n < 2 {
        return Err(QsoError::DimensionTooSmall(n));
    }
    if resolution < 1 {
        return Err(QsoError::InvalidArgument("grid resolution must be at least 1".into()));
    }
    let mut out = Vec::new();
    let mut ks = vec![0usize; n];
    fill_grid(&mut ks, 0, resolution, resolution, &mut out);
    Ok(out)
}

fn fill_grid(ks: &mut [usize], pos: usize, left: usize, r: usize, out: &mut Vec<SimplexPoint>) {
    let n = ks.len();
    if pos == n - 1 {
        ks[pos] = left;
        out.push(SimplexPoint(ks.iter().map(|&k| k as f64 / r as f64).collect()));
        return;
    }
    for k in (0..=left).rev() {
        ks[pos] = k;
        fill_grid(ks, pos + 1, left - k, r, out);
    }
}
