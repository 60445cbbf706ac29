//! Heredity tensors and the quadratic stochastic operators they define.
//!
//! A q.s.o. on `S^{n-1}` maps `x` to `V(x)_k = sum_{i,j} P[ij,k] x_i x_j`
//! where the coefficients are nonnegative, symmetric in `(i, j)`, and sum to
//! one over `k`. Indices in this module's Rust API are 0-based.

pub mod random;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QsoError, Result};
use crate::simplex::{grid_simplex, l1, SimplexPoint};

/// Default tolerance on coefficient constraints.
pub const EPS_COEF: f64 = 1e-12;
/// Default trajectory stopping tolerance (l1 step).
pub const TRAJECTORY_TOL: f64 = 1e-12;
pub const TRAJECTORY_MAX_ITER: usize = 10_000;
/// Default deduplication radius for fixed points.
pub const DEDUP_RADIUS: f64 = 1e-6;
/// Resolution of the lattice used to seed the fixed-point search.
pub const SEED_GRID_RESOLUTION: usize = 6;

const NEWTON_MAX_ITER: usize = 200;
const NEWTON_MAX_HALVINGS: usize = 40;

/// Dense `n x n x n` tensor of heredity coefficients `P[ij,k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeredityTensor {
    n: usize,
    p: Vec<f64>,
}

impl HeredityTensor {
    pub fn zeros(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(QsoError::DimensionTooSmall(n));
        }
        Ok(HeredityTensor { n, p: vec![0.0; n * n * n] })
    }

    #[inline]
    fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.p[self.idx(i, j, k)]
    }

    /// Sets `P[ij,k]` only; the mirror entry `P[ji,k]` is untouched.
    pub fn set_entry(&mut self, i: usize, j: usize, k: usize, value: f64) {
        let at = self.idx(i, j, k);
        self.p[at] = value;
    }

    /// Sets both `P[ij,k]` and `P[ji,k]`.
    pub fn set(&mut self, i: usize, j: usize, k: usize, value: f64) {
        self.set_entry(i, j, k, value);
        self.set_entry(j, i, k, value);
    }

    /// The distribution `P[ij,.]` over offspring types.
    pub fn row(&self, i: usize, j: usize) -> &[f64] {
        let at = self.idx(i, j, 0);
        &self.p[at..at + self.n]
    }

    /// Averages `P[ij,k]` and `P[ji,k]`.
    pub fn symmetrized(&self) -> HeredityTensor {
        let mut out = self.clone();
        for i in 0..self.n {
            for j in i + 1..self.n {
                for k in 0..self.n {
                    let m = 0.5 * (self.get(i, j, k) + self.get(j, i, k));
                    out.set(i, j, k, m);
                }
            }
        }
        out
    }

    /// Coefficient-wise `lambda * self + (1 - lambda) * other`.
    pub fn convex_combination(&self, other: &HeredityTensor, lambda: f64) -> Result<HeredityTensor> {
        if self.n != other.n {
            return Err(QsoError::DimensionMismatch { expected: self.n, got: other.n });
        }
        let p = self.p.iter().zip(&other.p).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect();
        Ok(HeredityTensor { n: self.n, p })
    }
}

/// A validated q.s.o.
#[derive(Debug, Clone, PartialEq)]
pub struct QsoOperator {
    tensor: HeredityTensor,
}

impl QsoOperator {
    /// Validates with [`EPS_COEF`].
    pub fn new(tensor: HeredityTensor, symmetrize: bool) -> Result<Self> {
        Self::with_tolerance(tensor, symmetrize, EPS_COEF)
    }

    /// Checks range, symmetry (unless `symmetrize`), and unit row sums, then
    /// stores an exactly symmetric tensor whose rows are renormalized.
    pub fn with_tolerance(tensor: HeredityTensor, symmetrize: bool, eps: f64) -> Result<Self> {
        let n = tensor.n;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let v = tensor.get(i, j, k);
                    if !v.is_finite() || v < -eps || v > 1.0 + eps {
                        return Err(QsoError::CoefficientOutOfRange { i: i + 1, j: j + 1, k: k + 1, value: v });
                    }
                }
            }
        }
        if !symmetrize {
            for i in 0..n {
                for j in i + 1..n {
                    for k in 0..n {
                        let (a, b) = (tensor.get(i, j, k), tensor.get(j, i, k));
                        if (a - b).abs() > eps {
                            return Err(QsoError::Asymmetric { i: i + 1, j: j + 1, k: k + 1, pij: a, pji: b });
                        }
                    }
                }
            }
        }
        let mut t = tensor.symmetrized();
        for v in t.p.iter_mut() {
            *v = v.clamp(0.0, 1.0);
        }
        for i in 0..n {
            for j in i..n {
                let sum: f64 = t.row(i, j).iter().sum();
                if (sum - 1.0).abs() > eps {
                    return Err(QsoError::RowSum { i: i + 1, j: j + 1, sum });
                }
                for k in 0..n {
                    let v = t.get(i, j, k) / sum;
                    t.set(i, j, k, v);
                }
            }
        }
        Ok(QsoOperator { tensor: t })
    }

    pub fn dim(&self) -> usize {
        self.tensor.n
    }

    pub fn tensor(&self) -> &HeredityTensor {
        &self.tensor
    }

    #[inline]
    pub fn coef(&self, i: usize, j: usize, k: usize) -> f64 {
        self.tensor.get(i, j, k)
    }

    fn check_dim(&self, x: &SimplexPoint) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(QsoError::DimensionMismatch { expected: self.dim(), got: x.dim() });
        }
        Ok(())
    }

    /// Raw evaluation on a slice, without renormalization.
    pub(crate) fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim();
        out.iter_mut().for_each(|o| *o = 0.0);
        for i in 0..n {
            if x[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                let w = x[i] * x[j];
                if w == 0.0 {
                    continue;
                }
                let row = self.tensor.row(i, j);
                for k in 0..n {
                    out[k] += row[k] * w;
                }
            }
        }
    }

    pub fn evaluate(&self, x: &SimplexPoint) -> Result<SimplexPoint> {
        self.check_dim(x)?;
        let mut out = vec![0.0; self.dim()];
        self.apply(x.coords(), &mut out);
        Ok(SimplexPoint::from_raw(out))
    }

    /// Evaluates through the reduced form valid for b-bistochastic
    /// operators: offspring type `k < n` only receives mass from pairs with
    /// at least one parent of type `<= k`, and `P[nn,n] = 1`.
    pub fn evaluate_canonical(&self, x: &SimplexPoint) -> Result<SimplexPoint> {
        self.check_dim(x)?;
        let nec = crate::classify::check_necessary_bbistochastic(self);
        if !nec.all_pass() {
            return Err(QsoError::Precondition(
                "reduced form requires the necessary b-bistochastic conditions".into(),
            ));
        }
        let n = self.dim();
        let x = x.coords();
        let mut out = vec![0.0; n];
        for k in 0..n - 1 {
            let mut v = 0.0;
            for l in 0..=k {
                v += self.coef(l, l, k) * x[l] * x[l];
                for j in l + 1..n {
                    v += 2.0 * self.coef(l, j, k) * x[l] * x[j];
                }
            }
            out[k] = v;
        }
        let last = n - 1;
        let mut v = x[last] * x[last];
        for l in 0..last {
            v += self.coef(l, l, last) * x[l] * x[l];
            for j in l + 1..n {
                v += 2.0 * self.coef(l, j, last) * x[l] * x[j];
            }
        }
        out[last] = v;
        Ok(SimplexPoint::from_raw(out))
    }

    /// `V^{(m)}(x)`; `m = 0` is the identity.
    pub fn iterate(&self, x: &SimplexPoint, m: usize) -> Result<SimplexPoint> {
        self.check_dim(x)?;
        let mut cur = x.clone();
        for _ in 0..m {
            cur = self.step(&cur);
        }
        Ok(cur)
    }

    fn step(&self, x: &SimplexPoint) -> SimplexPoint {
        let mut out = vec![0.0; self.dim()];
        self.apply(x.coords(), &mut out);
        SimplexPoint::from_raw(out)
    }

    /// Iterates until the l1 step drops to `tol` or `max_iter` steps are taken.
    pub fn trajectory(&self, x: &SimplexPoint, tol: f64, max_iter: usize, keep_path: bool) -> Result<TrajectoryResult> {
        self.check_dim(x)?;
        if !(tol > 0.0) {
            return Err(QsoError::InvalidArgument("trajectory tolerance must be positive".into()));
        }
        let mut path = keep_path.then(|| vec![x.clone()]);
        let mut cur = x.clone();
        let mut last_step = f64::INFINITY;
        for it in 1..=max_iter {
            let next = self.step(&cur);
            last_step = l1(next.coords(), cur.coords());
            if let Some(p) = path.as_mut() {
                p.push(next.clone());
            }
            cur = next;
            if last_step <= tol {
                return Ok(TrajectoryResult { limit: cur, iterations_used: it, final_step_l1: last_step, converged: true, path });
            }
        }
        Ok(TrajectoryResult { limit: cur, iterations_used: max_iter, final_step_l1: last_step, converged: false, path })
    }

    /// `||V(x) - x||_1`.
    pub fn residual(&self, x: &SimplexPoint) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.residual_raw(x.coords()))
    }

    fn residual_raw(&self, x: &[f64]) -> f64 {
        let mut out = vec![0.0; self.dim()];
        self.apply(x, &mut out);
        l1(&out, x)
    }

    /// Jacobian of the reduced map on the first `n-1` coordinates, where
    /// `x_n = 1 - (x_1 + ... + x_{n-1})` is substituted before differentiating.
    pub fn reduced_jacobian(&self, x: &SimplexPoint) -> Result<DMatrix<f64>> {
        self.check_dim(x)?;
        Ok(self.reduced_jacobian_raw(x.coords()))
    }

    fn reduced_jacobian_raw(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        let last = n - 1;
        DMatrix::from_fn(n - 1, n - 1, |k, i| {
            let mut v = 0.0;
            for j in 0..n {
                v += (self.coef(i, j, k) - self.coef(last, j, k)) * x[j];
            }
            2.0 * v
        })
    }

    /// Eigenvalues of the reduced Jacobian at `(0, ..., 0, 1)` read off the
    /// coefficients: `2 P[kn,k]` for `k = 1..n-1`. Valid when the Jacobian
    /// there is lower triangular, i.e. for operators meeting the necessary
    /// b-bistochastic conditions.
    pub fn vertex_eigenvalues(&self) -> Vec<f64> {
        let last = self.dim() - 1;
        (0..last).map(|k| 2.0 * self.coef(k, last, k)).collect()
    }

    /// Multistart search over vertices, barycenter, a lattice, and
    /// `extra_seeds`; each seed is iterated and then Newton-polished.
    pub fn find_fixed_points(&self, tol: f64, dedup_radius: f64, extra_seeds: &[SimplexPoint]) -> Result<FixedPointSet> {
        if !(tol > 0.0) {
            return Err(QsoError::InvalidArgument("fixed-point tolerance must be positive".into()));
        }
        let n = self.dim();
        let mut seeds: Vec<SimplexPoint> = (0..n).map(|i| SimplexPoint::vertex(n, i)).collect::<Result<_>>()?;
        seeds.push(SimplexPoint::barycenter(n)?);
        seeds.extend(grid_simplex(n, SEED_GRID_RESOLUTION)?);
        for s in extra_seeds {
            self.check_dim(s)?;
            seeds.push(s.clone());
        }

        let candidates: Vec<(Vec<f64>, f64)> = seeds
            .par_iter()
            .map(|seed| {
                let traj = self
                    .trajectory(seed, TRAJECTORY_TOL, TRAJECTORY_MAX_ITER, false)
                    .expect("seed dimension checked");
                let x = self.newton_polish(traj.limit.coords());
                let r = self.residual_raw(&x);
                (x, r)
            })
            .collect();

        let mut points: Vec<FixedPoint> = Vec::new();
        for (x, r) in candidates {
            if !(r <= tol) {
                continue;
            }
            match points.iter_mut().find(|p| l1(p.point.coords(), &x) <= dedup_radius) {
                Some(existing) => {
                    if r < existing.residual {
                        existing.point = SimplexPoint::from_raw(x);
                        existing.residual = r;
                    }
                }
                None => points.push(FixedPoint { point: SimplexPoint::from_raw(x), residual: r }),
            }
        }
        Ok(FixedPointSet { points, dedup_radius })
    }

    /// Damped Newton on `V(x) - x` in the reduced chart. Steps leaving the
    /// simplex or failing to lower the residual are halved.
    fn newton_polish(&self, start: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let m = n - 1;
        let mut x = start.to_vec();
        let mut res = self.residual_raw(&x);
        let mut vx = vec![0.0; n];
        for _ in 0..NEWTON_MAX_ITER {
            if res == 0.0 {
                break;
            }
            self.apply(&x, &mut vx);
            let jac = self.reduced_jacobian_raw(&x) - DMatrix::<f64>::identity(m, m);
            let rhs = DVector::from_fn(m, |k, _| x[k] - vx[k]);
            let delta = match jac.clone().lu().solve(&rhs) {
                Some(d) if d.iter().all(|v| v.is_finite()) => d,
                _ => match jac.svd(true, true).solve(&rhs, 1e-14) {
                    Ok(d) if d.iter().all(|v| v.is_finite()) => d,
                    _ => break,
                },
            };
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..=NEWTON_MAX_HALVINGS {
                let mut cand: Vec<f64> = (0..m).map(|k| x[k] + t * delta[k]).collect();
                let tail = 1.0 - cand.iter().sum::<f64>();
                cand.push(tail);
                if cand.iter().all(|&c| c >= -1e-15) {
                    let cand = SimplexPoint::from_raw(cand).into_vec();
                    let r = self.residual_raw(&cand);
                    if r < res {
                        accepted = Some((cand, r));
                        break;
                    }
                }
                t *= 0.5;
            }
            let Some((cand, r)) = accepted else { break };
            let moved = l1(&cand, &x);
            x = cand;
            res = r;
            if moved < 1e-17 {
                break;
            }
        }
        x
    }
}

/// Outcome of [`QsoOperator::trajectory`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryResult {
    pub limit: SimplexPoint,
    pub iterations_used: usize,
    pub final_step_l1: f64,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<Vec<SimplexPoint>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub point: SimplexPoint,
    /// `||V(x) - x||_1`
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointSet {
    pub points: Vec<FixedPoint>,
    pub dedup_radius: f64,
}

impl FixedPointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// True if some member lies within `radius` (l1) of `target`.
    pub fn contains_near(&self, target: &[f64], radius: f64) -> bool {
        self.points.iter().any(|p| l1(p.point.coords(), target) <= radius)
    }
}
