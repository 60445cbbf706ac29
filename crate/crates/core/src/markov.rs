//! The nonhomogeneous Markov chain generated by a q.s.o. `V` and a start
//! `x`: the trajectory `x^(k) = V^k(x)` drives transition matrices
//! `H^[k,k+1]_{ij} = sum_l P[il,j] x_l^(k)`, and cylinder sets get measure
//! `x^(l)_{i_l} * prod_t H^[t,t+1]_{i_t i_{t+1}}`.
//!
//! States are 0-based in the Rust API and 1-based in text forms.

use std::fmt;
use std::str::FromStr;
use std::sync::RwLock;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{QsoError, Result};
use crate::logspace::{ln0, log_sum_exp};
use crate::operator::QsoOperator;
use crate::simplex::SimplexPoint;

/// Threshold below which the last three mixing gaps count as mixed.
pub const MIXING_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Default)]
struct Cache {
    states: Vec<Vec<f64>>,
    log_states: Vec<Vec<f64>>,
    matrices: Vec<DMatrix<f64>>,
    log_matrices: Vec<DMatrix<f64>>,
}

/// Trajectory and one-step transition matrices of `(V, x)`, memoized up to
/// the largest horizon requested so far. Readers share the cache; a single
/// writer appends when a longer horizon is needed.
#[derive(Debug)]
pub struct TransitionFamily {
    operator: QsoOperator,
    start: SimplexPoint,
    cache: RwLock<Cache>,
}

impl Clone for TransitionFamily {
    fn clone(&self) -> Self {
        TransitionFamily::new(self.operator.clone(), self.start.clone()).expect("validated on construction")
    }
}

impl TransitionFamily {
    pub fn new(operator: QsoOperator, start: SimplexPoint) -> Result<Self> {
        if operator.dim() != start.dim() {
            return Err(QsoError::DimensionMismatch { expected: operator.dim(), got: start.dim() });
        }
        let log0: Vec<f64> = start.coords().iter().map(|&v| ln0(v)).collect();
        let cache = Cache { states: vec![start.coords().to_vec()], log_states: vec![log0], ..Cache::default() };
        Ok(TransitionFamily { operator, start, cache: RwLock::new(cache) })
    }

    pub fn dim(&self) -> usize {
        self.operator.dim()
    }

    pub fn operator(&self) -> &QsoOperator {
        &self.operator
    }

    pub fn start(&self) -> &SimplexPoint {
        &self.start
    }

    /// Number of one-step matrices currently cached.
    pub fn cached_horizon(&self) -> usize {
        self.cache.read().expect("cache lock").matrices.len()
    }

    /// Makes sure states `0..=k` and matrices `0..k` are cached.
    fn ensure(&self, k: usize) {
        {
            let c = self.cache.read().expect("cache lock");
            if c.states.len() > k && c.matrices.len() >= k {
                return;
            }
        }
        let mut c = self.cache.write().expect("cache lock");
        let n = self.dim();
        while c.states.len() <= k {
            let last = c.states.len() - 1;
            let mut next = vec![0.0; n];
            self.operator.apply(&c.states[last], &mut next);
            let s: f64 = next.iter().sum();
            next.iter_mut().for_each(|v| *v /= s);
            let lx = &c.log_states[last];
            let mut log_next = vec![0.0; n];
            let mut terms = Vec::with_capacity(n * n);
            for (kk, out) in log_next.iter_mut().enumerate() {
                terms.clear();
                for i in 0..n {
                    for j in 0..n {
                        terms.push(ln0(self.operator.coef(i, j, kk)) + lx[i] + lx[j]);
                    }
                }
                *out = log_sum_exp(&terms);
            }
            // the exact state sums to 1; renormalizing stops drift in the logs
            let total = log_sum_exp(&log_next);
            log_next.iter_mut().for_each(|v| *v -= total);
            c.states.push(next);
            c.log_states.push(log_next);
        }
        while c.matrices.len() < k {
            let t = c.matrices.len();
            let (h, lh) = self.one_step(&c.states[t], &c.log_states[t]);
            c.matrices.push(h);
            c.log_matrices.push(lh);
        }
    }

    fn one_step(&self, x: &[f64], lx: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.dim();
        let op = &self.operator;
        let mut h = DMatrix::from_fn(n, n, |i, j| (0..n).map(|l| op.coef(i, l, j) * x[l]).sum::<f64>());
        for i in 0..n {
            let s: f64 = h.row(i).sum();
            h.row_mut(i).iter_mut().for_each(|v| *v /= s);
        }
        let mut lh = DMatrix::from_fn(n, n, |i, j| {
            let terms: Vec<f64> = (0..n).map(|l| ln0(op.coef(i, l, j)) + lx[l]).collect();
            log_sum_exp(&terms)
        });
        for i in 0..n {
            let row: Vec<f64> = lh.row(i).iter().copied().collect();
            let total = log_sum_exp(&row);
            lh.row_mut(i).iter_mut().for_each(|v| *v -= total);
        }
        (h, lh)
    }

    /// `x^(k)`.
    pub fn state(&self, k: usize) -> Vec<f64> {
        self.ensure(k);
        self.cache.read().expect("cache lock").states[k].clone()
    }

    /// `ln x^(k)` computed by a log-domain recursion, finite where the
    /// linear value has underflowed.
    pub fn log_state(&self, k: usize) -> Vec<f64> {
        self.ensure(k);
        self.cache.read().expect("cache lock").log_states[k].clone()
    }

    /// `H^[k,k+1]`.
    pub fn transition_matrix(&self, k: usize) -> DMatrix<f64> {
        self.ensure(k + 1);
        self.cache.read().expect("cache lock").matrices[k].clone()
    }

    /// Entrywise `ln H^[k,k+1]`.
    pub fn log_transition_matrix(&self, k: usize) -> DMatrix<f64> {
        self.ensure(k + 1);
        self.cache.read().expect("cache lock").log_matrices[k].clone()
    }

    /// `H^[k,m] = H^[k,k+1] H^[k+1,k+2] ... H^[m-1,m]`.
    pub fn compose_transitions(&self, k: usize, m: usize) -> Result<DMatrix<f64>> {
        if k >= m {
            return Err(QsoError::InvalidArgument(format!("compose_transitions needs k < m, got k={k}, m={m}")));
        }
        self.ensure(m);
        let c = self.cache.read().expect("cache lock");
        let mut out = c.matrices[k].clone();
        for t in k + 1..m {
            out = &out * &c.matrices[t];
        }
        Ok(out)
    }

    fn check_states(&self, c: &CylinderSet) -> Result<()> {
        let n = self.dim();
        for &s in &c.states {
            if s >= n {
                return Err(QsoError::IndexOutOfRange { index: s + 1, lo: 1, hi: n });
            }
        }
        Ok(())
    }

    /// `mu(A^[l,m](i_l, ..., i_m))`.
    pub fn cylinder_measure(&self, c: &CylinderSet) -> Result<f64> {
        self.check_states(c)?;
        self.ensure(c.end());
        let cache = self.cache.read().expect("cache lock");
        let mut v = cache.states[c.l][c.states[0]];
        for (off, w) in c.states.windows(2).enumerate() {
            v *= cache.matrices[c.l + off][(w[0], w[1])];
        }
        Ok(v)
    }

    /// `ln mu(A)` accumulated from log-domain states and transitions.
    pub fn log_cylinder_measure(&self, c: &CylinderSet) -> Result<f64> {
        self.check_states(c)?;
        self.ensure(c.end());
        let cache = self.cache.read().expect("cache lock");
        let mut v = cache.log_states[c.l][c.states[0]];
        for (off, w) in c.states.windows(2).enumerate() {
            v += cache.log_matrices[c.l + off][(w[0], w[1])];
        }
        Ok(v)
    }

    /// `x_i^(k) H^[k,m]_{ij}`.
    pub fn two_point_measure(&self, k: usize, i: usize, m: usize, j: usize) -> Result<f64> {
        let n = self.dim();
        for s in [i, j] {
            if s >= n {
                return Err(QsoError::IndexOutOfRange { index: s + 1, lo: 1, hi: n });
            }
        }
        let h = self.compose_transitions(k, m)?;
        Ok(self.state(k)[i] * h[(i, j)])
    }

    /// `(tau_m, bound_m)` for `A` and `sigma^m(B)`, where
    /// `tau_m = |mu(A and sigma^m B) - mu(A) mu(sigma^m B)|` and
    /// `bound_m = |H^[l,s+m]_{i_l j_s} - x^(s+m)_{j_s}|` with `l` the end of
    /// `A` and `s` the start of `B`.
    pub fn mixing_gap(&self, a: &CylinderSet, b: &CylinderSet, m: usize) -> Result<(f64, f64)> {
        self.check_states(a)?;
        self.check_states(b)?;
        let shifted = shift_cylinder(b, m);
        if a.end() >= shifted.l {
            return Err(QsoError::OverlappingWindows { first_end: a.end(), second_start: shifted.l });
        }
        let prefix = self.cylinder_measure(a)?;
        let suffix = {
            self.ensure(shifted.end());
            let cache = self.cache.read().expect("cache lock");
            shifted
                .states
                .windows(2)
                .enumerate()
                .map(|(off, w)| cache.matrices[shifted.l + off][(w[0], w[1])])
                .product::<f64>()
        };
        let (il, js) = (*a.states.last().expect("non-empty"), shifted.states[0]);
        let h = self.compose_transitions(a.end(), shifted.l)?[(il, js)];
        let bound = (h - self.state(shifted.l)[js]).abs();
        Ok((prefix * suffix * bound, bound))
    }

    /// Gaps for every admissible `m` up to `m_max`, starting at the first
    /// shift that places `B` after `A`.
    pub fn mixing_series(&self, a: &CylinderSet, b: &CylinderSet, m_max: usize) -> Result<MixingSeries> {
        if m_max < 1 {
            return Err(QsoError::InvalidArgument("m_max must be at least 1".into()));
        }
        let first = (a.end() + 1).saturating_sub(b.l).max(1);
        let mut terms = Vec::new();
        for m in first..=m_max {
            let (tau, bound) = self.mixing_gap(a, b, m)?;
            terms.push(MixingTerm { m, tau, bound });
        }
        let numerically_mixing = terms.len() >= 3 && terms[terms.len() - 3..].iter().all(|t| t.tau < MIXING_THRESHOLD);
        Ok(MixingSeries { a: a.clone(), b: b.clone(), terms, numerically_mixing })
    }
}

/// Thin cylinder `A^[l,m](i_l, ..., i_m)` with `m = l + states.len() - 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CylinderSet {
    pub l: usize,
    /// 0-based states.
    pub states: Vec<usize>,
}

impl CylinderSet {
    pub fn new(l: usize, states: Vec<usize>) -> Result<Self> {
        if states.is_empty() {
            return Err(QsoError::InvalidArgument("a cylinder needs at least one state".into()));
        }
        Ok(CylinderSet { l, states })
    }

    /// Builds from 1-based states.
    pub fn from_one_based(l: usize, states: &[usize]) -> Result<Self> {
        if let Some(&bad) = states.iter().find(|&&s| s == 0) {
            return Err(QsoError::IndexOutOfRange { index: bad, lo: 1, hi: usize::MAX });
        }
        Self::new(l, states.iter().map(|s| s - 1).collect())
    }

    /// Last time in the window.
    pub fn end(&self) -> usize {
        self.l + self.states.len() - 1
    }
}

/// `sigma^m(c)`: the same states on the window moved `m` steps later.
pub fn shift_cylinder(c: &CylinderSet, m: usize) -> CylinderSet {
    CylinderSet { l: c.l + m, states: c.states.clone() }
}

/// Text form `l:i_l,...,i_m` with 1-based states.
impl fmt::Display for CylinderSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.states.iter().map(|s| (s + 1).to_string()).collect();
        write!(f, "{}:{}", self.l, s.join(","))
    }
}

impl FromStr for CylinderSet {
    type Err = QsoError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: &str| QsoError::InvalidArgument(format!("cylinder '{s}': {msg}"));
        let (l, rest) = s.split_once(':').ok_or_else(|| bad("expected l:i,j,..."))?;
        let l: usize = l.trim().parse().map_err(|_| bad("window start is not a non-negative integer"))?;
        let states: Vec<usize> = rest
            .split(',')
            .map(|t| t.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad("states must be positive integers"))?;
        Self::from_one_based(l, &states)
    }
}

impl Serialize for CylinderSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CylinderSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingTerm {
    pub m: usize,
    pub tau: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingSeries {
    pub a: CylinderSet,
    pub b: CylinderSet,
    pub terms: Vec<MixingTerm>,
    pub numerically_mixing: bool,
}

impl MixingSeries {
    /// CSV with columns `m,tau_m,bound_m`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,tau_m,bound_m\n");
        for t in &self.terms {
            out.push_str(&format!("{},{},{}\n", t.m, crate::report::fmt_f64(t.tau), crate::report::fmt_f64(t.bound)));
        }
        out
    }
}

/// Every state sequence of length `len` over `n` states, in lexicographic order.
pub fn all_sequences(n: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..n).map(move |s| {
                    let mut q = p.clone();
                    q.push(s);
                    q
                })
            })
            .collect();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn family(a: f64, x1: f64) -> TransitionFamily {
        TransitionFamily::new(fixtures::va(a).unwrap(), SimplexPoint::new(vec![x1, 1.0 - x1]).unwrap()).unwrap()
    }

    #[test]
    fn va_transition_examples() {
        let f = family(0.5, 0.5);
        let h0 = f.transition_matrix(0);
        assert_eq!(h0[(0, 0)], 0.25);
        assert_eq!(h0[(0, 1)], 0.75);
        assert_eq!(h0[(1, 0)], 0.0);
        assert_eq!(h0[(1, 1)], 1.0);
        assert_eq!(f.transition_matrix(1)[(0, 0)], 1.0 / 16.0);
        let h02 = f.compose_transitions(0, 2).unwrap();
        assert!((h02[(0, 0)] - 0.25f64.powi(3)).abs() < 1e-16);
        assert_eq!(f.compose_transitions(3, 4).unwrap(), f.transition_matrix(3));
        assert!(f.compose_transitions(2, 2).is_err());
    }

    #[test]
    fn associativity() {
        let f = TransitionFamily::new(fixtures::attracting_not_unique(), SimplexPoint::new(vec![0.2, 0.3, 0.5]).unwrap()).unwrap();
        let a = f.compose_transitions(0, 3).unwrap();
        let b = f.compose_transitions(0, 1).unwrap() * f.compose_transitions(1, 3).unwrap();
        let c = f.compose_transitions(0, 2).unwrap() * f.compose_transitions(2, 3).unwrap();
        assert!((&a - &b).abs().max() < 1e-14);
        assert!((&a - &c).abs().max() < 1e-14);
    }

    #[test]
    fn cylinder_examples() {
        let f = family(0.5, 0.5);
        let c = CylinderSet::from_one_based(0, &[1, 1]).unwrap();
        assert_eq!(f.cylinder_measure(&c).unwrap(), 0.125);
        assert!((f.log_cylinder_measure(&c).unwrap() - 0.125f64.ln()).abs() < 1e-15);
        for k in 0..6 {
            let c = CylinderSet::from_one_based(k, &[2, 1]).unwrap();
            assert_eq!(f.cylinder_measure(&c).unwrap(), 0.0);
        }
        let single = CylinderSet::from_one_based(2, &[1]).unwrap();
        assert_eq!(f.cylinder_measure(&single).unwrap(), f.state(2)[0]);
        let total: f64 = all_sequences(2, 4)
            .into_iter()
            .map(|s| f.cylinder_measure(&CylinderSet::new(3, s).unwrap()).unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(f.cylinder_measure(&CylinderSet::new(0, vec![0, 2]).unwrap()).is_err());
    }

    #[test]
    fn two_point() {
        let f = family(0.7, 0.4);
        for i in 0..2 {
            let s: f64 = (0..2).map(|j| f.two_point_measure(1, i, 4, j).unwrap()).sum();
            assert!((s - f.state(1)[i]).abs() < 1e-15);
        }
        assert_eq!(f.two_point_measure(0, 1, 3, 0).unwrap(), 0.0);
        let c = CylinderSet::new(2, vec![0, 1]).unwrap();
        assert!((f.two_point_measure(2, 0, 3, 1).unwrap() - f.cylinder_measure(&c).unwrap()).abs() < 1e-16);
    }

    #[test]
    fn shift_and_text_form() {
        let c = CylinderSet::from_one_based(0, &[1, 2]).unwrap();
        let s = shift_cylinder(&c, 3);
        assert_eq!(s.to_string(), "3:1,2");
        assert_eq!(shift_cylinder(&c, 0), c);
        assert_eq!("3:1,2".parse::<CylinderSet>().unwrap(), s);
        assert!("3:0,2".parse::<CylinderSet>().is_err());
        assert!("x".parse::<CylinderSet>().is_err());
        assert!(CylinderSet::new(0, vec![]).is_err());
    }

    #[test]
    fn shifted_measure_expands() {
        let f = family(0.6, 0.8);
        let b = CylinderSet::from_one_based(1, &[1, 1, 2]).unwrap();
        let sb = shift_cylinder(&b, 2);
        let direct = f.state(3)[0] * f.transition_matrix(3)[(0, 0)] * f.transition_matrix(4)[(0, 1)];
        assert!((f.cylinder_measure(&sb).unwrap() - direct).abs() < 1e-16);
    }

    #[test]
    fn mixing_examples() {
        let f = family(0.9, 0.9);
        let a = CylinderSet::from_one_based(0, &[1]).unwrap();
        let series = f.mixing_series(&a, &a, 12).unwrap();
        assert_eq!(series.terms[0].m, 1);
        for t in &series.terms {
            assert!(t.tau <= t.bound + 1e-12);
            // tau_m = x1 |(a x1)^(2^m - 1) - a^(2^m - 1) x1^(2^m)|
            let p = 2f64.powi(t.m as i32);
            let oracle = 0.9 * (0.81f64.powf(p - 1.0) - 0.9f64.powf(2.0 * p - 1.0)).abs();
            assert!((t.tau - oracle).abs() < 1e-15, "m={}", t.m);
            if t.m >= 7 {
                assert!(t.tau < 1e-8, "m={} tau={}", t.m, t.tau);
            }
        }
        assert!(series.terms[4].tau > 1e-5);
        assert!(series.numerically_mixing);

        // A has zero measure
        let f = family(0.5, 0.0);
        let series = f.mixing_series(&a, &a, 5).unwrap();
        assert!(series.terms.iter().all(|t| t.tau == 0.0));
        assert!(series.numerically_mixing);

        let late = CylinderSet::from_one_based(3, &[1, 2]).unwrap();
        let f = family(0.5, 0.5);
        assert!(matches!(f.mixing_gap(&late, &a, 2), Err(QsoError::OverlappingWindows { first_end: 4, second_start: 2 })));
        let s = f.mixing_series(&late, &a, 8).unwrap();
        assert_eq!(s.terms[0].m, 5);
        assert!(s.to_csv().starts_with("m,tau_m,bound_m\n5,"));
    }

    #[test]
    fn va_mixing_decays_quickly() {
        let f = family(0.5, 0.5);
        let a = CylinderSet::from_one_based(0, &[1]).unwrap();
        // tau_m = (1/4)^(2^m): the last three fall below 1e-10 from m_max = 7
        let s = f.mixing_series(&a, &a, 6).unwrap();
        assert!(!s.numerically_mixing);
        let s = f.mixing_series(&a, &a, 7).unwrap();
        assert!(s.numerically_mixing);
        for t in &s.terms {
            let oracle = 0.25f64.powf(2f64.powi(t.m as i32));
            assert!((t.tau - oracle).abs() <= 1e-14 * oracle);
        }
    }

    #[test]
    fn log_states_survive_underflow() {
        let f = family(0.9, 0.9);
        let k = 20;
        let lin = f.state(k)[0];
        let log = f.log_state(k)[0];
        assert_eq!(lin, 0.0);
        let expected = ((1u64 << k) - 1) as f64 * 0.9f64.ln() + (1u64 << k) as f64 * 0.9f64.ln();
        assert!((log - expected).abs() <= 1e-12 * expected.abs());
        let lh = f.log_transition_matrix(k)[(0, 0)];
        assert!((lh - (1u64 << k) as f64 * 0.81f64.ln()).abs() <= 1e-12 * lh.abs());
    }

    #[test]
    fn concurrent_readers_agree() {
        use rayon::prelude::*;
        let f = TransitionFamily::new(fixtures::attracting_not_unique(), SimplexPoint::barycenter(3).unwrap()).unwrap();
        let reference: Vec<_> = (0..30).map(|k| family_matrix(&f, k)).collect();
        let g = TransitionFamily::new(fixtures::attracting_not_unique(), SimplexPoint::barycenter(3).unwrap()).unwrap();
        let got: Vec<_> = (0..30).into_par_iter().rev().map(|k| family_matrix(&g, k)).collect::<Vec<_>>();
        let got: Vec<_> = got.into_iter().rev().collect();
        assert_eq!(reference, got);
        assert_eq!(g.cached_horizon(), 30);
    }

    fn family_matrix(f: &TransitionFamily, k: usize) -> DMatrix<f64> {
        f.transition_matrix(k)
    }
}
