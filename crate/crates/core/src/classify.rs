//! Certificate checks for q.s.o.: necessary conditions for
//! b-bistochasticity, a falsification search for `V(x) <=^b x`, the
//! sufficient uniqueness conditions for the fixed point `(0, ..., 0, 1)`,
//! spectral classification of that vertex, and strict-contraction moduli.
//!
//! Indices in every report are 1-based.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QsoError, Result};
use crate::operator::{QsoOperator, EPS_COEF};
use crate::simplex::{b_leq_slices, grid_simplex, sample_simplex, SimplexPoint, EPS_ORDER};

/// Margin for the strict contraction threshold.
pub const EPS_CONTRACTION: f64 = 1e-12;
/// Distance from 1 within which a vertex eigenvalue counts as non-hyperbolic.
pub const EPS_SPECTRAL: f64 = 1e-10;
pub const DEFAULT_SAMPLES: usize = 10_000;

/// Outcome of a strict inequality tested with a margin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strictness {
    Pass,
    Fail,
    /// Within the margin of the threshold.
    Boundary,
}

impl Strictness {
    /// Classifies `value < threshold` with margin `eps`.
    pub fn less_than(value: f64, threshold: f64, eps: f64) -> Self {
        if (value - threshold).abs() <= eps {
            Strictness::Boundary
        } else if value < threshold {
            Strictness::Pass
        } else {
            Strictness::Fail
        }
    }

    pub fn is_pass(self) -> bool {
        self == Strictness::Pass
    }
}

// ---------------------------------------------------------------------------
// necessary conditions
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub name: String,
    pub pass: bool,
    /// 1-based index tuple of the first violation.
    pub witness: Option<Vec<usize>>,
    pub witness_value: Option<f64>,
}

impl ConditionCheck {
    fn new(name: &str, first: Option<(Vec<usize>, f64)>) -> Self {
        ConditionCheck {
            name: name.to_string(),
            pass: first.is_none(),
            witness_value: first.as_ref().map(|f| f.1),
            witness: first.map(|f| f.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NecessaryConditions {
    /// `sum_{m <= k} sum_{i,j} P[ij,m] <= k n` for every `k`.
    pub cumulative_mass_bound: ConditionCheck,
    /// `P[ij,k] = 0` whenever both parents are of type above `k`.
    pub lower_types_excluded: ConditionCheck,
    /// `P[nn,n] = 1`.
    pub last_type_absorbing: ConditionCheck,
    /// `P[lj,l] <= 1/2` for `j > l`.
    pub mixed_pair_half_bound: ConditionCheck,
}

impl NecessaryConditions {
    pub fn all_pass(&self) -> bool {
        self.cumulative_mass_bound.pass
            && self.lower_types_excluded.pass
            && self.last_type_absorbing.pass
            && self.mixed_pair_half_bound.pass
    }
}

pub fn check_necessary_bbistochastic(v: &QsoOperator) -> NecessaryConditions {
    let n = v.dim();
    let eps = EPS_COEF;

    let mut cumulative = None;
    let mut acc = 0.0;
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                acc += v.coef(i, j, k);
            }
        }
        let bound = ((k + 1) * n) as f64;
        if acc > bound + eps {
            cumulative = Some((vec![k + 1], acc));
            break;
        }
    }

    let mut lower = None;
    'outer: for k in 0..n - 1 {
        for i in k + 1..n {
            for j in k + 1..n {
                let p = v.coef(i, j, k);
                if p.abs() > eps {
                    lower = Some((vec![i + 1, j + 1, k + 1], p));
                    break 'outer;
                }
            }
        }
    }

    let last = n - 1;
    let pnn = v.coef(last, last, last);
    let absorbing = ((pnn - 1.0).abs() > eps).then(|| (vec![n, n, n], pnn));

    let mut half = None;
    'outer2: for l in 0..n - 1 {
        for j in l + 1..n {
            let p = v.coef(l, j, l);
            if p > 0.5 + eps {
                half = Some((vec![l + 1, j + 1, l + 1], p));
                break 'outer2;
            }
        }
    }

    NecessaryConditions {
        cumulative_mass_bound: ConditionCheck::new("cumulative_mass_bound", cumulative),
        lower_types_excluded: ConditionCheck::new("lower_types_excluded", lower),
        last_type_absorbing: ConditionCheck::new("last_type_absorbing", absorbing),
        mixed_pair_half_bound: ConditionCheck::new("mixed_pair_half_bound", half),
    }
}

// ---------------------------------------------------------------------------
// numeric falsification of V(x) <=^b x
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum NumericBVerdict {
    Violated {
        point: Vec<f64>,
        /// 1-based prefix index.
        k: usize,
        /// `U_k(x) - U_k(V(x))`, negative.
        gap: f64,
    },
    NoViolationFound { resolution: usize, sample_count: usize },
}

impl NumericBVerdict {
    pub fn no_violation(&self) -> bool {
        matches!(self, NumericBVerdict::NoViolationFound { .. })
    }
}

/// Grid resolution used by default for dimension `n`.
pub fn default_resolution(n: usize) -> usize {
    match n {
        0..=3 => 40,
        4 => 12,
        5 => 8,
        _ => 5,
    }
}

/// Evaluates `V(x) <=^b x` on `grid_simplex(n, resolution)` followed by
/// `samples` seeded random points and returns the first violation found.
/// Absence of a witness is evidence, not proof.
pub fn verify_bbistochastic_numeric(v: &QsoOperator, resolution: usize, samples: usize, seed: u64) -> Result<NumericBVerdict> {
    let n = v.dim();
    let mut points = grid_simplex(n, resolution)?;
    points.extend(sample_simplex(n, samples, seed)?);
    let witness = points.par_iter().find_map_first(|x| {
        let mut y = vec![0.0; n];
        v.apply(x.coords(), &mut y);
        let verdict = b_leq_slices(&y, x.coords(), EPS_ORDER);
        (!verdict.holds).then(|| NumericBVerdict::Violated {
            point: x.coords().to_vec(),
            k: verdict.first_violating_index.expect("violation carries an index"),
            gap: verdict.gap,
        })
    });
    Ok(witness.unwrap_or(NumericBVerdict::NoViolationFound { resolution, sample_count: samples }))
}

// ---------------------------------------------------------------------------
// uniqueness conditions
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessViolation {
    /// 1-based `(k, j)`; `j == k` refers to the self coefficient `P[kk,k]`.
    pub k: usize,
    pub j: usize,
    pub value: f64,
    pub status: Strictness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessCheck {
    pub met: bool,
    pub violations: Vec<UniquenessViolation>,
}

/// `P[kk,k] < 1` and `P[kj,k] < 1/2` for all `k < n`, `j > k`.
pub fn check_uniqueness_conditions(v: &QsoOperator) -> UniquenessCheck {
    let n = v.dim();
    let mut violations = Vec::new();
    for k in 0..n - 1 {
        let p = v.coef(k, k, k);
        let s = Strictness::less_than(p, 1.0, EPS_COEF);
        if !s.is_pass() {
            violations.push(UniquenessViolation { k: k + 1, j: k + 1, value: p, status: s });
        }
        for j in k + 1..n {
            let p = v.coef(k, j, k);
            let s = Strictness::less_than(p, 0.5, EPS_COEF);
            if !s.is_pass() {
                violations.push(UniquenessViolation { k: k + 1, j: j + 1, value: p, status: s });
            }
        }
    }
    UniquenessCheck { met: violations.is_empty(), violations }
}

/// `lambda V1 + (1 - lambda) V2` for two operators that both meet the
/// uniqueness conditions; the combination is checked to meet them too.
pub fn check_convex_combination(v1: &QsoOperator, v2: &QsoOperator, lambda: f64) -> Result<QsoOperator> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(QsoError::Precondition(format!("lambda = {lambda} is outside [0, 1]")));
    }
    if !check_uniqueness_conditions(v1).met || !check_uniqueness_conditions(v2).met {
        return Err(QsoError::Precondition("both operators must meet the uniqueness conditions".into()));
    }
    let t = v1.tensor().convex_combination(v2.tensor(), lambda)?;
    let out = QsoOperator::new(t, false)?;
    if !check_uniqueness_conditions(&out).met {
        return Err(QsoError::Precondition("convex combination left the uniqueness class".into()));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// vertex stability
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexStability {
    Attracting,
    NonHyperbolic,
    Mixed,
    /// Every eigenvalue exceeds 1. Impossible for b-bistochastic operators;
    /// reported without calling the vertex repelling.
    NotRepellingOnly,
}

pub fn classify_vertex_stability(v: &QsoOperator) -> VertexStability {
    let eig = v.vertex_eigenvalues();
    if eig.iter().any(|&l| (l - 1.0).abs() <= EPS_SPECTRAL) {
        VertexStability::NonHyperbolic
    } else if eig.iter().all(|&l| l < 1.0 - EPS_SPECTRAL) {
        VertexStability::Attracting
    } else if eig.iter().all(|&l| l > 1.0 + EPS_SPECTRAL) {
        VertexStability::NotRepellingOnly
    } else {
        VertexStability::Mixed
    }
}

// ---------------------------------------------------------------------------
// contraction
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub modulus: f64,
    pub is_strict: bool,
    pub boundary: bool,
    /// 1-based `(i1, i2, k)` attaining the modulus.
    pub argmax_triple: (usize, usize, usize),
}

/// `max_{i1,i2,k} sum_j |P[i1 k, j] - P[i2 k, j]|`; the operator is a strict
/// l1 contraction iff this is below 1, and the value is then a Lipschitz
/// constant.
pub fn strict_contraction_general(v: &QsoOperator) -> ContractionReport {
    let n = v.dim();
    let mut best = (-1.0, (0, 0, 0));
    for k in 0..n {
        for i1 in 0..n {
            for i2 in i1 + 1..n {
                let (r1, r2) = (v.tensor().row(i1, k), v.tensor().row(i2, k));
                let d: f64 = r1.iter().zip(r2).map(|(a, b)| (a - b).abs()).sum();
                if d > best.0 {
                    best = (d, (i1 + 1, i2 + 1, k + 1));
                }
            }
        }
    }
    let modulus = best.0.max(0.0);
    let s = Strictness::less_than(modulus, 1.0, EPS_CONTRACTION);
    ContractionReport {
        modulus,
        is_strict: s.is_pass(),
        boundary: s == Strictness::Boundary,
        argmax_triple: if best.0 < 0.0 { (1, 1, 1) } else { best.1 },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contraction1d {
    /// `max{P[12,1], |P[11,1] - P[12,1]|}`
    pub value: f64,
    pub is_strict: bool,
    pub boundary: bool,
}

/// Criterion for b-bistochastic operators on `S^1`: strict iff
/// `max{P[12,1], |P[11,1] - P[12,1]|} < 1/2`.
pub fn strict_contraction_1d(v: &QsoOperator) -> Result<Contraction1d> {
    if v.dim() != 2 {
        return Err(QsoError::DimensionMismatch { expected: 2, got: v.dim() });
    }
    let a = v.coef(0, 0, 0);
    let b = v.coef(0, 1, 0);
    let value = b.max((a - b).abs());
    let s = Strictness::less_than(value, 0.5, EPS_CONTRACTION);
    Ok(Contraction1d { value, is_strict: s.is_pass(), boundary: s == Strictness::Boundary })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contraction2d {
    /// Quantities labelled `a` through `i`.
    pub quantities: Vec<(char, f64)>,
    pub max_quantity: f64,
    pub which: char,
    pub is_strict: bool,
    pub boundary: bool,
}

/// The nine closed-form quantities for b-bistochastic operators on `S^2`,
/// written with the shorthand `A = P[11,.]`, `B = P[12,.]`, `C = P[13,.]`,
/// `D = P[22,.]`, `E = P[23,.]` (first two components).
pub fn strict_contraction_2d(v: &QsoOperator) -> Result<Contraction2d> {
    if v.dim() != 3 {
        return Err(QsoError::DimensionMismatch { expected: 3, got: v.dim() });
    }
    let c = |i, j, k| v.coef(i, j, k);
    let (a1, a2) = (c(0, 0, 0), c(0, 0, 1));
    let (b1, b2) = (c(0, 1, 0), c(0, 1, 1));
    let (c1, c2) = (c(0, 2, 0), c(0, 2, 1));
    let d2 = c(1, 1, 1);
    let e2 = c(1, 2, 1);
    let quantities = vec![
        ('a', (a1 - b1).abs() + (a2 - b2).abs() + (a1 + a2 - b1 - b2).abs()),
        ('b', b1 + (b2 - d2).abs() + (b1 + b2 - d2).abs()),
        ('c', c1 + (c2 - e2).abs() + (c1 + c2 - e2).abs()),
        ('d', (a1 - c1).abs() + (a2 - c2).abs() + (a1 + a2 - c1 - c2).abs()),
        ('e', b1 + (b2 - e2).abs() + (b1 + b2 - e2).abs()),
        ('f', 2.0 * c1 + 2.0 * c2),
        ('g', (b1 - c1).abs() + (b2 - c2).abs() + (b1 + b2 - c1 - c2).abs()),
        ('h', 2.0 * (d2 - e2).abs()),
        ('i', 2.0 * e2),
    ];
    let (which, max_quantity) = quantities
        .iter()
        .copied()
        .fold(('a', f64::NEG_INFINITY), |acc, q| if q.1 > acc.1 { q } else { acc });
    let s = Strictness::less_than(max_quantity, 1.0, EPS_CONTRACTION);
    Ok(Contraction2d { quantities, max_quantity, which, is_strict: s.is_pass(), boundary: s == Strictness::Boundary })
}

/// Whether `A_1 x_1 + ... + A_n x_n + C <= 0` (`< 0` when `strict`) holds on
/// `{x >= 0, x_1 + ... + x_n <= 1}`: iff `C` and every `A_k + C` satisfy it.
pub fn linear_form_nonpositive(coeffs: &[f64], c: f64, strict: bool) -> bool {
    let ok = |v: f64| if strict { v < 0.0 } else { v <= 0.0 };
    ok(c) && coeffs.iter().all(|&a| ok(a + c))
}

// ---------------------------------------------------------------------------
// full report
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub dimension: usize,
    pub necessary_conditions: NecessaryConditions,
    pub numeric_b_verdict: NumericBVerdict,
    pub uniqueness_conditions_met: bool,
    pub uniqueness: UniquenessCheck,
    pub vertex_eigenvalues: Vec<f64>,
    pub vertex_stability: VertexStability,
    pub contraction: ContractionReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contraction_1d: Option<Contraction1d>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contraction_2d: Option<Contraction2d>,
}

/// Runs every check; the numeric search uses `resolution` (or the
/// dimension default) and `samples` points drawn from `seed`.
pub fn classify(v: &QsoOperator, resolution: Option<usize>, samples: usize, seed: u64) -> Result<ClassificationReport> {
    let n = v.dim();
    let resolution = resolution.unwrap_or_else(|| default_resolution(n));
    let uniqueness = check_uniqueness_conditions(v);
    Ok(ClassificationReport {
        dimension: n,
        necessary_conditions: check_necessary_bbistochastic(v),
        numeric_b_verdict: verify_bbistochastic_numeric(v, resolution, samples, seed)?,
        uniqueness_conditions_met: uniqueness.met,
        uniqueness,
        vertex_eigenvalues: v.vertex_eigenvalues(),
        vertex_stability: classify_vertex_stability(v),
        contraction: strict_contraction_general(v),
        contraction_1d: (n == 2).then(|| strict_contraction_1d(v)).transpose()?,
        contraction_2d: (n == 3).then(|| strict_contraction_2d(v)).transpose()?,
    })
}

/// Convenience check used by sweeps: necessary conditions pass and the
/// default numeric search finds no witness.
pub fn is_verified_bbistochastic(v: &QsoOperator, seed: u64) -> bool {
    check_necessary_bbistochastic(v).all_pass()
        && verify_bbistochastic_numeric(v, default_resolution(v.dim()), DEFAULT_SAMPLES, seed)
            .map(|r| r.no_violation())
            .unwrap_or(false)
}

/// Reference point used in tests and reports.
pub fn vertex(n: usize) -> SimplexPoint {
    SimplexPoint::last_vertex(n).expect("n >= 2")
}
