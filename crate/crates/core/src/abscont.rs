//! The one-dimensional family `V_a` (`P[11,1] = a`, `P[11,2] = 1 - a`,
//! `P[12,2] = P[22,2] = 1`) and absolute-continuity diagnostics for the
//! Markov measures it generates.
//!
//! For `V_a` the chain started at `x` has `H^[k,k+1]_{11} = (a x_1)^(2^k)`,
//! state 2 is absorbing, and `x_1^(k) = a^(2^k - 1) x_1^(2^k)`.
//!
//! Comparing `mu_bar = mu_{x,V_a1}` with `mu = mu_{y,V_a2}`, the ratio
//! `alpha_m = z_m / z_{m-1}` only depends on the last transition, so
//! `E_bar((1 - alpha_m)^2 | F_{m-1})` equals
//! `c_m(i) = sum_j H_bar_{ij} (1 - H_bar_{ij} / H_{ij})^2` at state `i` of
//! time `m - 1`. For `V_a` it vanishes at state 2 and equals `K_m + Khat_m`
//! at state 1, where with `u = a1 x_1`, `v = a2 y_1`, `p = 2^(m-1)`:
//!
//! * `K_m = (1 - (1 - u^p) / (1 - v^p))^2 (1 - u^p)`
//! * `Khat_m = (1 - (u / v)^p)^2 u^p`
//!
//! Summed along the single path that stays in state 1 these terms can
//! diverge (for example `u > v` with `u^3 > v^2`), but that path has
//! `mu_bar`-measure `lim x_1^(m)`, which is 0 whenever `a1 x_1 < 1`. The
//! series classifier therefore weighs the path terms by the probability of
//! still being on that path.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QsoError, Result};
use crate::logspace::{ln0, ln_one_minus_exp, log_pow, pow2k};
use crate::markov::TransitionFamily;
use crate::operator::{HeredityTensor, QsoOperator};
use crate::simplex::SimplexPoint;

/// Tail threshold for convergence evidence.
pub const TAIL_EPS: f64 = 1e-12;
/// Required decrease factor between consecutive tail values.
pub const TAIL_FACTOR: f64 = 10.0;
/// Floor for singularity evidence.
pub const SINGULAR_FLOOR: f64 = 1e-6;
/// Number of trailing values compared against [`SINGULAR_FLOOR`].
pub const SINGULAR_WINDOW: usize = 5;

/// Log ratios of generic transition entries below this are rounding noise:
/// entries near 1 are only resolved to a few ulps.
const GENERIC_NOISE: f64 = 1e-14;

/// Largest `k` for which `2^k` is exact and `x^(2^k)` is computed.
const MAX_DOUBLING: usize = 1000;

/// `V_a`.
pub fn va_operator(a: f64) -> Result<QsoOperator> {
    if !(0.0..=1.0).contains(&a) {
        return Err(QsoError::InvalidArgument(format!("a = {a} is outside [0, 1]")));
    }
    let mut t = HeredityTensor::zeros(2)?;
    t.set(0, 0, 0, a);
    t.set(0, 0, 1, 1.0 - a);
    t.set(0, 1, 1, 1.0);
    t.set(1, 1, 1, 1.0);
    QsoOperator::new(t, false)
}

/// Parameter `a` and start `x` of a `V_a` chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaParams {
    pub a: f64,
    pub x: SimplexPoint,
}

impl VaParams {
    pub fn new(a: f64, x: SimplexPoint) -> Result<Self> {
        if !(0.0..=1.0).contains(&a) {
            return Err(QsoError::InvalidArgument(format!("a = {a} is outside [0, 1]")));
        }
        if x.dim() != 2 {
            return Err(QsoError::DimensionMismatch { expected: 2, got: x.dim() });
        }
        Ok(VaParams { a, x })
    }

    /// Shorthand for `(x_1, 1 - x_1)`.
    pub fn from_x1(a: f64, x1: f64) -> Result<Self> {
        Self::new(a, SimplexPoint::new(vec![x1, 1.0 - x1])?)
    }

    pub fn x1(&self) -> f64 {
        self.x.coords()[0]
    }

    pub fn operator(&self) -> QsoOperator {
        va_operator(self.a).expect("a validated on construction")
    }

    pub fn family(&self) -> TransitionFamily {
        TransitionFamily::new(self.operator(), self.x.clone()).expect("n = 2 on both sides")
    }

    /// `a x_1`
    fn rate(&self) -> f64 {
        self.a * self.x1()
    }

    /// `(x_1^(k), ln x_1^(k))`.
    pub fn state1(&self, k: usize) -> (f64, f64) {
        check_doubling(k);
        let e = pow2(k);
        let log = log_pow(ln0(self.a), e - 1.0) + log_pow(ln0(self.x1()), e);
        // a^(2^k - 1) x1^(2^k) = (a x1)^(2^k) / a, evaluated without dividing by 0
        let lin = if self.a == 0.0 {
            if k == 0 {
                self.x1()
            } else {
                0.0
            }
        } else {
            pow2k(self.rate(), k as u32) / self.a
        };
        (lin, log)
    }
}

fn check_doubling(k: usize) {
    assert!(k <= MAX_DOUBLING, "time index {k} exceeds the supported range");
}

fn pow2(k: usize) -> f64 {
    2f64.powi(k as i32)
}

/// Closed-form one-step matrix with log-domain companions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaTransition {
    /// Row-major `[[H11, H12], [H21, H22]]`.
    pub h: [[f64; 2]; 2],
    pub log_h: [[f64; 2]; 2],
}

/// `H11 = (a x_1)^(2^k)`, `H12 = 1 - H11`, `H21 = 0`, `H22 = 1`.
pub fn va_transition_closed_form(params: &VaParams, k: usize) -> VaTransition {
    check_doubling(k);
    let h11 = pow2k(params.rate(), k as u32);
    let log_h11 = log_pow(ln0(params.rate()), pow2(k));
    VaTransition {
        h: [[h11, 1.0 - h11], [0.0, 1.0]],
        log_h: [[log_h11, ln_one_minus_exp(log_h11)], [f64::NEG_INFINITY, 0.0]],
    }
}

/// The four cylinder families with closed-form measures. Times are absolute
/// and states are written as in the text: 1 is the transient state, 2 is
/// absorbing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CylinderClass {
    /// State 1 at every time in `l..=m`.
    AllOnes { l: usize, m: usize },
    /// State 2 at every time in `l..=m`.
    AllTwos { l: usize, m: usize },
    /// State 1 on `l..=k`, state 2 on `k+1..=m`.
    OnesThenTwos { l: usize, m: usize, k: usize },
    /// State 2 at `k`, state 1 at `k + 1`.
    TwoOne { k: usize },
}

impl CylinderClass {
    pub fn validate(&self) -> Result<()> {
        match *self {
            CylinderClass::AllOnes { l, m } | CylinderClass::AllTwos { l, m } if l > m => {
                Err(QsoError::InvalidArgument(format!("window start {l} after end {m}")))
            }
            CylinderClass::OnesThenTwos { l, m, k } if !(l <= k && k < m) => {
                Err(QsoError::InvalidArgument(format!("switch time {k} must satisfy {l} <= k < {m}")))
            }
            _ => Ok(()),
        }
    }

    /// Window start and 0-based states.
    pub fn states(&self) -> (usize, Vec<usize>) {
        match *self {
            CylinderClass::AllOnes { l, m } => (l, vec![0; m - l + 1]),
            CylinderClass::AllTwos { l, m } => (l, vec![1; m - l + 1]),
            CylinderClass::OnesThenTwos { l, m, k } => {
                let mut s = vec![0; k - l + 1];
                s.extend(std::iter::repeat_n(1, m - k));
                (l, s)
            }
            CylinderClass::TwoOne { k } => (k, vec![1, 0]),
        }
    }

    /// Last time in the window.
    pub fn end(&self) -> usize {
        let (l, s) = self.states();
        l + s.len() - 1
    }
}

/// Measure of `A^[l,..](states)` from the closed-form initial law and
/// transitions, in both domains.
pub fn va_path_measure(params: &VaParams, l: usize, states: &[usize]) -> (f64, f64) {
    let (x1, lx1) = params.state1(l);
    let (mut lin, mut log) = match states[0] {
        0 => (x1, lx1),
        _ => (1.0 - x1, ln_one_minus_exp(lx1)),
    };
    for (off, w) in states.windows(2).enumerate() {
        let t = va_transition_closed_form(params, l + off);
        lin *= t.h[w[0]][w[1]];
        log += t.log_h[w[0]][w[1]];
    }
    (lin, log)
}

/// `a^ea x_1^ex`, or `1 - a^ea x_1^ex` when `complement`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonomialForm {
    pub a_exponent: f64,
    pub x1_exponent: f64,
    pub complement: bool,
    /// Extra factor `1 - (a x_1)^(2^k)` for the switching class.
    pub switch_factor_k: Option<usize>,
}

impl MonomialForm {
    fn eval(&self, p: &VaParams) -> f64 {
        let log = log_pow(ln0(p.a), self.a_exponent) + log_pow(ln0(p.x1()), self.x1_exponent);
        let base = if self.complement { -log.exp_m1() } else { log.exp() };
        match self.switch_factor_k {
            Some(k) => base * (1.0 - pow2k(p.rate(), k as u32)),
            None => base,
        }
    }

    fn same_exponents(&self, other: &MonomialForm) -> bool {
        self.a_exponent == other.a_exponent && self.x1_exponent == other.x1_exponent
    }
}

/// Constructive value of a class measure alongside the printed closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylinderEvaluation {
    pub class: CylinderClass,
    /// Product of the closed-form initial law and transitions: ground truth.
    pub constructive: f64,
    pub log_constructive: f64,
    /// Value of the printed formula.
    pub printed: f64,
    /// Monomial exponents of both forms; `None` for the zero class.
    pub constructive_form: Option<MonomialForm>,
    pub printed_form: Option<MonomialForm>,
    /// Exponents of the two forms differ.
    pub discrepancy: bool,
}

fn forms(c: &CylinderClass) -> Option<(MonomialForm, MonomialForm)> {
    let half = |l: usize| if l == 0 { 0.5 } else { pow2(l - 1) };
    match *c {
        CylinderClass::AllOnes { l, m } => Some((
            MonomialForm { a_exponent: pow2(m) - 1.0, x1_exponent: pow2(m), complement: false, switch_factor_k: None },
            MonomialForm { a_exponent: pow2(m) - half(l), x1_exponent: pow2(m), complement: false, switch_factor_k: None },
        )),
        CylinderClass::AllTwos { l, .. } => Some((
            MonomialForm { a_exponent: pow2(l) - 1.0, x1_exponent: pow2(l), complement: true, switch_factor_k: None },
            MonomialForm { a_exponent: half(l), x1_exponent: pow2(l), complement: true, switch_factor_k: None },
        )),
        CylinderClass::OnesThenTwos { l, k, .. } => Some((
            MonomialForm { a_exponent: pow2(k) - 1.0, x1_exponent: pow2(k), complement: false, switch_factor_k: Some(k) },
            MonomialForm { a_exponent: pow2(k) - half(l), x1_exponent: pow2(k), complement: false, switch_factor_k: Some(k) },
        )),
        CylinderClass::TwoOne { .. } => None,
    }
}

/// Evaluates a class measure constructively and by its printed formula.
pub fn va_cylinder_closed_form(params: &VaParams, c: &CylinderClass) -> Result<CylinderEvaluation> {
    c.validate()?;
    check_doubling(c.end());
    let (l, states) = c.states();
    let (constructive, log_constructive) = va_path_measure(params, l, &states);
    let (cf, pf) = match forms(c) {
        Some((a, b)) => (Some(a), Some(b)),
        None => (None, None),
    };
    let printed = pf.map(|f| f.eval(params)).unwrap_or(0.0);
    let discrepancy = match (cf, pf) {
        (Some(a), Some(b)) => !a.same_exponents(&b),
        _ => false,
    };
    Ok(CylinderEvaluation {
        class: *c,
        constructive,
        log_constructive,
        printed,
        constructive_form: cf,
        printed_form: pf,
        discrepancy,
    })
}

/// Every class whose window lies in `0..=horizon`.
pub fn enumerate_classes(horizon: usize) -> Vec<CylinderClass> {
    let mut out = Vec::new();
    for l in 0..=horizon {
        for m in l..=horizon {
            out.push(CylinderClass::AllOnes { l, m });
            out.push(CylinderClass::AllTwos { l, m });
            for k in l..m {
                out.push(CylinderClass::OnesThenTwos { l, m, k });
            }
        }
    }
    for k in 0..horizon {
        out.push(CylinderClass::TwoOne { k });
    }
    out
}

/// Evaluations whose printed exponents disagree with the constructive ones.
pub fn printed_formula_discrepancies(params: &VaParams, classes: &[CylinderClass]) -> Result<Vec<CylinderEvaluation>> {
    let mut out = Vec::new();
    for c in classes {
        let e = va_cylinder_closed_form(params, c)?;
        if e.discrepancy {
            out.push(e);
        }
    }
    Ok(out)
}

/// `z = mu_bar(A) / mu(A)` with `0/0 := 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum RatioOutcome {
    Ratio { value: f64, log_value: f64 },
    /// `mu(A) = 0 < mu_bar(A)`.
    SingularWitness { numerator: f64, log_numerator: f64 },
}

impl RatioOutcome {
    pub fn value(&self) -> f64 {
        match *self {
            RatioOutcome::Ratio { value, .. } => value,
            RatioOutcome::SingularWitness { .. } => f64::INFINITY,
        }
    }
}

/// Radon-Nikodym ratio of the constructive measures of `c` under `num` and
/// `den`, computed in the log domain.
pub fn rn_ratio_z(num: &VaParams, den: &VaParams, c: &CylinderClass) -> Result<RatioOutcome> {
    c.validate()?;
    let (l, states) = c.states();
    let (nl, nlog) = va_path_measure(num, l, &states);
    let (_, dlog) = va_path_measure(den, l, &states);
    Ok(match (nlog == f64::NEG_INFINITY, dlog == f64::NEG_INFINITY) {
        (true, _) => RatioOutcome::Ratio { value: if dlog == f64::NEG_INFINITY { 1.0 } else { 0.0 }, log_value: if dlog == f64::NEG_INFINITY { 0.0 } else { f64::NEG_INFINITY } },
        (false, true) => RatioOutcome::SingularWitness { numerator: nl, log_numerator: nlog },
        (false, false) => {
            let lv = nlog - dlog;
            RatioOutcome::Ratio { value: lv.exp(), log_value: lv }
        }
    })
}

/// `ln(h_bar (1 - h_bar / h)^2)` from logarithms, with `0/0 := 1`;
/// `+inf` when `h = 0 < h_bar`. Log ratios within `noise` of 0 count as 0.
fn log_weighted_square_gap(log_h_bar: f64, log_h: f64, noise: f64) -> f64 {
    if log_h_bar == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if log_h == f64::NEG_INFINITY {
        return f64::INFINITY;
    }
    let lr = log_h_bar - log_h;
    let log_gap = if lr.abs() <= noise {
        return f64::NEG_INFINITY;
    } else if lr > 0.0 {
        lr + ln_one_minus_exp(-lr)
    } else {
        ln_one_minus_exp(lr)
    };
    2.0 * log_gap + log_h_bar
}

/// `(ln K_m, ln Khat_m)`.
fn log_terms(num: &VaParams, den: &VaParams, m: usize) -> (f64, f64) {
    check_doubling(m - 1);
    let tn = va_transition_closed_form(num, m - 1);
    let td = va_transition_closed_form(den, m - 1);
    (
        log_weighted_square_gap(tn.log_h[0][1], td.log_h[0][1], 0.0),
        log_weighted_square_gap(tn.log_h[0][0], td.log_h[0][0], 0.0),
    )
}

/// `(K_m, Khat_m)` for `m >= 1`, evaluated in the log domain.
pub fn conditional_expectation_term(num: &VaParams, den: &VaParams, m: usize) -> Result<(f64, f64)> {
    if m < 1 {
        return Err(QsoError::InvalidArgument("series terms start at m = 1".into()));
    }
    let (lk, lkh) = log_terms(num, den, m);
    Ok((lk.exp(), lkh.exp()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesClassification {
    EquivalentEvidence,
    SingularEvidence,
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RnTerm {
    pub m: usize,
    pub k_term: f64,
    pub khat_term: f64,
    pub partial_sum: f64,
    /// `mu_bar` probability of the states at time `m - 1` where the
    /// conditional term is nonzero.
    pub active_mass: f64,
    pub log_active_mass: f64,
    /// `E_bar((1 - alpha_m)^2)`.
    pub expected_term: f64,
    pub log_expected_term: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesDirection {
    pub numerator: String,
    pub denominator: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RnSeriesReport {
    pub direction: SeriesDirection,
    pub terms: Vec<RnTerm>,
    pub classification: SeriesClassification,
    /// First `m` at which the tail rule held, if it did.
    pub converged_by_m: Option<usize>,
    /// Last value of the sequence that met the tail rule.
    pub tail_term: Option<f64>,
    /// Local absolute-continuity failures: a transition or initial state
    /// with positive numerator and zero denominator probability.
    pub singular_witnesses: Vec<String>,
    pub exceptional_set_note: String,
    /// Extremes of `alpha_m` over transitions reachable under `mu_bar`.
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub heuristic: bool,
}

impl RnSeriesReport {
    /// CSV with columns `m,K_term,Khat_term,partial_sum`.
    pub fn to_csv(&self) -> String {
        use crate::report::{csv_row, CsvCell};
        let mut out = String::from("m,K_term,Khat_term,partial_sum\n");
        for t in &self.terms {
            out.push_str(&csv_row(&[
                CsvCell::Int(t.m),
                CsvCell::Float(t.k_term),
                CsvCell::Float(t.khat_term),
                CsvCell::Float(t.partial_sum),
            ]));
        }
        out
    }
}

/// Tail rule on a sequence of logarithms: the last value is below
/// `ln` [`TAIL_EPS`] and each of the last two steps drops by at least
/// `ln` [`TAIL_FACTOR`]. Exact zeros (`-inf`) count as drops, so an
/// all-zero tail qualifies.
pub fn tail_rule_log(seq: &[f64]) -> bool {
    if seq.len() < 3 {
        return false;
    }
    let t = &seq[seq.len() - 3..];
    let drop = |a: f64, b: f64| b == f64::NEG_INFINITY || (a.is_finite() && a - b >= TAIL_FACTOR.ln() * (1.0 - 1e-12));
    t[2] < TAIL_EPS.ln() && drop(t[0], t[1]) && drop(t[1], t[2])
}

/// [`tail_rule_log`] on linear values.
pub fn tail_rule(seq: &[f64]) -> bool {
    let logs: Vec<f64> = seq.iter().map(|&v| ln0(v)).collect();
    tail_rule_log(&logs)
}

fn floor_rule_log(seq: &[f64]) -> bool {
    seq.len() >= SINGULAR_WINDOW && seq[seq.len() - SINGULAR_WINDOW..].iter().all(|&v| v >= SINGULAR_FLOOR.ln())
}

#[derive(Default)]
struct SeriesInput {
    log_k: Vec<f64>,
    log_khat: Vec<f64>,
    log_active: Vec<f64>,
    log_expected: Vec<f64>,
    witnesses: Vec<String>,
    alpha: Option<(f64, f64)>,
}

impl SeriesInput {
    fn witness(&mut self, w: String) {
        if self.witnesses.len() < 10 {
            self.witnesses.push(w);
        }
    }

    fn alpha(&mut self, a: f64) {
        self.alpha = Some(match self.alpha {
            Some((lo, hi)) => (lo.min(a), hi.max(a)),
            None => (a, a),
        });
    }
}

fn assemble(direction: SeriesDirection, input: SeriesInput, note: String, heuristic: bool) -> RnSeriesReport {
    let mut partial = 0.0;
    let mut terms = Vec::with_capacity(input.log_k.len());
    for idx in 0..input.log_k.len() {
        let (k, kh) = (input.log_k[idx].exp(), input.log_khat[idx].exp());
        partial += k + kh;
        terms.push(RnTerm {
            m: idx + 1,
            k_term: k,
            khat_term: kh,
            partial_sum: partial,
            active_mass: input.log_active[idx].exp(),
            log_active_mass: input.log_active[idx],
            expected_term: input.log_expected[idx].exp(),
            log_expected_term: input.log_expected[idx],
        });
    }

    let first_tail = |seq: &[f64]| (3..=seq.len()).find(|&len| tail_rule_log(&seq[..len]));
    let candidates = [&input.log_active, &input.log_expected];
    let met: Vec<(usize, f64)> = candidates
        .iter()
        .filter(|s| tail_rule_log(s))
        .filter_map(|s| first_tail(s).map(|c| (c, s[s.len() - 1].exp())))
        .collect();
    let equivalent = !met.is_empty();
    let first = met.iter().copied().min_by_key(|p| p.0);

    let classification = if !input.witnesses.is_empty() {
        SeriesClassification::SingularEvidence
    } else if equivalent {
        SeriesClassification::EquivalentEvidence
    } else if floor_rule_log(&input.log_active) && floor_rule_log(&input.log_expected) {
        SeriesClassification::SingularEvidence
    } else {
        SeriesClassification::Undecided
    };
    let is_eq = classification == SeriesClassification::EquivalentEvidence;
    let (alpha_min, alpha_max) = input.alpha.unwrap_or((1.0, 1.0));

    RnSeriesReport {
        direction,
        terms,
        classification,
        converged_by_m: first.filter(|_| is_eq).map(|p| p.0),
        tail_term: first.filter(|_| is_eq).map(|p| p.1),
        singular_witnesses: input.witnesses,
        exceptional_set_note: note,
        alpha_min,
        alpha_max,
        heuristic,
    }
}

fn describe(p: &VaParams) -> String {
    format!("a={}, x=({}, {})", p.a, p.x.coords()[0], p.x.coords()[1])
}

fn log_add(a: f64, b: f64) -> f64 {
    crate::logspace::log_sum_exp(&[a, b])
}

/// Absolute-continuity series for `mu_bar = mu_{num}` against `mu = mu_{den}`
/// over `m = 1..=m_max`, from the closed forms.
pub fn rn_series(num: &VaParams, den: &VaParams, m_max: usize) -> Result<RnSeriesReport> {
    if m_max < 2 {
        return Err(QsoError::InvalidArgument("m_max must be at least 2".into()));
    }
    if m_max > MAX_DOUBLING {
        return Err(QsoError::InvalidArgument(format!("m_max must be at most {MAX_DOUBLING}")));
    }
    let mut input = SeriesInput::default();
    for (i, (&xb, &x)) in num.x.coords().iter().zip(den.x.coords()).enumerate() {
        if xb > 0.0 && x == 0.0 {
            input.witness(format!("initial state {}: numerator {xb}, denominator 0", i + 1));
        }
    }

    struct Row {
        log_k: f64,
        log_khat: f64,
        log_active: f64,
        witness: Option<String>,
        alphas: Vec<f64>,
    }
    let rows: Vec<Row> = (1..=m_max)
        .into_par_iter()
        .map(|m| {
            let (log_k, log_khat) = log_terms(num, den, m);
            let (active, log_active) = num.state1(m - 1);
            let tn = va_transition_closed_form(num, m - 1);
            let td = va_transition_closed_form(den, m - 1);
            let mut witness = None;
            let mut alphas = Vec::new();
            // state 2 is absorbing under both measures: alpha = 1 there
            if active < 1.0 {
                alphas.push(1.0);
            }
            if log_active > f64::NEG_INFINITY {
                for j in 0..2 {
                    if tn.log_h[0][j] == f64::NEG_INFINITY {
                        continue;
                    }
                    if td.log_h[0][j] == f64::NEG_INFINITY {
                        witness = Some(format!(
                            "transition 1 -> {} at time {}: numerator positive, denominator 0",
                            j + 1,
                            m - 1
                        ));
                        alphas.push(f64::INFINITY);
                    } else {
                        alphas.push((tn.log_h[0][j] - td.log_h[0][j]).exp());
                    }
                }
            }
            Row { log_k, log_khat, log_active, witness, alphas }
        })
        .collect();

    for r in rows {
        let log_path = log_add(r.log_k, r.log_khat);
        input.log_k.push(r.log_k);
        input.log_khat.push(r.log_khat);
        input.log_active.push(r.log_active);
        input.log_expected.push(if log_path == f64::NEG_INFINITY { log_path } else { r.log_active + log_path });
        if let Some(w) = r.witness {
            input.witness(w);
        }
        for a in r.alphas {
            input.alpha(a);
        }
    }

    let u = num.rate();
    let v = den.rate();
    let mut note = String::from(
        "terms are evaluated on the path that stays in state 1; every other path contributes 0 once it enters state 2",
    );
    if u > v {
        note.push_str(&format!(
            "; a1*x1 = {u} exceeds a2*y1 = {v}, so alpha_m is unbounded along the path (1, 1, 1, ...), which has numerator measure {}",
            if u < 1.0 { "0" } else { "1" }
        ));
    }
    let direction = SeriesDirection { numerator: describe(num), denominator: describe(den) };
    Ok(assemble(direction, input, note, false))
}

/// The same diagnostics for arbitrary operators of equal dimension, built
/// from the generic transition matrices. `K_term` holds the largest
/// conditional term over states reachable at time `m - 1`; `Khat_term` is 0.
/// Heuristic: no theorem backs the classification outside the `V_a` family.
pub fn rn_series_generic(num: &TransitionFamily, den: &TransitionFamily, m_max: usize) -> Result<RnSeriesReport> {
    if m_max < 2 {
        return Err(QsoError::InvalidArgument("m_max must be at least 2".into()));
    }
    if num.dim() != den.dim() {
        return Err(QsoError::DimensionMismatch { expected: num.dim(), got: den.dim() });
    }
    let n = num.dim();
    let mut input = SeriesInput::default();
    let (xb0, x0) = (num.state(0), den.state(0));
    for i in 0..n {
        if xb0[i] > 0.0 && x0[i] == 0.0 {
            input.witness(format!("initial state {}: numerator {}, denominator 0", i + 1, xb0[i]));
        }
    }
    for m in 1..=m_max {
        let lhb = num.log_transition_matrix(m - 1);
        let lh = den.log_transition_matrix(m - 1);
        let lxb = num.log_state(m - 1);
        let mut worst = f64::NEG_INFINITY;
        let mut active = Vec::new();
        let mut expected = Vec::new();
        for i in 0..n {
            if lxb[i] == f64::NEG_INFINITY {
                continue;
            }
            let mut gaps = Vec::with_capacity(n);
            for j in 0..n {
                let g = log_weighted_square_gap(lhb[(i, j)], lh[(i, j)], GENERIC_NOISE);
                if g == f64::INFINITY {
                    input.witness(format!(
                        "transition {} -> {} at time {}: numerator positive, denominator 0",
                        i + 1,
                        j + 1,
                        m - 1
                    ));
                }
                if lhb[(i, j)] > f64::NEG_INFINITY {
                    let a = if lh[(i, j)] == f64::NEG_INFINITY { f64::INFINITY } else { (lhb[(i, j)] - lh[(i, j)]).exp() };
                    input.alpha(a);
                }
                gaps.push(g);
            }
            let c = crate::logspace::log_sum_exp(&gaps);
            if c > f64::NEG_INFINITY {
                worst = worst.max(c);
                active.push(lxb[i]);
                expected.push(lxb[i] + c);
            }
        }
        input.log_k.push(worst);
        input.log_khat.push(f64::NEG_INFINITY);
        input.log_active.push(crate::logspace::log_sum_exp(&active));
        input.log_expected.push(crate::logspace::log_sum_exp(&expected));
    }
    let note = String::from("exploratory run on arbitrary operators; the classification is a heuristic outside the V_a family");
    let direction = SeriesDirection {
        numerator: format!("x={:?}", num.start().coords()),
        denominator: format!("x={:?}", den.start().coords()),
    };
    Ok(assemble(direction, input, note, true))
}
