//! Log-domain helpers for probabilities that decay doubly exponentially.

/// Linear values below this are compared through their logarithms.
pub const UNDERFLOW_THRESHOLD: f64 = 1e-300;

/// `ln(x)` with `ln(0) = -inf`.
#[inline]
pub fn ln0(x: f64) -> f64 {
    if x <= 0.0 {
        f64::NEG_INFINITY
    } else {
        x.ln()
    }
}

/// `ln(sum exp(v))`, returning `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    if max == f64::INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `e * log_base` with the convention `0 * (-inf) = 0`, so that `0^0 = 1`.
#[inline]
pub fn log_pow(log_base: f64, exponent: f64) -> f64 {
    if exponent == 0.0 {
        0.0
    } else {
        exponent * log_base
    }
}

/// `ln(1 - e^l)` for `l <= 0`.
#[inline]
pub fn ln_one_minus_exp(l: f64) -> f64 {
    if l == f64::NEG_INFINITY {
        0.0
    } else if l > -std::f64::consts::LN_2 {
        (-l.exp_m1()).ln()
    } else {
        (-l.exp()).ln_1p()
    }
}

/// `base^(2^k)` by repeated squaring; underflows to exactly 0.
pub fn pow2k(base: f64, k: u32) -> f64 {
    (0..k).fold(base, |acc, _| acc * acc)
}

/// Compares two probabilities given in both domains. When both linear
/// values are below [`UNDERFLOW_THRESHOLD`] the logarithms are compared with
/// relative tolerance `tol`; otherwise the linear values with absolute
/// tolerance `tol`.
pub fn close_lin_log(lin_a: f64, log_a: f64, lin_b: f64, log_b: f64, tol: f64) -> bool {
    if lin_a < UNDERFLOW_THRESHOLD && lin_b < UNDERFLOW_THRESHOLD {
        if log_a == f64::NEG_INFINITY || log_b == f64::NEG_INFINITY {
            return log_a == log_b;
        }
        (log_a - log_b).abs() <= tol * log_a.abs().max(log_b.abs()).max(1.0)
    } else {
        (lin_a - lin_b).abs() <= tol
    }
}
