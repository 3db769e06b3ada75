//! Truncated-Gaussian CDF pivot and its monotone inversion.
//!
//! The pivot F(x) = [Phi((x-mu)/s) - Phi((a-mu)/s)] / [Phi((b-mu)/s) - Phi((a-mu)/s)]
//! is computed entirely in log space: both CDF differences become
//! log(1 - exp(.)) gaps between log-CDF (left tail) or log-survival (right
//! tail) values, so the ratio survives truncation intervals dozens of
//! standard deviations from the mean, where naive Phi differences are 0/0.
//! Inversion exploits that F is strictly decreasing in the mean.

use crate::error::{Error, Result};
use crate::numerics::{log_normal_cdf, log_normal_sf, normal_cdf, normal_sf};

/// Arguments of the truncated-normal CDF pivot.
///
/// `observed` is the contrast value eta'y, `mean` the hypothesized eta'mu,
/// `variance` the contrast variance sigma2 * ||eta||^2, and [lower, upper]
/// the truncation interval (IEEE infinities allowed).
#[derive(Debug, Clone, Copy)]
pub struct PivotSpec {
    pub observed: f64,
    pub mean: f64,
    pub variance: f64,
    pub lower: f64,
    pub upper: f64,
}

// Width below which the standardized truncation interval is numerically
// empty and the pivot is meaningless.
const DEGENERATE_WIDTH: f64 = 1e-14;

/// log(1 - e^t) for t <= 0, switching forms at -ln 2 to avoid cancellation.
fn ln1mexp(t: f64) -> f64 {
    debug_assert!(t <= 1e-12, "ln1mexp needs t <= 0, got {t}");
    if t >= 0.0 {
        return f64::NEG_INFINITY;
    }
    if t < -std::f64::consts::LN_2 {
        (-t.exp()).ln_1p()
    } else {
        (-f64::exp_m1(t)).ln()
    }
}

/// log(Phi(v) - Phi(u)) for u <= v, stable in either tail.
fn log_phi_diff(u: f64, v: f64) -> f64 {
    debug_assert!(u <= v);
    if u == f64::NEG_INFINITY {
        return log_normal_cdf(v);
    }
    if v == f64::INFINITY {
        return log_normal_sf(u);
    }
    if v <= 0.0 {
        // Both in the left tail: Phi(v) (1 - Phi(u)/Phi(v)).
        let lv = log_normal_cdf(v);
        let lu = log_normal_cdf(u);
        lv + ln1mexp(lu - lv)
    } else if u >= 0.0 {
        // Both in the right tail, via survival functions.
        let lu = log_normal_sf(u);
        let lv = log_normal_sf(v);
        lu + ln1mexp(lv - lu)
    } else {
        // Straddles zero; the difference is order one and direct evaluation
        // costs no precision.
        (1.0 - normal_sf(v) - normal_cdf(u)).max(f64::MIN_POSITIVE).ln()
    }
}

/// Truncated-normal CDF pivot value F in [0, 1].
pub fn tn_cdf(spec: &PivotSpec) -> Result<f64> {
    let PivotSpec { observed, mean, variance, lower, upper } = *spec;
    if !variance.is_finite() || variance <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "pivot variance must be positive and finite, got {variance}"
        )));
    }
    if lower.is_nan() || upper.is_nan() || lower >= upper {
        return Err(Error::DegenerateInterval { lower, upper });
    }
    let s = variance.sqrt();
    let za = if lower == f64::NEG_INFINITY { f64::NEG_INFINITY } else { (lower - mean) / s };
    let zb = if upper == f64::INFINITY { f64::INFINITY } else { (upper - mean) / s };
    if zb - za < DEGENERATE_WIDTH {
        return Err(Error::DegenerateInterval { lower, upper });
    }
    let zx = ((observed - mean) / s).clamp(za, zb);

    let log_den = log_phi_diff(za, zb);
    if log_den == f64::NEG_INFINITY {
        // The interval carries no numerically representable mass.
        return Err(Error::DegenerateInterval { lower, upper });
    }
    let log_num = log_phi_diff(za, zx);
    Ok((log_num - log_den).exp().clamp(0.0, 1.0))
}

// Bisection stops when the bracket is this fraction of the pivot scale.
const INVERT_ABS_TOL: f64 = 1e-8;
const MAX_DOUBLINGS: u32 = 60;
const MAX_BISECTIONS: u32 = 200;

/// The unique mean x with F_{x, variance}^{[lower, upper]}(observed) = target.
///
/// F is strictly decreasing in x, so a sign-changing bracket is grown from
/// observed +- 10 sqrt(variance) by doubling, then bisected to an absolute
/// tolerance of 1e-8 * sqrt(variance).
pub fn invert_pivot(
    observed: f64,
    variance: f64,
    lower: f64,
    upper: f64,
    target: f64,
) -> Result<f64> {
    if !variance.is_finite() || variance <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "pivot variance must be positive and finite, got {variance}"
        )));
    }
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidInput(format!(
            "inversion target must lie in (0, 1), got {target}"
        )));
    }
    if !(lower <= observed && observed <= upper) {
        return Err(Error::InvalidInput(format!(
            "observed {observed} outside truncation interval [{lower}, {upper}]"
        )));
    }
    let s = variance.sqrt();
    if upper - lower < DEGENERATE_WIDTH * s {
        return Err(Error::DegenerateInterval { lower, upper });
    }
    let f = |x: f64| -> Result<f64> {
        tn_cdf(&PivotSpec { observed, mean: x, variance, lower, upper })
    };
    // Once the probe mean is so far out that the standardized interval is
    // absorbed by rounding, F is pinned at a limit the target never crosses
    // (the interval itself was checked above): report the bracket, not a
    // degenerate interval.
    let bracket_failure = |doublings: u32, last_value: f64| Error::BracketFailure {
        target,
        doublings,
        observed,
        lower,
        upper,
        last_value,
    };

    // Grow the lower end until F(lo) >= target (F -> 1 as the mean drops).
    let mut step = 10.0 * s;
    let mut lo = observed - step;
    let mut f_lo = f(lo)?;
    let mut doublings = 0;
    while f_lo < target {
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Err(bracket_failure(MAX_DOUBLINGS, f_lo));
        }
        step *= 2.0;
        lo = observed - step;
        f_lo = match f(lo) {
            Ok(v) => v,
            Err(Error::DegenerateInterval { .. }) => {
                return Err(bracket_failure(doublings, f_lo));
            }
            Err(e) => return Err(e),
        };
    }
    // Grow the upper end until F(hi) <= target.
    step = 10.0 * s;
    let mut hi = observed + step;
    let mut f_hi = f(hi)?;
    doublings = 0;
    while f_hi > target {
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Err(bracket_failure(MAX_DOUBLINGS, f_hi));
        }
        step *= 2.0;
        hi = observed + step;
        f_hi = match f(hi) {
            Ok(v) => v,
            Err(Error::DegenerateInterval { .. }) => {
                return Err(bracket_failure(doublings, f_hi));
            }
            Err(e) => return Err(e),
        };
    }

    let tol = INVERT_ABS_TOL * s;
    let mut iterations = 0;
    while hi - lo > tol && iterations < MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if f(mid)? >= target {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    Ok(0.5 * (lo + hi))
}
