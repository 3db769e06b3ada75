//! Independent validators for the analytic machinery.
//!
//! Everything here deliberately avoids the code paths it validates: the
//! quadrature CDF integrates the raw Gaussian density (no erfc), the
//! rejection samplers draw from the unconstrained Gaussian and filter by
//! event containment, and the partition checks enumerate candidate models
//! exhaustively. Tests freeze seeds so every derived number is reproducible.

use nalgebra::DVector;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::polytope::{contains, SelectionEvent};

// ---------------------------------------------------------------------------
// Quadrature reference for the truncated-normal CDF.

const SIMPSON_REL_TOL: f64 = 1e-12;
const SIMPSON_MAX_DEPTH: u32 = 48;
// Integration window half-width in standard deviations; mass beyond is far
// below every tolerance in play.
const QUAD_CLIP_SD: f64 = 40.0;

fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
    h / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    m: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    depth: u32,
) -> f64 {
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, flm, fm, m - a);
    let right = simpson(fm, frm, fb, b - m);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * SIMPSON_REL_TOL * (left + right).abs() + 1e-300 {
        left + right + delta / 15.0
    } else {
        adaptive_simpson_rec(f, a, lm, m, fa, flm, fm, left, depth - 1)
            + adaptive_simpson_rec(f, m, rm, b, fm, frm, fb, right, depth - 1)
    }
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    adaptive_simpson_rec(f, a, m, b, fa, fm, fb, simpson(fa, fm, fb, b - a), SIMPSON_MAX_DEPTH)
}

/// Truncated-normal CDF by adaptive Simpson quadrature of the raw density.
///
/// Reference implementation: shares no tail machinery with `tn_cdf`.
/// Accurate to ~1e-10 relative for standardized offsets within the +-40
/// standard deviation window.
pub fn quadrature_tn_cdf(mean: f64, variance: f64, lower: f64, upper: f64, x: f64) -> f64 {
    assert!(variance > 0.0 && lower < upper);
    let s = variance.sqrt();
    let a = lower.max(mean - QUAD_CLIP_SD * s);
    let b = upper.min(mean + QUAD_CLIP_SD * s);
    if x <= a {
        return 0.0;
    }
    if x >= b {
        return 1.0;
    }
    let density = |t: f64| {
        let z = (t - mean) / s;
        (-0.5 * z * z).exp()
    };
    let num = adaptive_simpson(&density, a, x);
    let den = num + adaptive_simpson(&density, x, b);
    (num / den).clamp(0.0, 1.0)
}

// ---------------------------------------------------------------------------
// Rejection sampling from constrained Gaussians.

/// Draws y ~ N(mean, sigma2 I) conditioned on a selection event by filtering.
#[derive(Debug, Clone)]
pub struct RejectionSampler {
    pub mean: DVector<f64>,
    pub sigma2: f64,
    pub event: SelectionEvent,
    pub seed: u64,
    pub max_draws: u64,
}

/// i.i.d. draws of y | {Ay <= b}; every draw satisfies containment.
pub fn rejection_sample_conditional(
    sampler: &RejectionSampler,
    count: usize,
) -> Result<Vec<DVector<f64>>> {
    let n = sampler.mean.len();
    let s = sampler.sigma2.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(sampler.seed);
    let mut out = Vec::with_capacity(count);
    let mut draws = 0u64;
    while out.len() < count {
        if draws >= sampler.max_draws {
            return Err(Error::AcceptanceTooLow { accepted: out.len() as u64, draws });
        }
        let y =
            DVector::from_fn(n, |i, _| sampler.mean[i] + s * rng.sample::<f64, _>(StandardNormal));
        draws += 1;
        if contains(&sampler.event, &y, 0.0) {
            out.push(y);
        }
    }
    Ok(out)
}

/// Draws of the contrast value eta'y conditional on the event AND on the
/// component of y orthogonal to eta staying at its value under `y0`.
///
/// Holding that component fixed pins the truncation limits, so the accepted
/// values are exactly TN(eta'mean, sigma2 ||eta||^2, V-, V+) with V-/V+
/// computed at y0. Draw t from the unconditional N(eta'mean, sigma2
/// ||eta||^2) (eta'y is independent of the orthogonal component), rebuild y,
/// and accept by full containment.
#[allow(clippy::too_many_arguments)]
pub fn rejection_sample_eta_conditional(
    event: &SelectionEvent,
    mean: &DVector<f64>,
    sigma2: f64,
    eta: &DVector<f64>,
    y0: &DVector<f64>,
    count: usize,
    seed: u64,
    max_draws: u64,
) -> Result<Vec<f64>> {
    let nsq = eta.norm_squared();
    if nsq == 0.0 {
        return Err(Error::ZeroContrast);
    }
    let base = y0 - eta * (eta.dot(y0) / nsq);
    let t_mean = eta.dot(mean);
    let t_sd = (sigma2 * nsq).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut draws = 0u64;
    while out.len() < count {
        if draws >= max_draws {
            return Err(Error::AcceptanceTooLow { accepted: out.len() as u64, draws });
        }
        let t = t_mean + t_sd * rng.sample::<f64, _>(StandardNormal);
        draws += 1;
        let y = &base + eta * (t / nsq);
        if contains(event, &y, 0.0) {
            out.push(t);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov utilities.

/// One-sample KS statistic and p-value against an analytic CDF.
///
/// Sorts the sample in place. The p-value uses the asymptotic Kolmogorov
/// series with the Stephens finite-sample correction.
pub fn ks_test_analytic<F: Fn(f64) -> f64>(samples: &mut [f64], cdf: F) -> (f64, f64) {
    assert!(!samples.is_empty());
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len() as f64;
    let mut d = 0.0_f64;
    for (i, &x) in samples.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    (d, ks_pvalue(n, d))
}

/// Two-sample KS statistic and p-value (effective n = n1 n2 / (n1 + n2)).
pub fn ks_test_two_sample(a: &mut [f64], b: &mut [f64]) -> (f64, f64) {
    assert!(!a.is_empty() && !b.is_empty());
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0_f64;
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let n_eff = na * nb / (na + nb);
    (d, ks_pvalue(n_eff, d))
}

/// Kolmogorov tail probability Q(lambda) with finite-sample correction.
pub fn ks_pvalue(n_eff: f64, d: f64) -> f64 {
    let sqrt_n = n_eff.sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let term = sign * (-2.0 * (j as f64) * (j as f64) * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

// ---------------------------------------------------------------------------
// Exhaustive partition check for marginal screening.

/// Outcome of checking that screening events tile response space.
#[derive(Debug, Clone)]
pub struct PartitionReport {
    /// Grid points checked against every candidate cell.
    pub checked: usize,
    /// Grid points skipped because they sit within tie tolerance of a
    /// selection boundary (k-th vs (k+1)-th magnitude, or a zero sign).
    pub skipped_ties: usize,
    /// Human-readable descriptions of any double-membership or missed cell.
    pub violations: Vec<String>,
}

impl PartitionReport {
    pub fn zero_violations(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Verify, by brute force over all C(p, k) 2^k candidate (support, signs)
/// cells, that each grid response lies in its own screening event and in no
/// other. Guarded to p <= 5, k <= 2 so enumeration stays exact and cheap.
///
/// Points within `1e-9 * ||y||` of a tie boundary are skipped: there the
/// partition is ambiguous by construction (a measure-zero set).
pub fn enumerate_partition(
    data: &crate::inference::Dataset,
    k: usize,
    grid: &[DVector<f64>],
) -> Result<PartitionReport> {
    use crate::selectors::{encode_ms_event, marginal_screen, Procedure, SelectedModel};

    let p = data.p();
    if p > 5 || k > 2 || k == 0 || k > p {
        return Err(Error::InvalidInput(format!(
            "partition enumeration is guarded to p <= 5 and 1 <= k <= 2, got p = {p}, k = {k}"
        )));
    }
    // Precompute one event per candidate cell.
    let mut supports: Vec<Vec<usize>> = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    fn combos(p: usize, k: usize, start: usize, stack: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if stack.len() == k {
            out.push(stack.clone());
            return;
        }
        for j in start..p {
            stack.push(j);
            combos(p, k, j + 1, stack, out);
            stack.pop();
        }
    }
    combos(p, k, 0, &mut stack, &mut supports);
    let mut cells: Vec<(Vec<usize>, Vec<f64>, SelectionEvent)> = Vec::new();
    for support in &supports {
        for mask in 0..(1usize << k) {
            let signs: Vec<f64> =
                (0..k).map(|i| if mask & (1 << i) != 0 { 1.0 } else { -1.0 }).collect();
            let model = SelectedModel {
                procedure: Procedure::Ms,
                support: support.clone(),
                signs: signs.clone(),
                stage_info: None,
            };
            let event = encode_ms_event(data, &model)?;
            cells.push((support.clone(), signs, event));
        }
    }

    let tie_tol = 1e-9;
    let mut checked = 0usize;
    let mut skipped_ties = 0usize;
    let mut violations = Vec::new();
    for (gi, y) in grid.iter().enumerate() {
        if y.len() != data.n() {
            return Err(Error::DimensionMismatch {
                context: "enumerate_partition (grid point length)",
                expected: data.n(),
                got: y.len(),
            });
        }
        let scale = tie_tol * (1.0 + y.norm());
        let c = data.x.tr_mul(y);
        let mut mags: Vec<f64> = c.iter().map(|v| v.abs()).collect();
        mags.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let boundary_tie = k < p && mags[k - 1] - mags[k] < scale;
        let sign_tie = mags[..k].iter().any(|&m| m < scale);
        if boundary_tie || sign_tie {
            skipped_ties += 1;
            continue;
        }
        checked += 1;
        let mut probe = data.clone();
        probe.y = y.clone();
        let own = marginal_screen(&probe, k)?;
        let mut hits = 0usize;
        for (support, signs, event) in &cells {
            let is_own = *support == own.support && *signs == own.signs;
            let inside = contains(event, y, 0.0);
            if inside {
                hits += 1;
            }
            if inside != is_own {
                violations.push(format!(
                    "grid point {gi}: cell ({support:?}, {signs:?}) containment {inside} \
                     but selected ({:?}, {:?})",
                    own.support, own.signs
                ));
            }
        }
        if hits != 1 {
            violations.push(format!("grid point {gi}: contained in {hits} cells"));
        }
    }
    Ok(PartitionReport { checked, skipped_ties, violations })
}
