//! Dense least squares via pivoted QR and tail-stable normal CDF routines.
//!
//! Least squares deliberately avoids the normal equations: screened designs
//! are often nearly collinear, and the pivoted QR route keeps the
//! conditioning of X rather than X'X. The normal CDF comes with log-scale
//! companions that stay accurate far beyond the underflow point of the
//! complementary error function, which the truncated-Gaussian pivot needs.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_9;
const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Pivoted QR factorization of a tall matrix, reused across solves.
///
/// Factors A P = Q R with column pivoting and rejects rank deficiency using
/// the tolerance max(n, m) * eps * max|R_ii|.
pub struct LsFactor {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    qr: nalgebra::linalg::ColPivQR<f64, nalgebra::Dyn, nalgebra::Dyn>,
    ncols: usize,
    nrows: usize,
}

impl LsFactor {
    /// Factor a matrix with nrows >= ncols.
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        let (nrows, ncols) = a.shape();
        if nrows < ncols {
            return Err(Error::DimensionMismatch {
                context: "LsFactor::new (matrix must be square or tall)",
                expected: ncols,
                got: nrows,
            });
        }
        let qr = a.clone().col_piv_qr();
        let q = qr.q();
        let r = qr.r();
        let max_diag = (0..ncols).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
        let tol = nrows.max(ncols) as f64 * f64::EPSILON * max_diag;
        if ncols > 0 {
            let min_diag = (0..ncols).map(|i| r[(i, i)].abs()).fold(f64::INFINITY, f64::min);
            if min_diag <= tol {
                return Err(Error::RankDeficient { context: "pivoted QR", pivot: min_diag, tol });
            }
        }
        Ok(LsFactor { q, r, qr, ncols, nrows })
    }

    /// Minimizer of ||y - A beta||.
    pub fn solve(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        if y.len() != self.nrows {
            return Err(Error::DimensionMismatch {
                context: "LsFactor::solve",
                expected: self.nrows,
                got: y.len(),
            });
        }
        let qty = self.q.tr_mul(y);
        let mut w = self.r.solve_upper_triangular(&qty).expect("diagonal checked at factorization");
        self.qr.p().inv_permute_rows(&mut w);
        Ok(w)
    }

    /// (A'A)^{-1} v through the factorization: A'A = P R'R P'.
    pub fn gram_solve(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if v.len() != self.ncols {
            return Err(Error::DimensionMismatch {
                context: "LsFactor::gram_solve",
                expected: self.ncols,
                got: v.len(),
            });
        }
        let mut t = v.clone();
        self.qr.p().permute_rows(&mut t);
        let s = self.r.tr_solve_upper_triangular(&t).expect("diagonal checked at factorization");
        let mut u = self.r.solve_upper_triangular(&s).expect("diagonal checked at factorization");
        self.qr.p().inv_permute_rows(&mut u);
        Ok(u)
    }

    /// Materialized pseudoinverse A^dagger = P R^{-1} Q' (ncols x nrows).
    pub fn pseudoinverse(&self) -> DMatrix<f64> {
        let qt = self.q.transpose();
        let mut g = self.r.solve_upper_triangular(&qt).expect("diagonal checked at factorization");
        self.qr.p().inv_permute_rows(&mut g);
        g
    }
}

/// Minimizer of ||y - X_S beta|| for a full-column-rank X_S.
pub fn least_squares(x_s: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    LsFactor::new(x_s)?.solve(y)
}

/// M^dagger v for a full-rank M of either orientation.
///
/// Tall M: the least-squares solution of M x = v. Wide M: the minimum-norm
/// solution, obtained from the QR factorization of M'.
pub fn pseudoinverse_apply(m: &DMatrix<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    if m.nrows() >= m.ncols() {
        return least_squares(m, v);
    }
    if v.len() != m.nrows() {
        return Err(Error::DimensionMismatch {
            context: "pseudoinverse_apply",
            expected: m.nrows(),
            got: v.len(),
        });
    }
    // M' P = Q R, so M x = v becomes R' w = P' v with x = Q w.
    let f = LsFactor::new(&m.transpose())?;
    let mut t = v.clone();
    f.qr.p().permute_rows(&mut t);
    let w = f.r.tr_solve_upper_triangular(&t).expect("diagonal checked at factorization");
    Ok(&f.q * w)
}

/// Standard normal CDF, exact at +-infinity.
pub fn normal_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 1.0;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Standard normal survival function 1 - Phi(x).
pub fn normal_sf(x: f64) -> f64 {
    normal_cdf(-x)
}

/// log Phi(x), accurate into tails far beyond erfc underflow (|x| ~ 1e150).
pub fn log_normal_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 0.0;
    }
    if x == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if x > 5.0 {
        // ln(1 - Q) with Q tiny and exactly representable.
        return (-normal_sf(x)).ln_1p();
    }
    if x > -37.0 {
        return (0.5 * libm::erfc(-x / SQRT_2)).ln();
    }
    // Mills-ratio asymptotic: Phi(x) = phi(x)/|x| * (1 - 1/x^2 + 3/x^4 - ...).
    let inv2 = 1.0 / (x * x);
    let series =
        1.0 + inv2 * (-1.0 + inv2 * (3.0 + inv2 * (-15.0 + inv2 * (105.0 - 945.0 * inv2))));
    -0.5 * x * x - LN_SQRT_2PI - (-x).ln() + series.ln()
}

/// log(1 - Phi(x)).
pub fn log_normal_sf(x: f64) -> f64 {
    log_normal_cdf(-x)
}

// Acklam's rational approximation to the normal quantile (|rel err| < 1.2e-9),
// used as the seed for Newton refinement. Coefficients are quoted as published.
#[allow(clippy::excessive_precision)]
fn quantile_seed(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;
    if p < P_LOW {
        // The tail rational already evaluates to the (negative) quantile.
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Standard normal quantile, polished with Newton steps on log Phi.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidInput(format!("normal_quantile requires p in [0, 1], got {p}")));
    }
    if p == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if p == 1.0 {
        return Ok(f64::INFINITY);
    }
    if p > 0.5 {
        return Ok(-normal_quantile(1.0 - p)?);
    }
    let mut q = quantile_seed(p);
    // Newton on g(q) = log Phi(q) - log p; g'(q) = phi(q)/Phi(q).
    let ln_p = p.ln();
    for _ in 0..3 {
        let lcdf = log_normal_cdf(q);
        let lpdf = -0.5 * q * q - LN_SQRT_2PI;
        q -= (lcdf - ln_p) * (lcdf - lpdf).exp();
    }
    Ok(q)
}
