//! Tests and confidence intervals for coefficients of the selected model.
//!
//! The inferential target after selecting columns S is the population
//! regression of the mean onto those columns, beta*_S = (X_S'X_S)^{-1} X_S' mu,
//! not the coefficients of any "true" model. Each coefficient is a linear
//! contrast eta_j'y whose law, conditional on the selection event, is a
//! Gaussian truncated to the interval the polytope module computes; the
//! pivot and its inversion then give exact tests and intervals. Unadjusted
//! z-intervals are provided for comparison.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numerics::{least_squares, normal_quantile, pseudoinverse_apply};
use crate::polytope::{truncation_interval, SelectionEvent, TruncationInterval};
use crate::selectors::SelectedModel;
use crate::truncnorm::{invert_pivot, tn_cdf, PivotSpec};

/// A regression problem with unit-normalized columns.
///
/// `column_scales` holds the original column norms so coefficients can be
/// reported on the input scale (internal beta divided by the scale).
/// `sigma2` is the known or estimated noise variance; operations that need
/// it fail if it is absent.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub sigma2: Option<f64>,
    pub column_scales: Vec<f64>,
    pub column_names: Vec<String>,
}

impl Dataset {
    /// Normalize raw columns to unit norm, recording scales.
    pub fn from_raw(x_raw: DMatrix<f64>, y: DVector<f64>, sigma2: Option<f64>) -> Result<Self> {
        let names = (0..x_raw.ncols()).map(|j| format!("x{j}")).collect();
        Dataset::from_raw_named(x_raw, y, sigma2, names)
    }

    /// As `from_raw` with explicit column names (used by CSV ingestion).
    pub fn from_raw_named(
        mut x: DMatrix<f64>,
        y: DVector<f64>,
        sigma2: Option<f64>,
        column_names: Vec<String>,
    ) -> Result<Self> {
        let (n, p) = x.shape();
        if n == 0 || p == 0 {
            return Err(Error::InvalidInput(format!(
                "dataset must have n, p >= 1, got n = {n}, p = {p}"
            )));
        }
        if y.len() != n {
            return Err(Error::DimensionMismatch {
                context: "Dataset::from_raw (response length)",
                expected: n,
                got: y.len(),
            });
        }
        if column_names.len() != p {
            return Err(Error::DimensionMismatch {
                context: "Dataset::from_raw (column names)",
                expected: p,
                got: column_names.len(),
            });
        }
        let mut column_scales = Vec::with_capacity(p);
        for j in 0..p {
            let norm = x.column(j).norm();
            if norm <= 1e-12 {
                return Err(Error::ConstantColumn { name: column_names[j].clone() });
            }
            for i in 0..n {
                x[(i, j)] /= norm;
            }
            column_scales.push(norm);
        }
        Ok(Dataset { x, y, sigma2, column_scales, column_names })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Noise variance, failing loudly when neither supplied nor estimated.
    pub fn noise_variance(&self) -> Result<f64> {
        self.sigma2.ok_or_else(|| {
            Error::InvalidInput(
                "noise variance required: supply sigma2 (it is only estimable when n > p)"
                    .to_string(),
            )
        })
    }

    /// Columns of X for an index set, in the given order.
    pub fn columns(&self, support: &[usize]) -> DMatrix<f64> {
        self.x.select_columns(support.iter())
    }

    /// Restriction to a subset of columns (already normalized), keeping y.
    pub fn restrict(&self, support: &[usize]) -> Dataset {
        Dataset {
            x: self.columns(support),
            y: self.y.clone(),
            sigma2: self.sigma2,
            column_scales: support.iter().map(|&j| self.column_scales[j]).collect(),
            column_names: support.iter().map(|&j| self.column_names[j].clone()).collect(),
        }
    }
}

/// Everything inferred about one selected coefficient.
///
/// Values are on the internal (unit-column) scale; divide beta and interval
/// endpoints by `column_scales[j]` to report on the input scale.
#[derive(Debug, Clone)]
pub struct InferenceResult {
    pub coefficient_index: usize,
    pub beta_hat: f64,
    pub pivot: f64,
    pub p_value: f64,
    pub interval: (f64, f64),
    pub z_interval: (f64, f64),
    pub alpha_level: f64,
    pub truncation: TruncationInterval,
}

/// Outcome of a level-alpha selective hypothesis test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestDecision {
    Accept,
    Reject,
}

/// Contrast eta_j with eta_j'y = beta_hat_j and eta_j'mu = beta*_j for the
/// selected model: the j-th row of the pseudoinverse of X_S.
pub fn eta_for_coefficient(
    data: &Dataset,
    model: &SelectedModel,
    j: usize,
) -> Result<DVector<f64>> {
    let pos = model.support.iter().position(|&i| i == j).ok_or_else(|| {
        Error::InvalidInput(format!("coefficient {j} is not in the selected support"))
    })?;
    let x_s = data.columns(&model.support);
    let e = DVector::from_fn(model.support.len(), |i, _| if i == pos { 1.0 } else { 0.0 });
    pseudoinverse_apply(&x_s.transpose(), &e)
}

fn pivot_at(
    data: &Dataset,
    ti: &TruncationInterval,
    observed: f64,
    hypothesized: f64,
) -> Result<f64> {
    let _ = data;
    tn_cdf(&PivotSpec {
        observed,
        mean: hypothesized,
        variance: ti.scale,
        lower: ti.v_minus,
        upper: ti.v_plus,
    })
}

/// Truncated-normal pivot of coefficient j at a hypothesized target value.
pub fn selective_pivot(
    data: &Dataset,
    model: &SelectedModel,
    event: &SelectionEvent,
    j: usize,
    hypothesized: f64,
) -> Result<f64> {
    let eta = eta_for_coefficient(data, model, j)?;
    let sigma2 = data.noise_variance()?;
    let ti = truncation_interval(event, &eta, sigma2, &data.y)?;
    pivot_at(data, &ti, eta.dot(&data.y), hypothesized)
}

/// Exact level-alpha test of H0: beta*_j = beta_j, conditional on selection.
///
/// Accepts iff alpha/2 < pivot < 1 - alpha/2.
pub fn hypothesis_test(
    data: &Dataset,
    model: &SelectedModel,
    event: &SelectionEvent,
    j: usize,
    beta_j: f64,
    alpha_level: f64,
) -> Result<TestDecision> {
    check_alpha(alpha_level)?;
    let pivot = selective_pivot(data, model, event, j, beta_j)?;
    Ok(if alpha_level / 2.0 < pivot && pivot < 1.0 - alpha_level / 2.0 {
        TestDecision::Accept
    } else {
        TestDecision::Reject
    })
}

/// Exact (1 - alpha) confidence interval for beta*_j by pivot inversion:
/// L at target 1 - alpha/2, U at target alpha/2.
pub fn confidence_interval(
    data: &Dataset,
    model: &SelectedModel,
    event: &SelectionEvent,
    j: usize,
    alpha_level: f64,
) -> Result<(f64, f64)> {
    check_alpha(alpha_level)?;
    let eta = eta_for_coefficient(data, model, j)?;
    let sigma2 = data.noise_variance()?;
    let ti = truncation_interval(event, &eta, sigma2, &data.y)?;
    let observed = eta.dot(&data.y);
    let l = invert_pivot(observed, ti.scale, ti.v_minus, ti.v_plus, 1.0 - alpha_level / 2.0)?;
    let u = invert_pivot(observed, ti.scale, ti.v_minus, ti.v_plus, alpha_level / 2.0)?;
    debug_assert!(l <= u);
    Ok((l, u))
}

/// Unadjusted interval beta_hat_j +- z_{1-alpha/2} sigma ||eta_j||.
pub fn z_interval(
    data: &Dataset,
    model: &SelectedModel,
    j: usize,
    alpha_level: f64,
) -> Result<(f64, f64)> {
    check_alpha(alpha_level)?;
    let eta = eta_for_coefficient(data, model, j)?;
    let sigma2 = data.noise_variance()?;
    let observed = eta.dot(&data.y);
    let half = normal_quantile(1.0 - alpha_level / 2.0)? * (sigma2 * eta.norm_squared()).sqrt();
    Ok((observed - half, observed + half))
}

/// Full-model residual variance ||y - X beta_hat||^2 / (n - p).
pub fn estimate_sigma2(data: &Dataset) -> Result<f64> {
    let (n, p) = (data.n(), data.p());
    if n <= p {
        return Err(Error::NotEstimable { n, p });
    }
    let beta = least_squares(&data.x, &data.y)?;
    let resid = &data.y - &data.x * beta;
    Ok(resid.norm_squared() / (n - p) as f64)
}

/// All per-coefficient results for a selected model, sharing one truncation
/// computation per coefficient.
pub fn infer_all(
    data: &Dataset,
    model: &SelectedModel,
    event: &SelectionEvent,
    alpha_level: f64,
) -> Result<Vec<InferenceResult>> {
    check_alpha(alpha_level)?;
    let sigma2 = data.noise_variance()?;
    let z = normal_quantile(1.0 - alpha_level / 2.0)?;
    let mut out = Vec::with_capacity(model.support.len());
    for &j in &model.support {
        let eta = eta_for_coefficient(data, model, j)?;
        let ti = truncation_interval(event, &eta, sigma2, &data.y)?;
        let observed = eta.dot(&data.y);
        let pivot = pivot_at(data, &ti, observed, 0.0)?;
        let l = invert_pivot(observed, ti.scale, ti.v_minus, ti.v_plus, 1.0 - alpha_level / 2.0)?;
        let u = invert_pivot(observed, ti.scale, ti.v_minus, ti.v_plus, alpha_level / 2.0)?;
        let half = z * ti.scale.sqrt();
        out.push(InferenceResult {
            coefficient_index: j,
            beta_hat: observed,
            pivot,
            p_value: 2.0 * pivot.min(1.0 - pivot),
            interval: (l, u),
            z_interval: (observed - half, observed + half),
            alpha_level,
            truncation: ti,
        });
    }
    Ok(out)
}

fn check_alpha(alpha_level: f64) -> Result<()> {
    if !(alpha_level > 0.0 && alpha_level < 1.0) {
        return Err(Error::InvalidInput(format!(
            "alpha level must lie in (0, 1), got {alpha_level}"
        )));
    }
    Ok(())
}
