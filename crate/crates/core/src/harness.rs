//! Experiment drivers, CSV ingestion, and record emission.
//!
//! Every experiment is a pure function of its config: per-trial RNGs are
//! derived from (seed, stream, trial counter), trials run in parallel, and
//! aggregation uses counts only, so results are independent of thread
//! scheduling. Coverage tables carry raw counts so binomial standard errors
//! can be recomputed downstream.

use std::io::Write as IoWrite;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::inference::{
    confidence_interval, estimate_sigma2, infer_all, selective_pivot, z_interval, Dataset,
};
use crate::numerics::least_squares;
use crate::oracle::ks_test_analytic;
use crate::selectors::{select_and_encode, Procedure};

// Disjoint stream tags so different experiments sharing a base seed never
// reuse a trial RNG.
const STREAM_COVERAGE: u64 = 0x636f_7665;
const STREAM_PIVOT: u64 = 0x7069_766f;
const STREAM_BOOTSTRAP: u64 = 0x626f_6f74;
// Counter reserved for the design draw in fixed-design mode.
const DESIGN_COUNTER: u64 = u64::MAX;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Collision-resistant per-trial seed from (base, stream, counter).
pub fn derive_seed(base: u64, stream: u64, counter: u64) -> u64 {
    let mut h = splitmix64(base);
    h = splitmix64(h ^ stream);
    splitmix64(h ^ counter)
}

/// The RNG for one trial of one experiment stream.
pub fn trial_rng(base: u64, stream: u64, counter: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, stream, counter))
}

/// Shared experiment configuration.
///
/// Simulations draw X with standard normal entries (fresh per trial unless
/// `fixed_design`), set beta0 = (SNR, SNR, 0, ..., 0) on the unit-normalized
/// columns, and use known noise variance `sigma2` (default 1).
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub snr_grid: Vec<f64>,
    pub trials: usize,
    pub alpha_level: f64,
    pub nominal_grid: Vec<f64>,
    pub seed: u64,
    pub procedure: Procedure,
    pub sigma2: Option<f64>,
    pub lambda: Option<f64>,
    pub fixed_design: bool,
}

impl ExperimentConfig {
    pub fn new(n: usize, p: usize, k: usize) -> Self {
        ExperimentConfig {
            n,
            p,
            k,
            snr_grid: vec![0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0],
            trials: 500,
            alpha_level: 0.1,
            nominal_grid: vec![0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99],
            seed: 1,
            procedure: Procedure::Ms,
            sigma2: None,
            lambda: None,
            fixed_design: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 || self.k == 0 || self.k > self.p {
            return Err(Error::InvalidInput(format!(
                "need n, p, k >= 1 and k <= p; got n = {}, p = {}, k = {}",
                self.n, self.p, self.k
            )));
        }
        if self.trials == 0 {
            return Err(Error::InvalidInput("trials must be >= 1".to_string()));
        }
        if self.snr_grid.is_empty() || self.nominal_grid.is_empty() {
            return Err(Error::InvalidInput("grids must be nonempty".to_string()));
        }
        if !(self.alpha_level > 0.0 && self.alpha_level < 1.0) {
            return Err(Error::InvalidInput(format!(
                "alpha level must lie in (0, 1), got {}",
                self.alpha_level
            )));
        }
        for &nv in &self.nominal_grid {
            if !(nv > 0.0 && nv < 1.0) {
                return Err(Error::InvalidInput(format!(
                    "nominal levels must lie in (0, 1), got {nv}"
                )));
            }
        }
        if let Some(s) = self.sigma2 {
            if !s.is_finite() || s <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "sigma2 must be positive and finite, got {s}"
                )));
            }
        }
        Ok(())
    }
}

fn standard_normal_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn standard_normal_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

// ---------------------------------------------------------------------------
// Coverage across an SNR grid
// ---------------------------------------------------------------------------

/// Per-SNR coverage counts for adjusted and z intervals.
#[derive(Debug, Clone, Serialize)]
pub struct CoverageCell {
    pub snr: f64,
    /// Trials with a nonempty selection (the rest contribute nothing).
    pub trials_used: usize,
    /// Selected coefficients with successfully computed intervals.
    pub coefficients: usize,
    pub adjusted_covered: usize,
    pub z_covered: usize,
    /// Coefficients skipped because interval inversion failed.
    pub degenerate_skips: usize,
    /// Trials where the true support was a subset of the selection.
    pub screening_trials: usize,
    /// Max |target - beta0| over coefficients on screening trials.
    pub identity_max_err: f64,
}

impl CoverageCell {
    pub fn adjusted_rate(&self) -> f64 {
        self.adjusted_covered as f64 / self.coefficients.max(1) as f64
    }

    pub fn z_rate(&self) -> f64 {
        self.z_covered as f64 / self.coefficients.max(1) as f64
    }
}

#[derive(Debug, Clone)]
pub struct CoverageReport {
    pub alpha_level: f64,
    pub cells: Vec<CoverageCell>,
}

#[derive(Default)]
struct TrialStats {
    used: bool,
    coefficients: usize,
    adjusted_covered: usize,
    z_covered: usize,
    degenerate_skips: usize,
    screening: bool,
    identity_err: f64,
}

fn coverage_trial(
    config: &ExperimentConfig,
    snr: f64,
    sigma2: f64,
    fixed_x: Option<&DMatrix<f64>>,
    rng: &mut ChaCha8Rng,
) -> Result<TrialStats> {
    let x_raw = match fixed_x {
        Some(x) => x.clone(),
        None => standard_normal_matrix(rng, config.n, config.p),
    };
    let mut data = Dataset::from_raw(x_raw, DVector::zeros(config.n), Some(sigma2))?;
    let mut beta0 = DVector::zeros(config.p);
    beta0[0] = snr;
    if config.p > 1 {
        beta0[1] = snr;
    }
    let mu = &data.x * &beta0;
    data.y = &mu + standard_normal_vector(rng, config.n) * sigma2.sqrt();

    let (model, event) = select_and_encode(&data, config.procedure, Some(config.k), config.lambda)?;
    let mut stats = TrialStats::default();
    if model.support.is_empty() {
        return Ok(stats);
    }
    stats.used = true;
    let x_s = data.columns(&model.support);
    let target = least_squares(&x_s, &mu)?;
    let true_support: Vec<usize> = (0..config.p).filter(|&j| beta0[j] != 0.0).collect();
    stats.screening = true_support.iter().all(|j| model.support.contains(j));
    for (pos, &j) in model.support.iter().enumerate() {
        if stats.screening {
            stats.identity_err = stats.identity_err.max((target[pos] - beta0[j]).abs());
        }
        match confidence_interval(&data, &model, &event, j, config.alpha_level) {
            Ok((l, u)) => {
                stats.coefficients += 1;
                if l <= target[pos] && target[pos] <= u {
                    stats.adjusted_covered += 1;
                }
                let (zl, zu) = z_interval(&data, &model, j, config.alpha_level)?;
                if zl <= target[pos] && target[pos] <= zu {
                    stats.z_covered += 1;
                }
            }
            Err(Error::DegenerateInterval { .. }) | Err(Error::BracketFailure { .. }) => {
                stats.degenerate_skips += 1;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(stats)
}

/// Coverage of adjusted and z intervals for the selected-model targets
/// beta*_S = pinv(X_S) mu, per SNR.
pub fn run_coverage_experiment(config: &ExperimentConfig) -> Result<CoverageReport> {
    config.validate()?;
    let sigma2 = config.sigma2.unwrap_or(1.0);
    let mut cells = Vec::with_capacity(config.snr_grid.len());
    for (si, &snr) in config.snr_grid.iter().enumerate() {
        let stream = STREAM_COVERAGE ^ (si as u64) << 32;
        let fixed_x = if config.fixed_design {
            let mut rng = trial_rng(config.seed, stream, DESIGN_COUNTER);
            Some(standard_normal_matrix(&mut rng, config.n, config.p))
        } else {
            None
        };
        let outcomes: Vec<Result<TrialStats>> = (0..config.trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = trial_rng(config.seed, stream, t as u64);
                coverage_trial(config, snr, sigma2, fixed_x.as_ref(), &mut rng)
            })
            .collect();
        let mut cell = CoverageCell {
            snr,
            trials_used: 0,
            coefficients: 0,
            adjusted_covered: 0,
            z_covered: 0,
            degenerate_skips: 0,
            screening_trials: 0,
            identity_max_err: 0.0,
        };
        for outcome in outcomes {
            let s = outcome?;
            if !s.used {
                continue;
            }
            cell.trials_used += 1;
            cell.coefficients += s.coefficients;
            cell.adjusted_covered += s.adjusted_covered;
            cell.z_covered += s.z_covered;
            cell.degenerate_skips += s.degenerate_skips;
            if s.screening {
                cell.screening_trials += 1;
                cell.identity_max_err = cell.identity_max_err.max(s.identity_err);
            }
        }
        cells.push(cell);
    }
    Ok(CoverageReport { alpha_level: config.alpha_level, cells })
}

// ---------------------------------------------------------------------------
// Null-pivot uniformity
// ---------------------------------------------------------------------------

/// Pivot sample under the true (zero) mean, with its KS test against U(0,1).
#[derive(Debug, Clone)]
pub struct PivotNullReport {
    /// One pivot per selected coefficient, in (trial, support) order.
    pub pivots: Vec<f64>,
    pub ks_stat: f64,
    pub ks_p: f64,
    /// Coefficients whose pivot computation failed (counted, not silently dropped).
    pub skipped: usize,
}

/// Run the full pipeline on global-null data (beta0 = 0) and evaluate each
/// selected coefficient's pivot at its true target 0; the sample should be
/// uniform on (0, 1).
pub fn run_pivot_null_experiment(config: &ExperimentConfig) -> Result<PivotNullReport> {
    config.validate()?;
    let sigma2 = config.sigma2.unwrap_or(1.0);
    let outcomes: Vec<Result<(Vec<f64>, usize)>> = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(config.seed, STREAM_PIVOT, t as u64);
            let x_raw = standard_normal_matrix(&mut rng, config.n, config.p);
            let mut data = Dataset::from_raw(x_raw, DVector::zeros(config.n), Some(sigma2))?;
            data.y = standard_normal_vector(&mut rng, config.n) * sigma2.sqrt();
            let (model, event) =
                select_and_encode(&data, config.procedure, Some(config.k), config.lambda)?;
            let mut pivots = Vec::with_capacity(model.support.len());
            let mut skipped = 0usize;
            for &j in &model.support {
                match selective_pivot(&data, &model, &event, j, 0.0) {
                    Ok(f) => pivots.push(f),
                    Err(Error::DegenerateInterval { .. }) => skipped += 1,
                    Err(e) => return Err(e),
                }
            }
            Ok((pivots, skipped))
        })
        .collect();
    let mut pivots = Vec::with_capacity(config.trials * config.k);
    let mut skipped = 0usize;
    for outcome in outcomes {
        let (p, s) = outcome?;
        pivots.extend(p);
        skipped += s;
    }
    let mut sorted = pivots.clone();
    let (ks_stat, ks_p) = ks_test_analytic(&mut sorted, |x| x.clamp(0.0, 1.0));
    Ok(PivotNullReport { pivots, ks_stat, ks_p, skipped })
}

// ---------------------------------------------------------------------------
// Residual bootstrap on a real dataset
// ---------------------------------------------------------------------------

/// Coverage counts at one nominal level.
#[derive(Debug, Clone, Serialize)]
pub struct BootstrapCell {
    pub nominal: f64,
    pub intervals: usize,
    pub adjusted_covered: usize,
    pub z_covered: usize,
}

impl BootstrapCell {
    pub fn adjusted_rate(&self) -> f64 {
        self.adjusted_covered as f64 / self.intervals.max(1) as f64
    }

    pub fn z_rate(&self) -> f64 {
        self.z_covered as f64 / self.intervals.max(1) as f64
    }
}

#[derive(Debug, Clone)]
pub struct BootstrapReport {
    pub replications: usize,
    pub replications_used: usize,
    pub cells: Vec<BootstrapCell>,
}

/// Residual bootstrap: resample centered full-model residuals, rerun
/// selection + inference on ytil = X beta_hat + resampled noise, and count
/// coverage of the selected-model target under mu = X beta_hat at each
/// nominal level. The noise variance is re-estimated per replication.
pub fn run_residual_bootstrap(
    data: &Dataset,
    config: &ExperimentConfig,
) -> Result<BootstrapReport> {
    config.validate()?;
    let (n, p) = (data.n(), data.p());
    if n <= p {
        return Err(Error::NotEstimable { n, p });
    }
    let beta_full = least_squares(&data.x, &data.y)?;
    let mu_hat = &data.x * beta_full;
    let mut residuals = &data.y - &mu_hat;
    let mean = residuals.sum() / n as f64;
    residuals.add_scalar_mut(-mean);

    let per_rep: Vec<Result<Vec<(usize, usize, usize)>>> = (0..config.trials)
        .into_par_iter()
        .map(|b| {
            let mut rng = trial_rng(config.seed, STREAM_BOOTSTRAP, b as u64);
            let mut boot = data.clone();
            boot.y = DVector::from_fn(n, |_, _| residuals[rng.random_range(0..n)]) + &mu_hat;
            let beta_b = least_squares(&boot.x, &boot.y)?;
            let rss = (&boot.y - &boot.x * beta_b).norm_squared();
            let sigma2_b = rss / (n - p) as f64;
            // counts per nominal level: (intervals, adjusted covered, z covered)
            let mut counts = vec![(0usize, 0usize, 0usize); config.nominal_grid.len()];
            if sigma2_b < 1e-30 {
                // Degenerate (zero-residual) input: ytil = mu_hat exactly, so
                // beta_hat equals the target and every interval covers.
                boot.sigma2 = None;
                let (model, _) =
                    select_and_encode(&boot, config.procedure, Some(config.k), config.lambda)?;
                for c in counts.iter_mut() {
                    c.0 = model.support.len();
                    c.1 = model.support.len();
                    c.2 = model.support.len();
                }
                return Ok(counts);
            }
            boot.sigma2 = Some(sigma2_b);
            let (model, event) =
                select_and_encode(&boot, config.procedure, Some(config.k), config.lambda)?;
            if model.support.is_empty() {
                return Ok(counts);
            }
            let x_s = boot.columns(&model.support);
            let target = least_squares(&x_s, &mu_hat)?;
            for (li, &nominal) in config.nominal_grid.iter().enumerate() {
                let alpha = 1.0 - nominal;
                for (pos, &j) in model.support.iter().enumerate() {
                    match confidence_interval(&boot, &model, &event, j, alpha) {
                        Ok((l, u)) => {
                            counts[li].0 += 1;
                            if l <= target[pos] && target[pos] <= u {
                                counts[li].1 += 1;
                            }
                            let (zl, zu) = z_interval(&boot, &model, j, alpha)?;
                            if zl <= target[pos] && target[pos] <= zu {
                                counts[li].2 += 1;
                            }
                        }
                        Err(Error::DegenerateInterval { .. })
                        | Err(Error::BracketFailure { .. }) => {}
                        Err(e) => return Err(e),
                    }
                }
            }
            Ok(counts)
        })
        .collect();

    let mut cells: Vec<BootstrapCell> = config
        .nominal_grid
        .iter()
        .map(|&nominal| BootstrapCell { nominal, intervals: 0, adjusted_covered: 0, z_covered: 0 })
        .collect();
    let mut used = 0usize;
    for rep in per_rep {
        let counts = rep?;
        if counts.iter().any(|c| c.0 > 0) {
            used += 1;
        }
        for (cell, (total, adj, z)) in cells.iter_mut().zip(counts) {
            cell.intervals += total;
            cell.adjusted_covered += adj;
            cell.z_covered += z;
        }
    }
    Ok(BootstrapReport { replications: config.trials, replications_used: used, cells })
}

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

/// Load a headered numeric CSV: the named response column becomes y, all
/// other columns become X in file order. y and the X columns are centered
/// (intercept by centering), then X columns are unit-normalized. The noise
/// variance is estimated from the full-model fit when n > p.
pub fn load_csv(path: &Path, response: &str) -> Result<Dataset> {
    let mut reader =
        csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let response_idx = headers.iter().position(|h| h == response).ok_or_else(|| {
        Error::InvalidInput(format!(
            "response column {response:?} not found; header has {:?}",
            headers
        ))
    })?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (ri, record) in reader.records().enumerate() {
        let record = record?;
        let mut row = Vec::with_capacity(record.len());
        for (ci, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::NonNumericCell {
                row: ri + 1,
                column: headers.get(ci).cloned().unwrap_or_else(|| format!("#{ci}")),
                value: cell.to_string(),
            })?;
            row.push(v);
        }
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 {
        return Err(Error::InvalidInput("CSV has a header but no data rows".to_string()));
    }
    let p = headers.len() - 1;
    if p == 0 {
        return Err(Error::InvalidInput("CSV needs at least one predictor column".to_string()));
    }
    let mut y = DVector::from_fn(n, |i, _| rows[i][response_idx]);
    let y_mean = y.sum() / n as f64;
    y.add_scalar_mut(-y_mean);
    let predictor_cols: Vec<usize> = (0..headers.len()).filter(|&c| c != response_idx).collect();
    let mut x = DMatrix::zeros(n, p);
    for (j, &c) in predictor_cols.iter().enumerate() {
        let mean: f64 = rows.iter().map(|r| r[c]).sum::<f64>() / n as f64;
        for i in 0..n {
            x[(i, j)] = rows[i][c] - mean;
        }
    }
    let names: Vec<String> = predictor_cols.iter().map(|&c| headers[c].clone()).collect();
    let mut data = Dataset::from_raw_named(x, y, None, names)?;
    if n > p {
        data.sigma2 = Some(estimate_sigma2(&data)?);
    }
    Ok(data)
}

// ---------------------------------------------------------------------------
// Record emission
// ---------------------------------------------------------------------------

/// One JSON-lines record per selected coefficient.
///
/// `beta_hat`, `l`, `u`, `z_lo`, `z_hi` are on the original column scale
/// (internal value divided by `scale`); `v_minus`, `v_plus`, and `eta_norm`
/// describe the internal unit-column contrast.
#[derive(Debug, Clone, Serialize)]
pub struct CoefficientRecord {
    pub index: usize,
    pub name: String,
    pub beta_hat: f64,
    pub pivot: f64,
    pub p_value: f64,
    pub l: f64,
    pub u: f64,
    pub z_lo: f64,
    pub z_hi: f64,
    pub v_minus: f64,
    pub v_plus: f64,
    pub eta_norm: f64,
    pub sigma2: f64,
    pub scale: f64,
}

/// Select on the dataset and produce one record per selected coefficient.
pub fn infer_records(
    data: &Dataset,
    procedure: Procedure,
    k: Option<usize>,
    lambda: Option<f64>,
    alpha_level: f64,
) -> Result<Vec<CoefficientRecord>> {
    let (model, event) = select_and_encode(data, procedure, k, lambda)?;
    let results = infer_all(data, &model, &event, alpha_level)?;
    let sigma2 = data.noise_variance()?;
    Ok(results
        .into_iter()
        .map(|r| {
            let j = r.coefficient_index;
            let scale = data.column_scales[j];
            CoefficientRecord {
                index: j,
                name: data.column_names[j].clone(),
                beta_hat: r.beta_hat / scale,
                pivot: r.pivot,
                p_value: r.p_value,
                l: r.interval.0 / scale,
                u: r.interval.1 / scale,
                z_lo: r.z_interval.0 / scale,
                z_hi: r.z_interval.1 / scale,
                v_minus: r.truncation.v_minus,
                v_plus: r.truncation.v_plus,
                eta_norm: r.truncation.eta.norm(),
                sigma2,
                scale,
            }
        })
        .collect())
}

/// Selected model summary for the `screen` subcommand.
#[derive(Debug, Clone, Serialize)]
pub struct ScreenSummary {
    pub procedure: Procedure,
    pub support: Vec<usize>,
    pub names: Vec<String>,
    pub signs: Vec<f64>,
}

pub fn screen_summary(
    data: &Dataset,
    procedure: Procedure,
    k: Option<usize>,
    lambda: Option<f64>,
) -> Result<ScreenSummary> {
    let (model, _) = select_and_encode(data, procedure, k, lambda)?;
    Ok(ScreenSummary {
        procedure: model.procedure,
        names: model.support.iter().map(|&j| data.column_names[j].clone()).collect(),
        support: model.support,
        signs: model.signs,
    })
}

pub fn write_json_lines<W: IoWrite>(records: &[CoefficientRecord], mut w: W) -> Result<()> {
    for r in records {
        let line = serde_json::to_string(r)?;
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn write_coverage_csv<W: IoWrite>(report: &CoverageReport, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "snr",
        "trials_used",
        "coefficients",
        "adjusted_covered",
        "adjusted_rate",
        "z_covered",
        "z_rate",
        "degenerate_skips",
        "screening_trials",
        "identity_max_err",
    ])?;
    for c in &report.cells {
        wtr.write_record([
            c.snr.to_string(),
            c.trials_used.to_string(),
            c.coefficients.to_string(),
            c.adjusted_covered.to_string(),
            format!("{:.6}", c.adjusted_rate()),
            c.z_covered.to_string(),
            format!("{:.6}", c.z_rate()),
            c.degenerate_skips.to_string(),
            c.screening_trials.to_string(),
            format!("{:.3e}", c.identity_max_err),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Sorted pivots with uniform plotting positions (i + 1/2)/N for qq plots.
pub fn write_pivot_csv<W: IoWrite>(report: &PivotNullReport, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["pivot", "uniform_quantile"])?;
    let mut sorted = report.pivots.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    for (i, pv) in sorted.iter().enumerate() {
        wtr.write_record([format!("{pv:.12}"), format!("{:.12}", (i as f64 + 0.5) / n)])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_bootstrap_csv<W: IoWrite>(report: &BootstrapReport, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "nominal",
        "intervals",
        "adjusted_covered",
        "adjusted_rate",
        "z_covered",
        "z_rate",
    ])?;
    for c in &report.cells {
        wtr.write_record([
            c.nominal.to_string(),
            c.intervals.to_string(),
            c.adjusted_covered.to_string(),
            format!("{:.6}", c.adjusted_rate()),
            c.z_covered.to_string(),
            format!("{:.6}", c.z_rate()),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
