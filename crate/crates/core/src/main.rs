//! Command-line interface: selection, inference, and seeded experiments.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use postsel::harness::{
    infer_records, load_csv, run_coverage_experiment, run_pivot_null_experiment,
    run_residual_bootstrap, screen_summary, write_bootstrap_csv, write_coverage_csv,
    write_json_lines, write_pivot_csv, ExperimentConfig,
};
use postsel::{Procedure, Result};

#[derive(Parser)]
#[command(
    name = "postsel",
    version,
    about = "Exact tests and confidence intervals after model selection in linear regression"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a selection procedure on a CSV dataset and print the model as JSON.
    Screen {
        /// Path to a headered numeric CSV.
        #[arg(long)]
        data: PathBuf,
        /// Name of the response column.
        #[arg(long, default_value = "target")]
        response: String,
        /// Selection procedure: ms, omp, nnls, or ms-lasso.
        #[arg(long, default_value = "ms")]
        procedure: String,
        /// Model size for ms, omp, and the screening stage of ms-lasso.
        #[arg(long)]
        k: Option<usize>,
        /// Lasso penalty for ms-lasso.
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Selective tests and intervals for the selected coefficients (JSON lines).
    Infer {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "target")]
        response: String,
        #[arg(long, default_value = "ms")]
        procedure: String,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        lambda: Option<f64>,
        /// Significance level (two-sided).
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        /// Known noise variance; overrides the n > p estimate.
        #[arg(long)]
        sigma2: Option<f64>,
        /// Output path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Coverage of adjusted vs z intervals across an SNR grid (CSV).
    SimulateCoverage {
        #[arg(long, default_value_t = 20)]
        n: usize,
        #[arg(long, default_value_t = 200)]
        p: usize,
        #[arg(long, default_value_t = 2)]
        k: usize,
        /// Comma-separated SNR grid.
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.5,1,2,5,10")]
        snr: Vec<f64>,
        #[arg(long, default_value_t = 500)]
        trials: usize,
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "ms")]
        procedure: String,
        #[arg(long)]
        lambda: Option<f64>,
        /// Noise variance used for simulation (default 1).
        #[arg(long)]
        sigma2: Option<f64>,
        /// Draw one design per SNR cell instead of one per trial.
        #[arg(long)]
        fixed_design: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Null-pivot uniformity experiment; emits a qq CSV and a KS summary.
    PivotNull {
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 20)]
        p: usize,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 2500)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "ms")]
        procedure: String,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        sigma2: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Residual-bootstrap coverage on a CSV dataset (CSV per nominal level).
    Bootstrap {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "target")]
        response: String,
        #[arg(long, default_value = "ms")]
        procedure: String,
        #[arg(long, default_value = "2")]
        k: Option<usize>,
        #[arg(long)]
        lambda: Option<f64>,
        /// Number of bootstrap replications.
        #[arg(long, default_value_t = 500)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Comma-separated nominal coverage levels.
        #[arg(long, value_delimiter = ',', default_value = "0.5,0.6,0.7,0.8,0.9,0.95,0.99")]
        nominal: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn open_out(out: Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Screen { data, response, procedure, k, lambda } => {
            let procedure: Procedure = procedure.parse()?;
            let dataset = load_csv(&data, &response)?;
            let summary = screen_summary(&dataset, procedure, k, lambda)?;
            let mut w = open_out(None)?;
            writeln!(w, "{}", serde_json::to_string(&summary)?)?;
            w.flush()?;
        }
        Command::Infer { data, response, procedure, k, lambda, alpha, sigma2, out } => {
            let procedure: Procedure = procedure.parse()?;
            let mut dataset = load_csv(&data, &response)?;
            if sigma2.is_some() {
                dataset.sigma2 = sigma2;
            }
            let records = infer_records(&dataset, procedure, k, lambda, alpha)?;
            let mut w = open_out(out)?;
            write_json_lines(&records, &mut w)?;
            w.flush()?;
        }
        Command::SimulateCoverage {
            n,
            p,
            k,
            snr,
            trials,
            alpha,
            seed,
            procedure,
            lambda,
            sigma2,
            fixed_design,
            out,
        } => {
            let mut config = ExperimentConfig::new(n, p, k);
            config.snr_grid = snr;
            config.trials = trials;
            config.alpha_level = alpha;
            config.seed = seed;
            config.procedure = procedure.parse()?;
            config.lambda = lambda;
            config.sigma2 = sigma2;
            config.fixed_design = fixed_design;
            let report = run_coverage_experiment(&config)?;
            let mut w = open_out(out)?;
            write_coverage_csv(&report, &mut w)?;
            w.flush()?;
        }
        Command::PivotNull { n, p, k, trials, seed, procedure, lambda, sigma2, out } => {
            let mut config = ExperimentConfig::new(n, p, k);
            config.trials = trials;
            config.seed = seed;
            config.procedure = procedure.parse()?;
            config.lambda = lambda;
            config.sigma2 = sigma2;
            let report = run_pivot_null_experiment(&config)?;
            let mut w = open_out(out)?;
            write_pivot_csv(&report, &mut w)?;
            w.flush()?;
            eprintln!(
                "pivots={} ks_stat={:.6} ks_p={:.6} skipped={}",
                report.pivots.len(),
                report.ks_stat,
                report.ks_p,
                report.skipped
            );
        }
        Command::Bootstrap { data, response, procedure, k, lambda, trials, seed, nominal, out } => {
            let dataset = load_csv(&data, &response)?;
            let mut config = ExperimentConfig::new(dataset.n(), dataset.p(), k.unwrap_or(2));
            config.trials = trials;
            config.seed = seed;
            config.procedure = procedure.parse()?;
            config.lambda = lambda;
            config.nominal_grid = nominal;
            let report = run_residual_bootstrap(&dataset, &config)?;
            let mut w = open_out(out)?;
            write_bootstrap_csv(&report, &mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
