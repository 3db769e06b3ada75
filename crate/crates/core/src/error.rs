//! Crate-wide error type with CLI exit-code mapping.

/// Errors surfaced by selection, inference, and the experiment harness.
///
/// Exit-code policy: input/usage problems map to 2, numerical failures
/// (rank collapse, degenerate truncation, solver stalls) map to 3.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("rank-deficient matrix in {context}: pivot {pivot:.3e} below tolerance {tol:.3e}")]
    RankDeficient { context: &'static str, pivot: f64, tol: f64 },

    #[error(
        "selection event violated at row {row}: slack {slack:.3e} (y is outside the polyhedron)"
    )]
    EventViolated { row: usize, slack: f64 },

    #[error("contrast vector has zero norm")]
    ZeroContrast,

    #[error("degenerate truncation interval [{lower:.6e}, {upper:.6e}] (width below 1e-14 of the pivot scale)")]
    DegenerateInterval { lower: f64, upper: f64 },

    #[error(
        "failed to bracket pivot root for target {target} after {doublings} doublings \
         (observed {observed:.6e}, bounds [{lower:.6e}, {upper:.6e}], last endpoint value {last_value:.6e})"
    )]
    BracketFailure {
        target: f64,
        doublings: u32,
        observed: f64,
        lower: f64,
        upper: f64,
        last_value: f64,
    },

    #[error("solver stalled after {iterations} iterations in {context}")]
    SolverStalled { context: &'static str, iterations: usize },

    #[error("noise variance not estimable with n = {n} <= p = {p}; supply sigma2 explicitly")]
    NotEstimable { n: usize, p: usize },

    #[error("column {name:?} is constant after centering (zero norm)")]
    ConstantColumn { name: String },

    #[error("rejection sampler acceptance rate too low: {accepted} of {draws} draws accepted")]
    AcceptanceTooLow { accepted: u64, draws: u64 },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch { context: &'static str, expected: usize, got: usize },

    #[error("{0}")]
    InvalidInput(String),

    #[error("non-numeric cell at row {row}, column {column:?}: {value:?}")]
    NonNumericCell { row: usize, column: String, value: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 for validation problems, 3 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_)
            | Error::NonNumericCell { .. }
            | Error::ConstantColumn { .. }
            | Error::NotEstimable { .. }
            | Error::DimensionMismatch { .. }
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_) => 2,
            Error::RankDeficient { .. }
            | Error::EventViolated { .. }
            | Error::ZeroContrast
            | Error::DegenerateInterval { .. }
            | Error::BracketFailure { .. }
            | Error::SolverStalled { .. }
            | Error::AcceptanceTooLow { .. } => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
