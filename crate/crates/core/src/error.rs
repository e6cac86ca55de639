use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: u64, msg: String },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("Brauer-Solow violation: column sum of sector {sector} is {col_sum}")]
    BrauerSolow { sector: String, col_sum: f64 },
    #[error("allocation error: sector {sector} has inventory change {delta_n} but no intermediate sales")]
    Allocation { sector: String, delta_n: f64 },
    #[error("spec error: {0}")]
    Spec(String),
    #[error("numerical error: {msg} (condition estimate {cond:e})")]
    Numerical { msg: String, cond: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("estimation error: {0}")]
    Estimation(String),
    #[error("rank deficient design; collinear columns: {0:?}")]
    RankDeficient(Vec<String>),
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },
    #[error("calibration error: target {target} outside achievable bracket [{lo}, {hi}]")]
    Calibration { target: f64, lo: f64, hi: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("negative output at stage {stage}, period {period}: {value}")]
    NegativeOutput { stage: usize, period: usize, value: f64 },
    #[error("simulation error: {0}")]
    Simulation(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
