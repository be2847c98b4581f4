use std::path::PathBuf;

use crate::ingest::Quarter;
use crate::qdp::ValueFunction;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by the command-line front end to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numerical,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Config => 1,
            ErrorClass::Data => 2,
            ErrorClass::Numerical => 3,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {message}")]
    Parse { context: String, message: String },

    #[error("{label}: non-monotone dates ({previous} followed by {next})")]
    NonMonotoneDates { label: String, previous: String, next: String },

    #[error("{0}: no observations")]
    NoObservations(String),

    #[error("{label}: missing value at {date}")]
    MissingValue { label: String, date: String },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("window not covered by {label}; missing quarters: {}", fmt_quarters(.missing))]
    Coverage { label: String, missing: Vec<Quarter> },

    #[error("design matrix is rank deficient; collinear columns: {}", .columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    #[error("empty sample")]
    EmptySample,

    #[error("quantile index {0} outside (0, 1)")]
    InvalidTau(f64),

    #[error("policy exerts no effect on shocks' direction")]
    NoPolicyEffect,

    #[error("rule denominator delta + beta * (a_pi_i^2 + lambda * a_y_i^2) is not positive ({0})")]
    ZeroDenominator(f64),

    #[error("skedastic floor binds at the evaluation state ({equation} equation, linear form {linear}); derivative undefined")]
    FloorBinding { equation: &'static str, linear: f64 },

    #[error("rule case requires {0}")]
    CaseMismatch(String),

    #[error("no sign change of the Euler residual on [{lo}, {hi}] (residuals {f_lo}, {f_hi})")]
    NoSignChange { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("value iteration did not converge after {iterations} iterations (last sup-norm change {change})")]
    NotConverged { iterations: usize, change: f64, last: Box<ValueFunction> },

    #[error("grid/context mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) => ErrorClass::Config,
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::NonMonotoneDates { .. }
            | Error::NoObservations(_)
            | Error::MissingValue { .. }
            | Error::InvalidData(_)
            | Error::Coverage { .. } => ErrorClass::Data,
            _ => ErrorClass::Numerical,
        }
    }
}

fn fmt_quarters(qs: &[Quarter]) -> String {
    const SHOWN: usize = 12;
    let mut out: Vec<String> = qs.iter().take(SHOWN).map(|q| q.to_string()).collect();
    if qs.len() > SHOWN {
        out.push(format!("... ({} total)", qs.len()));
    }
    out.join(", ")
}
