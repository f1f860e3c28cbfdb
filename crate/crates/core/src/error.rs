use thiserror::Error;

/// Coarse classification of failures, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Malformed input: bad CSV/TOML, invalid arguments.
    Parse,
    /// Structurally valid input that violates a data invariant.
    Invariant,
    /// The registration itself could not produce an estimate.
    Registration,
}

#[derive(Debug, Error)]
pub enum XcrError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    #[error("t = {t} is outside the curve domain [{lo}, {hi}]")]
    OutOfDomain { t: f64, lo: f64, hi: f64 },

    #[error("integrand is not finite at t = {t}")]
    NonFinite { t: f64 },

    #[error("invalid quadrature: {0}")]
    InvalidQuadrature(String),

    #[error("fewer than 3 grid points carry kernel weight near t = {t}")]
    DegenerateWindow { t: f64 },

    #[error("area under the curve is zero ({area:e})")]
    ZeroArea { area: f64 },

    #[error("invalid window [{r1}, {r2}] on domain [{t0}, {tmax}]: {reason}")]
    InvalidWindow {
        r1: f64,
        r2: f64,
        t0: f64,
        tmax: f64,
        reason: String,
    },

    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("component {component}: shift {shift} leaves the admissible range [{lo}, {hi}]")]
    ShiftOutOfRange {
        component: usize,
        shift: f64,
        lo: f64,
        hi: f64,
    },

    #[error("admissible shift range [{lo}, {hi}] is degenerate")]
    RangeDegenerate { lo: f64, hi: f64 },

    #[error("criterion is not finite anywhere on the admissible range")]
    NoMinimum,

    #[error("curves are not on the model grid")]
    GridMismatch,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("line {line}: subject '{subject}', component '{component}': {message}")]
    SampleGridMismatch {
        line: u64,
        subject: String,
        component: String,
        message: String,
    },

    #[error("no input intervals")]
    EmptyInput,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl XcrError {
    pub fn category(&self) -> ErrorCategory {
        use XcrError::*;
        match self {
            Parse { .. }
            | Csv(_)
            | Json(_)
            | Io(_)
            | InvalidArgument(_)
            | InvalidQuadrature(_)
            | EmptyInput => ErrorCategory::Parse,
            SampleGridMismatch { .. }
            | InvalidGrid(_)
            | InvalidCurve(_)
            | InvalidSample(_)
            | InvalidWindow { .. }
            | GridMismatch
            | OutOfDomain { .. }
            | ZeroArea { .. } => ErrorCategory::Invariant,
            NonFinite { .. }
            | DegenerateWindow { .. }
            | ShiftOutOfRange { .. }
            | RangeDegenerate { .. }
            | NoMinimum
            | InsufficientData(_) => ErrorCategory::Registration,
        }
    }

    /// Short stable identifier for machine-readable reporting.
    pub fn code(&self) -> &'static str {
        use XcrError::*;
        match self {
            InvalidGrid(_) => "invalid_grid",
            InvalidCurve(_) => "invalid_curve",
            OutOfDomain { .. } => "out_of_domain",
            NonFinite { .. } => "non_finite",
            InvalidQuadrature(_) => "invalid_quadrature",
            DegenerateWindow { .. } => "degenerate_window",
            ZeroArea { .. } => "zero_area",
            InvalidWindow { .. } => "invalid_window",
            InvalidSample(_) => "invalid_sample",
            ShiftOutOfRange { .. } => "shift_out_of_range",
            RangeDegenerate { .. } => "range_degenerate",
            NoMinimum => "no_minimum",
            GridMismatch => "grid_mismatch",
            InsufficientData(_) => "insufficient_data",
            InvalidArgument(_) => "invalid_argument",
            Parse { .. } => "parse",
            SampleGridMismatch { .. } => "grid_mismatch",
            EmptyInput => "empty_input",
            Io(_) => "io",
            Csv(_) => "csv",
            Json(_) => "json",
        }
    }
}

pub type Result<T, E = XcrError> = std::result::Result<T, E>;
