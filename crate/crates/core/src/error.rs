use alloc::string::String;
use alloc::vec::Vec;
use chrono::{NaiveDate, NaiveDateTime};

/// Coarse classification used by front-ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad arguments or an inconsistent request.
    Usage,
    /// Input data violates a contract (parse failures, gaps, short history).
    Data,
    /// The optimizer or a training run failed.
    Solver,
}

/// Constraint families of the daily dispatch problem, reported on infeasibility.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintClass {
    BatteryBounds,
    PowerLimits,
    GridFloor,
    EnergyLimits,
    TerminalEnergy,
}

impl core::fmt::Display for ConstraintClass {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let s = match self {
            ConstraintClass::BatteryBounds => "battery parameter bounds",
            ConstraintClass::PowerLimits => "charge/discharge power limits",
            ConstraintClass::GridFloor => "grid power floor",
            ConstraintClass::EnergyLimits => "state-of-charge limits",
            ConstraintClass::TerminalEnergy => "initial/terminal energy condition",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{op}: shape mismatch between {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("household {household}: duplicate timestamp {timestamp} (line {line})")]
    DuplicateTimestamp {
        household: String,
        timestamp: NaiveDateTime,
        line: usize,
    },
    #[error("pool holds {available} households but {required} are required")]
    PoolTooSmall { required: usize, available: usize },
    #[error("insufficient history: {missing_months} month(s) missing before {needed_from}")]
    InsufficientHistory {
        missing_months: u32,
        needed_from: NaiveDate,
    },
    #[error("missing history for {day}; earliest buildable day is {earliest:?}")]
    MissingHistory {
        day: NaiveDate,
        earliest: Option<NaiveDate>,
    },
    #[error("series contract violated: {0}")]
    Contract(String),
    #[error("empty dataset: {0}")]
    EmptyDataset(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("normalization undefined: mean of actual values is {0}")]
    UndefinedNormalization(f64),
    #[error("parameters do not match preset: {0}")]
    PresetMismatch(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("loss became non-finite at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("dispatch problem infeasible: {0}")]
    Infeasible(ConstraintClass),
    #[error("linear program unbounded")]
    Unbounded,
    #[error("node limit {limit} reached; incumbent {incumbent:?}, gap {gap}")]
    NodeLimit {
        limit: usize,
        incumbent: Option<f64>,
        gap: f64,
    },
    #[error("dispatch failed on {date}: {source}")]
    DayFailed {
        date: NaiveDate,
        source: alloc::boxed::Box<Error>,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidArgument(_) | Error::PresetMismatch(_) => ErrorKind::Usage,
            Error::NonFiniteLoss { .. }
            | Error::Infeasible(_)
            | Error::Unbounded
            | Error::NodeLimit { .. }
            | Error::DayFailed { .. } => ErrorKind::Solver,
            _ => ErrorKind::Data,
        }
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
