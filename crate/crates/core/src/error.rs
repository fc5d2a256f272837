use thiserror::Error;

use crate::solver::CellKind;

pub type Result<T> = std::result::Result<T, DpeError>;

#[derive(Debug, Error)]
pub enum DpeError {
    #[error("no DC operating point for {kind} cell at R = {resistance} ohm: {detail}")]
    NoOperatingPoint {
        kind: CellKind,
        resistance: f64,
        detail: String,
    },

    #[error("calibration diverged: weighted error {error:.4} exceeds bound {bound:.4}")]
    CalibrationDiverged { error: f64, bound: f64 },

    #[error("target resistance {target:.1} ohm is outside the programmable window [{lo:.1}, {hi:.1}] ohm")]
    TargetUnreachable { target: f64, lo: f64, hi: f64 },

    #[error("parse error in {source_name} at line {line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("training diverged: non-finite loss at epoch {epoch}")]
    NonFinite { epoch: usize },

    #[error("degenerate weights: {0}")]
    DegenerateWeights(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
