//! Behavioral simulator for memristive dot-product-engine cells (1T1R and
//! 3T1R), their crossbars, and an end-to-end classification harness.
// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibrate;
pub mod cell;
pub mod device;
pub mod dpe;
pub mod error;
pub mod ml;
pub mod params;
pub mod solver;

pub use cell::{Accounting, CellInstance, McStats, ReadResult};
pub use device::{MemristorParams, MemristorState, MosfetParams, Polarity, VariationSample};
pub use error::{DpeError, Result};
pub use params::CellParams;
pub use solver::{CellKind, CellTopology, DcSolution};
