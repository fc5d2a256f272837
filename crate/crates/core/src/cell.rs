//! Cell-level operations: READ, SET programming, SET current, Monte Carlo.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::device::{MemristorState, VariationSample};
use crate::error::{DpeError, Result};
use crate::params::CellParams;
use crate::solver::{self, CellKind, SetOutcome};

/// Which currents are charged to the cell when computing power.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Accounting {
    /// Every supply-drawn current (`I_in + I2` for 3T1R).
    #[default]
    Full,
    /// Output stage only (`I2` for 3T1R); identical to `Full` for 1T1R.
    FinalStage,
}

impl fmt::Display for Accounting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Accounting::Full => "full",
            Accounting::FinalStage => "final-stage",
        })
    }
}

impl FromStr for Accounting {
    type Err = DpeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Accounting::Full),
            "final-stage" => Ok(Accounting::FinalStage),
            other => Err(DpeError::InvalidInput(format!(
                "unknown accounting mode '{other}' (expected full or final-stage)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CellInstance {
    pub kind: CellKind,
    pub params: Arc<CellParams>,
    /// Programmed resistance (ohm).
    pub resistance: f64,
}

impl CellInstance {
    pub fn new(kind: CellKind, params: Arc<CellParams>, resistance: f64) -> Result<Self> {
        let m = &params.memristor;
        if !(m.r_on..=m.r_off).contains(&resistance) {
            return Err(DpeError::InvalidInput(format!(
                "resistance {resistance} ohm outside [{}, {}]",
                m.r_on, m.r_off
            )));
        }
        Ok(Self {
            kind,
            params,
            resistance,
        })
    }

    /// Freshly reset cell at `r_off`.
    pub fn reset(kind: CellKind, params: Arc<CellParams>) -> Self {
        let resistance = params.memristor.r_off;
        Self {
            kind,
            params,
            resistance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadResult {
    /// Current delivered to the column (A).
    pub i_out: f64,
    /// 3T1R first-stage current through MN1; zero for 1T1R (A).
    pub i_in: f64,
    /// Supply voltage charged for the READ (V).
    pub supply: f64,
    pub t_read: f64,
}

impl ReadResult {
    pub fn power(&self, acc: Accounting) -> f64 {
        match acc {
            Accounting::Full => self.supply * (self.i_in + self.i_out),
            Accounting::FinalStage => self.supply * self.i_out,
        }
    }

    pub fn energy(&self, acc: Accounting) -> f64 {
        self.power(acc) * self.t_read
    }
}

/// Read at an explicit resistance with explicit device realizations.
pub fn read_at(
    params: &CellParams,
    kind: CellKind,
    resistance: f64,
    vars: &VariationSample,
) -> Result<ReadResult> {
    let top = params.read_topology(kind);
    let sol = solver::solve_dc(&top, resistance, vars)?;
    Ok(match kind {
        CellKind::OneT1R => ReadResult {
            i_out: sol.currents.mn1,
            i_in: 0.0,
            supply: top.rails.v_in,
            t_read: params.read.t_read,
        },
        CellKind::ThreeT1R => ReadResult {
            i_out: sol.currents.mn2,
            i_in: sol.currents.mn1,
            supply: top.rails.vdd,
            t_read: params.read.t_read,
        },
    })
}

pub fn read_current(cell: &CellInstance, vars: &VariationSample) -> Result<ReadResult> {
    read_at(&cell.params, cell.kind, cell.resistance, vars)
}

/// Applies one SET pulse of `drive` volts on `V_in` to the cell.
pub fn program(
    cell: &CellInstance,
    drive: f64,
    pulse_width: f64,
    vars: &VariationSample,
) -> Result<CellInstance> {
    if !(0.0..=1.3).contains(&drive) {
        return Err(DpeError::InvalidInput(format!(
            "drive {drive} V outside [0, 1.3] V"
        )));
    }
    if pulse_width <= 0.0 {
        return Ok(cell.clone());
    }
    let p = &cell.params;
    let m0 = p.memristor.state_for_resistance(cell.resistance);
    let out = solver::transient_set(
        &p.set_topology(cell.kind),
        drive,
        pulse_width,
        m0,
        &p.memristor,
        vars,
        solver::DEFAULT_DT,
    )?;
    Ok(CellInstance {
        resistance: out.resistance,
        ..cell.clone()
    })
}

/// DC programming from the reset state (a long pulse).
pub fn dc_program(
    params: &CellParams,
    kind: CellKind,
    drive: f64,
    vars: &VariationSample,
) -> Result<SetOutcome> {
    solver::dc_set(&params.set_topology(kind), drive, &params.memristor, vars)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SetCurrent {
    /// Largest memristor-branch current during the SET pulse (A).
    pub current: f64,
    /// Supply power at the end of the pulse (W).
    pub power: f64,
    /// Resistance reached (ohm).
    pub resistance: f64,
}

/// Drive window for the SET-current characterization (V).
pub const SET_SWEEP_RANGE: (f64, f64) = (0.8, 1.2);

/// Peak memristor-branch current of a SET pulse from `set.r_initial`.
pub fn set_current(params: &CellParams, kind: CellKind, drive: f64) -> Result<SetCurrent> {
    let (lo, hi) = SET_SWEEP_RANGE;
    // Slack so that grid points such as 0.8 + 8 * 0.05 are accepted.
    if !(lo - 1e-9..=hi + 1e-9).contains(&drive) {
        return Err(DpeError::InvalidInput(format!(
            "SET drive {drive} V outside [{lo}, {hi}] V"
        )));
    }
    let m0: MemristorState = params.memristor.state_for_resistance(params.set.r_initial);
    let out = solver::transient_set(
        &params.set_topology(kind),
        drive,
        params.set.pulse_width,
        m0,
        &params.memristor,
        &params.nominal(kind),
        solver::DEFAULT_DT,
    )?;
    let current = out.peak_current;
    let supplied = match kind {
        CellKind::OneT1R => current,
        CellKind::ThreeT1R => out.solution.currents.mn1 + out.solution.currents.mn2,
    };
    Ok(SetCurrent {
        current,
        power: params.set_supply(kind, drive) * supplied,
        resistance: out.resistance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McStats {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    /// `(lower edge, upper edge, count)` per bin.
    pub histogram: Vec<(f64, f64, usize)>,
}

impl McStats {
    pub fn from_samples(xs: &[f64], bins: usize) -> Result<Self> {
        if xs.is_empty() {
            return Err(DpeError::InvalidInput("no samples".into()));
        }
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let std = if n > 1 && max > min {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let bins = bins.max(1);
        let width = (max - min) / bins as f64;
        let mut counts = vec![0usize; bins];
        for &x in xs {
            let k = if width > 0.0 {
                (((x - min) / width) as usize).min(bins - 1)
            } else {
                0
            };
            counts[k] += 1;
        }
        let histogram = counts
            .into_iter()
            .enumerate()
            .map(|(k, c)| (min + k as f64 * width, min + (k + 1) as f64 * width, c))
            .collect();
        Ok(Self {
            n,
            mean,
            std,
            min,
            max,
            histogram,
        })
    }
}

pub const MC_BINS: usize = 30;

/// Column current of `n` independently varied cells at a fixed resistance.
pub fn monte_carlo_samples(
    params: &CellParams,
    kind: CellKind,
    r: f64,
    n: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(DpeError::InvalidInput("Monte Carlo needs n >= 1".into()));
    }
    (0..n as u64)
        .into_par_iter()
        .map(|i| read_at(params, kind, r, &params.sample(kind, seed, i)).map(|x| x.i_out))
        .collect()
}

pub fn monte_carlo_read(
    params: &CellParams,
    kind: CellKind,
    r: f64,
    n: usize,
    seed: u64,
) -> Result<McStats> {
    McStats::from_samples(&monte_carlo_samples(params, kind, r, n, seed)?, MC_BINS)
}
