//! Crossbar dot-product engine: programming, column summation, ADC and
//! READ energy.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cell::{self, Accounting, ReadResult};
use crate::device::sample_rng;
use crate::error::{DpeError, Result};
use crate::params::CellParams;
use crate::solver::CellKind;

/// Programmable resistance window (ohm).
pub const R_MIN: f64 = 5e3;
pub const R_MAX: f64 = 20e3;
pub const LUT_POINTS: usize = 64;
/// Default ADC step (A).
pub const ADC_RESOLUTION: f64 = 50e-9;

/// Drive search range for programming (V).
const DRIVE_MAX: f64 = 1.3;
/// Relative resistance tolerance of the drive inversion.
const INVERSION_RTOL: f64 = 1e-3;
/// Keeps tie-break draws on a different key than the variation draws.
const TIE_SALT: u64 = 0x9e37_79b9_7f4a_7c15;
/// Absorbs binary representation error at exact level boundaries.
const LEVEL_SLACK: f64 = 1e-9;

/// READ current vs resistance, tabulated on a grid uniform in conductance
/// over the programmable window and interpolated linearly.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadLut {
    pub kind: CellKind,
    g: Vec<f64>,
    i_out: Vec<f64>,
    i_in: Vec<f64>,
    supply: f64,
    t_read: f64,
}

impl ReadLut {
    pub fn build(params: &CellParams, kind: CellKind) -> Result<Self> {
        let (g_lo, g_hi) = (1.0 / R_MAX, 1.0 / R_MIN);
        let g: Vec<f64> = (0..LUT_POINTS)
            .map(|k| g_lo + (g_hi - g_lo) * k as f64 / (LUT_POINTS - 1) as f64)
            .collect();
        let nominal = params.nominal(kind);
        let reads = g
            .iter()
            .map(|gk| cell::read_at(params, kind, 1.0 / gk, &nominal))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            kind,
            i_out: reads.iter().map(|r| r.i_out).collect(),
            i_in: reads.iter().map(|r| r.i_in).collect(),
            supply: reads[0].supply,
            t_read: reads[0].t_read,
            g,
        })
    }

    /// Interpolated READ result; clamps to the table ends outside the window.
    pub fn read(&self, resistance: f64) -> ReadResult {
        let gq = 1.0 / resistance;
        let n = self.g.len();
        let step = self.g[1] - self.g[0];
        let pos = ((gq - self.g[0]) / step).clamp(0.0, (n - 1) as f64);
        let k = (pos.floor() as usize).min(n - 2);
        let t = pos - k as f64;
        let lerp = |v: &[f64]| v[k] + t * (v[k + 1] - v[k]);
        ReadResult {
            i_out: lerp(&self.i_out),
            i_in: lerp(&self.i_in),
            supply: self.supply,
            t_read: self.t_read,
        }
    }

    /// Secant slope of the column current against conductance over the window (A/S).
    pub fn secant_slope(&self) -> f64 {
        let n = self.g.len();
        (self.i_out[n - 1] - self.i_out[0]) / (self.g[n - 1] - self.g[0])
    }
}

/// How per-cell READ currents are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurrentModel {
    /// Circuit solve through the lookup table (or direct, with variation).
    #[default]
    Circuit,
    /// `I = G * V_read`, no first stage.
    IdealLinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdcMode {
    #[default]
    Floor,
    Round,
}

impl FromStr for AdcMode {
    type Err = DpeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "floor" => Ok(AdcMode::Floor),
            "round" => Ok(AdcMode::Round),
            other => Err(DpeError::InvalidInput(format!("unknown ADC mode '{other}'"))),
        }
    }
}

impl fmt::Display for AdcMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AdcMode::Floor => "floor",
            AdcMode::Round => "round",
        })
    }
}

/// Current-resolution ADC. A resolution of zero is a perfect converter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Adc {
    pub resolution: f64,
    pub mode: AdcMode,
}

impl Default for Adc {
    fn default() -> Self {
        Self {
            resolution: ADC_RESOLUTION,
            mode: AdcMode::Floor,
        }
    }
}

impl Adc {
    pub fn perfect() -> Self {
        Self {
            resolution: 0.0,
            mode: AdcMode::Floor,
        }
    }

    /// Integer level of a current; `None` for a perfect converter.
    pub fn level(&self, current: f64) -> Option<i64> {
        if self.resolution <= 0.0 {
            return None;
        }
        let x = current / self.resolution;
        Some(match self.mode {
            // Readings within LEVEL_SLACK of a boundary count as reaching it,
            // so decimal currents such as 2.90 uA land on level 58.
            AdcMode::Floor => (x + LEVEL_SLACK).floor(),
            AdcMode::Round => x.round(),
        } as i64)
    }

    /// Quantized current (level times resolution).
    pub fn quantize(&self, current: f64) -> f64 {
        match self.level(current) {
            Some(l) => l as f64 * self.resolution,
            None => current,
        }
    }
}

/// Crossbar-wide READ settings that are not per-cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayConfig {
    pub adc: Adc,
    pub accounting: Accounting,
    /// Charge the bias column currents to the inference energy.
    pub include_bias_energy: bool,
    pub current_model: CurrentModel,
}

impl Default for ArrayConfig {
    fn default() -> Self {
        Self {
            adc: Adc::default(),
            accounting: Accounting::Full,
            include_bias_energy: false,
            current_model: CurrentModel::Circuit,
        }
    }
}

/// A programmed rows x cols array with its per-cell READ results cached.
#[derive(Debug, Clone, PartialEq)]
pub struct Crossbar {
    pub kind: CellKind,
    pub rows: usize,
    pub cols: usize,
    /// Realized resistances, row-major (ohm).
    pub resistance: Vec<f64>,
    /// Fixed per-column bias current (A).
    pub bias: Vec<f64>,
    pub config: ArrayConfig,
    pub t_read: f64,
    /// Supply charged for bias-column energy (V).
    pub bias_supply: f64,
    cells: Vec<ReadResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceResult {
    /// Raw column currents (A).
    pub currents: Vec<f64>,
    /// ADC levels; empty for a perfect converter.
    pub levels: Vec<i64>,
    /// Columns sharing the maximum reading.
    pub tied: Vec<usize>,
    pub winner: usize,
    pub tie: bool,
    pub energy: f64,
}

fn check_window(target: f64) -> Result<()> {
    if !(R_MIN..=R_MAX).contains(&target) || !target.is_finite() {
        return Err(DpeError::TargetUnreachable {
            target,
            lo: R_MIN,
            hi: R_MAX,
        });
    }
    Ok(())
}

/// Tabulated nominal drive-to-resistance map for DC programming from the
/// reset state; resistance is nonincreasing in drive.
#[derive(Debug, Clone, PartialEq)]
pub struct ProgrammingMap {
    pub kind: CellKind,
    pub drives: Vec<f64>,
    pub resistances: Vec<f64>,
}

const MAP_POINTS: usize = 131;

impl ProgrammingMap {
    pub fn build(params: &CellParams, kind: CellKind) -> Result<Self> {
        let nominal = params.nominal(kind);
        let drives: Vec<f64> = (0..MAP_POINTS)
            .map(|k| DRIVE_MAX * k as f64 / (MAP_POINTS - 1) as f64)
            .collect();
        let resistances = drives
            .par_iter()
            .map(|&d| cell::dc_program(params, kind, d, &nominal).map(|o| o.resistance))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            kind,
            drives,
            resistances,
        })
    }

    /// Nominal drive that programs a reset cell to `target`: locate the
    /// bracketing table interval, then bisect on the real DC programming.
    pub fn invert(&self, params: &CellParams, target: f64) -> Result<f64> {
        check_window(target)?;
        let n = self.drives.len();
        let (r_first, r_last) = (self.resistances[0], self.resistances[n - 1]);
        if !(r_last <= target && target <= r_first) {
            return Err(DpeError::TargetUnreachable {
                target,
                lo: r_last,
                hi: r_first,
            });
        }
        let k = (0..n - 1)
            .find(|&k| self.resistances[k + 1] <= target)
            .expect("bracket exists");
        let (mut lo, mut hi) = (self.drives[k], self.drives[k + 1]);
        let nominal = params.nominal(self.kind);
        let mut best = (f64::INFINITY, hi);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            let r = cell::dc_program(params, self.kind, mid, &nominal)?.resistance;
            let err = ((r - target) / target).abs();
            if err < best.0 {
                best = (err, mid);
            }
            if err < INVERSION_RTOL {
                break;
            }
            if r > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(best.1)
    }
}

/// One-off inversion without a cached map.
pub fn invert_drive(params: &CellParams, kind: CellKind, target: f64) -> Result<f64> {
    check_window(target)?;
    ProgrammingMap::build(params, kind)?.invert(params, target)
}

/// Index of the variation stream used by cell `(i, j)`.
fn cell_index(i: usize, j: usize, cols: usize) -> u64 {
    (i * cols + j) as u64
}

impl Crossbar {
    /// Programs every cell to its target by DC programming at the nominally
    /// inverted drive. With `noise` on, each cell gets its own device
    /// realization and LRS draw from `seed`, used for both the SET and the
    /// READ; otherwise every cell is nominal.
    pub fn program(
        params: &CellParams,
        kind: CellKind,
        targets: &[Vec<f64>],
        bias: Vec<f64>,
        config: ArrayConfig,
        noise: bool,
        seed: u64,
    ) -> Result<Self> {
        let rows = targets.len();
        let cols = targets.first().map_or(0, Vec::len);
        if rows == 0 || cols == 0 || targets.iter().any(|r| r.len() != cols) {
            return Err(DpeError::InvalidInput("target matrix must be non-empty and rectangular".into()));
        }
        if bias.len() != cols || bias.iter().any(|b| !(*b >= 0.0)) {
            return Err(DpeError::InvalidInput("need one non-negative bias current per column".into()));
        }
        let flat: Vec<f64> = targets.iter().flatten().copied().collect();
        for &t in &flat {
            check_window(t)?;
        }
        let map = ProgrammingMap::build(params, kind)?;
        let resistance = flat
            .par_iter()
            .enumerate()
            .map(|(k, &t)| {
                let drive = map.invert(params, t)?;
                let vars = if noise {
                    params.sample(kind, seed, cell_index(k / cols, k % cols, cols))
                } else {
                    params.nominal(kind)
                };
                Ok(cell::dc_program(params, kind, drive, &vars)?.resistance)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_resistances(params, kind, rows, cols, resistance, bias, config, noise.then_some(seed))
    }

    /// Builds a crossbar from already-realized resistances. `variation_seed`
    /// selects per-cell device realizations for the READ; `None` reads
    /// every cell with nominal devices through the lookup table.
    #[allow(clippy::too_many_arguments)]
    pub fn from_resistances(
        params: &CellParams,
        kind: CellKind,
        rows: usize,
        cols: usize,
        resistance: Vec<f64>,
        bias: Vec<f64>,
        config: ArrayConfig,
        variation_seed: Option<u64>,
    ) -> Result<Self> {
        if resistance.len() != rows * cols || bias.len() != cols {
            return Err(DpeError::InvalidInput("crossbar dimensions do not match".into()));
        }
        let cells = match (config.current_model, variation_seed) {
            (CurrentModel::IdealLinear, _) => resistance
                .iter()
                .map(|&r| ReadResult {
                    i_out: params.read.v_in / r,
                    i_in: 0.0,
                    supply: params.read.v_in,
                    t_read: params.read.t_read,
                })
                .collect(),
            (CurrentModel::Circuit, None) => {
                let lut = ReadLut::build(params, kind)?;
                resistance.iter().map(|&r| lut.read(r)).collect()
            }
            (CurrentModel::Circuit, Some(seed)) => resistance
                .par_iter()
                .enumerate()
                .map(|(k, &r)| {
                    let vars = params.sample(kind, seed, cell_index(k / cols, k % cols, cols));
                    cell::read_at(params, kind, r, &vars)
                })
                .collect::<Result<Vec<_>>>()?,
        };
        let bias_supply = match kind {
            CellKind::OneT1R => params.read.v_in,
            CellKind::ThreeT1R => params.read.vdd,
        };
        Ok(Self {
            kind,
            rows,
            cols,
            resistance,
            bias,
            config,
            t_read: params.read.t_read,
            bias_supply,
            cells,
        })
    }

    pub fn cell_read(&self, i: usize, j: usize) -> &ReadResult {
        &self.cells[i * self.cols + j]
    }

    fn check_spikes(&self, spikes: &[bool]) -> Result<()> {
        if spikes.len() != self.rows {
            return Err(DpeError::InvalidInput(format!(
                "spike vector has length {}, crossbar has {} rows",
                spikes.len(),
                self.rows
            )));
        }
        Ok(())
    }

    /// Bias plus the sum of active cells' column currents.
    pub fn column_currents(&self, spikes: &[bool]) -> Result<Vec<f64>> {
        self.check_spikes(spikes)?;
        let mut out = self.bias.clone();
        for (i, _) in spikes.iter().enumerate().filter(|(_, &s)| s) {
            for (j, o) in out.iter_mut().enumerate() {
                *o += self.cell_read(i, j).i_out;
            }
        }
        Ok(out)
    }

    /// READ energy of one inference (J).
    pub fn energy(&self, spikes: &[bool]) -> Result<f64> {
        self.check_spikes(spikes)?;
        let acc = self.config.accounting;
        let mut e = 0.0;
        for (i, _) in spikes.iter().enumerate().filter(|(_, &s)| s) {
            for j in 0..self.cols {
                e += self.cell_read(i, j).energy(acc);
            }
        }
        if self.config.include_bias_energy {
            e += self.bias.iter().sum::<f64>() * self.bias_supply * self.t_read;
        }
        Ok(e)
    }

    /// Classifies one spike vector. Ties on the quantized reading are broken
    /// uniformly with a generator keyed on `(seed, sample)`.
    pub fn infer(&self, spikes: &[bool], seed: u64, sample: u64) -> Result<InferenceResult> {
        let currents = self.column_currents(spikes)?;
        let adc = self.config.adc;
        let (levels, tied) = if adc.resolution > 0.0 {
            let levels: Vec<i64> = currents.iter().map(|&c| adc.level(c).unwrap_or(0)).collect();
            let max = *levels.iter().max().expect("at least one column");
            let tied = (0..levels.len()).filter(|&j| levels[j] == max).collect();
            (levels, tied)
        } else {
            let max = currents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let tied = (0..currents.len()).filter(|&j| currents[j] == max).collect();
            (Vec::new(), tied)
        };
        let tied: Vec<usize> = tied;
        let winner = if tied.len() > 1 {
            let mut rng = sample_rng(seed ^ TIE_SALT, sample);
            tied[rng.gen_range(0..tied.len())]
        } else {
            tied[0]
        };
        Ok(InferenceResult {
            energy: self.energy(spikes)?,
            tie: tied.len() > 1,
            currents,
            levels,
            tied,
            winner,
        })
    }

    /// Writes the resistance matrix as CSV and the remaining state as a
    /// JSON sidecar next to it (`<path>.json`).
    pub fn export(&self, csv_path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(csv_path).map_err(csv_io)?;
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols)
                .map(|j| format!("{:?}", self.resistance[i * self.cols + j]))
                .collect();
            w.write_record(&row).map_err(csv_io)?;
        }
        w.flush()?;
        let side = Sidecar {
            kind: self.kind,
            rows: self.rows,
            cols: self.cols,
            bias: self.bias.clone(),
            config: self.config,
            t_read: self.t_read,
        };
        let json = serde_json::to_string_pretty(&side)
            .map_err(|e| DpeError::Schema(e.to_string()))?;
        std::fs::write(sidecar_path(csv_path), json)?;
        Ok(())
    }

    /// Re-reads an exported crossbar; cells are read with nominal devices.
    pub fn import(params: &CellParams, csv_path: &Path) -> Result<Self> {
        let side: Sidecar = serde_json::from_str(&std::fs::read_to_string(sidecar_path(csv_path))?)
            .map_err(|e| DpeError::Schema(e.to_string()))?;
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_path(csv_path)
            .map_err(csv_io)?;
        let name = csv_path.display().to_string();
        let mut resistance = Vec::with_capacity(side.rows * side.cols);
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| DpeError::Parse {
                source_name: name.clone(),
                line: line + 1,
                message: e.to_string(),
            })?;
            if rec.len() != side.cols {
                return Err(DpeError::Schema(format!(
                    "{name}: row {} has {} columns, expected {}",
                    line + 1,
                    rec.len(),
                    side.cols
                )));
            }
            for field in rec.iter() {
                resistance.push(field.trim().parse::<f64>().map_err(|e| DpeError::Parse {
                    source_name: name.clone(),
                    line: line + 1,
                    message: e.to_string(),
                })?);
            }
        }
        if resistance.len() != side.rows * side.cols {
            return Err(DpeError::Schema(format!(
                "{name}: expected {} rows, found {}",
                side.rows,
                resistance.len() / side.cols.max(1)
            )));
        }
        let mut xb = Self::from_resistances(
            params, side.kind, side.rows, side.cols, resistance, side.bias, side.config, None,
        )?;
        xb.t_read = side.t_read;
        Ok(xb)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    kind: CellKind,
    rows: usize,
    cols: usize,
    bias: Vec<f64>,
    config: ArrayConfig,
    t_read: f64,
}

fn sidecar_path(csv_path: &Path) -> std::path::PathBuf {
    let mut p = csv_path.as_os_str().to_owned();
    p.push(".json");
    p.into()
}

fn csv_io(e: csv::Error) -> DpeError {
    DpeError::Io(std::io::Error::other(e.to_string()))
}
