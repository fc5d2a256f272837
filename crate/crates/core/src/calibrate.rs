//! Parameter calibration: experiment descriptors, the target list, and a
//! Nelder–Mead search over transformed free parameters.

use std::fmt;

use serde::Serialize;

use crate::cell::{self, Accounting};
use crate::error::{DpeError, Result};
use crate::params::CellParams;
use crate::solver::{self, CellKind};

/// Seed used for the Monte Carlo statistics inside the objective.
pub const CALIBRATION_MC_SEED: u64 = 0x5eed;
pub const CALIBRATION_MC_N: usize = 1000;

/// A scalar observable of the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Experiment {
    /// Column current at READ bias (A).
    ReadOut { kind: CellKind, r: f64 },
    /// 3T1R first-stage current at READ bias (A).
    ReadIn { r: f64 },
    /// 3T1R `I_in + I2` at READ bias (A).
    ReadTotal { r: f64 },
    /// Full-accounting READ power ratio 1T1R / 3T1R at equal resistance.
    ReadPowerRatio { r: f64 },
    /// Settled SET current from the configured initial state (A).
    SetCurrent { kind: CellKind, drive: f64 },
    /// Supply power at the end of that SET pulse (W).
    SetPower { kind: CellKind, drive: f64 },
    /// Mean column current over the calibration Monte Carlo set (A).
    McMean { kind: CellKind, r: f64 },
    /// Std of the column current over the calibration Monte Carlo set (A).
    McStd { kind: CellKind, r: f64 },
    /// Resistance after one pulse from the configured initial state (ohm).
    PulseWidth { kind: CellKind, drive: f64, width: f64 },
    /// Resistance after DC programming from the reset state (ohm).
    DcProgram { kind: CellKind, drive: f64 },
    /// Resistance after a `short` pulse over that after a `long` one, both
    /// from the configured initial state.
    PulseRatio { kind: CellKind, drive: f64, short: f64, long: f64 },
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Experiment::*;
        match *self {
            ReadOut { kind, r } => write!(f, "read_out[{kind}, {:.0}k]", r / 1e3),
            ReadIn { r } => write!(f, "read_in[3T1R, {:.0}k]", r / 1e3),
            ReadTotal { r } => write!(f, "read_total[3T1R, {:.0}k]", r / 1e3),
            ReadPowerRatio { r } => write!(f, "read_power_ratio[{:.0}k]", r / 1e3),
            SetCurrent { kind, drive } => write!(f, "set_current[{kind}, {drive:.2}V]"),
            SetPower { kind, drive } => write!(f, "set_power[{kind}, {drive:.2}V]"),
            McMean { kind, r } => write!(f, "mc_mean[{kind}, {:.0}k]", r / 1e3),
            McStd { kind, r } => write!(f, "mc_std[{kind}, {:.0}k]", r / 1e3),
            PulseWidth { kind, drive, width } => {
                write!(f, "pulse_r[{kind}, {drive:.2}V, {width:.0e}s]")
            }
            DcProgram { kind, drive } => write!(f, "dc_r[{kind}, {drive:.2}V]"),
            PulseRatio { kind, drive, short, long } => {
                write!(f, "pulse_ratio[{kind}, {drive:.2}V, {short:.0e}s/{long:.0e}s]")
            }
        }
    }
}

fn pulse_resistance(p: &CellParams, kind: CellKind, drive: f64, width: f64) -> Result<f64> {
    Ok(solver::transient_set(
        &p.set_topology(kind),
        drive,
        width,
        p.memristor.state_for_resistance(p.set.r_initial),
        &p.memristor,
        &p.nominal(kind),
        solver::DEFAULT_DT,
    )?
    .resistance)
}

impl Experiment {
    pub fn evaluate(&self, p: &CellParams) -> Result<f64> {
        use Experiment::*;
        Ok(match *self {
            ReadOut { kind, r } => cell::read_at(p, kind, r, &p.nominal(kind))?.i_out,
            ReadIn { r } => {
                cell::read_at(p, CellKind::ThreeT1R, r, &p.nominal(CellKind::ThreeT1R))?.i_in
            }
            ReadTotal { r } => {
                let x = cell::read_at(p, CellKind::ThreeT1R, r, &p.nominal(CellKind::ThreeT1R))?;
                x.i_in + x.i_out
            }
            ReadPowerRatio { r } => {
                let one = cell::read_at(p, CellKind::OneT1R, r, &p.nominal(CellKind::OneT1R))?;
                let three =
                    cell::read_at(p, CellKind::ThreeT1R, r, &p.nominal(CellKind::ThreeT1R))?;
                one.power(Accounting::Full) / three.power(Accounting::Full)
            }
            SetCurrent { kind, drive } => cell::set_current(p, kind, drive)?.current,
            SetPower { kind, drive } => cell::set_current(p, kind, drive)?.power,
            McMean { kind, r } => {
                cell::monte_carlo_read(p, kind, r, CALIBRATION_MC_N, CALIBRATION_MC_SEED)?.mean
            }
            McStd { kind, r } => {
                cell::monte_carlo_read(p, kind, r, CALIBRATION_MC_N, CALIBRATION_MC_SEED)?.std
            }
            PulseWidth { kind, drive, width } => pulse_resistance(p, kind, drive, width)?,
            PulseRatio { kind, drive, short, long } => {
                pulse_resistance(p, kind, drive, short)? / pulse_resistance(p, kind, drive, long)?
            }
            DcProgram { kind, drive } => cell::dc_program(p, kind, drive, &p.nominal(kind))?.resistance,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Target {
    pub experiment: Experiment,
    pub value: f64,
    /// Relative tolerance the target is judged against.
    pub tol: f64,
    pub weight: f64,
    /// Where the number comes from.
    pub source: &'static str,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct CalibrationTargets {
    pub targets: Vec<Target>,
}

impl CalibrationTargets {
    /// Every reported endpoint the simulator is expected to reproduce.
    ///
    /// Targets that no member of the model family can meet together with
    /// the rest (the 1T1R READ endpoints, and the 1T1R low-drive SET point,
    /// which fixes the same transistor curve as the 9 kOhm READ mean) carry
    /// reduced weight so they do not drag the attainable ones off target.
    /// The 3T1R high-drive DC point is down-weighted too: only the span of
    /// the programming window matters downstream.
    pub fn reference() -> Self {
        use CellKind::*;
        use Experiment::*;
        let t = |experiment, value, tol, weight, source| Target {
            experiment,
            value,
            tol,
            weight,
            source,
        };
        Self {
            targets: vec![
                t(ReadOut { kind: OneT1R, r: 5e3 }, 110e-6, 0.05, 0.05, "READ sweep endpoint"),
                t(ReadOut { kind: OneT1R, r: 20e3 }, 35e-6, 0.05, 0.05, "READ sweep endpoint"),
                t(ReadOut { kind: ThreeT1R, r: 5e3 }, 3.005e-6, 0.05, 1.0, "READ sweep endpoint"),
                t(ReadOut { kind: ThreeT1R, r: 20e3 }, 2.833e-6, 0.05, 1.0, "READ sweep endpoint"),
                t(SetCurrent { kind: OneT1R, drive: 0.8 }, 7e-6, 0.10, 0.05, "SET sweep endpoint"),
                t(SetCurrent { kind: OneT1R, drive: 1.2 }, 132e-6, 0.10, 1.0, "SET sweep endpoint"),
                t(SetCurrent { kind: ThreeT1R, drive: 0.8 }, 35e-6, 0.10, 4.0, "SET sweep endpoint"),
                t(SetCurrent { kind: ThreeT1R, drive: 1.2 }, 292e-6, 0.10, 4.0, "SET sweep endpoint"),
                t(SetPower { kind: OneT1R, drive: 0.8 }, 5e-6, 0.10, 0.02, "SET power endpoint"),
                t(SetPower { kind: OneT1R, drive: 1.2 }, 160e-6, 0.10, 0.3, "SET power endpoint"),
                t(SetPower { kind: ThreeT1R, drive: 0.8 }, 115e-6, 0.10, 0.3, "SET power endpoint"),
                t(SetPower { kind: ThreeT1R, drive: 1.2 }, 964e-6, 0.10, 0.3, "SET power endpoint"),
                t(McMean { kind: OneT1R, r: 9e3 }, 54.5e-6, 0.10, 1.0, "Monte Carlo READ"),
                t(McStd { kind: OneT1R, r: 9e3 }, 0.452e-6, 0.25, 1.0, "Monte Carlo READ"),
                t(McMean { kind: ThreeT1R, r: 9e3 }, 2.85e-6, 0.10, 1.0, "Monte Carlo READ"),
                t(McStd { kind: ThreeT1R, r: 9e3 }, 0.181e-6, 0.25, 1.0, "Monte Carlo READ"),
                t(
                    PulseWidth { kind: OneT1R, drive: 0.8, width: 100e-9 },
                    100e3,
                    0.20,
                    1.0,
                    "pulse-width endpoint",
                ),
                t(
                    PulseWidth { kind: OneT1R, drive: 0.8, width: 1e-3 },
                    30e3,
                    0.20,
                    1.0,
                    "pulse-width endpoint",
                ),
                t(
                    PulseRatio { kind: ThreeT1R, drive: 1.0, short: 100e-9, long: 1e-3 },
                    1.0,
                    0.08,
                    2.0,
                    "3T1R pulse-width insensitivity",
                ),
                t(ReadTotal { r: 5e3 }, 4.459e-6, 0.10, 1.0, "READ comparison table"),
                t(ReadPowerRatio { r: 5e3 }, 9.37, 0.15, 2.0, "READ comparison table"),
                t(DcProgram { kind: ThreeT1R, drive: 0.8 }, 20e3, 0.15, 0.5, "3T1R programming window"),
                t(DcProgram { kind: ThreeT1R, drive: 1.1 }, 5e3, 0.15, 0.15, "3T1R programming window"),
                t(DcProgram { kind: OneT1R, drive: 1.2 }, 4.2e3, 0.25, 0.3, "1T1R DC floor"),
            ],
        }
    }
}

/// Calibratable scalars.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Param {
    OneMn1Vth,
    OneMn1Kp,
    OneMn1Lambda,
    ThreeMn1Vth,
    ThreeMn1Kp,
    ThreeMn1Lambda,
    ThreeMn2Vth,
    ThreeMn2Kp,
    ThreeMn2Lambda,
    ThreeMp3Vth,
    ThreeMp3Kp,
    ThreeMp3Lambda,
    VSet,
    ARate,
    V0,
    SigmaVth,
    SigmaKpRel,
    VddSet,
}

impl Param {
    pub const ALL: [Param; 18] = [
        Param::OneMn1Vth,
        Param::OneMn1Kp,
        Param::OneMn1Lambda,
        Param::ThreeMn1Vth,
        Param::ThreeMn1Kp,
        Param::ThreeMn1Lambda,
        Param::ThreeMn2Vth,
        Param::ThreeMn2Kp,
        Param::ThreeMn2Lambda,
        Param::ThreeMp3Vth,
        Param::ThreeMp3Kp,
        Param::ThreeMp3Lambda,
        Param::VSet,
        Param::ARate,
        Param::V0,
        Param::SigmaVth,
        Param::SigmaKpRel,
        Param::VddSet,
    ];

    fn slot(self, p: &mut CellParams) -> &mut f64 {
        use Param::*;
        match self {
            OneMn1Vth => &mut p.one_t1r.mn1.vth,
            OneMn1Kp => &mut p.one_t1r.mn1.kp,
            OneMn1Lambda => &mut p.one_t1r.mn1.lambda,
            ThreeMn1Vth => &mut p.three_t1r.mn1.vth,
            ThreeMn1Kp => &mut p.three_t1r.mn1.kp,
            ThreeMn1Lambda => &mut p.three_t1r.mn1.lambda,
            ThreeMn2Vth => &mut p.three_t1r.mn2.vth,
            ThreeMn2Kp => &mut p.three_t1r.mn2.kp,
            ThreeMn2Lambda => &mut p.three_t1r.mn2.lambda,
            ThreeMp3Vth => &mut p.three_t1r.mp3.vth,
            ThreeMp3Kp => &mut p.three_t1r.mp3.kp,
            ThreeMp3Lambda => &mut p.three_t1r.mp3.lambda,
            VSet => &mut p.memristor.v_set,
            ARate => &mut p.memristor.a_rate,
            V0 => &mut p.memristor.v0,
            SigmaVth => &mut p.variation.sigma_vth,
            SigmaKpRel => &mut p.variation.sigma_kp_rel,
            VddSet => &mut p.set.vdd,
        }
    }

    pub fn get(self, p: &CellParams) -> f64 {
        let mut q = p.clone();
        *self.slot(&mut q)
    }

    pub fn set(self, p: &mut CellParams, v: f64) {
        *self.slot(p) = v;
    }

    /// Search box `(lo, hi, log-scaled)`. The boxes keep the square-law
    /// devices and the switching model inside physically plausible ranges.
    pub fn bounds(self) -> (f64, f64, bool) {
        use Param::*;
        match self {
            OneMn1Vth | ThreeMn1Vth | ThreeMn2Vth | ThreeMp3Vth => (0.2, 1.15, false),
            OneMn1Kp | ThreeMn1Kp | ThreeMn2Kp | ThreeMp3Kp => (1e-6, 1e-2, true),
            OneMn1Lambda | ThreeMn1Lambda | ThreeMn2Lambda | ThreeMp3Lambda => (1e-3, 5.0, true),
            VSet => (0.3, 1.0, false),
            ARate => (1e-6, 1e9, true),
            V0 => (1e-3, 0.2, true),
            SigmaVth => (1e-4, 0.1, true),
            SigmaKpRel => (1e-3, 0.2, true),
            VddSet => (1.2, 5.0, false),
        }
    }

    /// Maps a value into the unbounded search coordinate (logit of the
    /// position inside the box).
    fn to_search(self, v: f64) -> f64 {
        let (lo, hi, log) = self.bounds();
        let (v, lo, hi) = if log {
            (v.max(f64::MIN_POSITIVE).ln(), lo.ln(), hi.ln())
        } else {
            (v, lo, hi)
        };
        let u = ((v - lo) / (hi - lo)).clamp(1e-9, 1.0 - 1e-9);
        (u / (1.0 - u)).ln()
    }

    fn value_of(self, q: f64) -> f64 {
        let (lo, hi, log) = self.bounds();
        let u = 1.0 / (1.0 + (-q).exp());
        if log {
            (lo.ln() + u * (hi.ln() - lo.ln())).exp()
        } else {
            lo + u * (hi - lo)
        }
    }
}

const INITIAL_STEP: f64 = 0.3;

/// Penalized, tolerance-normalized error of one target.
pub fn target_cost(achieved: f64, t: &Target) -> f64 {
    let r = (achieved - t.value) / (t.value * t.tol);
    let over = (r.abs() - 0.9).max(0.0);
    t.weight * (r * r + 10.0 * over * over)
}

/// Cost if every target sat exactly on its tolerance edge.
pub fn declared_bound(targets: &CalibrationTargets) -> f64 {
    targets.targets.iter().map(|t| t.weight * 1.1).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualRow {
    pub target: String,
    pub source: String,
    pub value: f64,
    pub achieved: f64,
    pub rel_error: f64,
    pub tol: f64,
    pub within_tol: bool,
}

#[derive(Debug, Clone)]
pub struct CalibrationOutcome {
    pub params: CellParams,
    pub cost: f64,
    pub bound: f64,
    pub evaluations: usize,
    pub report: Vec<ResidualRow>,
}

impl CalibrationOutcome {
    /// Fails with `CalibrationDiverged` when the final cost exceeds the bound.
    pub fn check(&self) -> Result<()> {
        if self.cost > self.bound {
            Err(DpeError::CalibrationDiverged {
                error: self.cost,
                bound: self.bound,
            })
        } else {
            Ok(())
        }
    }

    pub fn report_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["target", "source", "value", "achieved", "rel_error", "tol", "within_tol"])
            .expect("in-memory write");
        for r in &self.report {
            w.write_record([
                r.target.clone(),
                r.source.clone(),
                format!("{:.6e}", r.value),
                format!("{:.6e}", r.achieved),
                format!("{:.5}", r.rel_error),
                format!("{}", r.tol),
                r.within_tol.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }
}

pub fn residual_report(p: &CellParams, targets: &CalibrationTargets) -> Result<Vec<ResidualRow>> {
    targets
        .targets
        .iter()
        .map(|t| {
            let achieved = t.experiment.evaluate(p)?;
            let rel_error = (achieved - t.value) / t.value;
            Ok(ResidualRow {
                target: t.experiment.to_string(),
                source: t.source.to_string(),
                value: t.value,
                achieved,
                rel_error,
                tol: t.tol,
                within_tol: rel_error.abs() <= t.tol,
            })
        })
        .collect()
}

/// Total cost of a parameter set; `None` if any experiment fails.
pub fn total_cost(p: &CellParams, targets: &CalibrationTargets) -> Option<f64> {
    if p.validate().is_err() {
        return None;
    }
    let mut c = 0.0;
    for t in &targets.targets {
        let a = t.experiment.evaluate(p).ok()?;
        if !a.is_finite() {
            return None;
        }
        c += target_cost(a, t);
    }
    Some(c)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    pub max_evals: usize,
    /// Simplex restarts around the best point after convergence.
    pub restarts: usize,
    pub ftol: f64,
    pub xtol: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            max_evals: 6000,
            restarts: 3,
            ftol: 1e-10,
            xtol: 1e-9,
        }
    }
}

const FAILED: f64 = 1e12;

/// Nelder–Mead over `free`, starting from `initial`.
pub fn calibrate(
    targets: &CalibrationTargets,
    initial: &CellParams,
    free: &[Param],
    opts: SearchOptions,
) -> Result<CalibrationOutcome> {
    if targets.targets.is_empty() {
        return Err(DpeError::InvalidInput("calibration needs at least one target".into()));
    }
    initial.validate()?;
    for &param in free {
        let (lo, hi, _) = param.bounds();
        let v = param.get(initial);
        if !(lo..=hi).contains(&v) {
            return Err(DpeError::Config(format!(
                "initial {param:?} = {v} outside search box [{lo}, {hi}]"
            )));
        }
    }
    let build = |q: &[f64]| {
        let mut p = initial.clone();
        for (k, &param) in free.iter().enumerate() {
            param.set(&mut p, param.value_of(q[k]));
        }
        p
    };
    let mut evaluations = 0usize;
    let mut f = |q: &[f64]| {
        evaluations += 1;
        total_cost(&build(q), targets).unwrap_or(FAILED)
    };
    let x0: Vec<f64> = free.iter().map(|p| p.to_search(p.get(initial))).collect();
    let steps = vec![INITIAL_STEP; free.len()];
    let (mut best_x, mut best_f) = (x0.clone(), f(&x0));
    if best_f > 0.0 && !free.is_empty() {
        let per_run = opts.max_evals / (opts.restarts + 1).max(1);
        for _ in 0..=opts.restarts {
            let (x, fx) = nelder_mead(&mut f, &best_x, best_f, &steps, per_run, opts.ftol, opts.xtol);
            let improved = fx < best_f;
            if improved {
                best_x = x;
                best_f = fx;
            }
            if !improved || best_f == 0.0 {
                break;
            }
        }
    }
    let params = build(&best_x);
    let report = residual_report(&params, targets)?;
    Ok(CalibrationOutcome {
        cost: best_f,
        bound: declared_bound(targets),
        evaluations,
        report,
        params,
    })
}

/// Plain Nelder–Mead (reflection 1, expansion 2, contraction 1/2, shrink 1/2).
/// `f0` is the already-known value at `x0`.
pub fn nelder_mead(
    f: &mut impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    f0: f64,
    steps: &[f64],
    max_evals: usize,
    ftol: f64,
    xtol: f64,
) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f0));
    for k in 0..n {
        let mut x = x0.to_vec();
        x[k] += steps[k];
        let fx = f(&x);
        simplex.push((x, fx));
    }
    let mut evals = n;
    let point = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> {
        a.iter().zip(b).map(|(ai, bi)| ai + t * (bi - ai)).collect()
    };
    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let f_best = simplex[0].1;
        let f_worst = simplex[n].1;
        let size = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if (f_worst - f_best).abs() <= ftol * (1.0 + f_best.abs()) && size <= xtol {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|k| simplex[..n].iter().map(|(x, _)| x[k]).sum::<f64>() / n as f64)
            .collect();
        let worst = simplex[n].0.clone();
        let xr = point(&centroid, &worst, -1.0);
        let fr = f(&xr);
        evals += 1;
        if fr < f_best {
            let xe = point(&centroid, &worst, -2.0);
            let fe = f(&xe);
            evals += 1;
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < f_worst {
                let xc = point(&centroid, &xr, 0.5);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = point(&centroid, &worst, 0.5);
                let fc = f(&xc);
                (xc, fc)
            };
            evals += 1;
            if fc < fr.min(f_worst) {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for s in simplex.iter_mut().skip(1) {
                    s.0 = point(&best, &s.0, 0.5);
                    s.1 = f(&s.0);
                }
                evals += n;
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nelder_mead_finds_rosenbrock_minimum() {
        let mut f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let x0 = [-1.2, 1.0];
        let f0 = f(&x0);
        let (x, fx) = nelder_mead(&mut f, &x0, f0, &[0.1, 0.1], 5000, 1e-14, 1e-10);
        assert!(fx < 1e-12, "f = {fx}");
        assert!((x[0] - 1.0).abs() < 1e-5 && (x[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn satisfied_targets_return_initial_params() {
        let p = CellParams::default();
        let e = Experiment::ReadOut { kind: CellKind::ThreeT1R, r: 5e3 };
        let targets = CalibrationTargets {
            targets: vec![Target {
                experiment: e,
                value: e.evaluate(&p).unwrap(),
                tol: 0.05,
                weight: 1.0,
                source: "self",
            }],
        };
        let out = calibrate(&targets, &p, &[Param::ThreeMn2Kp], SearchOptions::default()).unwrap();
        assert_eq!(out.params, p);
        assert_eq!(out.cost, 0.0);
        out.check().unwrap();
    }

    #[test]
    fn single_kp_matches_square_law_inversion() {
        // MN1 sinks a saturated current at READ bias when lambda = 0, so kp
        // follows in closed form from the target.
        let mut p = CellParams::default();
        p.three_t1r.mn1.lambda = 0.0;
        let target = 1.7e-6;
        let vov = p.read.v_in - p.three_t1r.mn1.vth;
        let kp_exact = 2.0 * target / (vov * vov);
        let targets = CalibrationTargets {
            targets: vec![Target {
                experiment: Experiment::ReadIn { r: 5e3 },
                value: target,
                tol: 0.05,
                weight: 1.0,
                source: "closed form",
            }],
        };
        let out = calibrate(&targets, &p, &[Param::ThreeMn1Kp], SearchOptions::default()).unwrap();
        let kp = out.params.three_t1r.mn1.kp;
        assert!(((kp - kp_exact) / kp_exact).abs() < 1e-6, "{kp} vs {kp_exact}");
    }

    #[test]
    fn empty_targets_rejected() {
        let p = CellParams::default();
        let r = calibrate(&CalibrationTargets::default(), &p, &Param::ALL, SearchOptions::default());
        assert!(r.is_err());
    }

    #[test]
    fn param_round_trip() {
        let mut p = CellParams::default();
        for (k, param) in Param::ALL.iter().enumerate() {
            param.set(&mut p, 0.1 + k as f64);
            assert_eq!(param.get(&p), 0.1 + k as f64);
        }
    }
}
