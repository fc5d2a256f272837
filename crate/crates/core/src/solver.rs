//! DC operating point of the two fixed cell netlists, and the transient SET
//! engine built on top of it.
//!
//! 1T1R: `V_in -- memristor -- x -- MN1(drain x, gate V_g, source column)`,
//! with the column held at 0 V.
//!
//! 3T1R: `VDD -- MP3(gate V_readB) -- T -- memristor -- B -- MN1(gate V_in) -- 0`,
//! and `MN2(gate B, drain column, source 0)` copying the branch state into
//! the column current `I2`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::device::{MemristorParams, MemristorState, MosfetParams, VariationSample};
use crate::error::{DpeError, Result};

pub const TOL_KCL: f64 = 1e-12;
pub const MAX_NEWTON_ITERS: usize = 200;
const MAX_STEP: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellKind {
    #[serde(rename = "1t1r")]
    OneT1R,
    #[serde(rename = "3t1r")]
    ThreeT1R,
}

impl CellKind {
    pub const ALL: [CellKind; 2] = [CellKind::OneT1R, CellKind::ThreeT1R];

    /// Number of transistors, in the order `[MN1]` or `[MN1, MN2, MP3]`.
    pub fn transistor_count(self) -> usize {
        match self {
            CellKind::OneT1R => 1,
            CellKind::ThreeT1R => 3,
        }
    }

    pub fn slug(self) -> &'static str {
        match self {
            CellKind::OneT1R => "1t1r",
            CellKind::ThreeT1R => "3t1r",
        }
    }
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CellKind::OneT1R => "1T1R",
            CellKind::ThreeT1R => "3T1R",
        })
    }
}

impl FromStr for CellKind {
    type Err = DpeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "1t1r" => Ok(CellKind::OneT1R),
            "3t1r" => Ok(CellKind::ThreeT1R),
            other => Err(DpeError::InvalidInput(format!(
                "unknown cell kind '{other}' (expected 1t1r or 3t1r)"
            ))),
        }
    }
}

/// Rail voltages. Rails that a topology does not use are ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rails {
    pub vdd: f64,
    pub v_in: f64,
    pub v_g: f64,
    pub v_readb: f64,
    pub v_column: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellTopology {
    pub kind: CellKind,
    pub rails: Rails,
}

impl CellTopology {
    pub fn with_v_in(mut self, v_in: f64) -> Self {
        self.rails.v_in = v_in;
        self
    }

    /// Internal node names, in the order used by [`DcSolution::nodes`].
    pub fn node_names(&self) -> &'static [&'static str] {
        match self.kind {
            CellKind::OneT1R => &["x"],
            CellKind::ThreeT1R => &["top", "bottom"],
        }
    }
}

/// Currents through every element, positive in the conducting direction
/// (drain to source for N devices, source to drain for MP3, top to bottom
/// through the memristor).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BranchCurrents {
    pub memristor: f64,
    pub mn1: f64,
    pub mn2: f64,
    pub mp3: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DcSolution {
    /// `[x]` for 1T1R, `[top, bottom]` for 3T1R.
    pub nodes: Vec<f64>,
    pub currents: BranchCurrents,
    pub converged: bool,
    pub iterations: usize,
    /// Max absolute KCL residual over internal nodes (A).
    pub residual: f64,
    pub used_fallback: bool,
}

impl DcSolution {
    /// Current into the column line: MN1 source current for 1T1R, I2 for 3T1R.
    pub fn i_out(&self, kind: CellKind) -> f64 {
        match kind {
            CellKind::OneT1R => self.currents.mn1,
            CellKind::ThreeT1R => self.currents.mn2,
        }
    }

    /// Voltage across the memristor.
    pub fn v_memristor(&self, top: &CellTopology) -> f64 {
        match top.kind {
            CellKind::OneT1R => top.rails.v_in - self.nodes[0],
            CellKind::ThreeT1R => self.nodes[0] - self.nodes[1],
        }
    }
}

fn check_devices(top: &CellTopology, vars: &VariationSample) -> Result<()> {
    if vars.transistors.len() != top.kind.transistor_count() {
        return Err(DpeError::InvalidInput(format!(
            "{} cell needs {} transistors, got {}",
            top.kind,
            top.kind.transistor_count(),
            vars.transistors.len()
        )));
    }
    Ok(())
}

/// KCL residuals (current into each node) and Jacobian.
fn residuals(top: &CellTopology, d: &[MosfetParams], r: f64, v: &[f64]) -> ([f64; 2], [[f64; 2]; 2]) {
    let g = 1.0 / r;
    let rails = &top.rails;
    match top.kind {
        CellKind::OneT1R => {
            let x = v[0];
            let m = d[0].conduction(rails.v_g - rails.v_column, x - rails.v_column);
            let f = (rails.v_in - x) * g - m.id;
            ([f, 0.0], [[-g - m.gds, 0.0], [0.0, 1.0]])
        }
        CellKind::ThreeT1R => {
            let (t, b) = (v[0], v[1]);
            let p = d[2].conduction(rails.vdd - rails.v_readb, rails.vdd - t);
            let n = d[0].conduction(rails.v_in, b);
            let i_mem = (t - b) * g;
            let f_t = p.id - i_mem;
            let f_b = i_mem - n.id;
            ([f_t, f_b], [[-p.gds - g, g], [g, -g - n.gds]])
        }
    }
}

fn max_abs(f: &[f64; 2]) -> f64 {
    f[0].abs().max(f[1].abs())
}

fn assemble(
    top: &CellTopology,
    d: &[MosfetParams],
    r: f64,
    nodes: Vec<f64>,
    iterations: usize,
    used_fallback: bool,
) -> DcSolution {
    let rails = &top.rails;
    let (f, _) = residuals(top, d, r, &nodes);
    let residual = match top.kind {
        CellKind::OneT1R => f[0].abs(),
        CellKind::ThreeT1R => max_abs(&f),
    };
    let currents = match top.kind {
        CellKind::OneT1R => {
            let x = nodes[0];
            BranchCurrents {
                memristor: (rails.v_in - x) / r,
                mn1: d[0].conduction(rails.v_g - rails.v_column, x - rails.v_column).id,
                ..Default::default()
            }
        }
        CellKind::ThreeT1R => {
            let (t, b) = (nodes[0], nodes[1]);
            BranchCurrents {
                memristor: (t - b) / r,
                mn1: d[0].conduction(rails.v_in, b).id,
                mn2: d[1].conduction(b, rails.v_column).id,
                mp3: d[2].conduction(rails.vdd - rails.v_readb, rails.vdd - t).id,
            }
        }
    };
    DcSolution {
        nodes,
        currents,
        converged: residual < TOL_KCL,
        iterations,
        residual,
        used_fallback,
    }
}

/// Damped Newton from `guess`. Returns node voltages, iterations used, and
/// whether the residual dropped below tolerance.
fn newton(
    top: &CellTopology,
    d: &[MosfetParams],
    r: f64,
    guess: &[f64],
) -> (Vec<f64>, usize, bool) {
    let n = guess.len();
    let mut v = guess.to_vec();
    for it in 0..MAX_NEWTON_ITERS {
        let (f, j) = residuals(top, d, r, &v);
        let res = if n == 1 { f[0].abs() } else { max_abs(&f) };
        if !res.is_finite() {
            return (v, it, false);
        }
        let step = if n == 1 {
            if j[0][0] == 0.0 {
                return (v, it, false);
            }
            [-f[0] / j[0][0], 0.0]
        } else {
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if det == 0.0 || !det.is_finite() {
                return (v, it, false);
            }
            [
                -(f[0] * j[1][1] - f[1] * j[0][1]) / det,
                -(j[0][0] * f[1] - j[1][0] * f[0]) / det,
            ]
        };
        let small = step[..n].iter().all(|s| s.abs() < 1e-15);
        if res < TOL_KCL && small {
            return (v, it, true);
        }
        for (vi, si) in v.iter_mut().zip(step) {
            *vi += si.clamp(-MAX_STEP, MAX_STEP);
        }
        if small {
            let (f, _) = residuals(top, d, r, &v);
            let res = if n == 1 { f[0].abs() } else { max_abs(&f) };
            return (v, it + 1, res < TOL_KCL);
        }
    }
    let (f, _) = residuals(top, d, r, &v);
    let res = if n == 1 { f[0].abs() } else { max_abs(&f) };
    (v, MAX_NEWTON_ITERS, res < TOL_KCL)
}

/// Bisection on the single decisive node: `x` for 1T1R, `B` for 3T1R with
/// `T` eliminated through the memristor/MN1 series relation.
fn bisection(top: &CellTopology, d: &[MosfetParams], r: f64) -> Option<Vec<f64>> {
    let rails = &top.rails;
    match top.kind {
        CellKind::OneT1R => {
            let lo = rails.v_in.min(rails.v_column);
            let hi = rails.v_in.max(rails.v_column);
            let f = |x: f64| {
                (rails.v_in - x) / r
                    - d[0].conduction(rails.v_g - rails.v_column, x - rails.v_column).id
            };
            bisect_decreasing(f, lo, hi).map(|x| vec![x])
        }
        CellKind::ThreeT1R => {
            let t_of = |b: f64| b + d[0].conduction(rails.v_in, b).id * r;
            let g = |b: f64| {
                d[2].conduction(rails.vdd - rails.v_readb, rails.vdd - t_of(b)).id
                    - d[0].conduction(rails.v_in, b).id
            };
            bisect_decreasing(g, 0.0, rails.vdd.max(0.0)).map(|b| vec![t_of(b), b])
        }
    }
}

fn bisect_decreasing(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> Option<f64> {
    let (flo, fhi) = (f(lo), f(hi));
    if !(flo >= 0.0 && fhi <= 0.0) {
        return None;
    }
    if flo == 0.0 {
        return Some(lo);
    }
    if fhi == 0.0 {
        return Some(hi);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

fn mid_rail(top: &CellTopology) -> Vec<f64> {
    match top.kind {
        CellKind::OneT1R => vec![0.5 * (top.rails.v_in + top.rails.v_column)],
        CellKind::ThreeT1R => vec![0.5 * top.rails.vdd, 0.5 * top.rails.vdd],
    }
}

/// Solves the cell at memristor resistance `r` for the realized devices in
/// `vars`, starting Newton from mid-rail.
pub fn solve_dc(top: &CellTopology, r: f64, vars: &VariationSample) -> Result<DcSolution> {
    solve_dc_from(top, r, vars, None)
}

/// As [`solve_dc`], optionally warm-started from a previous solution.
pub fn solve_dc_from(
    top: &CellTopology,
    r: f64,
    vars: &VariationSample,
    guess: Option<&[f64]>,
) -> Result<DcSolution> {
    check_devices(top, vars)?;
    if !(100.0..=1e7).contains(&r) {
        return Err(DpeError::InvalidInput(format!(
            "memristor resistance {r} ohm outside [100, 1e7]"
        )));
    }
    let r_ok = [top.rails.vdd, top.rails.v_in, top.rails.v_g, top.rails.v_readb, top.rails.v_column]
        .iter()
        .all(|v| v.is_finite());
    if !r_ok {
        return Err(DpeError::InvalidInput("non-finite rail voltage".into()));
    }
    let d = &vars.transistors;
    let start = guess.map(<[f64]>::to_vec).unwrap_or_else(|| mid_rail(top));
    let (v, iters, ok) = newton(top, d, r, &start);
    if ok {
        return Ok(assemble(top, d, r, v, iters, false));
    }
    let fail = |detail: &str| DpeError::NoOperatingPoint {
        kind: top.kind,
        resistance: r,
        detail: detail.to_string(),
    };
    let seed = bisection(top, d, r).ok_or_else(|| fail("fallback bracket has no sign change"))?;
    let (v, polish, ok) = newton(top, d, r, &seed);
    let sol = if ok {
        assemble(top, d, r, v, iters + polish, true)
    } else {
        assemble(top, d, r, seed, iters + polish, true)
    };
    if sol.converged {
        Ok(sol)
    } else {
        Err(fail(&format!("residual {:.3e} A after fallback", sol.residual)))
    }
}

/// Largest state change allowed in one transient step.
const DW_MAX: f64 = 5e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct SetOutcome {
    /// Programmed resistance including the LRS noise multiplier (ohm).
    pub resistance: f64,
    pub state: MemristorState,
    /// Memristor-branch current at the end of the pulse (A).
    pub settled_current: f64,
    /// Largest memristor-branch current seen during the pulse (A).
    pub peak_current: f64,
    /// Final DC solution at the end of the pulse.
    pub solution: DcSolution,
    pub steps: usize,
}

/// Integrates the SET dynamics for one rectangular pulse on `V_in`.
///
/// `dt` bounds the first time step; the bound doubles every step, and each
/// step is further shortened so the state moves by at most a fixed increment.
/// Once the memristor voltage falls to the threshold the state is frozen,
/// so the crossing is located by bisection and the pulse ends early.
#[allow(clippy::too_many_arguments)]
pub fn transient_set(
    top: &CellTopology,
    pulse_amplitude: f64,
    pulse_width: f64,
    m0: MemristorState,
    mem: &MemristorParams,
    vars: &VariationSample,
    dt: f64,
) -> Result<SetOutcome> {
    if !(dt > 0.0) {
        return Err(DpeError::InvalidInput(format!("dt must be positive, got {dt}")));
    }
    let top = top.with_v_in(pulse_amplitude);
    let mut w = m0.w.clamp(0.0, 1.0);
    let state_r = |w: f64| mem.resistance(MemristorState { w });
    let mut sol = solve_dc(&top, state_r(w), vars)?;
    let mut v = sol.v_memristor(&top);
    let mut peak = sol.currents.memristor;
    let mut t = 0.0;
    let mut cap = dt;
    let mut steps = 0;
    while t < pulse_width && w < 1.0 && v > mem.v_set {
        let rate = mem.growth_rate(v);
        let h_time = (pulse_width - t).min(cap);
        let (next, h) = if rate * h_time > DW_MAX {
            ((w + DW_MAX).min(1.0), DW_MAX / rate)
        } else {
            (mem.set_step(MemristorState { w }, v, h_time, 1.0).w, h_time)
        };
        let next_sol = solve_dc_from(&top, state_r(next), vars, Some(&sol.nodes))?;
        let v_next = next_sol.v_memristor(&top);
        steps += 1;
        if v_next <= mem.v_set {
            // The state stops where the memristor voltage meets the threshold.
            let (mut lo, mut hi) = (w, next);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let s = solve_dc_from(&top, state_r(mid), vars, Some(&sol.nodes))?;
                if s.v_memristor(&top) > mem.v_set {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            w = lo;
            sol = solve_dc_from(&top, state_r(w), vars, Some(&sol.nodes))?;
            peak = peak.max(sol.currents.memristor);
            break;
        }
        w = next;
        sol = next_sol;
        v = v_next;
        peak = peak.max(sol.currents.memristor);
        t += h;
        cap = (2.0 * cap).min(pulse_width);
    }
    let noise = vars.lrs_multiplier(mem.lrs_sigma.at(pulse_amplitude));
    let resistance = (state_r(w) * noise).clamp(mem.r_on, mem.r_off);
    Ok(SetOutcome {
        resistance,
        state: MemristorState { w },
        settled_current: sol.currents.memristor,
        peak_current: peak,
        solution: sol,
        steps,
    })
}

/// Length of the pulse standing in for source-meter DC programming.
pub const DC_SET_WIDTH: f64 = 10e-3;
/// Default first step of the transient engine.
pub const DEFAULT_DT: f64 = 10e-9;

/// DC programming from the fully-reset state.
pub fn dc_set(
    top: &CellTopology,
    drive: f64,
    mem: &MemristorParams,
    vars: &VariationSample,
) -> Result<SetOutcome> {
    transient_set(
        top,
        drive,
        DC_SET_WIDTH,
        MemristorState { w: 0.0 },
        mem,
        vars,
        DEFAULT_DT,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::LrsSigma;
    use approx::assert_relative_eq;

    fn one() -> (CellTopology, VariationSample) {
        let top = CellTopology {
            kind: CellKind::OneT1R,
            rails: Rails { vdd: 1.2, v_in: 0.6, v_g: 1.2, v_readb: 0.0, v_column: 0.0 },
        };
        (top, VariationSample::nominal(&[MosfetParams::nmos(0.45, 5e-4, 0.1)]))
    }

    fn three() -> (CellTopology, VariationSample) {
        let top = CellTopology {
            kind: CellKind::ThreeT1R,
            rails: Rails { vdd: 1.2, v_in: 0.6, v_g: 0.0, v_readb: 0.0, v_column: 1.2 },
        };
        let devs = [
            MosfetParams::nmos(0.5, 2e-4, 0.1),
            MosfetParams::nmos(0.4, 3e-5, 0.05),
            MosfetParams::pmos(0.4, 1e-3, 0.1),
        ];
        (top, VariationSample::nominal(&devs))
    }

    fn mem() -> MemristorParams {
        MemristorParams {
            r_on: 1e3,
            r_off: 1e5,
            v_set: 0.6,
            a_rate: 1e2,
            v0: 0.01,
            lrs_sigma: LrsSigma::constant(0.0),
        }
    }

    #[test]
    fn one_t1r_gate_off_is_open() {
        let (mut top, vars) = one();
        top.rails.v_g = 0.0;
        let s = solve_dc(&top, 1e4, &vars).unwrap();
        assert!(s.converged);
        assert_eq!(s.currents.mn1, 0.0);
        assert_relative_eq!(s.nodes[0], 0.6, epsilon = 1e-12);
    }

    #[test]
    fn three_t1r_sink_off() {
        let (top, vars) = three();
        let s = solve_dc(&top.with_v_in(0.0), 1e4, &vars).unwrap();
        assert!(s.converged);
        assert_eq!(s.currents.mn1, 0.0);
        assert!(s.currents.memristor.abs() < TOL_KCL);
    }

    #[test]
    fn series_currents_agree() {
        let (top, vars) = three();
        for &r in &[5e3, 9e3, 20e3, 1e5] {
            let s = solve_dc(&top, r, &vars).unwrap();
            let c = s.currents;
            assert!((c.mn1 - c.memristor).abs() < TOL_KCL);
            assert!((c.mp3 - c.memristor).abs() < TOL_KCL);
        }
    }

    #[test]
    fn bad_resistance_rejected() {
        let (top, vars) = one();
        assert!(solve_dc(&top, 50.0, &vars).is_err());
    }

    #[test]
    fn below_threshold_pulse_keeps_state() {
        let (top, vars) = one();
        let out = transient_set(&top, 0.3, 1e-6, MemristorState { w: 0.0 }, &mem(), &vars, 1e-8).unwrap();
        assert_eq!(out.resistance, 1e5);
    }

    #[test]
    fn wider_pulses_never_raise_resistance() {
        let (top, vars) = one();
        let mut last = f64::INFINITY;
        for k in 0..6 {
            let width = 1e-7 * 4f64.powi(k);
            let out = transient_set(&top, 0.9, width, MemristorState { w: 0.0 }, &mem(), &vars, 1e-8).unwrap();
            assert!(out.resistance <= last);
            last = out.resistance;
        }
    }

    #[test]
    fn dt_refinement_is_stable() {
        let (top, vars) = one();
        let a = transient_set(&top, 0.9, 1e-4, MemristorState { w: 0.0 }, &mem(), &vars, 1e-8).unwrap();
        let b = transient_set(&top, 0.9, 1e-4, MemristorState { w: 0.0 }, &mem(), &vars, 5e-9).unwrap();
        assert!((a.resistance - b.resistance).abs() / a.resistance < 5e-3);
    }
}
