//! Brute-force DC oracle: sweeps the decisive internal node on a 1 uV grid,
//! brackets sign changes of the KCL residual and interpolates linearly.
//! Written against terminal voltages with `drain_current`, independently of
//! the solver's residual/Jacobian code.

#![allow(dead_code)]

use dpe_core::device::{sample_rng, MosfetParams};
use dpe_core::solver::{self, Rails};
use dpe_core::{CellKind, CellParams, CellTopology, VariationSample};
use rand::Rng;

pub const GRID: f64 = 1e-6;
pub const AGREE: f64 = 10e-6;

pub struct Case {
    pub top: CellTopology,
    pub r: f64,
    pub vars: VariationSample,
}

/// Random rails, resistance and device realization; kinds alternate. 3T1R
/// cases keep MP3 conducting: with both MP3 and MN1 off the branch floats
/// and every node voltage is an operating point.
pub fn random_cases(n: usize, seed: u64) -> Vec<Case> {
    let params = CellParams::default();
    let mut rng = sample_rng(seed, 0);
    (0..n)
        .map(|i| {
            let kind = CellKind::ALL[i % 2];
            let vars = params.sample(kind, seed, i as u64);
            let r = 10f64.powf(rng.gen_range(3.0..5.0));
            let rails = match kind {
                CellKind::OneT1R => Rails {
                    vdd: 0.0,
                    v_in: rng.gen_range(0.0..1.3),
                    v_g: rng.gen_range(0.0..1.5),
                    v_readb: 0.0,
                    v_column: 0.0,
                },
                CellKind::ThreeT1R => {
                    let vth_p = vars.transistors[2].vth;
                    let vdd = rng.gen_range(vth_p + 0.05..vth_p + 0.6);
                    Rails {
                        vdd,
                        v_in: rng.gen_range(0.0..1.3),
                        v_g: 0.0,
                        v_readb: rng.gen_range(0.0..vdd - vth_p - 0.02),
                        v_column: vdd,
                    }
                }
            };
            Case {
                top: CellTopology { kind, rails },
                r,
                vars,
            }
        })
        .collect()
}

/// Every operating point found by the sweep, as node vectors.
pub fn sweep(case: &Case) -> Vec<Vec<f64>> {
    let rails = case.top.rails;
    let d: &[MosfetParams] = &case.vars.transistors;
    let r = case.r;
    match case.top.kind {
        CellKind::OneT1R => {
            let f = |x: f64| {
                (rails.v_in - x) / r - d[0].drain_current(rails.v_g - rails.v_column, x - rails.v_column)
            };
            roots(f, rails.v_column.min(rails.v_in), rails.v_column.max(rails.v_in))
                .into_iter()
                .map(|x| vec![x])
                .collect()
        }
        CellKind::ThreeT1R => {
            // Bottom node swept; the top node follows from the memristor
            // carrying MN1's current.
            let i_n1 = |b: f64| d[0].drain_current(rails.v_in, b);
            let top = |b: f64| b + r * i_n1(b);
            let f = |b: f64| d[2].drain_current(rails.v_readb - rails.vdd, top(b) - rails.vdd) - i_n1(b);
            roots(f, 0.0, rails.vdd).into_iter().map(|b| vec![top(b), b]).collect()
        }
    }
}

fn roots(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Vec<f64> {
    let n = ((hi - lo) / GRID).ceil() as usize;
    let at = |k: usize| (lo + k as f64 * GRID).min(hi);
    let mut out = Vec::new();
    let mut x0 = at(0);
    let mut f0 = f(x0);
    if f0 == 0.0 {
        out.push(x0);
    }
    for k in 1..=n {
        let x1 = at(k);
        let f1 = f(x1);
        if f1 == 0.0 {
            out.push(x1);
        } else if f0 != 0.0 && (f0 < 0.0) != (f1 < 0.0) {
            out.push(x0 + (x1 - x0) * f0 / (f0 - f1));
        }
        x0 = x1;
        f0 = f1;
    }
    out.dedup_by(|a, b| (*a - *b).abs() < 2.0 * GRID);
    out
}

/// Solves the case with Newton and checks it against the sweep. Returns
/// `(max node disagreement, KCL residual)`.
pub fn check(case: &Case) -> Result<(f64, f64), String> {
    let sol = solver::solve_dc(&case.top, case.r, &case.vars).map_err(|e| e.to_string())?;
    if !sol.converged {
        return Err("not converged".into());
    }
    let found = sweep(case);
    if found.len() != 1 {
        return Err(format!("sweep found {} operating points: {found:?}", found.len()));
    }
    let err = sol
        .nodes
        .iter()
        .zip(&found[0])
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok((err, sol.residual))
}
