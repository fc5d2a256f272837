//! Array programming against the noise model.

use dpe_core::dpe::{invert_drive, ArrayConfig, Crossbar};
use dpe_core::{CellKind, CellParams, DpeError};

const N: usize = 1000;
const TARGET: f64 = 10e3;

fn program_column(p: &CellParams, kind: CellKind, noise: bool) -> Vec<f64> {
    let targets = vec![vec![TARGET]; N];
    Crossbar::program(p, kind, &targets, vec![0.0], ArrayConfig::default(), noise, 2024)
        .unwrap()
        .resistance
}

fn log_std(xs: &[f64]) -> f64 {
    let l: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let m = l.iter().sum::<f64>() / l.len() as f64;
    (l.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (l.len() - 1) as f64).sqrt()
}

#[test]
fn noise_off_hits_target() {
    let p = CellParams::default();
    for kind in CellKind::ALL {
        let xb = Crossbar::program(
            &p,
            kind,
            &[vec![5e3, 7.5e3, 12e3, 20e3]],
            vec![0.0; 4],
            ArrayConfig::default(),
            false,
            0,
        )
        .unwrap();
        for (r, t) in xb.resistance.iter().zip([5e3, 7.5e3, 12e3, 20e3]) {
            assert!((r - t).abs() / t < 0.01, "{kind}: {r} for {t}");
        }
    }
}

#[test]
fn lrs_spread_matches_sigma_at_drive() {
    let mut p = CellParams::default();
    p.variation.sigma_vth = 0.0;
    p.variation.sigma_kp_rel = 0.0;
    for kind in CellKind::ALL {
        let drive = invert_drive(&p, kind, TARGET).unwrap();
        let expected = p.memristor.lrs_sigma.at(drive);
        let got = log_std(&program_column(&p, kind, true));
        assert!(
            (got - expected).abs() <= 0.25 * expected,
            "{kind}: std(ln R) {got} vs sigma {expected} at {drive:.3} V"
        );
    }
}

#[test]
fn device_and_lrs_spreads_add_in_quadrature() {
    let p = CellParams::default();
    let mut no_lrs = p.clone();
    no_lrs.memristor.lrs_sigma = dpe_core::device::LrsSigma::constant(0.0);
    for kind in CellKind::ALL {
        let drive = invert_drive(&p, kind, TARGET).unwrap();
        let s_lrs = p.memristor.lrs_sigma.at(drive);
        let s_dev = log_std(&program_column(&no_lrs, kind, true));
        let expected = (s_lrs * s_lrs + s_dev * s_dev).sqrt();
        let got = log_std(&program_column(&p, kind, true));
        assert!(
            (got - expected).abs() <= 0.25 * expected,
            "{kind}: std(ln R) {got} vs {expected}"
        );
    }
}

#[test]
fn out_of_window_targets_rejected() {
    let p = CellParams::default();
    for t in [4e3, 25e3] {
        let e = Crossbar::program(&p, CellKind::ThreeT1R, &[vec![t]], vec![0.0], ArrayConfig::default(), false, 0)
            .unwrap_err();
        assert!(matches!(e, DpeError::TargetUnreachable { .. }));
    }
}
