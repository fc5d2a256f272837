//! Acceptance criteria C1-C11, each checked at its stated tolerance. Every
//! sub-check prints a PASS/FAIL line; a criterion fails if any line does.
//! Run with `--nocapture` to see the report.

#[path = "../../core/tests/support/oracle.rs"]
mod oracle;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use dpe_core::cell::{self, CellInstance};
use dpe_core::device::sample_rng;
use dpe_core::dpe::{Adc, AdcMode, ArrayConfig, Crossbar, CurrentModel};
use dpe_core::ml::{self, mapping, train, ClassifyOptions, DatasetName};
use dpe_core::{Accounting, CellKind, CellParams, MosfetParams, ReadResult};
use rand::Rng;

struct Criterion {
    id: &'static str,
    failures: Vec<String>,
}

impl Criterion {
    fn new(id: &'static str) -> Self {
        Self {
            id,
            failures: Vec::new(),
        }
    }

    fn check(&mut self, what: &str, ok: bool, detail: String) {
        println!("[{}] {} {what}: {detail}", self.id, if ok { "PASS" } else { "FAIL" });
        if !ok {
            self.failures.push(what.to_string());
        }
    }

    /// `|got - want| <= tol * |want|`.
    fn rel(&mut self, what: &str, got: f64, want: f64, tol: f64) {
        let err = (got - want) / want;
        self.check(
            what,
            err.abs() <= tol,
            format!("{got:.5e} vs {want:.5e} ({:+.2}%, tol {:.0}%)", 100.0 * err, 100.0 * tol),
        );
    }

    fn finish(self) {
        let verdict = if self.failures.is_empty() { "PASS" } else { "FAIL" };
        println!("[{}] {verdict}", self.id);
        assert!(self.failures.is_empty(), "{} failed: {:?}", self.id, self.failures);
    }
}

fn nominal_read(p: &CellParams, kind: CellKind, r: f64) -> ReadResult {
    cell::read_at(p, kind, r, &p.nominal(kind)).unwrap()
}

#[test]
fn c01_read_sweep_endpoints() {
    let p = CellParams::default();
    let mut c = Criterion::new("C1");
    for (kind, r, want) in [
        (CellKind::OneT1R, 5e3, 110e-6),
        (CellKind::OneT1R, 20e3, 35e-6),
        (CellKind::ThreeT1R, 5e3, 3.005e-6),
        (CellKind::ThreeT1R, 20e3, 2.833e-6),
    ] {
        let got = nominal_read(&p, kind, r).i_out;
        c.rel(&format!("{kind} I_out at {} kOhm", r / 1e3), got, want, 0.05);
    }
    c.finish();
}

#[test]
fn c02_set_sweep_endpoints() {
    let p = CellParams::default();
    let mut c = Criterion::new("C2");
    for (kind, drive, want) in [
        (CellKind::OneT1R, 0.8, 7e-6),
        (CellKind::OneT1R, 1.2, 132e-6),
        (CellKind::ThreeT1R, 0.8, 35e-6),
        (CellKind::ThreeT1R, 1.2, 292e-6),
    ] {
        let got = cell::set_current(&p, kind, drive).unwrap().current;
        c.rel(&format!("{kind} SET current at {drive} V"), got, want, 0.10);
    }
    c.finish();
}

#[test]
fn c03_monte_carlo_read() {
    let p = CellParams::default();
    let mut c = Criterion::new("C3");
    let t0 = Instant::now();
    for (kind, mean, std) in [
        (CellKind::OneT1R, 54.5e-6, 0.452e-6),
        (CellKind::ThreeT1R, 2.85e-6, 0.181e-6),
    ] {
        let s = cell::monte_carlo_read(&p, kind, 9e3, 1000, 0).unwrap();
        c.rel(&format!("{kind} mean at 9 kOhm"), s.mean, mean, 0.10);
        c.rel(&format!("{kind} std at 9 kOhm"), s.std, std, 0.25);
    }
    let secs = t0.elapsed().as_secs_f64();
    c.check("runtime", secs < 60.0, format!("{secs:.2} s for both kinds (limit 60 s)"));
    c.finish();
}

#[test]
fn c04_pulse_width() {
    let p = Arc::new(CellParams::default());
    let mut c = Criterion::new("C4");
    let r_after = |kind: CellKind, drive: f64, width: f64| {
        let start = CellInstance::new(kind, p.clone(), p.set.r_initial).unwrap();
        cell::program(&start, drive, width, &p.nominal(kind)).unwrap().resistance
    };
    c.rel("1T1R 0.8 V after 100 ns", r_after(CellKind::OneT1R, 0.8, 100e-9), 100e3, 0.20);
    c.rel("1T1R 0.8 V after 1 ms", r_after(CellKind::OneT1R, 0.8, 1e-3), 30e3, 0.20);
    let widths: Vec<f64> = (0..=12).map(|k| 1e-7 * 10f64.powf(k as f64 / 3.0)).collect();
    for drive in [0.8, 0.9, 1.0, 1.1, 1.2] {
        let rs: Vec<f64> = widths.iter().map(|&w| r_after(CellKind::ThreeT1R, drive, w)).collect();
        let mean = rs.iter().sum::<f64>() / rs.len() as f64;
        let max = rs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = rs.iter().copied().fold(f64::INFINITY, f64::min);
        let spread = (max - min) / mean;
        c.check(
            &format!("3T1R spread at {drive} V"),
            spread < 0.10,
            format!("{:.2}% of mean over 100 ns..1 ms (limit 10%)", 100.0 * spread),
        );
    }
    c.finish();
}

#[test]
fn c05_read_comparison() {
    let p = CellParams::default();
    let mut c = Criterion::new("C5");
    let one = nominal_read(&p, CellKind::OneT1R, 5e3);
    let three = nominal_read(&p, CellKind::ThreeT1R, 5e3);
    c.rel(
        "READ power ratio 1T1R/3T1R at 5 kOhm",
        one.power(Accounting::Full) / three.power(Accounting::Full),
        9.37,
        0.15,
    );
    c.rel("3T1R I_in + I2 at 5 kOhm", three.i_in + three.i_out, 4.459e-6, 0.10);
    for (kind, r) in [(CellKind::OneT1R, one), (CellKind::ThreeT1R, three)] {
        for acc in [Accounting::Full, Accounting::FinalStage] {
            c.check(
                &format!("{kind} energy = power x 1 us ({acc})"),
                r.t_read == 1e-6 && r.energy(acc) == r.power(acc) * 1e-6,
                format!("{:e} J at {:e} W", r.energy(acc), r.power(acc)),
            );
        }
    }
    c.finish();
}

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn dpe(args: &[&str], out: &Path) -> std::process::Output {
    let o = Command::new(env!("CARGO_BIN_EXE_dpe"))
        .args(args)
        .arg("--out")
        .arg(out)
        .arg("--no-plot")
        .current_dir(workspace())
        .output()
        .expect("dpe runs");
    eprint!("{}", String::from_utf8_lossy(&o.stderr));
    o
}

/// Data rows of a CSV written by `dpe`, keyed by header name.
fn read_rows(path: &Path) -> Vec<HashMap<String, String>> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<String> = lines.next().unwrap().split(',').map(str::to_string).collect();
    lines
        .map(|l| header.iter().cloned().zip(l.split(',').map(str::to_string)).collect())
        .collect()
}

#[test]
fn c06_classification() {
    let mut c = Criterion::new("C6");
    let dir = tempfile::tempdir().unwrap();
    let t0 = Instant::now();
    let o = dpe(&["classify", "--dataset", "all"], dir.path());
    let secs = t0.elapsed().as_secs_f64();
    c.check("classify exits cleanly", o.status.success(), format!("{:?}", o.status));
    c.check("four-dataset runtime", secs < 600.0, format!("{secs:.1} s (limit 600 s)"));
    let summary = dir.path().join("classification_summary.csv");
    let rows = if summary.exists() { read_rows(&summary) } else { Vec::new() };
    let want = [
        (DatasetName::Iris, 88.88, 88.88),
        (DatasetName::Wine, 85.18, 81.48),
        (DatasetName::BreastCancer, 93.56, 93.56),
        (DatasetName::Banknote, 91.99, 91.26),
    ];
    for (name, acc_one, acc_three) in want {
        let Some(row) = rows.iter().find(|r| r["dataset"] == name.slug()) else {
            c.check(
                &format!("{name} evaluated"),
                false,
                format!("no result; data/{} is missing", name.file_name()),
            );
            continue;
        };
        let f = |k: &str| row[k].parse::<f64>().unwrap();
        for (kind, col, target) in [
            ("1T1R", "test_acc_1t1r_pct", acc_one),
            ("3T1R", "test_acc_3t1r_pct", acc_three),
        ] {
            let got = f(col);
            c.check(
                &format!("{name} {kind} test accuracy"),
                (got - target).abs() <= 5.0,
                format!("{got:.2}% vs {target:.2}% (+/- 5 pts)"),
            );
        }
        let ratio = f("energy_improvement_x");
        c.check(
            &format!("{name} energy improvement"),
            (5.5..=9.5).contains(&ratio),
            format!("{ratio:.2}x (band 5.5-9.5x)"),
        );
        if matches!(name, DatasetName::Iris | DatasetName::Wine) {
            let (t1, t3) = (f("tie_rate_1t1r_pct"), f("tie_rate_3t1r_pct"));
            c.check(
                &format!("{name} tie rate 3T1R > 1T1R"),
                t3 > t1,
                format!("{t3:.2}% vs {t1:.2}%"),
            );
        }
    }
    c.finish();
}

#[test]
fn c07_solver_oracle() {
    let mut c = Criterion::new("C7");
    let cases = oracle::random_cases(1000, 0xacce);
    let (mut worst, mut worst_res, mut bad) = (0.0f64, 0.0f64, 0usize);
    for (i, case) in cases.iter().enumerate() {
        match oracle::check(case) {
            Ok((err, res)) => {
                worst = worst.max(err);
                worst_res = worst_res.max(res);
            }
            Err(e) => {
                println!("[C7] case {i}: {e}");
                bad += 1;
            }
        }
    }
    c.check(
        "Newton vs 1 uV sweep",
        worst <= oracle::AGREE && bad == 0,
        format!("{} cases, worst {worst:.2e} V (limit 1e-5 V), {bad} unresolved", cases.len()),
    );
    c.check("KCL residual", worst_res < 1e-12, format!("worst {worst_res:.2e} A (limit 1e-12 A)"));
    c.finish();
}

#[test]
fn c08_continuity_and_gradient() {
    let mut c = Criterion::new("C8");
    let mut rng = sample_rng(8, 0);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let m = MosfetParams::nmos(
            rng.gen_range(0.2..1.0),
            10f64.powf(rng.gen_range(-6.0..-2.0)),
            rng.gen_range(0.0..2.0),
        );
        let vgs = m.vth + rng.gen_range(1e-3..1.5);
        let vov = vgs - m.vth;
        let below = f64::from_bits(vov.to_bits() - 1);
        let (a, b) = (m.conduction(vgs, below), m.conduction(vgs, vov));
        worst = worst
            .max((a.id - b.id).abs() / b.id.abs())
            .max((a.gm - b.gm).abs() / b.gm.abs());
    }
    c.check(
        "triode/saturation boundary",
        worst <= 1e-15,
        format!("worst relative jump {worst:.2e} in id/gm (limit 1e-15)"),
    );

    let h = 1e-5;
    let mut worst = 0.0f64;
    for seed in 0..20 {
        let mut rng = sample_rng(80, seed);
        let (n, d, k) = (10, 6, 3);
        let w: Vec<Vec<f64>> = (0..d).map(|_| (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let b: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let ys: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        let (_, gw, _) = train::loss_and_grad(&w, &b, &xs, &ys);
        for i in 0..d {
            for j in 0..k {
                let mut wp = w.clone();
                let mut wm = w.clone();
                wp[i][j] += h;
                wm[i][j] -= h;
                let fd = (train::loss_and_grad(&wp, &b, &xs, &ys).0
                    - train::loss_and_grad(&wm, &b, &xs, &ys).0)
                    / (2.0 * h);
                // Relative error is meaningless for near-zero components.
                if fd.abs() > 1e-4 {
                    worst = worst.max((gw[i][j] - fd).abs() / fd.abs());
                }
            }
        }
    }
    c.check(
        "softmax-MSE gradient vs central differences",
        worst <= 1e-6,
        format!("worst relative error {worst:.2e} (limit 1e-6)"),
    );
    c.finish();
}

#[test]
fn c09_mapping_argmax_exactness() {
    let mut c = Criterion::new("C9");
    let p = CellParams::default();
    let config = ArrayConfig {
        adc: Adc::perfect(),
        current_model: CurrentModel::IdealLinear,
        ..ArrayConfig::default()
    };
    let (mut agree, mut total) = (0usize, 0usize);
    for inst in 0..100 {
        let mut rng = sample_rng(9, inst);
        let model = train::TrainedModel {
            w: (0..8).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect(),
            b: (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            config: train::TrainConfig::default(),
            accuracy_trace: Vec::new(),
            final_loss: 0.0,
        };
        let map = mapping::map_to_conductance(&model).unwrap();
        let flat: Vec<f64> = map.resistance.iter().flatten().copied().collect();
        let xb = Crossbar::from_resistances(
            &p,
            CellKind::ThreeT1R,
            8,
            3,
            flat,
            map.bias_currents(p.read.v_in),
            config,
            None,
        )
        .unwrap();
        // Two one-hot groups of four: every spike pattern.
        for a in 0..4 {
            for b in 0..4 {
                let mut spikes = vec![false; 8];
                spikes[a] = true;
                spikes[4 + b] = true;
                let x: Vec<f64> = spikes.iter().map(|&s| f64::from(u8::from(s))).collect();
                let hw = xb.infer(&spikes, 0, 0).unwrap().winner;
                agree += usize::from(hw == model.predict(&x));
                total += 1;
            }
        }
    }
    c.check(
        "ideal-current argmax vs float model",
        agree == total,
        format!("{agree}/{total} samples over 100 random 8x3 instances"),
    );
    c.finish();
}

#[test]
fn c10_monotonicity() {
    let p = Arc::new(CellParams::default());
    let mut c = Criterion::new("C10");
    for kind in CellKind::ALL {
        let i: Vec<f64> = (0..=40)
            .map(|k| cell::set_current(&p, kind, 0.8 + 0.01 * k as f64).unwrap().current)
            .collect();
        c.check(
            &format!("{kind} SET current nondecreasing in drive"),
            i.windows(2).all(|w| w[1] >= w[0]),
            format!("{:.3e}..{:.3e} A over 0.8..1.2 V", i[0], i[40]),
        );
        let start = CellInstance::new(kind, p.clone(), p.set.r_initial).unwrap();
        let widths: Vec<f64> = (0..=16).map(|k| 1e-7 * 10f64.powf(k as f64 / 4.0)).collect();
        let mut ok = true;
        for drive in [0.8, 1.0, 1.2] {
            let r: Vec<f64> = widths
                .iter()
                .map(|&w| cell::program(&start, drive, w, &p.nominal(kind)).unwrap().resistance)
                .collect();
            ok &= r.windows(2).all(|w| w[1] <= w[0]);
        }
        c.check(
            &format!("{kind} programmed R nonincreasing in pulse width"),
            ok,
            "drives 0.8/1.0/1.2 V, 100 ns..1 ms".into(),
        );
        let dc: Vec<f64> = (0..=35)
            .map(|k| {
                cell::dc_program(&p, kind, 0.6 + 0.02 * k as f64, &p.nominal(kind))
                    .unwrap()
                    .resistance
            })
            .collect();
        c.check(
            &format!("{kind} DC-programmed R nonincreasing in drive"),
            dc.windows(2).all(|w| w[1] <= w[0]),
            format!("{:.0}..{:.0} ohm over 0.6..1.3 V", dc[0], dc[35]),
        );
    }

    let mut rng = sample_rng(10, 0);
    let mut idem = true;
    for _ in 0..100_000 {
        let adc = Adc {
            resolution: rng.gen_range(1e-9..500e-9),
            mode: if rng.gen() { AdcMode::Floor } else { AdcMode::Round },
        };
        let q = adc.quantize(rng.gen_range(0.0..1e-3));
        idem &= adc.quantize(q) == q;
    }
    c.check("quantization idempotent", idem, "100000 random currents and steps".into());

    let ds = ml::load_dataset(
        DatasetName::Iris,
        &workspace().join("data").join(DatasetName::Iris.file_name()),
    )
    .unwrap();
    let opts = ClassifyOptions::default();
    let (enc, model) = ml::prepare(&ds, &opts).unwrap();
    for kind in CellKind::ALL {
        let base = ml::deploy(&p, kind, &enc, &model, &opts).unwrap().crossbar;
        let rates: Vec<f64> = (0..8)
            .map(|k| {
                let mut xb = base.clone();
                xb.config.adc = Adc {
                    resolution: 12.5e-9 * 2f64.powi(k),
                    mode: AdcMode::Floor,
                };
                ml::evaluate(&xb, &enc, &enc.split.test, 0).unwrap().tie_rate
            })
            .collect();
        c.check(
            &format!("{kind} iris tie rate nondecreasing in ADC step"),
            rates.windows(2).all(|w| w[1] >= w[0]),
            format!("{rates:.3?} for 12.5 nA x 2^k"),
        );
    }
    c.finish();
}

fn csv_bodies(dir: &Path) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| {
            let body: String = std::fs::read_to_string(&p)
                .unwrap()
                .lines()
                .filter(|l| !l.starts_with('#'))
                .map(|l| format!("{l}\n"))
                .collect();
            (p.file_name().unwrap().to_string_lossy().into_owned(), body)
        })
        .collect();
    out.sort();
    out
}

#[test]
fn c11_classify_determinism() {
    let mut c = Criterion::new("C11");
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["classify", "--dataset", "iris,wine", "--seed", "11", "--program-noise"];
    let ra = dpe(&args, a.path());
    let rb = dpe(&args, b.path());
    c.check(
        "both runs succeed",
        ra.status.success() && rb.status.success(),
        format!("{:?} / {:?}", ra.status, rb.status),
    );
    let (ba, bb) = (csv_bodies(a.path()), csv_bodies(b.path()));
    c.check(
        "byte-identical CSV bodies",
        !ba.is_empty() && ba == bb,
        format!("{} CSV files compared", ba.len()),
    );
    c.finish();
}
