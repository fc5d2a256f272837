//! One function per experiment subcommand.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use anyhow::Result;
use serde_json::json;

use dpe_core::calibrate::{self, CalibrationTargets, Param, SearchOptions};
use dpe_core::cell::{self, monte_carlo_samples, McStats, MC_BINS};
use dpe_core::ml::{self, ClassifyOptions, DatasetName, TrainingTable};
use dpe_core::{Accounting, CellInstance, CellKind, CellParams};

use crate::output::{num, sci, Output};
use crate::svg::{self, Chart, Series};

pub struct Ctx {
    pub params: CellParams,
    pub kinds: Vec<CellKind>,
    pub accounting: Accounting,
    pub seed: u64,
    pub ideal: bool,
    pub program_noise: bool,
}

fn kind_label(k: CellKind) -> String {
    k.to_string()
}

pub fn sweep_set(ctx: &Ctx, out: &mut Output, drives: &[f64]) -> Result<serde_json::Value> {
    let mut rows = Vec::new();
    let mut series = Vec::new();
    for &kind in &ctx.kinds {
        let mut pts = Vec::new();
        for &d in drives {
            let s = cell::set_current(&ctx.params, kind, d)?;
            let supply = ctx.params.set_supply(kind, d);
            rows.push(vec![
                kind.slug().to_string(),
                num(d),
                num(s.current * 1e6),
                num(supply),
                num(s.power / supply * 1e6),
                num(s.power * 1e6),
                num(s.resistance / 1e3),
            ]);
            pts.push((d, s.current * 1e6));
        }
        series.push(Series {
            label: kind_label(kind),
            points: pts,
        });
    }
    out.csv(
        "sweep_set.csv",
        &[
            "kind",
            "drive_V",
            "i_set_uA",
            "supply_V",
            "i_supply_uA",
            "p_set_uW",
            "r_final_kOhm",
        ],
        &rows,
    )?;
    out.svg(
        "sweep_set.svg",
        &svg::line_chart(
            &Chart {
                title: "SET current vs drive".into(),
                x_label: "V_in (V)".into(),
                y_label: "I_set (uA)".into(),
                log_x: false,
                log_y: false,
            },
            &series,
        ),
    )?;
    Ok(json!({ "points": drives.len() }))
}

pub fn sweep_read(ctx: &Ctx, out: &mut Output, resistances_k: &[f64]) -> Result<serde_json::Value> {
    let mut rows = Vec::new();
    let mut series = Vec::new();
    for &kind in &ctx.kinds {
        let nominal = ctx.params.nominal(kind);
        let mut pts = Vec::new();
        for &rk in resistances_k {
            let r = cell::read_at(&ctx.params, kind, rk * 1e3, &nominal)?;
            rows.push(vec![
                kind.slug().to_string(),
                num(rk),
                num(r.i_out * 1e6),
                num(r.i_in * 1e6),
                num(r.supply),
                num(r.power(ctx.accounting) * 1e6),
                num(r.energy(ctx.accounting) * 1e12),
            ]);
            pts.push((rk, r.i_out * 1e6));
        }
        series.push(Series {
            label: kind_label(kind),
            points: pts,
        });
    }
    out.csv(
        "sweep_read.csv",
        &["kind", "r_kOhm", "i_out_uA", "i_in_uA", "supply_V", "p_uW", "e_pJ"],
        &rows,
    )?;
    out.svg(
        "sweep_read.svg",
        &svg::line_chart(
            &Chart {
                title: "READ current vs resistance".into(),
                x_label: "R (kOhm)".into(),
                y_label: "I_out (uA)".into(),
                log_x: false,
                log_y: ctx.kinds.len() > 1,
            },
            &series,
        ),
    )?;
    Ok(json!({ "points": resistances_k.len(), "accounting": ctx.accounting.to_string() }))
}

pub fn monte_carlo(ctx: &Ctx, out: &mut Output, r_k: f64, n: usize) -> Result<serde_json::Value> {
    let mut samples_rows = Vec::new();
    let mut stats_rows = Vec::new();
    let mut hist_rows = Vec::new();
    let mut runtimes = serde_json::Map::new();
    for &kind in &ctx.kinds {
        let t0 = Instant::now();
        let xs = monte_carlo_samples(&ctx.params, kind, r_k * 1e3, n, ctx.seed)?;
        let st = McStats::from_samples(&xs, MC_BINS)?;
        let elapsed = t0.elapsed().as_secs_f64();
        runtimes.insert(kind.slug().into(), json!(elapsed));
        eprintln!(
            "{kind}: n={n} mean={:.4} uA std={:.4} uA ({elapsed:.2} s)",
            st.mean * 1e6,
            st.std * 1e6
        );
        for (i, x) in xs.iter().enumerate() {
            samples_rows.push(vec![kind.slug().to_string(), i.to_string(), num(x * 1e6)]);
        }
        stats_rows.push(vec![
            kind.slug().to_string(),
            num(r_k),
            n.to_string(),
            num(st.mean * 1e6),
            num(st.std * 1e6),
            num(st.min * 1e6),
            num(st.max * 1e6),
        ]);
        for &(lo, hi, c) in &st.histogram {
            hist_rows.push(vec![
                kind.slug().to_string(),
                num(lo * 1e6),
                num(hi * 1e6),
                c.to_string(),
            ]);
        }
        let scaled: Vec<(f64, f64, usize)> =
            st.histogram.iter().map(|&(a, b, c)| (a * 1e6, b * 1e6, c)).collect();
        out.svg(
            &format!("monte_carlo_{}.svg", kind.slug()),
            &svg::histogram(
                &Chart {
                    title: format!("{kind} READ current at {r_k} kOhm, n = {n}"),
                    x_label: "I_out (uA)".into(),
                    y_label: "count".into(),
                    log_x: false,
                    log_y: false,
                },
                &scaled,
            ),
        )?;
    }
    out.csv("monte_carlo_samples.csv", &["kind", "index", "i_out_uA"], &samples_rows)?;
    out.csv(
        "monte_carlo_stats.csv",
        &["kind", "r_kOhm", "n", "mean_uA", "std_uA", "min_uA", "max_uA"],
        &stats_rows,
    )?;
    out.csv(
        "monte_carlo_hist.csv",
        &["kind", "bin_lo_uA", "bin_hi_uA", "count"],
        &hist_rows,
    )?;
    Ok(json!({ "r_kOhm": r_k, "n": n, "runtime_s": runtimes }))
}

pub fn pulse_width(
    ctx: &Ctx,
    out: &mut Output,
    drives: &[f64],
    widths: &[f64],
) -> Result<serde_json::Value> {
    let params = Arc::new(ctx.params.clone());
    let mut rows = Vec::new();
    let mut spread_rows = Vec::new();
    for &kind in &ctx.kinds {
        let nominal = params.nominal(kind);
        let start = CellInstance::new(kind, params.clone(), params.set.r_initial)?;
        let mut series = Vec::new();
        for &d in drives {
            let mut rs = Vec::new();
            for &w in widths {
                let r = cell::program(&start, d, w, &nominal)?.resistance;
                rows.push(vec![kind.slug().to_string(), num(d), sci(w), num(r / 1e3)]);
                rs.push(r);
            }
            let mean = rs.iter().sum::<f64>() / rs.len() as f64;
            let min = rs.iter().copied().fold(f64::INFINITY, f64::min);
            let max = rs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            spread_rows.push(vec![
                kind.slug().to_string(),
                num(d),
                num(mean / 1e3),
                num(min / 1e3),
                num(max / 1e3),
                num((max - min) / mean),
                num(max / min),
            ]);
            series.push(Series {
                label: format!("{d:.2} V"),
                points: widths.iter().zip(&rs).map(|(&w, &r)| (w, r / 1e3)).collect(),
            });
        }
        out.svg(
            &format!("pulse_width_{}.svg", kind.slug()),
            &svg::line_chart(
                &Chart {
                    title: format!("{kind} resistance after one SET pulse"),
                    x_label: "pulse width (s)".into(),
                    y_label: "R (kOhm)".into(),
                    log_x: true,
                    log_y: false,
                },
                &series,
            ),
        )?;
    }
    out.csv("pulse_width.csv", &["kind", "drive_V", "width_s", "r_final_kOhm"], &rows)?;
    out.csv(
        "pulse_width_spread.csv",
        &[
            "kind",
            "drive_V",
            "mean_kOhm",
            "min_kOhm",
            "max_kOhm",
            "spread_rel",
            "max_over_min",
        ],
        &spread_rows,
    )?;
    Ok(json!({ "drives": drives, "widths_s": widths }))
}

pub struct ClassifyArgs<'a> {
    pub datasets: Vec<DatasetName>,
    /// Set when the user named the datasets; a missing file is then fatal.
    pub explicit: bool,
    pub data_dir: &'a Path,
    pub training: TrainingTable,
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
}

fn pct(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

pub fn classify(ctx: &Ctx, out: &mut Output, args: &ClassifyArgs) -> Result<serde_json::Value> {
    let mut metric_rows = Vec::new();
    let mut table_rows = Vec::new();
    let mut skipped = Vec::new();
    for &name in &args.datasets {
        let path = args.data_dir.join(name.file_name());
        if !path.exists() && !args.explicit {
            out.note(format!("{name}: {} not found, dataset skipped", path.display()));
            skipped.push(name.slug());
            continue;
        }
        let ds = ml::load_dataset(name, &path)?;
        let hyper = args.training.get(name);
        let mut opts = ClassifyOptions {
            seed: ctx.seed,
            epochs: args.epochs.unwrap_or(hyper.epochs),
            learning_rate: args.learning_rate.unwrap_or(hyper.learning_rate),
            program_noise: ctx.program_noise,
            ..ClassifyOptions::default()
        };
        opts.array.accounting = ctx.accounting;
        if ctx.ideal {
            opts = opts.ideal();
        }
        let (enc, model) = ml::prepare(&ds, &opts)?;
        let mut per_kind = Vec::new();
        for &kind in &ctx.kinds {
            let o = ml::deploy(&ctx.params, kind, &enc, &model, &opts)?;
            eprintln!(
                "{name}/{kind}: test accuracy {:.2}% (float {:.2}%), ties {:.2}%, {:.2} pJ/sample",
                100.0 * o.test.accuracy,
                100.0 * o.float_test_accuracy,
                100.0 * o.test.tie_rate,
                o.test.mean_energy * 1e12
            );
            metric_rows.push(vec![
                name.slug().to_string(),
                kind.slug().to_string(),
                pct(o.train_accuracy),
                pct(o.float_test_accuracy),
                pct(o.test.accuracy),
                pct(o.test.tie_rate),
                num(o.test.mean_energy * 1e12),
                o.test.n.to_string(),
            ]);
            let mut header = vec!["true_class".to_string()];
            header.extend((0..enc.n_classes).map(|c| format!("pred_{c}")));
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            let conf: Vec<Vec<String>> = o
                .test
                .confusion
                .iter()
                .enumerate()
                .map(|(c, row)| {
                    std::iter::once(c.to_string())
                        .chain(row.iter().map(|v| v.to_string()))
                        .collect()
                })
                .collect();
            out.csv(&format!("confusion_{}_{}.csv", name.slug(), kind.slug()), &header, &conf)?;
            let mut header = vec!["input".to_string()];
            header.extend((0..enc.n_classes).map(|c| format!("class_{c}_kOhm")));
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            let xb = &o.crossbar;
            let mut model_rows: Vec<Vec<String>> = (0..xb.rows)
                .map(|i| {
                    std::iter::once(i.to_string())
                        .chain((0..xb.cols).map(|j| num(xb.resistance[i * xb.cols + j] / 1e3)))
                        .collect()
                })
                .collect();
            model_rows.push(
                std::iter::once("bias_uA".to_string())
                    .chain(xb.bias.iter().map(|b| num(b * 1e6)))
                    .collect(),
            );
            out.csv(&format!("model_{}_{}.csv", name.slug(), kind.slug()), &header, &model_rows)?;
            per_kind.push((kind, o));
        }
        if let [(CellKind::OneT1R, one), (CellKind::ThreeT1R, three)] = per_kind.as_slice() {
            table_rows.push(vec![
                name.slug().to_string(),
                pct(one.train_accuracy),
                pct(one.test.accuracy),
                num(one.test.mean_energy * 1e12),
                pct(three.train_accuracy),
                pct(three.test.accuracy),
                num(three.test.mean_energy * 1e12),
                pct(one.test.accuracy - three.test.accuracy),
                num(one.test.mean_energy / three.test.mean_energy),
                pct(one.test.tie_rate),
                pct(three.test.tie_rate),
            ]);
        }
    }
    out.csv(
        "classify_metrics.csv",
        &[
            "dataset",
            "kind",
            "train_acc_pct",
            "float_test_acc_pct",
            "test_acc_pct",
            "tie_rate_pct",
            "energy_pJ",
            "n_test",
        ],
        &metric_rows,
    )?;
    if !table_rows.is_empty() {
        out.csv(
            "classification_summary.csv",
            &[
                "dataset",
                "train_acc_1t1r_pct",
                "test_acc_1t1r_pct",
                "energy_1t1r_pJ",
                "train_acc_3t1r_pct",
                "test_acc_3t1r_pct",
                "energy_3t1r_pJ",
                "degradation_pct",
                "energy_improvement_x",
                "tie_rate_1t1r_pct",
                "tie_rate_3t1r_pct",
            ],
            &table_rows,
        )?;
    }
    Ok(json!({
        "ideal": ctx.ideal,
        "program_noise": ctx.program_noise,
        "accounting": ctx.accounting.to_string(),
        "skipped": skipped,
    }))
}

/// Runs the calibration from the current parameters. The config and report
/// are written even when the residual exceeds the bound; the returned flag
/// says whether it did.
pub fn calibrate(
    ctx: &Ctx,
    out: &mut Output,
    write: &Path,
    opts: SearchOptions,
) -> Result<(serde_json::Value, Option<dpe_core::DpeError>)> {
    let targets = CalibrationTargets::reference();
    let outcome = calibrate::calibrate(&targets, &ctx.params, &Param::ALL, opts)?;
    let rows: Vec<Vec<String>> = outcome
        .report
        .iter()
        .map(|r| {
            vec![
                format!("\"{}\"", r.target),
                r.source.clone(),
                sci(r.value),
                sci(r.achieved),
                format!("{:.5}", r.rel_error),
                format!("{}", r.tol),
                r.within_tol.to_string(),
            ]
        })
        .collect();
    out.csv(
        "calibration_report.csv",
        &["target", "source", "value", "achieved", "rel_error", "tol", "within_tol"],
        &rows,
    )?;
    if let Some(parent) = write.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(write, outcome.params.to_toml_string())?;
    if write.starts_with(out.dir()) {
        if let Ok(rel) = write.strip_prefix(out.dir()) {
            out.record(&rel.display().to_string());
        }
    }
    let missed: Vec<&str> = outcome
        .report
        .iter()
        .filter(|r| !r.within_tol)
        .map(|r| r.target.as_str())
        .collect();
    eprintln!(
        "calibration cost {:.4} (bound {:.4}) after {} evaluations; {} of {} targets outside tolerance",
        outcome.cost,
        outcome.bound,
        outcome.evaluations,
        missed.len(),
        outcome.report.len()
    );
    let details = json!({
        "cost": outcome.cost,
        "bound": outcome.bound,
        "evaluations": outcome.evaluations,
        "written_config": write.display().to_string(),
        "written_config_sha256": outcome.params.hash(),
        "targets_missed": missed,
    });
    Ok((details, outcome.check().err()))
}

pub fn compare(ctx: &Ctx, out: &mut Output, r_k: f64) -> Result<serde_json::Value> {
    let p = &ctx.params;
    let read = |kind| cell::read_at(p, kind, r_k * 1e3, &p.nominal(kind));
    let one = read(CellKind::OneT1R)?;
    let three = read(CellKind::ThreeT1R)?;
    let acc = ctx.accounting;
    let current = |r: &dpe_core::ReadResult| match acc {
        Accounting::Full => r.i_in + r.i_out,
        Accounting::FinalStage => r.i_out,
    };
    let row = |metric: &str, unit: &str, a: f64, b: f64| {
        vec![metric.to_string(), unit.to_string(), num(a), num(b), num(a / b)]
    };
    let rows = vec![
        row("read_current", "uA", current(&one) * 1e6, current(&three) * 1e6),
        row("read_voltage", "V", p.read.v_in, p.read.v_in),
        row("supply", "V", one.supply, three.supply),
        row("read_power", "uW", one.power(acc) * 1e6, three.power(acc) * 1e6),
        row("read_energy", "pJ", one.energy(acc) * 1e12, three.energy(acc) * 1e12),
    ];
    out.csv(
        "read_comparison.csv",
        &["metric", "unit", "1t1r", "3t1r", "ratio_1t1r_over_3t1r"],
        &rows,
    )?;
    Ok(json!({ "r_kOhm": r_k, "accounting": acc.to_string() }))
}
