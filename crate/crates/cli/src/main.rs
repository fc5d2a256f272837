//! `dpe`: runs the memristive dot-product-engine experiments and writes CSV
//! results, SVG plots and a run manifest.
// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Result;
use clap::{Parser, Subcommand};

use dpe_core::calibrate::SearchOptions;
use dpe_core::ml::{DatasetName, TrainingTable};
use dpe_core::{Accounting, CellKind, CellParams, DpeError};

use crate::commands::{ClassifyArgs, Ctx};
use crate::output::{parse_grid, Output};

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_DATA: u8 = 4;

#[derive(Parser)]
#[command(name = "dpe", version, about = "Memristive dot-product-engine experiments")]
struct Cli {
    /// Parameter config (TOML); the shipped calibration when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Restrict to one cell kind; both by default.
    #[arg(long, global = true)]
    kind: Option<CellKind>,
    /// READ power accounting: full or final-stage.
    #[arg(long, global = true, default_value = "full")]
    accounting: Accounting,
    /// Linear cells, perfect ADC, no programming noise.
    #[arg(long, global = true)]
    ideal: bool,
    #[arg(long, global = true)]
    no_plot: bool,
    /// Give every programmed cell its own device and LRS draw.
    #[arg(long, global = true)]
    program_noise: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// SET current and power against drive voltage.
    SweepSet {
        /// Drive grid in volts, `start:stop:step` or a comma list.
        #[arg(long, default_value = "0.8:1.2:0.05")]
        drives: String,
    },
    /// READ current, power and energy against resistance.
    SweepRead {
        /// Resistance grid in kOhm.
        #[arg(long, default_value = "5:20:0.5")]
        resistances: String,
    },
    /// READ-current Monte Carlo under transistor mismatch.
    MonteCarlo {
        /// Resistance in kOhm.
        #[arg(long, default_value_t = 9.0)]
        r: f64,
        #[arg(long, default_value_t = 1000)]
        n: usize,
    },
    /// Resistance after one SET pulse against pulse width.
    PulseWidth {
        #[arg(long, default_value = "0.8,1.0,1.2")]
        drives: String,
        /// Pulse widths in seconds.
        #[arg(
            long,
            default_value = "1e-7,3e-7,1e-6,3e-6,1e-5,3e-5,1e-4,3e-4,1e-3"
        )]
        widths: String,
    },
    /// Train, map and evaluate the classifier on the crossbar.
    Classify {
        /// iris, wine, breast_cancer, banknote or all.
        #[arg(long, default_value = "all")]
        dataset: String,
        #[arg(long, default_value = "data")]
        data_dir: PathBuf,
        /// Per-dataset epochs and learning rate (TOML).
        #[arg(long)]
        training: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
    },
    /// Fit the device parameters to the reference targets.
    Calibrate {
        /// Where to write the fitted config; `<out>/calibrated.toml` by default.
        #[arg(long)]
        write: Option<PathBuf>,
        #[arg(long, default_value_t = SearchOptions::default().max_evals)]
        max_evals: usize,
        #[arg(long, default_value_t = SearchOptions::default().restarts)]
        restarts: usize,
    },
    /// READ comparison between the two cells at one resistance.
    Compare {
        /// Resistance in kOhm.
        #[arg(long, default_value_t = 5.0)]
        r: f64,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::SweepSet { .. } => "sweep-set",
            Command::SweepRead { .. } => "sweep-read",
            Command::MonteCarlo { .. } => "monte-carlo",
            Command::PulseWidth { .. } => "pulse-width",
            Command::Classify { .. } => "classify",
            Command::Calibrate { .. } => "calibrate",
            Command::Compare { .. } => "compare",
        }
    }
}

/// Error that already carries its exit code.
#[derive(Debug)]
struct Exit(u8, String);

impl std::fmt::Display for Exit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.1)
    }
}

impl std::error::Error for Exit {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Exit(EXIT_CONFIG, msg.into()).into()
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if let Some(Exit(code, _)) = e.downcast_ref::<Exit>() {
        return *code;
    }
    match e.downcast_ref::<DpeError>() {
        Some(DpeError::Config(_) | DpeError::InvalidInput(_)) => EXIT_CONFIG,
        Some(
            DpeError::NoOperatingPoint { .. }
            | DpeError::CalibrationDiverged { .. }
            | DpeError::NonFinite { .. }
            | DpeError::DegenerateWeights(_)
            | DpeError::TargetUnreachable { .. },
        ) => EXIT_SOLVER,
        Some(DpeError::Parse { .. } | DpeError::Schema(_) | DpeError::Io(_)) => EXIT_DATA,
        None => 1,
    }
}

fn grid(s: &str) -> Result<Vec<f64>> {
    parse_grid(s).map_err(usage)
}

fn run(cli: Cli) -> Result<()> {
    let t0 = Instant::now();
    let (params, source) = match &cli.config {
        Some(p) => (CellParams::load(p)?, p.display().to_string()),
        None => (CellParams::default(), "builtin:config/calibrated.toml".to_string()),
    };
    let ctx = Ctx {
        kinds: cli.kind.map_or_else(|| CellKind::ALL.to_vec(), |k| vec![k]),
        accounting: cli.accounting,
        seed: cli.seed,
        ideal: cli.ideal,
        program_noise: cli.program_noise,
        params,
    };
    let mut out = Output::new(
        &cli.out,
        cli.command.name(),
        cli.seed,
        source,
        ctx.params.hash(),
        !cli.no_plot,
    )?;
    let mut failure = None;
    let details = match &cli.command {
        Command::SweepSet { drives } => commands::sweep_set(&ctx, &mut out, &grid(drives)?)?,
        Command::SweepRead { resistances } => {
            commands::sweep_read(&ctx, &mut out, &grid(resistances)?)?
        }
        Command::MonteCarlo { r, n } => {
            if *n == 0 {
                return Err(usage("--n must be at least 1"));
            }
            commands::monte_carlo(&ctx, &mut out, *r, *n)?
        }
        Command::PulseWidth { drives, widths } => {
            commands::pulse_width(&ctx, &mut out, &grid(drives)?, &grid(widths)?)?
        }
        Command::Classify {
            dataset,
            data_dir,
            training,
            epochs,
            lr,
        } => {
            let (datasets, explicit) = if dataset == "all" {
                (DatasetName::ALL.to_vec(), false)
            } else {
                let names = dataset
                    .split(',')
                    .map(|s| s.trim().parse::<DatasetName>())
                    .collect::<dpe_core::Result<Vec<_>>>()?;
                (names, true)
            };
            let training = match training {
                Some(p) => TrainingTable::load(p)?,
                None => TrainingTable::default(),
            };
            let args = ClassifyArgs {
                datasets,
                explicit,
                data_dir,
                training,
                epochs: *epochs,
                learning_rate: *lr,
            };
            commands::classify(&ctx, &mut out, &args)?
        }
        Command::Calibrate {
            write,
            max_evals,
            restarts,
        } => {
            let path = write.clone().unwrap_or_else(|| out.path("calibrated.toml"));
            let opts = SearchOptions {
                max_evals: *max_evals,
                restarts: *restarts,
                ..SearchOptions::default()
            };
            let (details, err) = commands::calibrate(&ctx, &mut out, &path, opts)?;
            failure = err;
            details
        }
        Command::Compare { r } => commands::compare(&ctx, &mut out, *r)?,
    };
    out.manifest(t0.elapsed().as_secs_f64(), details)?;
    eprintln!("wrote results to {}", out.dir().display());
    match failure {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
