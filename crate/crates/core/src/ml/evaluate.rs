//! End-to-end classification on a programmed crossbar.

use rayon::prelude::*;
use serde::Serialize;

use crate::dpe::{Adc, ArrayConfig, Crossbar, CurrentModel, ReadLut};
use crate::error::Result;
use crate::ml::dataset::RawDataset;
use crate::ml::encode::{encode, EncodedDataset};
use crate::ml::mapping::{map_to_conductance, ConductanceMap};
use crate::ml::train::{train, TrainConfig, TrainedModel};
use crate::params::CellParams;
use crate::solver::CellKind;

pub const DEFAULT_BINS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassifyOptions {
    pub bins: usize,
    /// Drives the split, weight initialization, programming noise and tie
    /// breaks.
    pub seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub array: ArrayConfig,
    pub program_noise: bool,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            bins: DEFAULT_BINS,
            seed: 0,
            epochs: t.epochs,
            learning_rate: t.learning_rate,
            array: ArrayConfig::default(),
            program_noise: false,
        }
    }
}

impl ClassifyOptions {
    /// Linear `I = G V` cells, perfect ADC, no programming noise.
    pub fn ideal(self) -> Self {
        Self {
            array: ArrayConfig {
                adc: Adc::perfect(),
                current_model: CurrentModel::IdealLinear,
                ..self.array
            },
            program_noise: false,
            ..self
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            seed: self.seed,
            ..TrainConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub n: usize,
    pub accuracy: f64,
    pub tie_rate: f64,
    /// Mean READ energy per inference (J).
    pub mean_energy: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

/// Runs every sample in `indices` through the crossbar.
pub fn evaluate(xb: &Crossbar, enc: &EncodedDataset, indices: &[usize], seed: u64) -> Result<Metrics> {
    let results = indices
        .par_iter()
        .map(|&i| xb.infer(&enc.x[i], seed, i as u64))
        .collect::<Result<Vec<_>>>()?;
    let n = indices.len();
    let mut confusion = vec![vec![0usize; enc.n_classes]; enc.n_classes];
    let (mut hits, mut ties, mut energy) = (0usize, 0usize, 0.0);
    for (&i, r) in indices.iter().zip(&results) {
        let y = enc.labels[i];
        confusion[y][r.winner] += 1;
        hits += usize::from(r.winner == y);
        ties += usize::from(r.tie);
        energy += r.energy;
    }
    let denom = n.max(1) as f64;
    Ok(Metrics {
        n,
        accuracy: hits as f64 / denom,
        tie_rate: ties as f64 / denom,
        mean_energy: energy / denom,
        confusion,
    })
}

#[derive(Debug, Clone)]
pub struct ClassifyOutcome {
    pub kind: CellKind,
    /// Floating-point model accuracy on the training split.
    pub train_accuracy: f64,
    /// Floating-point model accuracy on the test split.
    pub float_test_accuracy: f64,
    /// Hardware metrics on the test split.
    pub test: Metrics,
    pub map: ConductanceMap,
    pub crossbar: Crossbar,
}

/// Encodes and trains once; the result can be deployed on several cells.
pub fn prepare(ds: &RawDataset, opts: &ClassifyOptions) -> Result<(EncodedDataset, TrainedModel)> {
    let enc = encode(ds, opts.bins, opts.seed)?;
    let model = train(&enc, opts.train_config())?;
    Ok((enc, model))
}

pub fn deploy(
    params: &CellParams,
    kind: CellKind,
    enc: &EncodedDataset,
    model: &TrainedModel,
    opts: &ClassifyOptions,
) -> Result<ClassifyOutcome> {
    let map = map_to_conductance(model)?;
    let slope = match opts.array.current_model {
        CurrentModel::IdealLinear => params.read.v_in,
        CurrentModel::Circuit => ReadLut::build(params, kind)?.secant_slope(),
    };
    let crossbar = Crossbar::program(
        params,
        kind,
        &map.resistance,
        map.bias_currents(slope),
        opts.array,
        opts.program_noise,
        opts.seed,
    )?;
    let test = evaluate(&crossbar, enc, &enc.split.test, opts.seed)?;
    let dense = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<usize>) {
        (idx.iter().map(|&i| enc.dense(i)).collect(), idx.iter().map(|&i| enc.labels[i]).collect())
    };
    let (xtr, ytr) = dense(&enc.split.train);
    let (xte, yte) = dense(&enc.split.test);
    Ok(ClassifyOutcome {
        kind,
        train_accuracy: model.accuracy(&xtr, &ytr),
        float_test_accuracy: model.accuracy(&xte, &yte),
        test,
        map,
        crossbar,
    })
}

pub fn run_classification(
    params: &CellParams,
    kind: CellKind,
    ds: &RawDataset,
    opts: &ClassifyOptions,
) -> Result<ClassifyOutcome> {
    let (enc, model) = prepare(ds, opts)?;
    deploy(params, kind, &enc, &model, opts)
}
