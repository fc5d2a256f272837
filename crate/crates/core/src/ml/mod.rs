//! Classification harness: datasets, one-hot bin encoding, single-layer
//! training, weight-to-conductance mapping, and crossbar evaluation.

pub mod dataset;
pub mod encode;
pub mod evaluate;
pub mod hyper;
pub mod mapping;
pub mod train;

pub use dataset::{load_dataset, DatasetName, RawDataset};
pub use encode::{encode, EncodedDataset, Split};
pub use evaluate::{deploy, evaluate, prepare, run_classification, ClassifyOptions, ClassifyOutcome, Metrics};
pub use hyper::{Hyperparameters, TrainingTable};
pub use mapping::{map_to_conductance, ConductanceMap};
pub use train::{train, TrainConfig, TrainedModel};
