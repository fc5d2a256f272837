//! Seeded train/test split and equal-width one-hot bin encoding.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{DpeError, Result};
use crate::ml::dataset::{DatasetName, RawDataset};

pub const TRAIN_FRACTION: f64 = 0.7;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded shuffle, then the first `floor(0.7 n)` indices train.
pub fn split(n: usize, seed: u64) -> Split {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (TRAIN_FRACTION * n as f64).floor() as usize;
    let test = idx.split_off(n_train);
    Split { train: idx, test }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedDataset {
    pub name: DatasetName,
    pub bins: usize,
    pub n_features: usize,
    pub n_classes: usize,
    /// One spike vector of width `n_features * bins` per sample; feature
    /// `f`, bin `k` sits at index `f * bins + k`.
    pub x: Vec<Vec<bool>>,
    pub labels: Vec<usize>,
    /// `bins + 1` edges per feature, from the training split.
    pub edges: Vec<Vec<f64>>,
    pub split: Split,
    /// Features that are constant on the training split (always bin 0).
    pub degenerate: Vec<usize>,
}

impl EncodedDataset {
    pub fn width(&self) -> usize {
        self.n_features * self.bins
    }

    pub fn dense(&self, sample: usize) -> Vec<f64> {
        self.x[sample].iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }
}

/// Bin index of `v` for a feature with training range `[lo, hi]`.
pub fn bin_of(v: f64, lo: f64, hi: f64, bins: usize) -> usize {
    let width = (hi - lo) / bins as f64;
    if !(width > 0.0) {
        return 0;
    }
    let k = ((v - lo) / width).floor();
    if k < 0.0 {
        0
    } else {
        (k as usize).min(bins - 1)
    }
}

pub fn encode(ds: &RawDataset, bins: usize, split_seed: u64) -> Result<EncodedDataset> {
    if bins < 2 {
        return Err(DpeError::InvalidInput(format!("need at least 2 bins, got {bins}")));
    }
    if ds.is_empty() {
        return Err(DpeError::InvalidInput("empty dataset".into()));
    }
    let sp = split(ds.len(), split_seed);
    let nf = ds.n_features();
    let mut ranges = Vec::with_capacity(nf);
    let mut degenerate = Vec::new();
    for f in 0..nf {
        let vals = sp.train.iter().map(|&i| ds.features[i][f]);
        let lo = vals.clone().fold(f64::INFINITY, f64::min);
        let hi = vals.fold(f64::NEG_INFINITY, f64::max);
        if !(hi > lo) {
            log::warn!(
                "{}: feature {} ('{}') is constant on the training split; encoded as bin 0",
                ds.name,
                f,
                ds.feature_names[f]
            );
            degenerate.push(f);
        }
        ranges.push((lo, hi));
    }
    let edges = ranges
        .iter()
        .map(|&(lo, hi)| {
            (0..=bins)
                .map(|k| lo + (hi - lo) * k as f64 / bins as f64)
                .collect()
        })
        .collect();
    let x = ds
        .features
        .iter()
        .map(|row| {
            let mut spikes = vec![false; nf * bins];
            for (f, &v) in row.iter().enumerate() {
                let (lo, hi) = ranges[f];
                spikes[f * bins + bin_of(v, lo, hi, bins)] = true;
            }
            spikes
        })
        .collect();
    Ok(EncodedDataset {
        name: ds.name,
        bins,
        n_features: nf,
        n_classes: ds.n_classes,
        x,
        labels: ds.labels.clone(),
        edges,
        split: sp,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy(rows: Vec<Vec<f64>>) -> RawDataset {
        let n = rows.len();
        RawDataset {
            name: DatasetName::Iris,
            feature_names: (0..rows[0].len()).map(|k| format!("f{k}")).collect(),
            labels: (0..n).map(|i| i % 3).collect(),
            features: rows,
            n_classes: 3,
        }
    }

    #[test]
    fn split_sizes() {
        for (n, test) in [(150, 45), (178, 54), (569, 171), (1372, 412)] {
            let s = split(n, 7);
            assert_eq!(s.test.len(), test);
            let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn training_min_lands_in_bin_zero_and_max_in_last() {
        assert_eq!(bin_of(1.0, 1.0, 5.0, 4), 0);
        assert_eq!(bin_of(5.0, 1.0, 5.0, 4), 3);
        assert_eq!(bin_of(-10.0, 1.0, 5.0, 4), 0);
        assert_eq!(bin_of(10.0, 1.0, 5.0, 4), 3);
        assert_eq!(bin_of(3.0, 1.0, 5.0, 4), 2);
    }

    #[test]
    fn constant_feature_is_bin_zero() {
        let ds = toy((0..10).map(|i| vec![i as f64, 2.5]).collect());
        let enc = encode(&ds, 4, 1).unwrap();
        assert_eq!(enc.degenerate, vec![1]);
        assert!(enc.x.iter().all(|s| s[4]));
    }

    #[test]
    fn one_bin_is_rejected() {
        let ds = toy(vec![vec![1.0], vec![2.0]]);
        assert!(encode(&ds, 1, 0).is_err());
    }

    proptest! {
        #[test]
        fn spike_count_equals_feature_count(
            rows in proptest::collection::vec(proptest::collection::vec(-1e3f64..1e3, 3), 4..40),
            seed in any::<u64>(),
        ) {
            let ds = toy(rows);
            let enc = encode(&ds, 4, seed).unwrap();
            prop_assert_eq!(enc.width(), 12);
            for s in &enc.x {
                prop_assert_eq!(s.iter().filter(|&&b| b).count(), 3);
                for f in 0..3 {
                    prop_assert_eq!(s[f * 4..f * 4 + 4].iter().filter(|&&b| b).count(), 1);
                }
            }
        }
    }
}
