//! Dataset files: a header row naming the features and a final `class`
//! column holding integer labels `0..n_classes`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{DpeError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetName {
    Iris,
    Wine,
    BreastCancer,
    Banknote,
}

impl DatasetName {
    pub const ALL: [DatasetName; 4] = [
        DatasetName::Iris,
        DatasetName::Wine,
        DatasetName::BreastCancer,
        DatasetName::Banknote,
    ];

    pub fn slug(self) -> &'static str {
        match self {
            DatasetName::Iris => "iris",
            DatasetName::Wine => "wine",
            DatasetName::BreastCancer => "breast_cancer",
            DatasetName::Banknote => "banknote",
        }
    }

    pub fn file_name(self) -> String {
        format!("{}.csv", self.slug())
    }

    /// Canonical `(samples, features, classes)`.
    pub fn shape(self) -> (usize, usize, usize) {
        match self {
            DatasetName::Iris => (150, 4, 3),
            DatasetName::Wine => (178, 13, 3),
            DatasetName::BreastCancer => (569, 30, 2),
            DatasetName::Banknote => (1372, 4, 2),
        }
    }
}

impl fmt::Display for DatasetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for DatasetName {
    type Err = DpeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "iris" => Ok(DatasetName::Iris),
            "wine" => Ok(DatasetName::Wine),
            "breast_cancer" | "bc" => Ok(DatasetName::BreastCancer),
            "banknote" => Ok(DatasetName::Banknote),
            other => Err(DpeError::InvalidInput(format!("unknown dataset '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub name: DatasetName,
    pub feature_names: Vec<String>,
    /// One row per sample.
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl RawDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }
}

pub fn load_dataset(name: DatasetName, path: &Path) -> Result<RawDataset> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    parse_dataset(name, &text, &path.display().to_string())
}

/// Parses and validates dataset text against the canonical shape.
pub fn parse_dataset(name: DatasetName, text: &str, source_name: &str) -> Result<RawDataset> {
    let parse_err = |line: usize, message: String| DpeError::Parse {
        source_name: source_name.to_string(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut records = rdr.records();
    let header = match records.next() {
        None => return Err(parse_err(1, "empty file".into())),
        Some(r) => r.map_err(|e| parse_err(1, e.to_string()))?,
    };
    let (n_rows, n_features, n_classes) = name.shape();
    if header.len() != n_features + 1 {
        return Err(DpeError::Schema(format!(
            "{source_name}: header has {} columns, {name} needs {} features plus a class column",
            header.len(),
            n_features
        )));
    }
    if header.get(n_features) != Some("class") {
        return Err(DpeError::Schema(format!(
            "{source_name}: last header column must be 'class'"
        )));
    }
    let feature_names = header.iter().take(n_features).map(str::to_string).collect();
    let mut features = Vec::with_capacity(n_rows);
    let mut labels = Vec::with_capacity(n_rows);
    for (k, rec) in records.enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| parse_err(line, e.to_string()))?;
        if rec.len() != n_features + 1 {
            return Err(DpeError::Schema(format!(
                "{source_name}: line {line} has {} columns, expected {}",
                rec.len(),
                n_features + 1
            )));
        }
        let row = rec
            .iter()
            .take(n_features)
            .map(|f| {
                let v: f64 = f
                    .parse()
                    .map_err(|_| parse_err(line, format!("'{f}' is not a number")))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(parse_err(line, format!("non-finite value '{f}'")))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        let raw = &rec[n_features];
        let label: usize = raw
            .parse()
            .map_err(|_| parse_err(line, format!("class '{raw}' is not a non-negative integer")))?;
        if label >= n_classes {
            return Err(parse_err(
                line,
                format!("class {label} out of range for {n_classes} classes"),
            ));
        }
        features.push(row);
        labels.push(label);
    }
    if features.is_empty() {
        return Err(parse_err(2, "no data rows".into()));
    }
    if features.len() != n_rows {
        return Err(DpeError::Schema(format!(
            "{source_name}: {} rows, canonical {name} has {n_rows}",
            features.len()
        )));
    }
    Ok(RawDataset {
        name,
        feature_names,
        features,
        labels,
        n_classes,
    })
}
