//! Tabular ingestion and preprocessing: load, impute, split, standardize,
//! and group features into modalities.

mod csv_io;
mod impute;
mod modality;
mod pipeline;
mod scale;
mod split;
mod synthetic;

pub use csv_io::{load_csv, load_csv_with_classes, load_modality_map, write_csv, write_modality_map};
pub use impute::{knn_impute, DEFAULT_KNN_K};
pub use modality::{natural_partition, random_partition};
pub use pipeline::{prepare_split, PreparedSplit, ScalerFit};
pub use scale::{zscore_fit, ZScaler};
pub use split::{split, SplitIndices, DEFAULT_RATIOS};
pub use synthetic::{generate_synthetic, SyntheticData, SyntheticSpec, SyntheticTruth};

use crate::nn::Matrix;
use crate::{Error, Result};

/// One sample: identifier, class index, and raw features (`None` = missing).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub id: String,
    pub label: usize,
    pub features: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<FeatureRecord>,
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        records: Vec<FeatureRecord>,
        feature_names: Vec<String>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::Empty("dataset"));
        }
        for r in &records {
            if r.features.len() != feature_names.len() {
                return Err(Error::dim(
                    "dataset record width",
                    feature_names.len(),
                    r.features.len(),
                ));
            }
            if r.label >= class_names.len() {
                return Err(Error::Label {
                    label: r.label,
                    classes: class_names.len(),
                });
            }
        }
        Ok(Self {
            records,
            feature_names,
            class_names,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.label).collect()
    }

    pub fn missing_count(&self) -> usize {
        self.records
            .iter()
            .map(|r| r.features.iter().filter(|v| v.is_none()).count())
            .sum()
    }

    /// Dense feature matrix plus labels. Fails if any cell is missing.
    pub fn to_samples(&self) -> Result<Samples> {
        let mut data = Vec::with_capacity(self.len() * self.num_features());
        for r in &self.records {
            for (j, v) in r.features.iter().enumerate() {
                data.push(v.ok_or_else(|| {
                    Error::Imputation(format!(
                        "record '{}' still has a missing value in '{}'",
                        r.id, self.feature_names[j]
                    ))
                })?);
            }
        }
        Ok(Samples {
            x: Matrix::from_vec(self.len(), self.num_features(), data)?,
            y: self.labels(),
            ids: self.records.iter().map(|r| r.id.clone()).collect(),
        })
    }
}

/// A complete numeric design matrix with labels and sample ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub x: Matrix,
    pub y: Vec<usize>,
    pub ids: Vec<String>,
}

impl Samples {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> Samples {
        Samples {
            x: self.x.select_rows(indices),
            y: indices.iter().map(|&i| self.y[i]).collect(),
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
        }
    }

    pub fn select_features(&self, cols: &[usize]) -> Samples {
        Samples {
            x: self.x.select_cols(cols),
            y: self.y.clone(),
            ids: self.ids.clone(),
        }
    }
}
