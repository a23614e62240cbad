use super::Dataset;
use crate::{Error, Result};

pub const DEFAULT_KNN_K: usize = 5;

/// Replaces each missing cell with the mean of that feature over the `k`
/// nearest records that observe it.
///
/// Distance between two records is Euclidean over the features both observe,
/// scaled by the number of shared features: `sqrt(sum(d^2) / shared)`.
/// Records sharing no features are infinitely far. Ties go to the earlier
/// record. Neighbors are always measured on the original (unimputed) values,
/// and observed cells are never modified. If fewer than `k` records observe
/// a feature, all of them are used.
pub fn knn_impute(dataset: &Dataset, k: usize) -> Result<Dataset> {
    if k == 0 {
        return Err(Error::Config("knn imputation needs k >= 1".into()));
    }
    let d = dataset.num_features();
    for f in 0..d {
        if dataset.records.iter().all(|r| r.features[f].is_none()) {
            return Err(Error::Imputation(format!(
                "feature '{}' is missing in every record",
                dataset.feature_names[f]
            )));
        }
    }

    let mut out = dataset.clone();
    for (i, rec) in dataset.records.iter().enumerate() {
        if rec.features.iter().all(Option::is_some) {
            continue;
        }
        let mut neighbors: Vec<(f64, usize)> = dataset
            .records
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(j, other)| (masked_distance(&rec.features, &other.features), j))
            .collect();
        neighbors.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        for f in 0..d {
            if rec.features[f].is_some() {
                continue;
            }
            let values: Vec<f64> = neighbors
                .iter()
                .filter_map(|&(_, j)| dataset.records[j].features[f])
                .take(k)
                .collect();
            // every feature is observed somewhere; if only in this record it
            // would not be missing here
            debug_assert!(!values.is_empty());
            out.records[i].features[f] = Some(values.iter().sum::<f64>() / values.len() as f64);
        }
    }
    Ok(out)
}

fn masked_distance(a: &[Option<f64>], b: &[Option<f64>]) -> f64 {
    let mut shared = 0usize;
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        if let (Some(x), Some(y)) = (x, y) {
            shared += 1;
            acc += (x - y) * (x - y);
        }
    }
    if shared == 0 {
        f64::INFINITY
    } else {
        (acc / shared as f64).sqrt()
    }
}
