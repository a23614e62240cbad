use super::{split, zscore_fit, Dataset, Samples, SplitIndices, ZScaler};
use crate::Result;

/// Which rows the z-score statistics come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScalerFit {
    /// Training split only; no validation or test statistic leaks in.
    #[default]
    TrainOnly,
    /// Every row, standardizing before the split.
    AllRows,
}

#[derive(Debug, Clone)]
pub struct PreparedSplit {
    pub indices: SplitIndices,
    pub scaler: ZScaler,
    pub train: Samples,
    pub val: Samples,
    pub test: Samples,
}

/// Splits a complete (already imputed) dataset, fits the scaler, and
/// standardizes all three parts with it.
pub fn prepare_split(
    dataset: &Dataset,
    ratios: (f64, f64, f64),
    seed: u64,
    fit: ScalerFit,
) -> Result<PreparedSplit> {
    let all = dataset.to_samples()?;
    let indices = split(&all.y, ratios, seed)?;
    let train_raw = all.subset(&indices.train);
    let scaler = match fit {
        ScalerFit::TrainOnly => zscore_fit(&train_raw.x),
        ScalerFit::AllRows => zscore_fit(&all.x),
    };
    let standardize = |idx: &[usize]| -> Result<Samples> {
        let mut s = all.subset(idx);
        s.x = scaler.apply(&s.x)?;
        Ok(s)
    };
    Ok(PreparedSplit {
        train: standardize(&indices.train)?,
        val: standardize(&indices.val)?,
        test: standardize(&indices.test)?,
        scaler,
        indices,
    })
}
