use crate::nn::Matrix;
use crate::{Error, Result};

/// Per-feature standardization `(x - mean) / std`. Features whose standard
/// deviation is zero map to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ZScaler {
    pub mean: Vec<f64>,
    /// Population standard deviation of each feature on the fitted data.
    pub std: Vec<f64>,
}

/// Fits a scaler on a complete design matrix.
pub fn zscore_fit(x: &Matrix) -> ZScaler {
    let mean = x.column_means();
    let std = x.column_variances(&mean).into_iter().map(f64::sqrt).collect();
    ZScaler { mean, std }
}

impl ZScaler {
    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.mean.len() {
            return Err(Error::dim("zscore_apply", self.mean.len(), x.cols()));
        }
        Ok(Matrix::from_fn(x.rows(), x.cols(), |r, c| {
            let s = self.std[c];
            if s > 0.0 {
                (x.get(r, c) - self.mean[c]) / s
            } else {
                0.0
            }
        }))
    }
}
