use super::Matrix;
use crate::{Error, Result};

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

/// Elementwise `x` for `x >= 0`, `slope * x` otherwise.
pub fn leaky_relu_forward(x: &Matrix, slope: f64) -> Matrix {
    x.map(|v| if v >= 0.0 { v } else { slope * v })
}

#[derive(Debug, Clone)]
pub struct LeakyRelu {
    slope: f64,
    cached_input: Option<Matrix>,
}

impl LeakyRelu {
    pub fn new(slope: f64) -> Result<Self> {
        if !(slope > 0.0 && slope < 1.0) {
            return Err(Error::Config(format!(
                "leaky relu slope must lie in (0, 1), got {slope}"
            )));
        }
        Ok(Self {
            slope,
            cached_input: None,
        })
    }

    pub fn slope(&self) -> f64 {
        self.slope
    }

    pub fn forward(&mut self, x: &Matrix) -> Matrix {
        self.cached_input = Some(x.clone());
        leaky_relu_forward(x, self.slope)
    }

    pub fn infer(&self, x: &Matrix) -> Matrix {
        leaky_relu_forward(x, self.slope)
    }

    pub fn backward(&mut self, d_out: &Matrix) -> Result<Matrix> {
        let x = self
            .cached_input
            .as_ref()
            .ok_or_else(|| Error::State("leaky_relu backward called before forward".into()))?;
        if x.shape() != d_out.shape() {
            return Err(Error::dim(
                "leaky_relu_backward",
                format!("{:?}", x.shape()),
                format!("{:?}", d_out.shape()),
            ));
        }
        let data = x
            .as_slice()
            .iter()
            .zip(d_out.as_slice())
            .map(|(&xi, &g)| if xi >= 0.0 { g } else { self.slope * g })
            .collect();
        Matrix::from_vec(x.rows(), x.cols(), data)
    }

    pub fn clear_cache(&mut self) {
        self.cached_input = None;
    }
}
