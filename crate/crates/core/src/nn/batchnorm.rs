use super::{Matrix, Param};
use crate::{Error, Result};

pub const DEFAULT_BN_EPSILON: f64 = 1e-5;
pub const DEFAULT_BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Normalize with batch statistics and update the running averages.
    Train,
    /// Normalize with the running averages.
    Inference,
    /// Normalize with batch statistics but leave the running averages alone.
    /// Used for loss bookkeeping over whole datasets.
    BatchStats,
}

#[derive(Debug, Clone)]
struct Cache {
    x_hat: Matrix,
    inv_std: Vec<f64>,
}

/// Per-column batch normalization with learnable scale (`gamma`) and shift (`beta`).
#[derive(Debug, Clone)]
pub struct BatchNormLayer {
    dim: usize,
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    epsilon: f64,
    momentum: f64,
    mode: Mode,
    cache: Option<Cache>,
}

impl BatchNormLayer {
    pub fn new(dim: usize, epsilon: f64, momentum: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::Config(format!("batch norm epsilon must be > 0, got {epsilon}")));
        }
        if !(momentum > 0.0 && momentum < 1.0) {
            return Err(Error::Config(format!(
                "batch norm momentum must lie in (0, 1), got {momentum}"
            )));
        }
        Ok(Self {
            dim,
            gamma: Param::new(vec![1.0; dim]),
            beta: Param::zeros(dim),
            running_mean: vec![0.0; dim],
            running_var: vec![1.0; dim],
            epsilon,
            momentum,
            mode: Mode::Train,
            cache: None,
        })
    }

    pub fn with_defaults(dim: usize) -> Self {
        Self::new(dim, DEFAULT_BN_EPSILON, DEFAULT_BN_MOMENTUM).expect("default constants valid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn momentum(&self) -> f64 {
        self.momentum
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    pub fn forward(&mut self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.dim {
            return Err(Error::dim("batchnorm_forward", self.dim, x.cols()));
        }
        match self.mode {
            Mode::Inference => {
                self.cache = None;
                Ok(self.normalize_with(x, &self.running_mean.clone(), &self.inference_inv_std()))
            }
            Mode::Train | Mode::BatchStats => {
                let n = x.rows();
                if n < 2 {
                    return Err(Error::BatchTooSmall(n));
                }
                let mean = x.column_means();
                let var = x.column_variances(&mean);
                let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.epsilon).sqrt()).collect();
                if self.mode == Mode::Train {
                    let unbiased = n as f64 / (n - 1) as f64;
                    for j in 0..self.dim {
                        self.running_mean[j] =
                            (1.0 - self.momentum) * self.running_mean[j] + self.momentum * mean[j];
                        self.running_var[j] = (1.0 - self.momentum) * self.running_var[j]
                            + self.momentum * var[j] * unbiased;
                    }
                }
                let x_hat = Matrix::from_fn(n, self.dim, |r, c| (x.get(r, c) - mean[c]) * inv_std[c]);
                let out = self.affine(&x_hat);
                self.cache = Some(Cache { x_hat, inv_std });
                Ok(out)
            }
        }
    }

    /// Inference-mode forward that does not touch any state.
    pub fn infer(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.dim {
            return Err(Error::dim("batchnorm_forward", self.dim, x.cols()));
        }
        Ok(self.normalize_with(x, &self.running_mean, &self.inference_inv_std()))
    }

    fn inference_inv_std(&self) -> Vec<f64> {
        self.running_var
            .iter()
            .map(|v| 1.0 / (v + self.epsilon).sqrt())
            .collect()
    }

    fn normalize_with(&self, x: &Matrix, mean: &[f64], inv_std: &[f64]) -> Matrix {
        let x_hat = Matrix::from_fn(x.rows(), self.dim, |r, c| (x.get(r, c) - mean[c]) * inv_std[c]);
        self.affine(&x_hat)
    }

    fn affine(&self, x_hat: &Matrix) -> Matrix {
        Matrix::from_fn(x_hat.rows(), self.dim, |r, c| {
            self.gamma.value[c] * x_hat.get(r, c) + self.beta.value[c]
        })
    }

    pub fn backward(&mut self, d_out: &Matrix) -> Result<Matrix> {
        let cache = self.cache.as_ref().ok_or_else(|| {
            Error::State("batchnorm backward requires a train-mode forward pass".into())
        })?;
        let n = cache.x_hat.rows();
        if d_out.rows() != n || d_out.cols() != self.dim {
            return Err(Error::dim(
                "batchnorm_backward",
                format!("{n}x{}", self.dim),
                format!("{}x{}", d_out.rows(), d_out.cols()),
            ));
        }
        let nf = n as f64;
        let mut dx = Matrix::zeros(n, self.dim);
        for c in 0..self.dim {
            let g = self.gamma.value[c];
            let mut sum_dy = 0.0;
            let mut sum_dy_xhat = 0.0;
            for r in 0..n {
                let dy = d_out.get(r, c);
                sum_dy += dy;
                sum_dy_xhat += dy * cache.x_hat.get(r, c);
            }
            self.beta.grad[c] += sum_dy;
            self.gamma.grad[c] += sum_dy_xhat;
            // d x_hat = dy * gamma; sums over d x_hat are gamma times the sums above.
            let scale = g * cache.inv_std[c] / nf;
            for r in 0..n {
                let dy = d_out.get(r, c);
                let v = scale * (nf * dy - sum_dy - cache.x_hat.get(r, c) * sum_dy_xhat);
                dx.set(r, c, v);
            }
        }
        Ok(dx)
    }

    pub fn params(&self) -> Vec<&Param> {
        vec![&self.gamma, &self.beta]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.gamma, &mut self.beta]
    }

    pub fn clear_cache(&mut self) {
        self.cache = None;
    }
}
