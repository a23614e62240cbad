use rand::Rng;
use rand_distr::{Distribution, Uniform};

use super::{Matrix, Param};
use crate::{Error, Result};

/// Fully connected layer computing `y = W x + b` for every row `x` of the input.
///
/// `weights` is row-major with shape `(out_dim, in_dim)`.
#[derive(Debug, Clone)]
pub struct DenseLayer {
    in_dim: usize,
    out_dim: usize,
    pub weights: Param,
    pub bias: Param,
    cached_input: Option<Matrix>,
}

impl DenseLayer {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: Param::zeros(in_dim * out_dim),
            bias: Param::zeros(out_dim),
            cached_input: None,
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
        let mut layer = Self::zeros(in_dim, out_dim);
        for w in &mut layer.weights.value {
            *w = dist.sample(rng);
        }
        layer
    }

    /// Builds a layer from a weight matrix `[out x in]` and bias vector.
    pub fn from_parts(weights: &Matrix, bias: &[f64]) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(Error::dim("DenseLayer::from_parts", weights.rows(), bias.len()));
        }
        Ok(Self {
            in_dim: weights.cols(),
            out_dim: weights.rows(),
            weights: Param::new(weights.as_slice().to_vec()),
            bias: Param::new(bias.to_vec()),
            cached_input: None,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn weight_matrix(&self) -> Matrix {
        Matrix::from_vec(self.out_dim, self.in_dim, self.weights.value.clone())
            .expect("weight shape invariant")
    }

    pub fn forward(&mut self, x: &Matrix) -> Result<Matrix> {
        let out = self.infer(x)?;
        self.cached_input = Some(x.clone());
        Ok(out)
    }

    /// Forward pass without caching the input.
    pub fn infer(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.in_dim {
            return Err(Error::dim("dense_forward", self.in_dim, x.cols()));
        }
        let w = &self.weights.value;
        let mut out = Matrix::zeros(x.rows(), self.out_dim);
        for (r, xr) in x.iter_rows().enumerate() {
            let orow = out.row_mut(r);
            for (o, slot) in orow.iter_mut().enumerate() {
                let wrow = &w[o * self.in_dim..(o + 1) * self.in_dim];
                *slot = self.bias.value[o] + dot(wrow, xr);
            }
        }
        Ok(out)
    }

    /// Accumulates `dW`, `db` into the parameter gradients and returns `dX`.
    pub fn backward(&mut self, d_out: &Matrix) -> Result<Matrix> {
        let x = self
            .cached_input
            .as_ref()
            .ok_or_else(|| Error::State("dense_backward called before forward".into()))?;
        if d_out.rows() != x.rows() || d_out.cols() != self.out_dim {
            return Err(Error::dim(
                "dense_backward",
                format!("{}x{}", x.rows(), self.out_dim),
                format!("{}x{}", d_out.rows(), d_out.cols()),
            ));
        }
        let mut dx = Matrix::zeros(x.rows(), self.in_dim);
        let w = &self.weights.value;
        for (r, (xr, dr)) in x.iter_rows().zip(d_out.iter_rows()).enumerate() {
            let dxr = dx.row_mut(r);
            for (o, &g) in dr.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                self.bias.grad[o] += g;
                let base = o * self.in_dim;
                let gw = &mut self.weights.grad[base..base + self.in_dim];
                for (gwi, xi) in gw.iter_mut().zip(xr) {
                    *gwi += g * xi;
                }
                for (dxi, wi) in dxr.iter_mut().zip(&w[base..base + self.in_dim]) {
                    *dxi += g * wi;
                }
            }
        }
        Ok(dx)
    }

    pub fn params(&self) -> Vec<&Param> {
        vec![&self.weights, &self.bias]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weights, &mut self.bias]
    }

    pub fn clear_cache(&mut self) {
        self.cached_input = None;
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_passthrough() {
        let mut layer = DenseLayer::from_parts(&Matrix::identity(2), &[0.0, 0.0]).unwrap();
        let x = Matrix::from_rows(&[[3.0, 4.0]]).unwrap();
        assert_eq!(layer.forward(&x).unwrap().row(0), &[3.0, 4.0]);
    }

    #[test]
    fn scalar_affine_and_chain_rule() {
        let w = Matrix::from_rows(&[[2.0]]).unwrap();
        let mut layer = DenseLayer::from_parts(&w, &[1.0]).unwrap();
        let x = Matrix::from_rows(&[[3.0]]).unwrap();
        assert_eq!(layer.forward(&x).unwrap().get(0, 0), 7.0);

        let d_out = Matrix::from_rows(&[[0.5]]).unwrap();
        let dx = layer.backward(&d_out).unwrap();
        assert_eq!(dx.get(0, 0), 2.0 * 0.5);
        assert_eq!(layer.weights.grad[0], 3.0 * 0.5);
        assert_eq!(layer.bias.grad[0], 0.5);
    }

    #[test]
    fn matches_naive_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut layer = DenseLayer::glorot(4, 3, &mut rng);
        layer.bias.value = vec![0.1, -0.2, 0.3];
        let x = Matrix::from_fn(2, 4, |r, c| (r * 4 + c) as f64 * 0.37 - 1.0);
        let out = layer.forward(&x).unwrap();

        let w = layer.weight_matrix();
        for b in 0..2 {
            for o in 0..3 {
                let mut acc = 0.0;
                for i in 0..4 {
                    acc += w.get(o, i) * x.get(b, i);
                }
                acc += layer.bias.value[o];
                assert!((out.get(b, o) - acc).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut layer = DenseLayer::glorot(3, 2, &mut rng);
        let x = Matrix::from_fn(4, 3, |r, c| (r + c) as f64);
        layer.forward(&x).unwrap();
        let dx = layer.backward(&Matrix::zeros(4, 2)).unwrap();
        assert!(dx.as_slice().iter().all(|&v| v == 0.0));
        assert!(layer.weights.grad.iter().all(|&v| v == 0.0));
        assert!(layer.bias.grad.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_before_forward_is_state_error() {
        let mut layer = DenseLayer::zeros(2, 2);
        assert!(matches!(
            layer.backward(&Matrix::zeros(1, 2)),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn input_width_checked() {
        let mut layer = DenseLayer::zeros(3, 2);
        assert!(matches!(
            layer.forward(&Matrix::zeros(1, 2)),
            Err(Error::Dimension { .. })
        ));
    }
}
