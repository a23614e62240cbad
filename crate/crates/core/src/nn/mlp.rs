use rand::Rng;

use super::{BatchNormLayer, DenseLayer, LeakyRelu, Matrix, Mode, Param};
use crate::{Error, Result};

/// Hyperparameters shared by every feed-forward stack in a model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerHyper {
    pub leaky_slope: f64,
    pub bn_epsilon: f64,
    pub bn_momentum: f64,
}

impl Default for LayerHyper {
    fn default() -> Self {
        Self {
            leaky_slope: super::DEFAULT_LEAKY_SLOPE,
            bn_epsilon: super::DEFAULT_BN_EPSILON,
            bn_momentum: super::DEFAULT_BN_MOMENTUM,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Layer {
    Dense(DenseLayer),
    BatchNorm(BatchNormLayer),
    LeakyRelu(LeakyRelu),
}

impl Layer {
    fn forward(&mut self, x: &Matrix) -> Result<Matrix> {
        match self {
            Layer::Dense(l) => l.forward(x),
            Layer::BatchNorm(l) => l.forward(x),
            Layer::LeakyRelu(l) => Ok(l.forward(x)),
        }
    }

    fn infer(&self, x: &Matrix) -> Result<Matrix> {
        match self {
            Layer::Dense(l) => l.infer(x),
            Layer::BatchNorm(l) => l.infer(x),
            Layer::LeakyRelu(l) => Ok(l.infer(x)),
        }
    }

    fn backward(&mut self, d: &Matrix) -> Result<Matrix> {
        match self {
            Layer::Dense(l) => l.backward(d),
            Layer::BatchNorm(l) => l.backward(d),
            Layer::LeakyRelu(l) => l.backward(d),
        }
    }
}

/// A sequential stack of layers with manual backpropagation.
#[derive(Debug, Clone)]
pub struct Mlp {
    layers: Vec<Layer>,
    in_dim: usize,
    out_dim: usize,
}

impl Mlp {
    /// Validates that consecutive layer widths chain.
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        let mut in_dim = None;
        let mut width: Option<usize> = None;
        for layer in &layers {
            let (expects, produces) = match layer {
                Layer::Dense(d) => (Some(d.in_dim()), Some(d.out_dim())),
                Layer::BatchNorm(b) => (Some(b.dim()), Some(b.dim())),
                Layer::LeakyRelu(_) => (None, None),
            };
            if let Some(e) = expects {
                match width {
                    Some(w) if w != e => return Err(Error::dim("mlp layer chain", w, e)),
                    None => {
                        in_dim.get_or_insert(e);
                    }
                    _ => {}
                }
            }
            if produces.is_some() {
                width = produces;
            }
        }
        match (in_dim, width) {
            (Some(in_dim), Some(out_dim)) => Ok(Self {
                layers,
                in_dim,
                out_dim,
            }),
            _ => Err(Error::Config("an mlp needs at least one sized layer".into())),
        }
    }

    /// `dense -> batchnorm -> leaky relu` for each hidden width, then a final dense layer.
    pub fn feedforward<R: Rng + ?Sized>(
        in_dim: usize,
        hidden: &[usize],
        out_dim: usize,
        hyper: LayerHyper,
        rng: &mut R,
    ) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 || hidden.contains(&0) {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        let mut layers = Vec::with_capacity(hidden.len() * 3 + 1);
        let mut prev = in_dim;
        for &h in hidden {
            layers.push(Layer::Dense(DenseLayer::glorot(prev, h, rng)));
            layers.push(Layer::BatchNorm(BatchNormLayer::new(
                h,
                hyper.bn_epsilon,
                hyper.bn_momentum,
            )?));
            layers.push(Layer::LeakyRelu(LeakyRelu::new(hyper.leaky_slope)?));
            prev = h;
        }
        layers.push(Layer::Dense(DenseLayer::glorot(prev, out_dim, rng)));
        Self::new(layers)
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    /// Widths of the hidden dense layers (every dense output except the last).
    pub fn hidden_sizes(&self) -> Vec<usize> {
        let dense: Vec<usize> = self
            .layers
            .iter()
            .filter_map(|l| match l {
                Layer::Dense(d) => Some(d.out_dim()),
                _ => None,
            })
            .collect();
        dense[..dense.len() - 1].to_vec()
    }

    pub fn forward(&mut self, x: &Matrix) -> Result<Matrix> {
        let mut h = x.clone();
        for layer in &mut self.layers {
            h = layer.forward(&h)?;
        }
        Ok(h)
    }

    /// Stateless inference-mode pass (batch norm uses running statistics).
    pub fn infer(&self, x: &Matrix) -> Result<Matrix> {
        let mut h = x.clone();
        for layer in &self.layers {
            h = layer.infer(&h)?;
        }
        Ok(h)
    }

    /// Accumulates parameter gradients and returns the gradient w.r.t. the input.
    pub fn backward(&mut self, d_out: &Matrix) -> Result<Matrix> {
        let mut d = d_out.clone();
        for layer in self.layers.iter_mut().rev() {
            d = layer.backward(&d)?;
        }
        Ok(d)
    }

    pub fn set_mode(&mut self, mode: Mode) {
        for layer in &mut self.layers {
            if let Layer::BatchNorm(b) = layer {
                b.set_mode(mode);
            }
        }
    }

    pub fn params(&self) -> Vec<&Param> {
        self.layers
            .iter()
            .flat_map(|l| match l {
                Layer::Dense(d) => d.params(),
                Layer::BatchNorm(b) => b.params(),
                Layer::LeakyRelu(_) => Vec::new(),
            })
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        self.layers
            .iter_mut()
            .flat_map(|l| match l {
                Layer::Dense(d) => d.params_mut(),
                Layer::BatchNorm(b) => b.params_mut(),
                Layer::LeakyRelu(_) => Vec::new(),
            })
            .collect()
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().into_iter().for_each(Param::zero_grad);
    }

    pub fn fingerprint(&self) -> u64 {
        super::fingerprint(self.params())
    }

    pub fn clear_caches(&mut self) {
        for layer in &mut self.layers {
            match layer {
                Layer::Dense(d) => d.clear_cache(),
                Layer::BatchNorm(b) => b.clear_cache(),
                Layer::LeakyRelu(a) => a.clear_cache(),
            }
        }
    }

    /// Every stored tensor (parameters and batch-norm running statistics) with a
    /// stable name such as `dense1.weights` or `bn1.running_var`, and its shape.
    pub fn named_tensors(&self) -> Vec<(String, (usize, usize), Vec<f64>)> {
        let mut out = Vec::new();
        let (mut nd, mut nb) = (0, 0);
        for layer in &self.layers {
            match layer {
                Layer::Dense(d) => {
                    nd += 1;
                    out.push((
                        format!("dense{nd}.weights"),
                        (d.out_dim(), d.in_dim()),
                        d.weights.value.clone(),
                    ));
                    out.push((format!("dense{nd}.bias"), (1, d.out_dim()), d.bias.value.clone()));
                }
                Layer::BatchNorm(b) => {
                    nb += 1;
                    let s = (1, b.dim());
                    out.push((format!("bn{nb}.gamma"), s, b.gamma.value.clone()));
                    out.push((format!("bn{nb}.beta"), s, b.beta.value.clone()));
                    out.push((format!("bn{nb}.running_mean"), s, b.running_mean.clone()));
                    out.push((format!("bn{nb}.running_var"), s, b.running_var.clone()));
                }
                Layer::LeakyRelu(_) => {}
            }
        }
        out
    }

    /// Mutable views matching [`Mlp::named_tensors`], in the same order.
    pub fn named_tensors_mut(&mut self) -> Vec<(String, &mut Vec<f64>)> {
        let mut out = Vec::new();
        let (mut nd, mut nb) = (0, 0);
        for layer in &mut self.layers {
            match layer {
                Layer::Dense(d) => {
                    nd += 1;
                    out.push((format!("dense{nd}.weights"), &mut d.weights.value));
                    out.push((format!("dense{nd}.bias"), &mut d.bias.value));
                }
                Layer::BatchNorm(b) => {
                    nb += 1;
                    out.push((format!("bn{nb}.gamma"), &mut b.gamma.value));
                    out.push((format!("bn{nb}.beta"), &mut b.beta.value));
                    out.push((format!("bn{nb}.running_mean"), &mut b.running_mean));
                    out.push((format!("bn{nb}.running_var"), &mut b.running_var));
                }
                Layer::LeakyRelu(_) => {}
            }
        }
        out
    }
}
