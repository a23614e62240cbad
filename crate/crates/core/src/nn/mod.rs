//! Dense network substrate with exact analytic gradients.
//!
//! Layers cache what they need during `forward` and accumulate parameter
//! gradients during `backward`; callers zero gradients between updates.

mod activation;
mod adam;
mod batchnorm;
mod dense;
mod loss;
mod matrix;
mod mlp;
mod param;

pub use activation::{leaky_relu_forward, LeakyRelu, DEFAULT_LEAKY_SLOPE};
pub use adam::{AdamConfig, AdamState};
pub use batchnorm::{BatchNormLayer, Mode, DEFAULT_BN_EPSILON, DEFAULT_BN_MOMENTUM};
pub use dense::DenseLayer;
pub use loss::{argmax, softmax, softmax_cross_entropy};
pub use matrix::Matrix;
pub use mlp::{Layer, LayerHyper, Mlp};
pub use param::{fingerprint, Param};
