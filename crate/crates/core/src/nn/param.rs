use std::hash::{Hash, Hasher};

/// A trainable tensor together with its accumulated gradient.
///
/// Values are stored flat; the owning layer knows the shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
}

impl Param {
    pub fn new(value: Vec<f64>) -> Self {
        let grad = vec![0.0; value.len()];
        Self { value, grad }
    }

    pub fn zeros(len: usize) -> Self {
        Self::new(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }
}

/// Hashes the exact bit patterns of a set of parameter values.
pub fn fingerprint<'a>(params: impl IntoIterator<Item = &'a Param>) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    for p in params {
        p.value.len().hash(&mut h);
        for v in &p.value {
            v.to_bits().hash(&mut h);
        }
    }
    h.finish()
}
