use serde::{Deserialize, Serialize};

use super::Param;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

/// Adam moments for one group of parameters. Moment buffers are sized on the
/// first step and the parameter list must keep the same layout afterwards.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
    step_count: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
            step_count: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn first_moment(&self) -> &[Vec<f64>] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[Vec<f64>] {
        &self.second_moment
    }

    /// Applies one bias-corrected Adam update using each parameter's `grad`.
    ///
    /// Fails without touching anything if any gradient is non-finite.
    pub fn step(&mut self, params: &mut [&mut Param]) -> Result<()> {
        if self.first_moment.is_empty() && self.step_count == 0 {
            self.first_moment = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.second_moment = self.first_moment.clone();
        }
        if self.first_moment.len() != params.len()
            || params
                .iter()
                .zip(&self.first_moment)
                .any(|(p, m)| p.len() != m.len() || p.grad.len() != p.len())
        {
            return Err(Error::dim(
                "adam_step",
                format!("{} parameter tensors", self.first_moment.len()),
                format!("{} parameter tensors with other shapes", params.len()),
            ));
        }
        if params.iter().any(|p| p.grad.iter().any(|g| !g.is_finite())) {
            return Err(Error::NonFinite("gradient passed to Adam".into()));
        }

        self.step_count += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step_count as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for ((p, m), v) in params
            .iter_mut()
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            for i in 0..p.value.len() {
                let g = p.grad[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p.value[i] -= lr * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = Param::new(vec![0.25, -1.5, 3.0]);
        let before = p.value.clone();
        let mut adam = AdamState::new(AdamConfig::default());
        adam.step(&mut [&mut p]).unwrap();
        assert_eq!(
            before.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            p.value.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = Param::new(vec![1.0, 1.0]);
        p.grad = vec![0.3, -7.0];
        let mut adam = AdamState::new(AdamConfig::default());
        adam.step(&mut [&mut p]).unwrap();
        // m_hat = g, v_hat = g^2, so the step is lr * |g| / (|g| + eps)
        assert!((1.0 - p.value[0] - 1e-3 * 0.3 / (0.3 + 1e-8)).abs() < 1e-15);
        assert!((p.value[1] - 1.0 - 1e-3 * 7.0 / (7.0 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn three_steps_on_square_match_hand_unroll() {
        // f(w) = w^2, grad 2w, w0 = 1
        let (lr, b1, b2, eps) = (1e-3, 0.9, 0.999, 1e-8);
        let mut w = 1.0f64;
        let (mut m, mut v) = (0.0f64, 0.0f64);
        let g1 = 2.0 * w;
        m = b1 * m + (1.0 - b1) * g1;
        v = b2 * v + (1.0 - b2) * g1 * g1;
        w -= lr * (m / (1.0 - b1)) / ((v / (1.0 - b2)).sqrt() + eps);
        let g2 = 2.0 * w;
        m = b1 * m + (1.0 - b1) * g2;
        v = b2 * v + (1.0 - b2) * g2 * g2;
        w -= lr * (m / (1.0 - b1 * b1)) / ((v / (1.0 - b2 * b2)).sqrt() + eps);
        let g3 = 2.0 * w;
        m = b1 * m + (1.0 - b1) * g3;
        v = b2 * v + (1.0 - b2) * g3 * g3;
        w -= lr * (m / (1.0 - b1 * b1 * b1)) / ((v / (1.0 - b2 * b2 * b2)).sqrt() + eps);

        let mut p = Param::new(vec![1.0]);
        let mut adam = AdamState::new(AdamConfig::default());
        for _ in 0..3 {
            p.grad[0] = 2.0 * p.value[0];
            adam.step(&mut [&mut p]).unwrap();
        }
        assert!((p.value[0] - w).abs() < 1e-15, "{} vs {w}", p.value[0]);
        assert_eq!(adam.step_count(), 3);
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut p = Param::new(vec![1.0]);
        p.grad[0] = f64::NAN;
        let mut adam = AdamState::new(AdamConfig::default());
        assert!(matches!(adam.step(&mut [&mut p]), Err(Error::NonFinite(_))));
        assert_eq!(p.value[0], 1.0);
        assert_eq!(adam.step_count(), 0);
    }

    #[test]
    fn second_moment_stays_non_negative() {
        let mut p = Param::new(vec![0.0; 4]);
        let mut adam = AdamState::new(AdamConfig::default());
        for k in 0..20 {
            p.grad = vec![(k as f64).sin(), -1.0, 0.0, 1e3];
            adam.step(&mut [&mut p]).unwrap();
        }
        assert!(adam.second_moment()[0].iter().all(|&v| v >= 0.0));
    }
}
