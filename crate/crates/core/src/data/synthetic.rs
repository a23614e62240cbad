//! Multi-modal latent-factor data with a known Bayes-optimal classifier.
//!
//! Generative model, for each sample:
//!
//! - `y ~ Bernoulli(balance)`
//! - `s = (2y - 1) * strength * u + z`, `z ~ N(0, I)`, with `u` the unit
//!   all-ones direction of the shared latent space
//! - modality `m`: `signal_dims` features `A_m s + noise_scale * e`, followed
//!   by `distractor_dims` features of pure `noise_scale * e`
//!
//! The loadings `A_m` are drawn once per seed. Because every term is Gaussian
//! with a class-independent covariance, the Bayes rule is linear and is
//! computed exactly from the recorded parameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Dataset, FeatureRecord};
use crate::nn::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub modalities: usize,
    /// Label-bearing features per modality.
    pub signal_dims: usize,
    /// Dimension of the shared latent factor.
    pub latent_dim: usize,
    /// Distance of each class mean from the origin in latent space.
    pub strength: f64,
    pub noise_scale: f64,
    /// Pure-noise features appended to each modality.
    pub distractor_dims: usize,
    /// Probability of class 1.
    pub balance: f64,
    pub samples: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            modalities: 3,
            signal_dims: 6,
            latent_dim: 2,
            strength: 2.0,
            noise_scale: 1.0,
            distractor_dims: 0,
            balance: 0.5,
            samples: 600,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.modalities == 0 || self.signal_dims == 0 || self.latent_dim == 0 || self.samples == 0 {
            return Err(Error::Config("synthetic spec counts must all be >= 1".into()));
        }
        if !(self.noise_scale.is_finite() && self.noise_scale > 0.0) {
            return Err(Error::Config("synthetic noise scale must be > 0".into()));
        }
        if !(self.strength.is_finite() && self.strength >= 0.0) {
            return Err(Error::Config("synthetic strength must be >= 0".into()));
        }
        if !(self.balance > 0.0 && self.balance < 1.0) {
            return Err(Error::Config("synthetic class balance must lie in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn features_per_modality(&self) -> usize {
        self.signal_dims + self.distractor_dims
    }

    pub fn total_features(&self) -> usize {
        self.modalities * self.features_per_modality()
    }
}

/// The generative parameters of one synthetic draw.
#[derive(Debug, Clone)]
pub struct SyntheticTruth {
    pub spec: SyntheticSpec,
    pub class_means: [Vec<f64>; 2],
    /// Per-modality loading matrices, `[signal_dims x latent_dim]`.
    pub loadings: Vec<Matrix>,
    /// Bayes discriminant weights over the full feature vector (zero on distractors).
    weights: Vec<f64>,
    offset: f64,
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub dataset: Dataset,
    pub truth: SyntheticTruth,
    /// `(feature_name, group_name)` pairs grouping features by true modality.
    pub modality_map: Vec<(String, String)>,
}

pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = SyntheticTruth::draw(spec, &mut rng)?;

    let mut feature_names = Vec::with_capacity(spec.total_features());
    let mut modality_map = Vec::with_capacity(spec.total_features());
    for m in 0..spec.modalities {
        let group = format!("modality{}", m + 1);
        for j in 0..spec.signal_dims {
            feature_names.push(format!("m{}_s{}", m + 1, j + 1));
        }
        for j in 0..spec.distractor_dims {
            feature_names.push(format!("m{}_d{}", m + 1, j + 1));
        }
        let start = feature_names.len() - spec.features_per_modality();
        for name in &feature_names[start..] {
            modality_map.push((name.clone(), group.clone()));
        }
    }

    let width = (spec.samples - 1).to_string().len().max(4);
    let records = (0..spec.samples)
        .map(|i| {
            let (label, x) = truth.sample(&mut rng);
            FeatureRecord {
                id: format!("s{i:0width$}"),
                label,
                features: x.into_iter().map(Some).collect(),
            }
        })
        .collect();
    let dataset = Dataset::new(records, feature_names, vec!["0".into(), "1".into()])?;
    Ok(SyntheticData {
        dataset,
        truth,
        modality_map,
    })
}

impl SyntheticTruth {
    fn draw<R: Rng + ?Sized>(spec: &SyntheticSpec, rng: &mut R) -> Result<Self> {
        let l = spec.latent_dim;
        let unit = 1.0 / (l as f64).sqrt();
        let class_means = [
            vec![-spec.strength * unit; l],
            vec![spec.strength * unit; l],
        ];
        let scale = 1.0 / (l as f64).sqrt();
        let loadings: Vec<Matrix> = (0..spec.modalities)
            .map(|_| {
                let mut a = Matrix::zeros(spec.signal_dims, l);
                for v in a.as_mut_slice() {
                    *v = scale * rng.sample::<f64, _>(StandardNormal);
                }
                a
            })
            .collect();

        // Stack the loadings of all signal features: A is [S x L].
        let refs: Vec<&Matrix> = loadings.iter().collect();
        let a = Matrix::vstack(&refs)?;
        let delta: Vec<f64> = class_means[1]
            .iter()
            .zip(&class_means[0])
            .map(|(p, q)| p - q)
            .collect();
        let mid: Vec<f64> = class_means[1]
            .iter()
            .zip(&class_means[0])
            .map(|(p, q)| 0.5 * (p + q))
            .collect();
        // Shared covariance of the signal block is sigma^2 I + A A^T; by the
        // push-through identity A^T (sigma^2 I + A A^T)^-1 = G^-1 A^T with
        // G = sigma^2 I + A^T A, so the discriminant is w = A G^-1 delta.
        let sigma2 = spec.noise_scale * spec.noise_scale;
        let g = Matrix::from_fn(l, l, |i, j| {
            let ata: f64 = (0..a.rows()).map(|r| a.get(r, i) * a.get(r, j)).sum();
            ata + if i == j { sigma2 } else { 0.0 }
        });
        let g_inv_delta = solve_symmetric(&g, &delta)?;
        let signal_w: Vec<f64> = (0..a.rows())
            .map(|r| (0..l).map(|c| a.get(r, c) * g_inv_delta[c]).sum())
            .collect();
        let a_mid: Vec<f64> = (0..a.rows())
            .map(|r| (0..l).map(|c| a.get(r, c) * mid[c]).sum())
            .collect();
        let offset = signal_w.iter().zip(&a_mid).map(|(w, m)| w * m).sum::<f64>()
            - (spec.balance / (1.0 - spec.balance)).ln();

        let mut weights = Vec::with_capacity(spec.total_features());
        for m in 0..spec.modalities {
            let base = m * spec.signal_dims;
            weights.extend_from_slice(&signal_w[base..base + spec.signal_dims]);
            weights.extend(std::iter::repeat_n(0.0, spec.distractor_dims));
        }
        Ok(Self {
            spec: spec.clone(),
            class_means,
            loadings,
            weights,
            offset,
        })
    }

    /// Draws one labelled feature vector from the generative model.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, Vec<f64>) {
        let spec = &self.spec;
        let label = usize::from(rng.random::<f64>() < spec.balance);
        let latent: Vec<f64> = self.class_means[label]
            .iter()
            .map(|mu| mu + rng.sample::<f64, _>(StandardNormal))
            .collect();
        let mut x = Vec::with_capacity(spec.total_features());
        for a in &self.loadings {
            for r in 0..a.rows() {
                let clean: f64 = a.row(r).iter().zip(&latent).map(|(w, s)| w * s).sum();
                x.push(clean + spec.noise_scale * rng.sample::<f64, _>(StandardNormal));
            }
            for _ in 0..spec.distractor_dims {
                x.push(spec.noise_scale * rng.sample::<f64, _>(StandardNormal));
            }
        }
        (label, x)
    }

    /// The Bayes-optimal decision for a raw (unstandardized) feature vector.
    /// Exact ties go to class 0.
    pub fn bayes_predict(&self, x: &[f64]) -> usize {
        let score: f64 = self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() - self.offset;
        usize::from(score > 0.0)
    }

    /// Monte-Carlo estimate of the Bayes accuracy from `n` fresh draws.
    pub fn bayes_accuracy_mc(&self, n: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let correct = (0..n)
            .filter(|_| {
                let (y, x) = self.sample(&mut rng);
                self.bayes_predict(&x) == y
            })
            .count();
        correct as f64 / n as f64
    }

    /// Mahalanobis distance between the two class-conditional feature means
    /// under the shared covariance.
    pub fn class_separation(&self) -> f64 {
        let refs: Vec<&Matrix> = self.loadings.iter().collect();
        let a = Matrix::vstack(&refs).expect("loadings share latent width");
        let l = self.spec.latent_dim;
        let delta: Vec<f64> = (0..l)
            .map(|c| self.class_means[1][c] - self.class_means[0][c])
            .collect();
        let a_delta: Vec<f64> = (0..a.rows())
            .map(|r| (0..l).map(|c| a.get(r, c) * delta[c]).sum())
            .collect();
        let signal_w: Vec<f64> = self
            .weights
            .chunks(self.spec.features_per_modality())
            .flat_map(|c| c[..self.spec.signal_dims].to_vec())
            .collect();
        signal_w
            .iter()
            .zip(&a_delta)
            .map(|(w, d)| w * d)
            .sum::<f64>()
            .max(0.0)
            .sqrt()
    }
}

/// Gaussian elimination with partial pivoting for a small dense system.
fn solve_symmetric(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = (0..n)
        .map(|r| {
            let mut row = a.row(r).to_vec();
            row.push(b[r]);
            row
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        if m[pivot][col].abs() < 1e-300 {
            return Err(Error::DegenerateInput("singular covariance in synthetic model".into()));
        }
        m.swap(col, pivot);
        let pivot_row = m[col].clone();
        for (r, row) in m.iter_mut().enumerate() {
            if r != col {
                let f = row[col] / pivot_row[col];
                for (x, p) in row[col..=n].iter_mut().zip(&pivot_row[col..=n]) {
                    *x -= f * p;
                }
            }
        }
    }
    Ok((0..n).map(|r| m[r][n] / m[r][r]).collect())
}
