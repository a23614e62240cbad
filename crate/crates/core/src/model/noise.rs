use rand::Rng;
use rand_distr::StandardNormal;

use crate::nn::Matrix;
use crate::{Error, Result};

/// Per-dimension mean and (population) variance pooled over every row of every
/// real modality's representation. Plain numbers: no gradient flows through them.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl NoiseStats {
    pub fn from_representations(reps: &[Matrix]) -> Result<Self> {
        let refs: Vec<&Matrix> = reps.iter().collect();
        let pooled = Matrix::vstack(&refs)?;
        let mean = pooled.column_means();
        let var = pooled.column_variances(&mean);
        Ok(Self { mean, var })
    }

    /// Maps standard-normal draws `z` to `mean + sqrt(var) * z`, row by row.
    pub fn transform(&self, z: &Matrix) -> Result<Matrix> {
        if z.cols() != self.mean.len() {
            return Err(Error::dim("noise transform", self.mean.len(), z.cols()));
        }
        Ok(Matrix::from_fn(z.rows(), z.cols(), |r, c| {
            self.mean[c] + self.var[c].sqrt() * z.get(r, c)
        }))
    }
}

/// Draws one noise-modality row per sample from `N(mu, diag(sigma^2))`, where
/// the statistics come from the current representations.
pub fn sample_noise<R: Rng + ?Sized>(reps: &[Matrix], rng: &mut R) -> Result<Matrix> {
    let stats = NoiseStats::from_representations(reps)?;
    let rows = reps[0].rows();
    let dim = stats.mean.len();
    let mut z = Matrix::zeros(rows, dim);
    for v in z.as_mut_slice() {
        *v = rng.sample(StandardNormal);
    }
    stats.transform(&z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_representations_give_constant_noise() {
        let c = Matrix::from_fn(4, 3, |_, j| j as f64 + 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let noise = sample_noise(&[c.clone(), c.clone()], &mut rng).unwrap();
        assert_eq!(noise, c);
    }

    #[test]
    fn monte_carlo_mean_within_three_standard_errors() {
        let a = Matrix::from_rows(&[[1.0, -2.0], [3.0, 0.0]]).unwrap();
        let b = Matrix::from_rows(&[[-1.0, 4.0], [5.0, 2.0]]).unwrap();
        let stats = NoiseStats::from_representations(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(stats.mean, vec![2.0, 1.0]);

        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 100_000;
        let mut sums = [0.0, 0.0];
        let mut total = 0;
        while total < n {
            let noise = sample_noise(&[a.clone(), b.clone()], &mut rng).unwrap();
            for row in noise.iter_rows() {
                sums[0] += row[0];
                sums[1] += row[1];
            }
            total += noise.rows();
        }
        for (d, sum) in sums.iter().enumerate() {
            let est = sum / total as f64;
            let se = (stats.var[d] / total as f64).sqrt();
            assert!((est - stats.mean[d]).abs() < 3.0 * se, "dim {d}: {est}");
        }
    }
}
