use crate::nn::Matrix;
use crate::{Error, Result};

const TOLERANCE: f64 = 1e-10;
const MAX_ITERATIONS: usize = 1_000_000;

/// Top two principal directions of a point cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    /// Orthonormal; the largest-magnitude entry of each is positive.
    pub components: [Vec<f64>; 2],
    /// Covariance eigenvalues of the two components, non-increasing.
    pub variances: [f64; 2],
    /// Centered rows projected onto the components, `[N x 2]`.
    pub coords: Matrix,
    /// Share of the total variance captured by both components.
    pub explained_fraction: f64,
}

fn mat_vec(c: &[f64], n: usize, v: &[f64]) -> Vec<f64> {
    (0..n).map(|i| c[i * n..(i + 1) * n].iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn orthogonalize(v: &mut [f64], against: &[Vec<f64>]) {
    for u in against {
        let p = dot(v, u);
        v.iter_mut().zip(u).for_each(|(x, y)| *x -= p * y);
    }
}

fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Unit vector orthogonal to `against`, built from the standard basis vector
/// with the largest residual.
fn orthogonal_complement(n: usize, against: &[Vec<f64>]) -> Vec<f64> {
    let mut best = Vec::new();
    let mut best_norm = -1.0;
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        orthogonalize(&mut e, against);
        orthogonalize(&mut e, against);
        let len = norm(&e);
        if len > best_norm {
            best_norm = len;
            best = e;
        }
    }
    best.iter().map(|x| x / best_norm).collect()
}

/// Dominant eigenpair of the symmetric matrix `c` restricted to the
/// complement of `found`, by power iteration. Stops once the residual
/// `|Cv - lambda v|` drops below `TOLERANCE * scale`.
fn dominant(c: &[f64], n: usize, found: &[Vec<f64>], scale: f64) -> (f64, Vec<f64>) {
    // Start from the largest-norm column of C outside the found subspace.
    let mut v = Vec::new();
    let mut best = 0.0;
    for j in 0..n {
        let mut col: Vec<f64> = (0..n).map(|i| c[i * n + j]).collect();
        orthogonalize(&mut col, found);
        let len = norm(&col);
        if len > best {
            best = len;
            v = col;
        }
    }
    if best <= TOLERANCE * scale {
        return (0.0, orthogonal_complement(n, found));
    }
    v.iter_mut().for_each(|x| *x /= best);
    let mut lambda = 0.0;
    for _ in 0..MAX_ITERATIONS {
        let mut w = mat_vec(c, n, &v);
        orthogonalize(&mut w, found);
        lambda = dot(&v, &w);
        let residual = w.iter().zip(&v).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt();
        let len = norm(&w);
        if len <= TOLERANCE * scale {
            return (0.0, orthogonal_complement(n, found));
        }
        v = w.into_iter().map(|x| x / len).collect();
        if residual <= TOLERANCE * scale {
            break;
        }
    }
    (lambda, v)
}

/// Top-2 PCA of the rows of `x` (centered internally), using the sample
/// covariance and power iteration with deflation.
pub fn pca_top2(x: &Matrix) -> Result<Pca> {
    let (rows, n) = x.shape();
    if rows < 3 {
        return Err(Error::DegenerateInput(format!("pca needs at least 3 rows, got {rows}")));
    }
    if n < 2 {
        return Err(Error::DegenerateInput(format!("pca needs at least 2 columns, got {n}")));
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("pca input".into()));
    }
    let means = x.column_means();
    let centered = Matrix::from_fn(rows, n, |r, c| x.get(r, c) - means[c]);
    let mut cov = vec![0.0; n * n];
    for row in centered.iter_rows() {
        for i in 0..n {
            for j in i..n {
                cov[i * n + j] += row[i] * row[j];
            }
        }
    }
    for i in 0..n {
        for j in i..n {
            let v = cov[i * n + j] / (rows - 1) as f64;
            cov[i * n + j] = v;
            cov[j * n + i] = v;
        }
    }
    let trace: f64 = (0..n).map(|i| cov[i * n + i]).sum();
    if trace <= 0.0 {
        return Err(Error::DegenerateInput("all rows are identical".into()));
    }

    let (l1, mut v1) = dominant(&cov, n, &[], trace);
    fix_sign(&mut v1);
    let found = vec![v1.clone()];
    let (l2, mut v2) = dominant(&cov, n, &found, trace);
    fix_sign(&mut v2);

    let coords = Matrix::from_fn(rows, 2, |r, k| dot(centered.row(r), if k == 0 { &v1 } else { &v2 }));
    let l2 = l2.max(0.0);
    Ok(Pca {
        components: [v1, v2],
        variances: [l1, l2],
        coords,
        explained_fraction: ((l1 + l2) / trace).clamp(0.0, 1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_has_one_component() {
        let x = Matrix::from_fn(7, 2, |r, c| (r as f64 - 2.0) * if c == 0 { 1.0 } else { 2.0 });
        let p = pca_top2(&x).unwrap();
        let s5 = 5f64.sqrt();
        assert!((p.components[0][0] - 1.0 / s5).abs() < 1e-12);
        assert!((p.components[0][1] - 2.0 / s5).abs() < 1e-12);
        assert!((p.explained_fraction - 1.0).abs() < 1e-12);
        assert!(p.variances[1].abs() < 1e-9);
        assert!(dot(&p.components[0], &p.components[1]).abs() < 1e-12);
        assert!((norm(&p.components[1]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_dimensional_input_fully_explained() {
        let x = Matrix::from_rows(&[[1.0, 0.3], [-0.4, 2.0], [0.7, -1.1], [-2.0, 0.1]]).unwrap();
        assert!((pca_top2(&x).unwrap().explained_fraction - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_rows_rejected() {
        let x = Matrix::from_fn(5, 3, |_, c| c as f64);
        assert!(matches!(pca_top2(&x), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn too_few_rows_rejected() {
        assert!(pca_top2(&Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn translation_invariant() {
        let x = Matrix::from_fn(20, 4, |r, c| ((r * 7 + c * 3) % 11) as f64 + (r * c) as f64 * 0.1);
        let shifted = Matrix::from_fn(20, 4, |r, c| x.get(r, c) + [3.0, -1.0, 100.0, 0.5][c]);
        let (a, b) = (pca_top2(&x).unwrap(), pca_top2(&shifted).unwrap());
        for (u, v) in a.coords.as_slice().iter().zip(b.coords.as_slice()) {
            assert!((u - v).abs() < 1e-8);
        }
        assert!(a.variances[0] >= a.variances[1]);
    }
}
