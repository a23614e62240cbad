use super::Matrix;
use crate::{Error, Result};

/// Row-wise softmax, stabilized by subtracting each row's maximum.
pub fn softmax(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    out
}

/// Mean negative log-likelihood of `labels` under `softmax(logits)`, and its
/// gradient with respect to the logits, `(softmax - onehot) / B`.
pub fn softmax_cross_entropy(logits: &Matrix, labels: &[usize]) -> Result<(f64, Matrix)> {
    let (b, c) = logits.shape();
    if labels.len() != b {
        return Err(Error::dim("softmax_cross_entropy", b, labels.len()));
    }
    if b == 0 {
        return Err(Error::Empty("softmax_cross_entropy"));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::Label {
            label: bad,
            classes: c,
        });
    }
    let bf = b as f64;
    let mut loss = 0.0;
    let mut grad = Matrix::zeros(b, c);
    for (r, &label) in labels.iter().enumerate() {
        let row = logits.row(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_sum = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += log_sum - (row[label] - max);
        let grow = grad.row_mut(r);
        for (k, g) in grow.iter_mut().enumerate() {
            let p = (row[k] - max - log_sum).exp();
            *g = (p - if k == label { 1.0 } else { 0.0 }) / bf;
        }
    }
    let loss = loss / bf;
    if !loss.is_finite() {
        return Err(Error::NonFinite("cross-entropy loss".into()));
    }
    Ok((loss, grad))
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}
