use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

pub const DEFAULT_RATIOS: (f64, f64, f64) = (0.6, 0.2, 0.2);

/// Row indices of a train/validation/test split, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    /// False when some class was too small and the split fell back to a plain shuffle.
    pub stratified: bool,
}

impl SplitIndices {
    pub fn fingerprint(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.train.hash(&mut h);
        self.val.hash(&mut h);
        self.test.hash(&mut h);
        h.finish()
    }
}

/// Seeded random split into three disjoint parts covering every row.
///
/// Overall sizes are `round(N * train)`, `round(N * val)` and the remainder.
/// Classes are apportioned across the parts by largest remainder so each part
/// keeps the class mix; if any class has fewer than 3 samples the split is
/// unstratified and a warning is logged.
pub fn split(labels: &[usize], ratios: (f64, f64, f64), seed: u64) -> Result<SplitIndices> {
    let (a, b, c) = ratios;
    if [a, b, c].iter().any(|r| !(0.0..=1.0).contains(r)) || ((a + b + c) - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "split ratios must be in [0, 1] and sum to 1, got ({a}, {b}, {c})"
        )));
    }
    let n = labels.len();
    if n == 0 {
        return Err(Error::Empty("split"));
    }
    let n_train = (n as f64 * a).round() as usize;
    let n_val = ((n as f64 * b).round() as usize).min(n - n_train);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let num_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    by_class.retain(|v| !v.is_empty());

    let small = by_class.iter().any(|v| v.len() < 3);
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    if small {
        log::warn!("a class has fewer than 3 samples; falling back to an unstratified split");
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        train.extend_from_slice(&all[..n_train]);
        val.extend_from_slice(&all[n_train..n_train + n_val]);
        test.extend_from_slice(&all[n_train + n_val..]);
    } else {
        for members in &mut by_class {
            members.shuffle(&mut rng);
        }
        let sizes: Vec<usize> = by_class.iter().map(Vec::len).collect();
        let train_counts = apportion(n_train, &sizes, &sizes, n);
        let remaining: Vec<usize> = sizes.iter().zip(&train_counts).map(|(s, t)| s - t).collect();
        let val_counts = apportion(n_val, &sizes, &remaining, n);
        for ((members, &t), &v) in by_class.iter().zip(&train_counts).zip(&val_counts) {
            train.extend_from_slice(&members[..t]);
            val.extend_from_slice(&members[t..t + v]);
            test.extend_from_slice(&members[t + v..]);
        }
    }
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices {
        train,
        val,
        test,
        stratified: !small,
    })
}

/// Largest-remainder allocation of `total` items proportional to `weights`
/// (out of `weight_sum`), never exceeding `capacity`.
fn apportion(total: usize, weights: &[usize], capacity: &[usize], weight_sum: usize) -> Vec<usize> {
    let quotas: Vec<f64> = weights
        .iter()
        .map(|&w| total as f64 * w as f64 / weight_sum as f64)
        .collect();
    let mut counts: Vec<usize> = quotas
        .iter()
        .zip(capacity)
        .map(|(q, &cap)| (q.floor() as usize).min(cap))
        .collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&i, &j| {
        let (fi, fj) = (quotas[i] - quotas[i].floor(), quotas[j] - quotas[j].floor());
        fj.total_cmp(&fi).then(i.cmp(&j))
    });
    let mut left = total.saturating_sub(counts.iter().sum());
    while left > 0 {
        let before = left;
        for &i in &order {
            if left == 0 {
                break;
            }
            if counts[i] < capacity[i] {
                counts[i] += 1;
                left -= 1;
            }
        }
        if left == before {
            break;
        }
    }
    counts
}
