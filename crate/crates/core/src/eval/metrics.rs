use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    pub micro_f1: f64,
    pub macro_f1: f64,
}

impl Metrics {
    pub const NAMES: [&'static str; 3] = ["accuracy", "micro_f1", "macro_f1"];

    pub fn values(&self) -> [f64; 3] {
        [self.accuracy, self.micro_f1, self.macro_f1]
    }
}

/// Accuracy, pooled (micro) F1, and unweighted per-class (macro) F1.
/// A class whose F1 denominator is zero contributes 0.
pub fn metrics(y_true: &[usize], y_pred: &[usize], num_classes: usize) -> Result<Metrics> {
    if y_true.is_empty() {
        return Err(Error::Empty("metrics"));
    }
    if y_true.len() != y_pred.len() {
        return Err(Error::dim("metrics predictions", y_true.len(), y_pred.len()));
    }
    let mut tp = vec![0usize; num_classes];
    let mut fp = vec![0usize; num_classes];
    let mut fn_ = vec![0usize; num_classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        for label in [t, p] {
            if label >= num_classes {
                return Err(Error::Label {
                    label,
                    classes: num_classes,
                });
            }
        }
        if t == p {
            tp[t] += 1;
        } else {
            fp[p] += 1;
            fn_[t] += 1;
        }
    }
    let f1 = |tp: usize, fp: usize, fn_: usize| {
        let denom = 2 * tp + fp + fn_;
        if denom == 0 {
            0.0
        } else {
            2.0 * tp as f64 / denom as f64
        }
    };
    let total_tp: usize = tp.iter().sum();
    let micro_f1 = f1(total_tp, fp.iter().sum(), fn_.iter().sum());
    let macro_f1 = exact_macro_f1(&tp, &fp, &fn_).unwrap_or_else(|| {
        (0..num_classes).map(|c| f1(tp[c], fp[c], fn_[c])).sum::<f64>() / num_classes as f64
    });
    Ok(Metrics {
        accuracy: total_tp as f64 / y_true.len() as f64,
        micro_f1,
        macro_f1,
    })
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Macro F1 summed as a reduced fraction and divided once, so the result is
/// correctly rounded. `None` if the fraction outgrows exact `f64` conversion.
fn exact_macro_f1(tp: &[usize], fp: &[usize], fn_: &[usize]) -> Option<f64> {
    let (mut num, mut den): (u128, u128) = (0, 1);
    for c in 0..tp.len() {
        let d = (2 * tp[c] + fp[c] + fn_[c]) as u128;
        if d == 0 {
            continue;
        }
        let n = 2 * tp[c] as u128;
        let g = gcd(den, d);
        num = num.checked_mul(d / g)?.checked_add(n.checked_mul(den / g)?)?;
        den = den.checked_mul(d / g)?;
        let r = gcd(num, den);
        (num, den) = (num / r, den / r);
    }
    den = den.checked_mul(tp.len() as u128)?;
    let r = gcd(num, den);
    (num, den) = (num / r, den / r);
    const EXACT: u128 = 1 << 53;
    (num <= EXACT && den <= EXACT).then(|| num as f64 / den as f64)
}
