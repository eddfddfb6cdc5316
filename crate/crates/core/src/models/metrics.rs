use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary confusion counts and the scores derived from them, for the
/// positive class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Metrics {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Metrics {
            tp,
            fp,
            fn_,
            tn,
            precision,
            recall,
            f1,
        }
    }

    /// Number of positive ground-truth samples.
    pub fn support(&self) -> usize {
        self.tp + self.fn_
    }
}

pub fn f1(preds: &[bool], labels: &[bool]) -> Result<Metrics> {
    if preds.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: labels.len(),
            found: preds.len(),
        });
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (&p, &t) in preds.iter().zip(labels) {
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    Ok(Metrics::from_counts(tp, fp, fn_, tn))
}

/// Expected F1 of a data-independent classifier that predicts positive on a
/// fraction `f_classifier` of samples, on a test set with a fraction
/// `f_data` of positives. Its precision is `f_data` and its recall
/// `f_classifier`.
pub fn trivial_baseline_f1(f_data: f64, f_classifier: f64) -> Result<f64> {
    for f in [f_data, f_classifier] {
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::BadFraction(f));
        }
    }
    if f_data + f_classifier == 0.0 {
        return Err(Error::BothZero);
    }
    Ok(2.0 * f_data * f_classifier / (f_data + f_classifier))
}
