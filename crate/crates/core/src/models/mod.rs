//! Numerical kernels trained by the evaluation harness and the concept
//! bottleneck: linear SVM, logistic regression, CART tree, a two-layer MLP,
//! and binary classification metrics.
//!
//! Samples are rows of `f64`; labels are `bool` with `true` the positive
//! class ("Sure" / "concept present"). Every trainer is deterministic given
//! its inputs and seed.

mod linear;
mod metrics;
mod mlp;
mod persist;
mod tree;

pub use linear::{train_logreg, train_svm, LinearKind, LinearModel, LogregConfig, SvmConfig};
pub use metrics::{f1, trivial_baseline_f1, Metrics};
pub use mlp::{mlp_gradient, train_mlp, train_mlp_observed, MlpConfig, MlpModel, HIDDEN_WIDTH};
pub use persist::{ModelDocument, Payload, MODEL_FORMAT, MODEL_FORMAT_VERSION};
pub use tree::{train_tree, DecisionTree, Node, NodeKind, TreeConfig};

use crate::error::{Error, Result};

/// Anything that maps a feature row to a binary decision.
pub trait Classifier {
    fn predict(&self, x: &[f64]) -> bool;

    fn predict_all(&self, xs: &[Vec<f64>]) -> Vec<bool> {
        xs.iter().map(|x| self.predict(x)).collect()
    }
}

/// Checks shapes and finiteness; returns the feature dimension.
pub(crate) fn check_xy(x: &[Vec<f64>], y: &[bool]) -> Result<usize> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    let dim = x.first().ok_or(Error::EmptyInput)?.len();
    if dim == 0 {
        return Err(Error::Shape("zero-dimensional features".into()));
    }
    for (row, v) in x.iter().enumerate() {
        if v.len() != dim {
            return Err(Error::Shape(format!(
                "row {row} has {} features, expected {dim}",
                v.len()
            )));
        }
        if v.iter().any(|f| !f.is_finite()) {
            return Err(Error::NonFiniteInput { row });
        }
    }
    Ok(dim)
}

pub(crate) fn require_both_classes(y: &[bool]) -> Result<()> {
    let pos = y.iter().filter(|&&b| b).count();
    if pos == 0 || pos == y.len() {
        Err(Error::SingleClass)
    } else {
        Ok(())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
