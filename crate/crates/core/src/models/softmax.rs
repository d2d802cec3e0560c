use serde::{Deserialize, Serialize};

use super::ConditionalModel;
use crate::error::{Error, Result};

/// Multinomial logistic regression with the last class row pinned to 0.
///
/// θ is the row-major flattening of the `(K − 1) × m` weight matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxLinearModel {
    num_classes: usize,
    num_features: usize,
}

impl SoftmaxLinearModel {
    pub fn new(num_classes: usize, num_features: usize) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::invalid("a classifier needs at least two classes"));
        }
        if num_features == 0 {
            return Err(Error::invalid("softmax model needs at least one feature"));
        }
        Ok(Self {
            num_classes,
            num_features,
        })
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }
}

pub(super) fn check_features(x: &[f64], m: usize) -> Result<()> {
    if x.len() != m {
        return Err(Error::invalid(format!(
            "input has {} features, model expects {m}",
            x.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("input has non-finite features"));
    }
    Ok(())
}

pub(super) fn linear_scores(theta: &[f64], x: &[f64], rows: usize, classes: usize) -> Vec<f64> {
    let m = x.len();
    let mut s: Vec<f64> = (0..rows)
        .map(|k| {
            theta[k * m..(k + 1) * m]
                .iter()
                .zip(x)
                .map(|(w, v)| w * v)
                .sum()
        })
        .collect();
    s.resize(classes, 0.0);
    s
}

pub(super) fn accumulate_linear(x: &[f64], weights: &[f64], rows: usize, grad: &mut [f64]) {
    let m = x.len();
    for (k, &w) in weights.iter().enumerate().take(rows) {
        if w == 0.0 {
            continue;
        }
        for (g, v) in grad[k * m..(k + 1) * m].iter_mut().zip(x) {
            *g += w * v;
        }
    }
}

impl ConditionalModel for SoftmaxLinearModel {
    type Input = Vec<f64>;

    fn param_dim(&self) -> usize {
        (self.num_classes - 1) * self.num_features
    }

    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn check_input(&self, x: &Vec<f64>) -> Result<()> {
        check_features(x, self.num_features)
    }

    fn scores(&self, theta: &[f64], x: &Vec<f64>) -> Vec<f64> {
        linear_scores(theta, x, self.num_classes - 1, self.num_classes)
    }

    fn accumulate_score_grad(&self, x: &Vec<f64>, weights: &[f64], grad: &mut [f64]) {
        accumulate_linear(x, weights, self.num_classes - 1, grad);
    }
}
