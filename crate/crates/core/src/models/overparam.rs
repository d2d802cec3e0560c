use serde::{Deserialize, Serialize};

use super::softmax::{accumulate_linear, check_features, linear_scores};
use super::ConditionalModel;
use crate::error::{Error, Result};

/// Softmax regression with a free weight row for every class (`d = K·m`).
///
/// Adding the same vector to every class row leaves `p_θ` unchanged, so the
/// model is not identifiable and its Fisher matrix is singular.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverparamSoftmaxModel {
    num_classes: usize,
    num_features: usize,
}

impl OverparamSoftmaxModel {
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

    /// θ with `shift` added to every class row.
    pub fn shifted(&self, theta: &[f64], shift: &[f64]) -> Vec<f64> {
        let m = self.num_features;
        theta
            .iter()
            .enumerate()
            .map(|(i, w)| w + shift[i % m])
            .collect()
    }
}

impl ConditionalModel for OverparamSoftmaxModel {
    type Input = Vec<f64>;

    fn param_dim(&self) -> usize {
        self.num_classes * self.num_features
    }

    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn identifiable(&self) -> bool {
        false
    }

    fn check_input(&self, x: &Vec<f64>) -> Result<()> {
        check_features(x, self.num_features)
    }

    fn scores(&self, theta: &[f64], x: &Vec<f64>) -> Vec<f64> {
        linear_scores(theta, x, self.num_classes, self.num_classes)
    }

    fn accumulate_score_grad(&self, x: &Vec<f64>, weights: &[f64], grad: &mut [f64]) {
        accumulate_linear(x, weights, self.num_classes, grad);
    }
}
