use serde::{Deserialize, Serialize};

use super::ConditionalModel;
use crate::error::{Error, Result};

/// One free logit vector per element of a finite input alphabet.
///
/// θ is the concatenation of per-cell logit vectors, each of length `K − 1`
/// with the last class pinned to 0, so `d = |𝒳|·(K − 1)`. Inputs are cell
/// indices `0..|𝒳|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalTableModel {
    num_inputs: usize,
    num_classes: usize,
}

impl CategoricalTableModel {
    pub fn new(num_inputs: usize, num_classes: usize) -> Result<Self> {
        if num_inputs == 0 {
            return Err(Error::invalid(
                "categorical model needs at least one input cell",
            ));
        }
        if num_classes < 2 {
            return Err(Error::invalid("a classifier needs at least two classes"));
        }
        Ok(Self {
            num_inputs,
            num_classes,
        })
    }

    /// Binary model with a single input cell.
    pub fn bernoulli() -> Self {
        Self {
            num_inputs: 1,
            num_classes: 2,
        }
    }

    pub fn num_inputs(&self) -> usize {
        self.num_inputs
    }

    /// Offset of the logit block belonging to cell `x`.
    pub fn block(&self, x: usize) -> std::ops::Range<usize> {
        let w = self.num_classes - 1;
        x * w..(x + 1) * w
    }

    /// Logits `ln(p_k / p_K)` of a probability table, one row per cell.
    pub fn theta_from_probs(&self, table: &[Vec<f64>]) -> Result<Vec<f64>> {
        if table.len() != self.num_inputs {
            return Err(Error::invalid(
                "probability table needs one row per input cell",
            ));
        }
        let mut theta = Vec::with_capacity(self.num_inputs * (self.num_classes - 1));
        for row in table {
            if row.len() != self.num_classes || row.iter().any(|&p| p <= 0.0) {
                return Err(Error::invalid(
                    "probability rows must have K strictly positive entries",
                ));
            }
            let last = row[self.num_classes - 1];
            theta.extend(row[..self.num_classes - 1].iter().map(|p| (p / last).ln()));
        }
        Ok(theta)
    }
}

impl ConditionalModel for CategoricalTableModel {
    type Input = usize;

    fn param_dim(&self) -> usize {
        self.num_inputs * (self.num_classes - 1)
    }

    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn check_input(&self, x: &usize) -> Result<()> {
        if *x >= self.num_inputs {
            return Err(Error::invalid(format!(
                "input cell {x} out of range for {} cells",
                self.num_inputs
            )));
        }
        Ok(())
    }

    fn scores(&self, theta: &[f64], x: &usize) -> Vec<f64> {
        let mut s = theta[self.block(*x)].to_vec();
        s.push(0.0);
        s
    }

    fn accumulate_score_grad(&self, x: &usize, weights: &[f64], grad: &mut [f64]) {
        for (g, w) in grad[self.block(*x)].iter_mut().zip(weights) {
            *g += w;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_logits_are_uniform() {
        let m = CategoricalTableModel::new(3, 4).unwrap();
        let theta = vec![0.0; m.param_dim()];
        for x in 0..3 {
            for y in 0..4 {
                let lp = m.log_prob(&theta, &x, y).unwrap();
                assert!((lp - 0.25f64.ln()).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn bernoulli_logit_example() {
        let m = CategoricalTableModel::bernoulli();
        let theta = [0.8473];
        let p = 1.0 / (1.0 + (-0.8473f64).exp());
        let lp = m.log_prob(&theta, &0, 0).unwrap();
        assert!((lp - p.ln()).abs() < 1e-14);
        assert!((p - 0.70).abs() < 1e-4);
        assert!((lp - -0.3567).abs() < 1e-4);
    }

    #[test]
    fn bernoulli_fisher_is_p_times_one_minus_p() {
        let m = CategoricalTableModel::bernoulli();
        let f = m.fisher_at(&[0.0], &0).unwrap();
        assert!((f.get(0, 0) - 0.25).abs() < 1e-15);
        let theta = 0.4055f64;
        let p = 1.0 / (1.0 + (-theta).exp());
        let f = m.fisher_at(&[theta], &0).unwrap();
        assert!((f.get(0, 0) - p * (1.0 - p)).abs() < 1e-15);
    }

    #[test]
    fn dimension_errors() {
        let m = CategoricalTableModel::new(2, 3).unwrap();
        assert!(m.log_prob(&[0.0; 3], &0, 0).is_err());
        assert!(m.log_prob(&[0.0; 4], &2, 0).is_err());
        assert!(m.log_prob(&[0.0; 4], &0, 3).is_err());
        assert!(m.log_prob(&[f64::NAN, 0.0, 0.0, 0.0], &0, 0).is_err());
        assert!(CategoricalTableModel::new(0, 3).is_err());
        assert!(CategoricalTableModel::new(2, 1).is_err());
    }

    #[test]
    fn identifiable_and_interior() {
        let m = CategoricalTableModel::new(2, 3).unwrap();
        let a = [0.1, 0.2, 0.3, 0.4];
        let b = [0.1, 0.2, 0.3, 0.5];
        assert_ne!(m.probs(&a, &1).unwrap(), m.probs(&b, &1).unwrap());
        let p = m.probs(&[30.0, -30.0, 0.0, 0.0], &0).unwrap();
        assert!(p.iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn probability_table_round_trip() {
        let m = CategoricalTableModel::new(1, 3).unwrap();
        let theta = m.theta_from_probs(&[vec![0.5, 0.3, 0.2]]).unwrap();
        let p = m.probs(&theta, &0).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.3).abs() < 1e-15);
    }
}
