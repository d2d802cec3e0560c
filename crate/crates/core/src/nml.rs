//! The NML distribution of a restricted model and its maximal leakage.
//!
//! For a region Θ and query `x`, class `y` receives weight
//! `sup_{θ∈Θ} p_θ(y|x)`. The normalizer `Z = Σ_y sup_θ p_θ(y|x)` is the
//! exponential of both the stochastic complexity of the restricted model
//! and the maximal leakage from a parameter variable supported on Θ to `Y`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::decision::{argmax_with_ties, Hypothesis};
use crate::error::{Error, Result};
use crate::models::ConditionalModel;
use crate::optim::{maximize, OptimizerConfig};
use crate::region::ParameterRegion;

/// Tolerance of the leakage monotonicity check.
pub const MONOTONICITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupResult {
    /// `sup_{θ∈Θ} p_θ(y|x)` as found by the solver.
    pub value: f64,
    pub argmax: Vec<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmlDistribution {
    pub per_class_sup: Vec<f64>,
    pub per_class_argmax: Vec<Vec<f64>>,
    pub normalizer: f64,
    /// `ln Z` in nats.
    pub leakage_nats: f64,
    pub q: Vec<f64>,
    /// Lowest-index maximizer of `per_class_sup`; [`nml_classify`] applies
    /// the randomized tie rule instead.
    pub predicted_class: usize,
    pub converged: bool,
}

fn check_region<M: ConditionalModel>(model: &M, region: &ParameterRegion) -> Result<()> {
    if region.dim() != model.param_dim() {
        return Err(Error::invalid(format!(
            "region has dimension {}, model has {} parameters",
            region.dim(),
            model.param_dim()
        )));
    }
    Ok(())
}

/// `sup_{θ∈Θ} p_θ(y|x)` by projected gradient ascent on `ln p_θ(y|x)`.
pub fn constrained_sup<M: ConditionalModel>(
    model: &M,
    region: &ParameterRegion,
    x: &M::Input,
    y: usize,
    cfg: &OptimizerConfig,
) -> Result<SupResult> {
    check_region(model, region)?;
    model.check_input(x)?;
    model.check_class(y)?;
    let objective = |theta: &[f64]| -> Result<(f64, Vec<f64>)> {
        let lp = model.log_probs(theta, x)?;
        let probs: Vec<f64> = lp.iter().map(|v| v.exp()).collect();
        Ok((lp[y], model.score_vector(&probs, x, y)))
    };
    let best = maximize(&objective, region, cfg)?;
    Ok(SupResult {
        value: best.value.exp(),
        argmax: best.point,
        converged: best.converged,
    })
}

/// Assembles the distribution from per-class suprema.
pub fn from_sups(sups: Vec<SupResult>) -> NmlDistribution {
    let per_class_sup: Vec<f64> = sups.iter().map(|s| s.value).collect();
    // Every class attained at one parameter: the sups form a distribution
    // and Z is 1 exactly, whatever the rounding of the sum.
    let single_point = sups.windows(2).all(|w| w[0].argmax == w[1].argmax);
    let normalizer: f64 = if single_point {
        1.0
    } else {
        per_class_sup.iter().sum()
    };
    let q = per_class_sup.iter().map(|s| s / normalizer).collect();
    let predicted_class =
        per_class_sup.iter().enumerate().fold(
            0,
            |best, (k, &v)| if v > per_class_sup[best] { k } else { best },
        );
    NmlDistribution {
        leakage_nats: normalizer.ln(),
        normalizer,
        q,
        predicted_class,
        converged: sups.iter().all(|s| s.converged),
        per_class_argmax: sups.into_iter().map(|s| s.argmax).collect(),
        per_class_sup,
    }
}

/// The NML distribution of the model restricted to `region` at `x`.
///
/// Class `k` is optimized with the optimizer stream `cfg.derive([k])`.
pub fn nml_distribution<M: ConditionalModel>(
    model: &M,
    region: &ParameterRegion,
    x: &M::Input,
    cfg: &OptimizerConfig,
) -> Result<NmlDistribution> {
    let sups = (0..model.num_classes())
        .map(|k| constrained_sup(model, region, x, k, &cfg.derive(&[k as u64])))
        .collect::<Result<Vec<_>>>()?;
    Ok(from_sups(sups))
}

/// `argmax_y sup_{θ∈Θ} p_θ(y|x)` with randomized tie-breaking.
pub fn nml_classify<M: ConditionalModel, R: Rng + ?Sized>(
    model: &M,
    region: &ParameterRegion,
    x: &M::Input,
    cfg: &OptimizerConfig,
    tie_rng: &mut R,
) -> Result<usize> {
    let nml = nml_distribution(model, region, x, cfg)?;
    Ok(argmax_with_ties(&nml.per_class_sup, tie_rng))
}

/// `ℒ(small) ≤ ℒ(big) + 1e-8`, for a caller-asserted `small ⊆ big`.
pub fn leakage_monotonicity_check<M: ConditionalModel>(
    model: &M,
    small: &ParameterRegion,
    big: &ParameterRegion,
    x: &M::Input,
    cfg: &OptimizerConfig,
) -> Result<bool> {
    let l_small = nml_distribution(model, small, x, cfg)?.leakage_nats;
    let l_big = nml_distribution(model, big, x, cfg)?.leakage_nats;
    Ok(l_small <= l_big + MONOTONICITY_TOL)
}

/// The hypothesis `h_NML` for a fixed region (the region encodes `zⁿ`).
#[derive(Debug, Clone)]
pub struct NmlHypothesis<'a, M> {
    pub model: &'a M,
    pub region: ParameterRegion,
    pub cfg: OptimizerConfig,
}

impl<M: ConditionalModel> Hypothesis<M::Input> for NmlHypothesis<'_, M> {
    fn scores(&self, x: &M::Input) -> Result<Vec<f64>> {
        Ok(nml_distribution(self.model, &self.region, x, &self.cfg)?.per_class_sup)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{CategoricalTableModel, SoftmaxLinearModel};
    use crate::rng::stream;

    fn sigmoid(t: f64) -> f64 {
        1.0 / (1.0 + (-t).exp())
    }

    #[test]
    fn singleton_sup_is_the_point() {
        let m = SoftmaxLinearModel::new(3, 2).unwrap();
        let theta = vec![0.3, -0.2, 1.1, 0.5];
        let x = vec![0.4, -1.0];
        let region = ParameterRegion::singleton(theta.clone());
        for y in 0..3 {
            let s = constrained_sup(&m, &region, &x, y, &OptimizerConfig::default()).unwrap();
            assert_eq!(s.argmax, theta);
            assert!((s.value - m.probs(&theta, &x).unwrap()[y]).abs() < 1e-15);
        }
    }

    #[test]
    fn bernoulli_ball_matches_dense_grid() {
        let m = CategoricalTableModel::bernoulli();
        let center = (0.6f64 / 0.4).ln();
        for r in [0.05, 0.3, 1.0, 2.5] {
            let region = ParameterRegion::ball(vec![center], r).unwrap();
            let cfg = OptimizerConfig::default();
            let up = constrained_sup(&m, &region, &0, 0, &cfg).unwrap();
            let down = constrained_sup(&m, &region, &0, 1, &cfg).unwrap();
            assert!((up.argmax[0] - (center + r)).abs() < 1e-9);
            assert!((down.argmax[0] - (center - r)).abs() < 1e-9);
            let grid = 100_000;
            let (mut best_up, mut best_down) = (0.0f64, 0.0f64);
            for i in 0..=grid {
                let t = center - r + 2.0 * r * i as f64 / grid as f64;
                best_up = best_up.max(sigmoid(t));
                best_down = best_down.max(1.0 - sigmoid(t));
            }
            assert!((up.value - best_up).abs() < 1e-6);
            assert!((down.value - best_down).abs() < 1e-6);
        }
    }

    #[test]
    fn huge_ball_saturates_every_class() {
        let m = CategoricalTableModel::new(1, 3).unwrap();
        let region = ParameterRegion::ball(vec![0.2, -0.4], 1e3).unwrap();
        let nml = nml_distribution(&m, &region, &0, &OptimizerConfig::default()).unwrap();
        for s in &nml.per_class_sup {
            assert!(*s > 1.0 - 1e-6);
        }
        assert!((nml.leakage_nats - 3f64.ln()).abs() < 1e-3);
    }

    #[test]
    fn singleton_has_zero_leakage() {
        let m = CategoricalTableModel::bernoulli();
        let theta = m.theta_from_probs(&[vec![0.8, 0.2]]).unwrap();
        let nml = nml_distribution(
            &m,
            &ParameterRegion::singleton(theta),
            &0,
            &OptimizerConfig::default(),
        )
        .unwrap();
        assert!((nml.normalizer - 1.0).abs() < 1e-15);
        assert!(nml.leakage_nats.abs() < 1e-15);
        assert!((nml.q[0] - 0.8).abs() < 1e-15);
        assert_eq!(nml.predicted_class, 0);
    }

    #[test]
    fn closed_form_interval_leakage() {
        // Endpoints with p(c0) = 0.7 at the top and p(c1) = 0.5 at the bottom.
        let m = CategoricalTableModel::bernoulli();
        let hi = (0.7f64 / 0.3).ln();
        let lo = 0.0;
        let region = ParameterRegion::ball(vec![0.5 * (hi + lo)], 0.5 * (hi - lo)).unwrap();
        let nml = nml_distribution(&m, &region, &0, &OptimizerConfig::default()).unwrap();
        assert!((nml.per_class_sup[0] - 0.7).abs() < 1e-9);
        assert!((nml.per_class_sup[1] - 0.5).abs() < 1e-9);
        assert!((nml.normalizer - 1.2).abs() < 1e-9);
        assert!((nml.leakage_nats - 1.2f64.ln()).abs() < 1e-9);
        assert!((nml.leakage_nats - 0.18232).abs() < 1e-5);
        assert_eq!(
            nml_classify(
                &m,
                &region,
                &0,
                &OptimizerConfig::default(),
                &mut stream(0, &[])
            )
            .unwrap(),
            0
        );
    }

    #[test]
    fn ties_break_uniformly() {
        let m = CategoricalTableModel::bernoulli();
        let region = ParameterRegion::ball(vec![0.0], 0.4).unwrap();
        let nml = nml_distribution(&m, &region, &0, &OptimizerConfig::default()).unwrap();
        let mut rng = stream(5, &[]);
        let draws = 10_000;
        let ones = (0..draws)
            .filter(|_| argmax_with_ties(&nml.per_class_sup, &mut rng) == 1)
            .count();
        assert!((ones as f64 / draws as f64 - 0.5).abs() < 0.02);
    }

    #[test]
    fn nested_balls_are_monotone() {
        let m = CategoricalTableModel::bernoulli();
        let cfg = OptimizerConfig::default();
        let small = ParameterRegion::ball(vec![0.3], 0.1).unwrap();
        let big = ParameterRegion::ball(vec![0.3], 0.5).unwrap();
        assert!(leakage_monotonicity_check(&m, &small, &big, &0, &cfg).unwrap());
        assert!(leakage_monotonicity_check(&m, &big, &big, &0, &cfg).unwrap());
        assert!(leakage_monotonicity_check(
            &m,
            &ParameterRegion::singleton(vec![0.3]),
            &big,
            &0,
            &cfg
        )
        .unwrap());
        assert!(!leakage_monotonicity_check(&m, &big, &small, &0, &cfg).unwrap());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let m = CategoricalTableModel::new(2, 2).unwrap();
        let region = ParameterRegion::ball(vec![0.0], 1.0).unwrap();
        assert!(nml_distribution(&m, &region, &0, &OptimizerConfig::default()).is_err());
    }
}
