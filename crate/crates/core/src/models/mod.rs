//! Parametric conditional models `p_θ(y | x)`.
//!
//! All three families share linear logits: class `k` gets the score
//! `Σ_j W[k, j] φ_j(x)` for a feature vector `φ(x)`, and probabilities are the
//! softmax of those scores. The identifiable families pin the last class row
//! to zero so that θ ranges over all of `ℝ^d`.

mod categorical;
mod overparam;
mod softmax;

use std::fmt::Debug;

pub use categorical::CategoricalTableModel;
pub use overparam::OverparamSoftmaxModel;
pub use softmax::SoftmaxLinearModel;

use crate::error::{Error, Result};
use crate::numerics::{floored_ln, log_sum_exp, SymmetricMatrix};

/// A family of conditional distributions `p_θ(y|x)` over `K` classes.
///
/// Classes are 0-based here; CSV import/export shifts to 1-based labels.
pub trait ConditionalModel: Send + Sync + Debug {
    type Input: Clone + Debug + Send + Sync;

    fn param_dim(&self) -> usize;
    fn num_classes(&self) -> usize;
    fn check_input(&self, x: &Self::Input) -> Result<()>;

    /// Unnormalized class scores; `theta` and `x` are already validated.
    fn scores(&self, theta: &[f64], x: &Self::Input) -> Vec<f64>;

    /// `∂ score_k / ∂θ` accumulated as `grad += weight_k · ∂score_k/∂θ` over all `k`.
    fn accumulate_score_grad(&self, x: &Self::Input, weights: &[f64], grad: &mut [f64]);

    /// Whether distinct parameters always give distinct conditionals.
    fn identifiable(&self) -> bool {
        true
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.param_dim() {
            return Err(Error::invalid(format!(
                "parameter vector has length {}, model expects {}",
                theta.len(),
                self.param_dim()
            )));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("parameter vector has non-finite entries"));
        }
        Ok(())
    }

    /// `ln p_θ(y|x)` for every class, floored at `ln 1e-300`.
    fn log_probs(&self, theta: &[f64], x: &Self::Input) -> Result<Vec<f64>> {
        self.check_theta(theta)?;
        self.check_input(x)?;
        Ok(log_softmax(&self.scores(theta, x)))
    }

    fn probs(&self, theta: &[f64], x: &Self::Input) -> Result<Vec<f64>> {
        Ok(self
            .log_probs(theta, x)?
            .into_iter()
            .map(f64::exp)
            .collect())
    }

    fn log_prob(&self, theta: &[f64], x: &Self::Input, y: usize) -> Result<f64> {
        self.check_class(y)?;
        Ok(self.log_probs(theta, x)?[y])
    }

    fn check_class(&self, y: usize) -> Result<()> {
        if y >= self.num_classes() {
            return Err(Error::invalid(format!(
                "class index {y} out of range for {} classes",
                self.num_classes()
            )));
        }
        Ok(())
    }

    /// `∇_θ ln p_θ(y|x)`.
    fn grad_log_prob(&self, theta: &[f64], x: &Self::Input, y: usize) -> Result<Vec<f64>> {
        self.check_class(y)?;
        let probs = self.probs(theta, x)?;
        Ok(self.score_vector(&probs, x, y))
    }

    /// Score vector for class `y` given the class probabilities at θ.
    fn score_vector(&self, probs: &[f64], x: &Self::Input, y: usize) -> Vec<f64> {
        let weights: Vec<f64> = probs
            .iter()
            .enumerate()
            .map(|(k, p)| if k == y { 1.0 - p } else { -p })
            .collect();
        let mut grad = vec![0.0; self.param_dim()];
        self.accumulate_score_grad(x, &weights, &mut grad);
        grad
    }

    /// Fisher information `I(θ|x) = Σ_y p_θ(y|x) s_y s_yᵀ`, summed exactly over classes.
    fn fisher_at(&self, theta: &[f64], x: &Self::Input) -> Result<SymmetricMatrix> {
        let probs = self.probs(theta, x)?;
        let mut fisher = SymmetricMatrix::zeros(self.param_dim());
        for (y, &p) in probs.iter().enumerate() {
            if p > 0.0 {
                fisher.add_outer(&self.score_vector(&probs, x, y), p);
            }
        }
        Ok(fisher)
    }
}

pub(crate) fn log_softmax(scores: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(scores);
    let floor = floored_ln(0.0);
    scores.iter().map(|s| (s - lse).max(floor)).collect()
}

/// Empirical average of `I(θ|x)` over `x_samples`.
pub fn unconditional_fisher<M: ConditionalModel>(
    model: &M,
    theta: &[f64],
    x_samples: &[M::Input],
) -> Result<SymmetricMatrix> {
    weighted_fisher(model, theta, x_samples.iter().map(|x| (x, 1.0)))
}

/// `Σ_i w_i I(θ|x_i) / Σ_i w_i`.
pub fn weighted_fisher<'a, M: ConditionalModel>(
    model: &M,
    theta: &[f64],
    points: impl IntoIterator<Item = (&'a M::Input, f64)>,
) -> Result<SymmetricMatrix>
where
    M::Input: 'a,
{
    let mut total = SymmetricMatrix::zeros(model.param_dim());
    let mut weight_sum = 0.0;
    for (x, w) in points {
        total.add_scaled(&model.fisher_at(theta, x)?, w);
        weight_sum += w;
    }
    if weight_sum <= 0.0 {
        return Err(Error::invalid("Fisher average needs at least one input"));
    }
    total.scale(1.0 / weight_sum);
    Ok(total)
}

/// KL divergence `D(p_a(·|x) ‖ p_b(·|x))`.
pub fn model_kl<M: ConditionalModel>(
    model: &M,
    theta_a: &[f64],
    theta_b: &[f64],
    x: &M::Input,
) -> Result<f64> {
    let pa = model.probs(theta_a, x)?;
    let pb = model.probs(theta_b, x)?;
    Ok(crate::numerics::kl_divergence(&pa, &pb))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{central_gradient, central_hessian, max_eigenvalue};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn check_family<M: ConditionalModel>(
        model: &M,
        rng: &mut ChaCha8Rng,
        draw_x: impl Fn(&mut ChaCha8Rng) -> M::Input,
        trials: usize,
    ) {
        let d = model.param_dim();
        for _ in 0..trials {
            let theta: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let x = draw_x(rng);
            let probs = model.probs(&theta, &x).unwrap();
            assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-10);

            let y = rng.gen_range(0..model.num_classes());
            let analytic = model.grad_log_prob(&theta, &x, y).unwrap();
            let numeric = central_gradient(|t| model.log_prob(t, &x, y).unwrap(), &theta, 1e-5);
            for (a, n) in analytic.iter().zip(&numeric) {
                assert!((a - n).abs() <= 1e-4 * a.abs().max(n.abs()).max(1e-3));
            }

            let fisher = model.fisher_at(&theta, &x).unwrap();
            let (_, lo) = max_eigenvalue(&fisher);
            assert!(lo >= -1e-9);
        }
    }

    #[test]
    fn generic_invariants_hold_for_all_families() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let cat = CategoricalTableModel::new(3, 4).unwrap();
        check_family(&cat, &mut rng, |r| r.gen_range(0..3), 300);
        let soft = SoftmaxLinearModel::new(3, 2).unwrap();
        check_family(
            &soft,
            &mut rng,
            |r| vec![r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0)],
            300,
        );
        let over = OverparamSoftmaxModel::new(3, 2).unwrap();
        check_family(
            &over,
            &mut rng,
            |r| vec![r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0)],
            300,
        );
    }

    #[test]
    fn fisher_equals_kl_hessian() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let soft = SoftmaxLinearModel::new(3, 2).unwrap();
        for _ in 0..20 {
            let theta: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let x = vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let hess = central_hessian(|t| model_kl(&soft, t, &theta, &x).unwrap(), &theta, 1e-4);
            let fisher = soft.fisher_at(&theta, &x).unwrap().to_dense();
            for i in 0..4 {
                for j in 0..4 {
                    assert!((hess[i][j] - fisher[i][j]).abs() < 1e-4);
                }
            }
            let grad = central_gradient(|t| model_kl(&soft, t, &theta, &x).unwrap(), &theta, 1e-5);
            assert!(crate::numerics::norm(&grad) < 1e-6);
        }
    }

    #[test]
    fn unconditional_fisher_is_average() {
        let cat = CategoricalTableModel::new(2, 2).unwrap();
        let theta = [0.3, -0.8];
        let single = cat.fisher_at(&theta, &0).unwrap();
        assert_eq!(unconditional_fisher(&cat, &theta, &[0]).unwrap(), single);
        let twice = unconditional_fisher(&cat, &theta, &[0, 0]).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((twice.get(i, j) - single.get(i, j)).abs() < 1e-15);
            }
        }
        let other = cat.fisher_at(&theta, &1).unwrap();
        let mixed = unconditional_fisher(&cat, &theta, &[0, 1]).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let direct = (single.get(i, j) + other.get(i, j)) / 2.0;
                assert!((mixed.get(i, j) - direct).abs() < 1e-15);
            }
        }
        assert!(unconditional_fisher(&cat, &theta, &[]).is_err());
    }
}
