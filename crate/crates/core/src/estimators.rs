//! Maximum-likelihood estimation and the noisy-ball region around θ̂.

use serde::{Deserialize, Serialize};

use crate::bounds::sigma_max_rho;
use crate::error::{Error, Result};
use crate::models::{
    weighted_fisher, CategoricalTableModel, ConditionalModel, OverparamSoftmaxModel,
    SoftmaxLinearModel,
};
use crate::numerics::{chi2_inverse_cdf, max_eigenvalue, norm, SymmetricMatrix};
use crate::region::ParameterRegion;

/// Pseudo-count added to every (cell, class) pair of a categorical table.
pub const TABLE_SMOOTHING: f64 = 0.5;
/// L2 penalty `ridge/2 · ‖θ‖²` of the softmax fits.
pub const SOFTMAX_RIDGE: f64 = 1e-6;
/// Points sampled in the ball when estimating `σ_max^{(ε)}` for radius rules.
pub const RADIUS_SIGMA_SAMPLES: usize = 64;

const NEWTON_MAX_ITER: usize = 200;
/// Gradient tolerance per record.
const NEWTON_GRAD_TOL: f64 = 1e-9;
/// Stop once the Newton decrement promises less than this many nats per
/// record; smaller gains drown in the rounding of the summed likelihood.
const NEWTON_DECREMENT_TOL: f64 = 1e-14;

/// Training sample `zⁿ = ((x₁, y₁), …, (xₙ, yₙ))` with 0-based classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset<X> {
    pub records: Vec<(X, usize)>,
}

impl<X> Dataset<X> {
    pub fn new(records: Vec<(X, usize)>) -> Self {
        Self { records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn validate<M: ConditionalModel<Input = X>>(&self, model: &M) -> Result<()> {
        for (x, y) in &self.records {
            model.check_input(x)?;
            model.check_class(*y)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MleWarning {
    /// Some (cell, class) count was zero; the estimate relies on smoothing.
    SparseCounts,
    /// The classes are linearly separable; the ridge keeps θ̂ finite.
    Separation,
    /// Newton iterations hit their cap.
    NotConverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleFit {
    pub theta: Vec<f64>,
    /// Norm of the gradient of the (smoothed or penalized) log-likelihood.
    pub gradient_norm: f64,
    pub warning: Option<MleWarning>,
}

/// Models with a maximum-likelihood fitting routine.
pub trait MaximumLikelihood: ConditionalModel {
    fn fit_mle(&self, data: &Dataset<Self::Input>) -> Result<MleFit>;
}

impl MaximumLikelihood for CategoricalTableModel {
    /// Closed form: logits of the smoothed frequencies
    /// `(count + 0.5) / (n_x + 0.5·K)` per cell. Empty cells stay uniform.
    fn fit_mle(&self, data: &Dataset<usize>) -> Result<MleFit> {
        if data.is_empty() {
            return Err(Error::invalid(
                "maximum likelihood needs at least one record",
            ));
        }
        data.validate(self)?;
        let k = self.num_classes();
        let mut counts = vec![vec![0.0; k]; self.num_inputs()];
        for (x, y) in &data.records {
            counts[*x][*y] += 1.0;
        }
        let sparse = counts.iter().any(|row| row.contains(&0.0));
        let table: Vec<Vec<f64>> = counts
            .iter()
            .map(|row| row.iter().map(|c| c + TABLE_SMOOTHING).collect())
            .collect();
        let theta = self.theta_from_probs(&table)?;
        let mut grad = vec![0.0; self.param_dim()];
        for (x, row) in table.iter().enumerate() {
            let probs = self.probs(&theta, &x)?;
            for (y, c) in row.iter().enumerate() {
                let s = self.score_vector(&probs, &x, y);
                grad.iter_mut().zip(&s).for_each(|(g, v)| *g += c * v);
            }
        }
        Ok(MleFit {
            theta,
            gradient_norm: norm(&grad),
            warning: sparse.then_some(MleWarning::SparseCounts),
        })
    }
}

fn penalized_value<M: ConditionalModel>(
    model: &M,
    data: &Dataset<M::Input>,
    theta: &[f64],
    ridge: f64,
) -> Result<f64> {
    let mut value = -0.5 * ridge * theta.iter().map(|t| t * t).sum::<f64>();
    for (x, y) in &data.records {
        value += model.log_prob(theta, x, *y)?;
    }
    Ok(value)
}

/// Ridge-penalized log-likelihood, its gradient, and its negative Hessian.
fn penalized<M: ConditionalModel>(
    model: &M,
    data: &Dataset<M::Input>,
    theta: &[f64],
    ridge: f64,
) -> Result<(f64, Vec<f64>, SymmetricMatrix)> {
    let d = model.param_dim();
    let mut value = -0.5 * ridge * theta.iter().map(|t| t * t).sum::<f64>();
    let mut grad: Vec<f64> = theta.iter().map(|t| -ridge * t).collect();
    let mut hess = SymmetricMatrix::zeros(d);
    for i in 0..d {
        hess.set(i, i, ridge);
    }
    for (x, y) in &data.records {
        let lp = model.log_probs(theta, x)?;
        let probs: Vec<f64> = lp.iter().map(|v| v.exp()).collect();
        value += lp[*y];
        let s = model.score_vector(&probs, x, *y);
        grad.iter_mut().zip(&s).for_each(|(g, v)| *g += v);
        hess.add_scaled(&model.fisher_at(theta, x)?, 1.0);
    }
    Ok((value, grad, hess))
}

/// Damped Newton ascent on the ridge-penalized log-likelihood of a
/// linear-logit model. Its negative Hessian is `Σ I(θ|xᵢ) + ridge·𝟙`.
pub fn newton_fit<M: ConditionalModel>(
    model: &M,
    data: &Dataset<M::Input>,
    ridge: f64,
) -> Result<MleFit> {
    if data.is_empty() {
        return Err(Error::invalid(
            "maximum likelihood needs at least one record",
        ));
    }
    data.validate(model)?;
    let grad_tol = NEWTON_GRAD_TOL * data.len() as f64;
    let mut theta = vec![0.0; model.param_dim()];
    let (mut value, mut grad, mut hess) = penalized(model, data, &theta, ridge)?;
    let mut converged = false;
    for _ in 0..NEWTON_MAX_ITER {
        if norm(&grad) < grad_tol {
            converged = true;
            break;
        }
        let direction = hess
            .cholesky_solve(&grad)
            .unwrap_or_else(|| grad.iter().map(|g| g / ridge.max(1.0)).collect());
        let slope: f64 = grad.iter().zip(&direction).map(|(g, d)| g * d).sum();
        if slope.abs() < 2.0 * NEWTON_DECREMENT_TOL * data.len() as f64 {
            converged = true;
            break;
        }
        let mut step = 1.0;
        let mut moved = false;
        while step > 1e-12 {
            let cand: Vec<f64> = theta
                .iter()
                .zip(&direction)
                .map(|(t, d)| t + step * d)
                .collect();
            if penalized_value(model, data, &cand, ridge)? >= value + 1e-4 * step * slope {
                theta = cand;
                (value, grad, hess) = penalized(model, data, &theta, ridge)?;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            converged = norm(&grad) < 1e3 * grad_tol;
            break;
        }
    }
    let separated = data.records.iter().all(|(x, y)| {
        model
            .scores(&theta, x)
            .iter()
            .enumerate()
            .all(|(k, s)| k == *y || *s < model.scores(&theta, x)[*y])
    });
    let warning = if separated {
        Some(MleWarning::Separation)
    } else if !converged {
        Some(MleWarning::NotConverged)
    } else {
        None
    };
    Ok(MleFit {
        theta,
        gradient_norm: norm(&grad),
        warning,
    })
}

impl MaximumLikelihood for SoftmaxLinearModel {
    fn fit_mle(&self, data: &Dataset<Vec<f64>>) -> Result<MleFit> {
        newton_fit(self, data, SOFTMAX_RIDGE)
    }
}

impl MaximumLikelihood for OverparamSoftmaxModel {
    /// The ridge selects the minimum-norm representative of the
    /// shift-equivalence class of maximizers.
    fn fit_mle(&self, data: &Dataset<Vec<f64>>) -> Result<MleFit> {
        newton_fit(self, data, SOFTMAX_RIDGE)
    }
}

/// How the noisy-ball radius is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "schedule", rename_all = "kebab-case")]
pub enum RadiusSchedule {
    Fixed {
        radius: f64,
    },
    /// `ρ_ε = min(ε, ε / C_ε)` with `C_ε = 2K·sqrt(σ_max^{(ε)}(θ̂|x))`.
    FisherScaled {
        epsilon: f64,
    },
    /// `ρ_n = sqrt(G_d⁻¹(1 − δ + c/√n) / (n·σ_min))`.
    BerryEsseen {
        delta: f64,
        c: f64,
        sigma_min: f64,
    },
}

/// Berry-Esseen radius for sample size `n` in `d` dimensions.
pub fn berry_esseen_radius(d: usize, n: usize, delta: f64, c: f64, sigma_min: f64) -> Result<f64> {
    if !(sigma_min > 0.0) {
        return Err(Error::invalid(format!(
            "σ_min must be positive for the Berry-Esseen radius, got {sigma_min}"
        )));
    }
    let level = 1.0 - delta + c / (n as f64).sqrt();
    if n == 0 || !(level > 0.0 && level < 1.0) {
        return Err(Error::InfeasibleSampleSize { n, level });
    }
    Ok((chi2_inverse_cdf(d, level)? / (n as f64 * sigma_min)).sqrt())
}

/// Smallest eigenvalue of the weighted Fisher average at θ.
pub fn sigma_min<'a, M: ConditionalModel>(
    model: &M,
    theta: &[f64],
    points: impl IntoIterator<Item = (&'a M::Input, f64)>,
) -> Result<f64>
where
    M::Input: 'a,
{
    Ok(max_eigenvalue(&weighted_fisher(model, theta, points)?).1)
}

/// Resolves the radius of the ball around `theta_hat` for query `x`.
///
/// `seed` drives the ball sampling of the Fisher-scaled rule.
pub fn schedule_radius<M: ConditionalModel>(
    model: &M,
    theta_hat: &[f64],
    schedule: &RadiusSchedule,
    x: &M::Input,
    n: usize,
    seed: u64,
) -> Result<f64> {
    let radius = match schedule {
        RadiusSchedule::Fixed { radius } => *radius,
        RadiusSchedule::FisherScaled { epsilon } => {
            let sigma = sigma_max_rho(model, theta_hat, *epsilon, x, RADIUS_SIGMA_SAMPLES, seed)?;
            let c_eps = 2.0 * model.num_classes() as f64 * sigma.sqrt();
            if c_eps > 0.0 {
                epsilon.min(epsilon / c_eps)
            } else {
                *epsilon
            }
        }
        RadiusSchedule::BerryEsseen {
            delta,
            c,
            sigma_min,
        } => berry_esseen_radius(model.param_dim(), n, *delta, *c, *sigma_min)?,
    };
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::invalid(format!("schedule produced radius {radius}")));
    }
    Ok(radius)
}

/// `Ball(θ̂, ρ)`, the support of `φ = θ̂(zⁿ) + W_ρ`.
pub fn noisy_ball_region<M: ConditionalModel>(
    model: &M,
    theta_hat: &[f64],
    schedule: &RadiusSchedule,
    x: &M::Input,
    n: usize,
    seed: u64,
) -> Result<ParameterRegion> {
    let radius = schedule_radius(model, theta_hat, schedule, x, n, seed)?;
    ParameterRegion::ball(theta_hat.to_vec(), radius)
}

/// The plug-in estimator's support `{θ̂}`.
pub fn plug_in_region(theta_hat: &[f64]) -> ParameterRegion {
    ParameterRegion::singleton(theta_hat.to_vec())
}
