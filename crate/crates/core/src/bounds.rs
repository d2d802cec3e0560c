//! Bound quantities relating leakage and approximation error to the excess
//! misclassification of the NML hypothesis over the MAP rule.
//!
//! Every inequality is checked with an absolute tolerance of
//! [`INEQUALITY_TOL`] nats.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::decision::{argmax_with_ties, GroundTruth};
use crate::error::{Error, Result};
use crate::models::ConditionalModel;
use crate::nml::{nml_distribution, NmlDistribution};
use crate::numerics::{floored_ln, log_sum_exp, max_eigenvalue};
use crate::optim::{projected_ascent, OptimizerConfig};
use crate::region::ParameterRegion;
use crate::rng;

pub const INEQUALITY_TOL: f64 = 1e-8;
/// Points on each segment `[θ₁, θ_k]` where `σ_max` is evaluated.
pub const SEGMENT_POINTS: usize = 32;
/// Ball points sampled by the `σ_max^{(ρ)}` / `T^{(ρ)}` surrogates in reports.
pub const BALL_SIGMA_SAMPLES: usize = 64;

/// `max_y ln f(y)/q(y)` over classes with `f(y) > 0`; `q` floored at 1e-300.
pub fn redundancy(f: &[f64], q: &[f64]) -> f64 {
    f.iter()
        .zip(q)
        .filter(|(&fy, _)| fy > 0.0)
        .map(|(&fy, &qy)| fy.ln() - floored_ln(qy))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `max_y [ln sup_θ p_θ(y|x) − ln q(y)]` from precomputed per-class suprema.
pub fn regret_from_sups(per_class_sup: &[f64], q: &[f64]) -> f64 {
    per_class_sup
        .iter()
        .zip(q)
        .map(|(&s, &qy)| floored_ln(s) - floored_ln(qy))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `REG_max(Θ, q | x)`; equals `ln Z` when `q` is the NML distribution.
pub fn regret_max<M: ConditionalModel>(
    model: &M,
    region: &ParameterRegion,
    q: &[f64],
    x: &M::Input,
    cfg: &OptimizerConfig,
) -> Result<f64> {
    if q.len() != model.num_classes() {
        return Err(Error::invalid("q must have one entry per class"));
    }
    let nml = nml_distribution(model, region, x, cfg)?;
    Ok(regret_from_sups(&nml.per_class_sup, q))
}

/// `max_y ln f(y)/p_θ(y|x)` over classes with `f(y) > 0`.
pub fn worst_log_ratio<M: ConditionalModel>(
    model: &M,
    f: &[f64],
    theta: &[f64],
    x: &M::Input,
) -> Result<f64> {
    let lp = model.log_probs(theta, x)?;
    Ok(f.iter()
        .zip(&lp)
        .filter(|(&fy, _)| fy > 0.0)
        .map(|(&fy, &l)| fy.ln() - l)
        .fold(f64::NEG_INFINITY, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaResult {
    pub value: f64,
    pub argmin: Vec<f64>,
    pub converged: bool,
}

/// `Δ(f, Θ | x) = inf_{θ∈Θ} max_y ln f(y|x)/p_θ(y|x)` for the truth's
/// conditional `f` at `x`.
///
/// Finite sets and grids are enumerated. On balls each start (center plus
/// `cfg.restarts` seeded points) descends the log-sum-exp smoothing of the
/// per-class log-ratios with temperatures 10, 100, … up to
/// `cfg.delta_temperature`, warm-starting each stage; the reported value is
/// the exact worst-class ratio at the best point found, so it never
/// undercuts the true infimum.
pub fn delta_gap<M: ConditionalModel>(
    f: &[f64],
    model: &M,
    region: &ParameterRegion,
    x: &M::Input,
    cfg: &OptimizerConfig,
) -> Result<DeltaResult> {
    if f.len() != model.num_classes() {
        return Err(Error::invalid(
            "truth conditional must have one entry per class",
        ));
    }
    if region.dim() != model.param_dim() {
        return Err(Error::invalid("region dimension does not match the model"));
    }
    if let Some(points) = region.enumerate()? {
        let mut best = DeltaResult {
            value: f64::INFINITY,
            argmin: points[0].clone(),
            converged: true,
        };
        for p in points {
            let v = worst_log_ratio(model, f, &p, x)?;
            if v < best.value {
                best.value = v;
                best.argmin = p;
            }
        }
        return Ok(best);
    }

    let support: Vec<usize> = (0..f.len()).filter(|&y| f[y] > 0.0).collect();
    let ln_f: Vec<f64> = f.iter().map(|v| floored_ln(*v)).collect();
    let mut temperatures = Vec::new();
    let mut t = 10.0f64.min(cfg.delta_temperature);
    loop {
        temperatures.push(t);
        if t >= cfg.delta_temperature {
            break;
        }
        t = (t * 10.0).min(cfg.delta_temperature);
    }

    let mut rng = cfg.rng();
    let mut starts = vec![region.center()];
    starts.extend((0..cfg.restarts).map(|_| region.sample(&mut rng)));

    let mut best: Option<DeltaResult> = None;
    let mut any_converged = false;
    for start in starts {
        let mut theta = start;
        let mut converged = false;
        for &temp in &temperatures {
            let objective = |th: &[f64]| -> Result<(f64, Vec<f64>)> {
                let lp = model.log_probs(th, x)?;
                let probs: Vec<f64> = lp.iter().map(|v| v.exp()).collect();
                let ratios: Vec<f64> = support.iter().map(|&y| temp * (ln_f[y] - lp[y])).collect();
                let lse = log_sum_exp(&ratios);
                let mut grad = vec![0.0; th.len()];
                for (&y, r) in support.iter().zip(&ratios) {
                    let w = (r - lse).exp();
                    let s = model.score_vector(&probs, x, y);
                    grad.iter_mut().zip(&s).for_each(|(g, v)| *g += w * v);
                }
                Ok((-lse / temp, grad))
            };
            let run = projected_ascent(&objective, region, &theta, cfg)?;
            theta = run.point;
            converged = run.converged;
        }
        any_converged |= converged;
        let value = worst_log_ratio(model, f, &theta, x)?;
        if best.as_ref().is_none_or(|b| value < b.value) {
            best = Some(DeltaResult {
                value,
                argmin: theta,
                converged,
            });
        }
    }
    let mut best = best.expect("center start always runs");
    best.converged = any_converged;
    Ok(best)
}

/// Fisher-path bound on the leakage, in both forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherLeakageBound {
    /// `Σ_{k≥2} ‖θ_k − θ₁‖ · sqrt(σ̄_k)`, the bound on `e^ℒ − 1`.
    pub sum_term: f64,
    /// `ln(1 + sum_term)`, the bound on `ℒ`.
    pub log_rhs: f64,
}

/// Fisher-eigenvalue bound on the leakage of a convex region.
///
/// `σ̄_k` is the largest `σ_max(·|x)` over [`SEGMENT_POINTS`] evenly spaced
/// points of the segment from θ₁ (class 0's maximizer) to θ_k.
pub fn fisher_rhs<M: ConditionalModel>(
    model: &M,
    region: &ParameterRegion,
    x: &M::Input,
    per_class_argmax: &[Vec<f64>],
) -> Result<FisherLeakageBound> {
    if !region.is_convex() {
        return Err(Error::invalid(
            "the Fisher leakage bound needs a convex region",
        ));
    }
    if per_class_argmax.len() != model.num_classes() {
        return Err(Error::invalid("need one maximizer per class"));
    }
    let first = &per_class_argmax[0];
    let mut sum_term = 0.0;
    for theta_k in &per_class_argmax[1..] {
        let length = crate::numerics::distance(theta_k, first);
        if length == 0.0 {
            continue;
        }
        let mut sigma_bar = 0.0f64;
        for i in 0..SEGMENT_POINTS {
            let tau = i as f64 / (SEGMENT_POINTS - 1) as f64;
            let point: Vec<f64> = first
                .iter()
                .zip(theta_k)
                .map(|(a, b)| tau * a + (1.0 - tau) * b)
                .collect();
            sigma_bar = sigma_bar.max(max_eigenvalue(&model.fisher_at(&point, x)?).0);
        }
        sum_term += length * sigma_bar.max(0.0).sqrt();
    }
    Ok(FisherLeakageBound {
        sum_term,
        log_rhs: sum_term.ln_1p(),
    })
}

/// Probe points of `B(θ̂, ρ)`: the center, `n_samples` seeded uniform points
/// and the `2d` axis extremes `θ̂ ± ρ e_i`.
pub fn ball_probe_points(
    theta_hat: &[f64],
    rho: f64,
    n_samples: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    let mut points = vec![theta_hat.to_vec()];
    if rho <= 0.0 {
        return points;
    }
    let ball = ParameterRegion::Ball {
        center: theta_hat.to_vec(),
        radius: rho,
    };
    let mut rng = rng::stream(seed, &[rng::Stream::BallSampling as u64]);
    points.extend((0..n_samples).map(|_| ball.sample(&mut rng)));
    for i in 0..theta_hat.len() {
        for sign in [-1.0, 1.0] {
            let mut p = theta_hat.to_vec();
            p[i] += sign * rho;
            points.push(p);
        }
    }
    points
}

/// Sampled surrogate of `σ_max^{(ρ)}(θ̂|x) = sup_{‖θ−θ̂‖<ρ} σ_max(θ|x)`.
///
/// A lower bound on the true supremum; exact as `ρ → 0`.
pub fn sigma_max_rho<M: ConditionalModel>(
    model: &M,
    theta_hat: &[f64],
    rho: f64,
    x: &M::Input,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for p in ball_probe_points(theta_hat, rho, n_samples, seed) {
        best = best.max(max_eigenvalue(&model.fisher_at(&p, x)?).0);
    }
    Ok(best)
}

/// Sampled `T^{(ρ)}(θ̂|x)`: largest trace of `I(θ|x)` on the probe points.
pub fn trace_rho<M: ConditionalModel>(
    model: &M,
    theta_hat: &[f64],
    rho: f64,
    x: &M::Input,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for p in ball_probe_points(theta_hat, rho, n_samples, seed) {
        best = best.max(model.fisher_at(&p, x)?.trace());
    }
    Ok(best)
}

/// `2ρK·sqrt(T^{(ρ)}(θ̂))` where `T(θ)` averages the Fisher trace over
/// `x_samples` and the supremum runs over the probe points of the ball.
pub fn trace_leakage_rhs<M: ConditionalModel>(
    model: &M,
    theta_hat: &[f64],
    rho: f64,
    x_samples: &[M::Input],
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    if x_samples.is_empty() {
        return Err(Error::invalid("trace bound needs at least one input"));
    }
    let mut best = f64::NEG_INFINITY;
    for p in ball_probe_points(theta_hat, rho, n_samples, seed) {
        let mut avg = 0.0;
        for x in x_samples {
            avg += model.fisher_at(&p, x)?.trace();
        }
        best = best.max(avg / x_samples.len() as f64);
    }
    Ok(2.0 * rho * model.num_classes() as f64 * best.max(0.0).sqrt())
}

/// Per-query bound report for one region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub nml_class: usize,
    pub map_class: usize,
    /// `E(h_NML; x, zⁿ) − E(h_MAP; x)`.
    pub gap: f64,
    pub delta: f64,
    pub leakage: f64,
    /// `R(f, q_NML | x)`.
    pub redundancy: f64,
    /// `REG_max(Θ, q_NML | x)`; equals `leakage` up to rounding.
    pub regret: f64,
    /// `exp(Δ + ℒ) − 1`.
    pub gap_rhs: f64,
    /// Fisher-path bound on `e^ℒ − 1`; `None` for non-convex regions.
    pub fisher_rhs: Option<f64>,
    /// `2ρK·sqrt(σ_max^{(ρ)}(center|x))` for ball regions.
    pub ball_rhs: Option<f64>,
    pub gap_bound_holds: bool,
    pub fisher_bound_holds: Option<bool>,
    /// `gap ≤ e^R − 1`.
    pub redundancy_gap_holds: bool,
    /// `R ≤ Δ + REG_max`.
    pub redundancy_split_holds: bool,
    /// `gap ≥ −1e-12`.
    pub map_optimal: bool,
    pub converged: bool,
}

impl BoundReport {
    pub fn exp_leakage_minus_1(&self) -> f64 {
        self.leakage.exp_m1()
    }

    /// All inequality flags that apply held.
    pub fn all_hold(&self) -> bool {
        self.gap_bound_holds
            && self.fisher_bound_holds.unwrap_or(true)
            && self.redundancy_gap_holds
            && self.redundancy_split_holds
            && self.map_optimal
    }
}

/// Evaluates every bound for `region` at `x`. The region encodes the
/// training set; `tie_rng` breaks ties of the NML and MAP rules.
pub fn bound_report<T, M, R>(
    truth: &T,
    model: &M,
    region: &ParameterRegion,
    x: &M::Input,
    cfg: &OptimizerConfig,
    tie_rng: &mut R,
) -> Result<BoundReport>
where
    T: GroundTruth<Input = M::Input>,
    M: ConditionalModel,
    R: Rng + ?Sized,
{
    let f = truth.conditional(x)?;
    let nml = nml_distribution(model, region, x, &cfg.derive(&[1]))?;
    let delta = delta_gap(&f, model, region, x, &cfg.derive(&[2]))?;
    report_from_parts(&f, model, region, x, &nml, &delta, cfg, tie_rng)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn report_from_parts<M: ConditionalModel, R: Rng + ?Sized>(
    f: &[f64],
    model: &M,
    region: &ParameterRegion,
    x: &M::Input,
    nml: &NmlDistribution,
    delta: &DeltaResult,
    cfg: &OptimizerConfig,
    tie_rng: &mut R,
) -> Result<BoundReport> {
    let nml_class = argmax_with_ties(&nml.per_class_sup, tie_rng);
    let map_class = argmax_with_ties(f, tie_rng);
    let f_max = f.iter().copied().fold(0.0, f64::max);
    let gap = f_max - f[nml_class];
    let leakage = nml.leakage_nats;
    let gap_rhs = (delta.value + leakage).exp_m1();
    let red = redundancy(f, &nml.q);
    let regret = regret_from_sups(&nml.per_class_sup, &nml.q);

    let fisher = if region.is_convex() {
        Some(fisher_rhs(model, region, x, &nml.per_class_argmax)?.sum_term)
    } else {
        None
    };
    let ball_rhs = match region {
        ParameterRegion::Ball { center, radius } => {
            let sigma = sigma_max_rho(
                model,
                center,
                *radius,
                x,
                BALL_SIGMA_SAMPLES,
                cfg.derive(&[3]).seed,
            )?;
            Some(2.0 * radius * model.num_classes() as f64 * sigma.max(0.0).sqrt())
        }
        _ => None,
    };
    let exp_l = leakage.exp_m1();
    Ok(BoundReport {
        nml_class,
        map_class,
        gap,
        delta: delta.value,
        leakage,
        redundancy: red,
        regret,
        gap_rhs,
        fisher_rhs: fisher,
        ball_rhs,
        gap_bound_holds: gap <= gap_rhs + INEQUALITY_TOL,
        fisher_bound_holds: fisher.map(|rhs| exp_l <= rhs + INEQUALITY_TOL),
        redundancy_gap_holds: gap <= red.exp_m1() + INEQUALITY_TOL,
        redundancy_split_holds: red <= delta.value + regret + INEQUALITY_TOL,
        map_optimal: gap >= -1e-12,
        converged: nml.converged && delta.converged,
    })
}

/// The three quantities of the Berry-Esseen chain for one dataset and query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayChain {
    pub radius: f64,
    /// `‖θ̂ − θ₀‖ ≤ ρ_n`.
    pub covered: bool,
    pub gap: f64,
    pub exp_leakage_minus_1: f64,
    /// `K_{δ,x}/√n` with `K_{δ,x} = 2·sqrt(σ_max^{(2ρ_n)}(θ₀|x) / σ_min(θ₀))`.
    pub k_over_sqrt_n: f64,
    /// The same constant without the `n`-dependence of the radius:
    /// `σ_max` taken over the ball of radius `2·frozen_radius`.
    pub k_frozen_over_sqrt_n: Option<f64>,
    pub chain_holds: bool,
}

/// Inputs of [`decay_chain`] that do not depend on the dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DecaySetup {
    pub delta: f64,
    pub c: f64,
    /// `σ_min` of the unconditional Fisher matrix (true or plug-in).
    pub sigma_min: f64,
    /// Radius at the largest experimental `n`, for the frozen constant.
    pub frozen_radius: Option<f64>,
}

/// `K_{δ,x} = 2·sqrt(σ_max^{(2ρ)}(θ₀|x) / σ_min)`.
pub fn decay_constant<M: ConditionalModel>(
    model: &M,
    theta0: &[f64],
    rho: f64,
    x: &M::Input,
    sigma_min: f64,
    seed: u64,
) -> Result<f64> {
    let sigma = sigma_max_rho(model, theta0, 2.0 * rho, x, BALL_SIGMA_SAMPLES, seed)?;
    Ok(2.0 * (sigma / sigma_min).sqrt())
}

/// Builds the Berry-Esseen ball around `theta_hat` and evaluates
/// `gap ≤ e^ℒ − 1 ≤ K_{δ,x}/√n`.
#[allow(clippy::too_many_arguments)]
pub fn decay_chain<M: ConditionalModel, R: Rng + ?Sized>(
    f: &[f64],
    theta0: &[f64],
    model: &M,
    theta_hat: &[f64],
    n: usize,
    x: &M::Input,
    setup: &DecaySetup,
    cfg: &OptimizerConfig,
    tie_rng: &mut R,
) -> Result<DecayChain> {
    let radius = crate::estimators::berry_esseen_radius(
        model.param_dim(),
        n,
        setup.delta,
        setup.c,
        setup.sigma_min,
    )?;
    let region = ParameterRegion::ball(theta_hat.to_vec(), radius)?;
    let nml = nml_distribution(model, &region, x, cfg)?;
    let nml_class = argmax_with_ties(&nml.per_class_sup, tie_rng);
    let f_max = f.iter().copied().fold(0.0, f64::max);
    let gap = f_max - f[nml_class];
    let exp_l = nml.leakage_nats.exp_m1();
    let sqrt_n = (n as f64).sqrt();
    let k_seed = cfg.derive(&[4]).seed;
    let k_at = |rho: f64| -> Result<f64> {
        Ok(decay_constant(model, theta0, rho, x, setup.sigma_min, k_seed)? / sqrt_n)
    };
    let k_over_sqrt_n = k_at(radius)?;
    let k_frozen_over_sqrt_n = setup.frozen_radius.map(k_at).transpose()?;
    let covered = crate::numerics::distance(theta_hat, theta0) <= radius;
    Ok(DecayChain {
        radius,
        covered,
        gap,
        exp_leakage_minus_1: exp_l,
        k_over_sqrt_n,
        k_frozen_over_sqrt_n,
        chain_holds: gap <= exp_l + INEQUALITY_TOL && exp_l <= k_over_sqrt_n + INEQUALITY_TOL,
    })
}
