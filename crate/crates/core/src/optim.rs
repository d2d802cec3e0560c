//! Projected gradient ascent over a [`ParameterRegion`].

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::region::ParameterRegion;
use crate::rng::{self, StreamRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub max_iter: usize,
    /// Stop once the unit-step projected-gradient norm falls below this.
    pub tolerance: f64,
    /// Seeded uniform starting points in addition to the region center.
    pub restarts: usize,
    pub armijo: f64,
    /// Temperature of the log-sum-exp smoothing in the Δ minimax; the
    /// continuation runs through 10, 100, ... up to this value.
    pub delta_temperature: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tolerance: 1e-8,
            restarts: 8,
            armijo: 1e-4,
            delta_temperature: 1e6,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    /// Same settings with the seed replaced by a child stream of `path`.
    pub fn derive(&self, path: &[u64]) -> Self {
        Self {
            seed: rng::derive_seed(self.seed, path),
            ..self.clone()
        }
    }

    pub fn rng(&self) -> StreamRng {
        rng::stream(self.seed, &[])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AscentResult {
    pub point: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Maximizes `objective` (returning value and gradient) from one start.
pub fn projected_ascent<F>(
    objective: &F,
    region: &ParameterRegion,
    start: &[f64],
    cfg: &OptimizerConfig,
) -> Result<AscentResult>
where
    F: Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let mut theta = region.project(start);
    let (mut value, mut grad) = objective(&theta)?;
    let mut step = 1.0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        let probe: Vec<f64> = theta.iter().zip(&grad).map(|(t, g)| t + g).collect();
        let mapping = crate::numerics::distance(&region.project(&probe), &theta);
        if mapping < cfg.tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        let mut t = step;
        let mut accepted = None;
        while t > 1e-30 {
            let cand: Vec<f64> = theta.iter().zip(&grad).map(|(a, g)| a + t * g).collect();
            let cand = region.project(&cand);
            let (cv, cg) = objective(&cand)?;
            let ascent: f64 = grad
                .iter()
                .zip(cand.iter().zip(&theta))
                .map(|(g, (c, a))| g * (c - a))
                .sum();
            if cv >= value + cfg.armijo * ascent {
                accepted = Some((cand, cv, cg));
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some((cand, cv, cg)) => {
                let stalled = crate::numerics::distance(&cand, &theta) == 0.0;
                theta = cand;
                value = cv;
                grad = cg;
                step = (2.0 * t).min(1e12);
                if stalled {
                    converged = true;
                    break;
                }
            }
            None => {
                // No ascent step at floating-point resolution.
                converged = true;
                break;
            }
        }
    }
    Ok(AscentResult {
        point: theta,
        value,
        converged,
        iterations,
    })
}

/// Maximizes `objective` over `region`.
///
/// Finite sets and grids are enumerated exhaustively (the gradient is
/// ignored). Balls get a multi-start ascent from the center plus
/// `cfg.restarts` uniform points drawn from the stream `cfg.seed`; the best
/// value wins and the result counts as converged if any start converged.
pub fn maximize<F>(
    objective: &F,
    region: &ParameterRegion,
    cfg: &OptimizerConfig,
) -> Result<AscentResult>
where
    F: Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    if let Some(points) = region.enumerate()? {
        let mut best: Option<AscentResult> = None;
        for p in points {
            let (v, _) = objective(&p)?;
            if best.as_ref().is_none_or(|b| v > b.value) {
                best = Some(AscentResult {
                    point: p,
                    value: v,
                    converged: true,
                    iterations: 0,
                });
            }
        }
        return Ok(best.expect("enumerated regions are non-empty"));
    }
    let mut rng = cfg.rng();
    let mut starts = vec![region.center()];
    starts.extend((0..cfg.restarts).map(|_| region.sample(&mut rng)));
    let mut best: Option<AscentResult> = None;
    let mut any_converged = false;
    for s in starts {
        let run = projected_ascent(objective, region, &s, cfg)?;
        any_converged |= run.converged;
        if best.as_ref().is_none_or(|b| run.value > b.value) {
            best = Some(run);
        }
    }
    let mut best = best.expect("at least the center start runs");
    best.converged = any_converged;
    Ok(best)
}
