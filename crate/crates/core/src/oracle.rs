//! Brute-force grid searches over small balls.
//!
//! These share no code with [`crate::optim`]: they evaluate the model on a
//! dense lattice of the ball's bounding box (points outside are clipped
//! radially onto the sphere), then zoom in around the incumbent.

use crate::error::{Error, Result};
use crate::models::ConditionalModel;
use crate::numerics::distance;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOracleConfig {
    pub points_per_axis: usize,
    pub refine_points_per_axis: usize,
    pub refine_rounds: usize,
}

impl Default for GridOracleConfig {
    fn default() -> Self {
        Self {
            points_per_axis: 50,
            refine_points_per_axis: 21,
            refine_rounds: 10,
        }
    }
}

fn clip_to_ball(p: &mut [f64], center: &[f64], radius: f64) {
    let r = distance(p, center);
    if r > radius {
        let s = radius / r;
        for (v, c) in p.iter_mut().zip(center) {
            *v = c + s * (*v - c);
        }
    }
}

/// Minimizes `cost` over the ball; returns the best value and point.
pub fn grid_minimize<F: Fn(&[f64]) -> Result<f64>>(
    center: &[f64],
    radius: f64,
    cost: F,
    cfg: &GridOracleConfig,
) -> Result<(f64, Vec<f64>)> {
    let d = center.len();
    if d == 0 || d > 3 {
        return Err(Error::Unsupported(format!(
            "grid oracle supports 1 to 3 parameters, got {d}"
        )));
    }
    let mut best = (cost(center)?, center.to_vec());
    let mut box_center = center.to_vec();
    let mut half = radius;
    let mut per_axis = cfg.points_per_axis.max(2);
    for round in 0..=cfg.refine_rounds {
        let step = 2.0 * half / (per_axis - 1) as f64;
        let total = per_axis.pow(d as u32);
        let mut idx = vec![0usize; d];
        for _ in 0..total {
            let mut p: Vec<f64> = idx
                .iter()
                .zip(&box_center)
                .map(|(&i, c)| c - half + step * i as f64)
                .collect();
            clip_to_ball(&mut p, center, radius);
            let v = cost(&p)?;
            if v < best.0 {
                best = (v, p);
            }
            for a in 0..d {
                idx[a] += 1;
                if idx[a] < per_axis {
                    break;
                }
                idx[a] = 0;
            }
        }
        if round == cfg.refine_rounds {
            break;
        }
        box_center = best.1.clone();
        half = 2.0 * step;
        per_axis = cfg.refine_points_per_axis.max(2);
    }
    Ok(best)
}

/// Grid estimate of `sup_{‖θ−c‖≤r} p_θ(y|x)`.
pub fn grid_sup<M: ConditionalModel>(
    model: &M,
    center: &[f64],
    radius: f64,
    x: &M::Input,
    y: usize,
    cfg: &GridOracleConfig,
) -> Result<f64> {
    let (neg, _) = grid_minimize(center, radius, |t| Ok(-model.log_prob(t, x, y)?), cfg)?;
    Ok((-neg).exp())
}

/// Grid estimate of `inf_{‖θ−c‖≤r} max_{y: f(y)>0} ln f(y)/p_θ(y|x)`.
pub fn grid_delta<M: ConditionalModel>(
    f: &[f64],
    model: &M,
    center: &[f64],
    radius: f64,
    x: &M::Input,
    cfg: &GridOracleConfig,
) -> Result<f64> {
    let cost = |t: &[f64]| -> Result<f64> {
        let lp = model.log_probs(t, x)?;
        Ok(f.iter()
            .zip(&lp)
            .filter(|(&fy, _)| fy > 0.0)
            .map(|(&fy, &l)| fy.ln() - l)
            .fold(f64::NEG_INFINITY, f64::max))
    };
    Ok(grid_minimize(center, radius, cost, cfg)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::CategoricalTableModel;

    #[test]
    fn bernoulli_interval_endpoints() {
        let m = CategoricalTableModel::bernoulli();
        let s = grid_sup(&m, &[0.4], 0.5, &0, 0, &GridOracleConfig::default()).unwrap();
        assert!((s - 1.0 / (1.0 + (-0.9f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn quadratic_minimum_in_3d() {
        let (v, p) = grid_minimize(
            &[0.0, 0.0, 0.0],
            2.0,
            |t| Ok((t[0] - 0.31).powi(2) + (t[1] + 0.77).powi(2) + (t[2] - 0.05).powi(2)),
            &GridOracleConfig::default(),
        )
        .unwrap();
        assert!(v < 1e-12 && (p[1] + 0.77).abs() < 1e-6);
        assert!(grid_minimize(&[0.0; 4], 1.0, |_| Ok(0.0), &GridOracleConfig::default()).is_err());
    }
}
