//! Data-dependent restrictions `Θ(zⁿ) ⊂ ℝ^d` of the parameter space.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::distance;

/// Grids larger than this are refused; they exist only as test oracles.
pub const MAX_GRID_POINTS: usize = 1_000_000;

const MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParameterRegion {
    /// Closed Euclidean ball.
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    FiniteSet {
        points: Vec<Vec<f64>>,
    },
    /// Axis-aligned lattice with `steps[i]` points on axis `i`, endpoints included.
    Grid {
        lower: Vec<f64>,
        upper: Vec<f64>,
        steps: Vec<usize>,
    },
}

impl ParameterRegion {
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid(format!(
                "ball radius must be positive and finite, got {radius}"
            )));
        }
        if center.is_empty() || center.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "ball center must be a non-empty finite vector",
            ));
        }
        Ok(ParameterRegion::Ball { center, radius })
    }

    pub fn singleton(point: Vec<f64>) -> Self {
        ParameterRegion::FiniteSet {
            points: vec![point],
        }
    }

    pub fn finite_set(points: Vec<Vec<f64>>) -> Result<Self> {
        let d = points.first().map(Vec::len).unwrap_or(0);
        if d == 0 || points.iter().any(|p| p.len() != d) {
            return Err(Error::invalid(
                "finite set needs non-empty points of equal dimension",
            ));
        }
        Ok(ParameterRegion::FiniteSet { points })
    }

    pub fn grid(lower: Vec<f64>, upper: Vec<f64>, steps: Vec<usize>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() || lower.len() != steps.len() {
            return Err(Error::invalid(
                "grid bounds and step counts must share one dimension",
            ));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) || steps.contains(&0) {
            return Err(Error::invalid(
                "grid needs lower ≤ upper and positive step counts",
            ));
        }
        Ok(ParameterRegion::Grid {
            lower,
            upper,
            steps,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            ParameterRegion::Ball { center, .. } => center.len(),
            ParameterRegion::FiniteSet { points } => points[0].len(),
            ParameterRegion::Grid { lower, .. } => lower.len(),
        }
    }

    /// Balls and grids (as their bounding boxes) are convex; a finite set
    /// only when it has a single point.
    pub fn is_convex(&self) -> bool {
        match self {
            ParameterRegion::FiniteSet { points } => points.len() == 1,
            _ => true,
        }
    }

    /// A representative point: the ball center, the first listed point, or
    /// the grid point nearest the box midpoint.
    pub fn center(&self) -> Vec<f64> {
        match self {
            ParameterRegion::Ball { center, .. } => center.clone(),
            ParameterRegion::FiniteSet { points } => points[0].clone(),
            ParameterRegion::Grid { lower, upper, .. } => {
                let mid: Vec<f64> = lower
                    .iter()
                    .zip(upper)
                    .map(|(l, u)| 0.5 * (l + u))
                    .collect();
                self.nearest_grid_point(&mid)
            }
        }
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        if theta.len() != self.dim() {
            return false;
        }
        match self {
            ParameterRegion::Ball { center, radius } => {
                distance(theta, center) <= radius * (1.0 + MEMBERSHIP_TOL) + MEMBERSHIP_TOL
            }
            ParameterRegion::FiniteSet { points } => {
                points.iter().any(|p| distance(p, theta) <= MEMBERSHIP_TOL)
            }
            ParameterRegion::Grid { .. } => {
                distance(&self.nearest_grid_point(theta), theta) <= MEMBERSHIP_TOL
            }
        }
    }

    /// Euclidean projection: radial clip for balls, box clip for grids,
    /// nearest listed point for finite sets.
    pub fn project(&self, theta: &[f64]) -> Vec<f64> {
        match self {
            ParameterRegion::Ball { center, radius } => {
                let r = distance(theta, center);
                if r <= *radius {
                    theta.to_vec()
                } else {
                    let scale = radius / r;
                    center
                        .iter()
                        .zip(theta)
                        .map(|(c, t)| c + scale * (t - c))
                        .collect()
                }
            }
            ParameterRegion::FiniteSet { points } => points
                .iter()
                .min_by(|a, b| distance(a, theta).total_cmp(&distance(b, theta)))
                .cloned()
                .expect("finite set is non-empty"),
            ParameterRegion::Grid { lower, upper, .. } => theta
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(t, (l, u))| t.clamp(*l, *u))
                .collect(),
        }
    }

    fn axis_value(lower: f64, upper: f64, steps: usize, i: usize) -> f64 {
        if steps == 1 {
            lower
        } else {
            lower + (upper - lower) * i as f64 / (steps - 1) as f64
        }
    }

    fn nearest_grid_point(&self, theta: &[f64]) -> Vec<f64> {
        let ParameterRegion::Grid {
            lower,
            upper,
            steps,
        } = self
        else {
            return self.project(theta);
        };
        theta
            .iter()
            .enumerate()
            .map(|(a, t)| {
                if steps[a] == 1 {
                    return lower[a];
                }
                let h = (upper[a] - lower[a]) / (steps[a] - 1) as f64;
                let i = if h > 0.0 {
                    ((t - lower[a]) / h)
                        .round()
                        .clamp(0.0, (steps[a] - 1) as f64) as usize
                } else {
                    0
                };
                Self::axis_value(lower[a], upper[a], steps[a], i)
            })
            .collect()
    }

    /// Every point of a finite set or grid; `None` for a ball.
    pub fn enumerate(&self) -> Result<Option<Vec<Vec<f64>>>> {
        match self {
            ParameterRegion::Ball { .. } => Ok(None),
            ParameterRegion::FiniteSet { points } => Ok(Some(points.clone())),
            ParameterRegion::Grid {
                lower,
                upper,
                steps,
            } => {
                let total = steps
                    .iter()
                    .try_fold(1usize, |acc, &s| acc.checked_mul(s))
                    .filter(|&t| t <= MAX_GRID_POINTS)
                    .ok_or_else(|| {
                        Error::Config(format!(
                            "grid region exceeds {MAX_GRID_POINTS} points; grids are only supported as small oracles"
                        ))
                    })?;
                let mut out = Vec::with_capacity(total);
                let mut idx = vec![0usize; steps.len()];
                for _ in 0..total {
                    out.push(
                        idx.iter()
                            .enumerate()
                            .map(|(a, &i)| Self::axis_value(lower[a], upper[a], steps[a], i))
                            .collect(),
                    );
                    for a in 0..steps.len() {
                        idx[a] += 1;
                        if idx[a] < steps[a] {
                            break;
                        }
                        idx[a] = 0;
                    }
                }
                Ok(Some(out))
            }
        }
    }

    /// A uniformly distributed point of the region.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            ParameterRegion::Ball { center, radius } => {
                let d = center.len();
                let dir: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                let norm = crate::numerics::norm(&dir).max(f64::MIN_POSITIVE);
                let r = radius * rng.gen::<f64>().powf(1.0 / d as f64);
                center
                    .iter()
                    .zip(&dir)
                    .map(|(c, v)| c + r * v / norm)
                    .collect()
            }
            ParameterRegion::FiniteSet { points } => points[rng.gen_range(0..points.len())].clone(),
            ParameterRegion::Grid {
                lower,
                upper,
                steps,
            } => (0..steps.len())
                .map(|a| Self::axis_value(lower[a], upper[a], steps[a], rng.gen_range(0..steps[a])))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn projection_is_idempotent_and_lands_inside(
            center in proptest::collection::vec(-3.0f64..3.0, 3),
            radius in 0.01f64..4.0,
            theta in proptest::collection::vec(-10.0f64..10.0, 3),
        ) {
            let regions = [
                ParameterRegion::ball(center.clone(), radius).unwrap(),
                ParameterRegion::finite_set(vec![center.clone(), vec![0.0; 3]]).unwrap(),
            ];
            for region in &regions {
                let p = region.project(&theta);
                prop_assert!(region.contains(&p));
                let pp = region.project(&p);
                prop_assert!(distance(&p, &pp) < 1e-12);
            }
            let grid = ParameterRegion::grid(vec![-1.0; 3], vec![2.0; 3], vec![4; 3]).unwrap();
            let p = grid.project(&theta);
            prop_assert!(p.iter().all(|v| (-1.0..=2.0).contains(v)));
            prop_assert_eq!(grid.project(&p), p);
        }
    }

    #[test]
    fn grid_enumeration() {
        let g = ParameterRegion::grid(vec![0.0, -1.0], vec![1.0, 1.0], vec![2, 3]).unwrap();
        let pts = g.enumerate().unwrap().unwrap();
        assert_eq!(pts.len(), 6);
        assert!(pts.iter().all(|p| g.contains(p)));
        assert!(!g.contains(&[0.5, 0.0]));
        let big = ParameterRegion::grid(vec![0.0; 3], vec![1.0; 3], vec![101; 3]).unwrap();
        assert!(matches!(big.enumerate(), Err(Error::Config(_))));
    }

    #[test]
    fn samples_stay_in_ball() {
        let mut rng = crate::rng::stream(0, &[]);
        let b = ParameterRegion::ball(vec![1.0, 2.0, -1.0], 0.3).unwrap();
        for _ in 0..1000 {
            assert!(b.contains(&b.sample(&mut rng)));
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(ParameterRegion::ball(vec![0.0], 0.0).is_err());
        assert!(ParameterRegion::ball(vec![0.0], f64::INFINITY).is_err());
        assert!(ParameterRegion::finite_set(vec![]).is_err());
        assert!(ParameterRegion::grid(vec![1.0], vec![0.0], vec![2]).is_err());
        assert!(ParameterRegion::singleton(vec![0.3]).is_convex());
    }
}
