//! Ground truth, the MAP rule and exact 0–1 misclassification rates.

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::models::ConditionalModel;
use crate::rng::StreamRng;

/// Scores within this distance of the maximum count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Index of the largest value; ties within [`TIE_TOLERANCE`] are broken
/// uniformly at random with `rng`.
pub fn argmax_with_ties<R: Rng + ?Sized>(values: &[f64], rng: &mut R) -> usize {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let winners: Vec<usize> = values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= max - TIE_TOLERANCE)
        .map(|(i, _)| i)
        .collect();
    match winners.len() {
        0 => 0,
        1 => winners[0],
        n => winners[rng.gen_range(0..n)],
    }
}

/// Distribution of the inputs `X`.
#[derive(Clone)]
pub enum XMarginal<X> {
    /// Finite support with (unnormalized) probabilities.
    Finite { points: Vec<X>, weights: Vec<f64> },
    /// Only a sampler is available; exact expectations are not.
    Sampler(Arc<dyn Fn(&mut StreamRng) -> X + Send + Sync>),
}

impl<X: fmt::Debug> fmt::Debug for XMarginal<X> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            XMarginal::Finite { points, weights } => f
                .debug_struct("Finite")
                .field("points", points)
                .field("weights", weights)
                .finish(),
            XMarginal::Sampler(_) => f.write_str("Sampler(..)"),
        }
    }
}

impl<X: Clone> XMarginal<X> {
    pub fn uniform(points: Vec<X>) -> Self {
        let weights = vec![1.0; points.len()];
        XMarginal::Finite { points, weights }
    }

    pub fn sample(&self, rng: &mut StreamRng) -> X {
        match self {
            XMarginal::Finite { points, weights } => {
                let total: f64 = weights.iter().sum();
                let mut u = rng.gen::<f64>() * total;
                for (p, w) in points.iter().zip(weights) {
                    if u < *w {
                        return p.clone();
                    }
                    u -= w;
                }
                points[points.len() - 1].clone()
            }
            XMarginal::Sampler(draw) => draw(rng),
        }
    }

    /// Support points with normalized weights, when the support is finite.
    pub fn support(&self) -> Option<(Vec<X>, Vec<f64>)> {
        match self {
            XMarginal::Finite { points, weights } => {
                let total: f64 = weights.iter().sum();
                Some((points.clone(), weights.iter().map(|w| w / total).collect()))
            }
            XMarginal::Sampler(_) => None,
        }
    }
}

/// The true conditional `f(y|x)` together with the input distribution.
pub trait GroundTruth: Send + Sync {
    type Input: Clone + fmt::Debug + Send + Sync;

    fn num_classes(&self) -> usize;
    fn conditional(&self, x: &Self::Input) -> Result<Vec<f64>>;
    fn marginal(&self) -> &XMarginal<Self::Input>;
}

/// Ground truth realized by a model at a fixed true parameter θ₀.
#[derive(Debug, Clone)]
pub struct ModelTruth<M: ConditionalModel> {
    pub model: M,
    pub theta0: Vec<f64>,
    pub marginal: XMarginal<M::Input>,
}

impl<M: ConditionalModel> ModelTruth<M> {
    pub fn new(model: M, theta0: Vec<f64>, marginal: XMarginal<M::Input>) -> Result<Self> {
        model.check_theta(&theta0)?;
        Ok(Self {
            model,
            theta0,
            marginal,
        })
    }
}

impl<M: ConditionalModel> GroundTruth for ModelTruth<M> {
    type Input = M::Input;

    fn num_classes(&self) -> usize {
        self.model.num_classes()
    }

    fn conditional(&self, x: &M::Input) -> Result<Vec<f64>> {
        self.model.probs(&self.theta0, x)
    }

    fn marginal(&self) -> &XMarginal<M::Input> {
        &self.marginal
    }
}

/// Ground truth given as an explicit table over a finite input alphabet.
/// Unlike [`ModelTruth`] it may contain zero probabilities.
#[derive(Debug, Clone)]
pub struct TableTruth {
    table: Vec<Vec<f64>>,
    marginal: XMarginal<usize>,
}

impl TableTruth {
    pub fn new(table: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if table.is_empty() || table.len() != weights.len() {
            return Err(Error::invalid("table truth needs one weight per row"));
        }
        let k = table[0].len();
        if k < 2 {
            return Err(Error::invalid("a classifier needs at least two classes"));
        }
        for row in &table {
            let sum: f64 = row.iter().sum();
            if row.len() != k || row.iter().any(|&p| p < 0.0) || (sum - 1.0).abs() > 1e-10 {
                return Err(Error::invalid("table rows must be probability vectors"));
            }
        }
        let points = (0..table.len()).collect();
        Ok(Self {
            table,
            marginal: XMarginal::Finite { points, weights },
        })
    }

    /// A single input with conditional `probs`.
    pub fn single(probs: Vec<f64>) -> Result<Self> {
        Self::new(vec![probs], vec![1.0])
    }
}

impl GroundTruth for TableTruth {
    type Input = usize;

    fn num_classes(&self) -> usize {
        self.table[0].len()
    }

    fn conditional(&self, x: &usize) -> Result<Vec<f64>> {
        self.table
            .get(*x)
            .cloned()
            .ok_or_else(|| Error::invalid(format!("input {x} outside the table")))
    }

    fn marginal(&self) -> &XMarginal<usize> {
        &self.marginal
    }
}

/// A classifier induced by a conditional distribution `q(y|x, zⁿ)`.
///
/// The training set is baked into the implementor; `scores` may be any
/// positive multiple of `q(·|x, zⁿ)`.
pub trait Hypothesis<X> {
    fn scores(&self, x: &X) -> Result<Vec<f64>>;

    fn classify<R: Rng + ?Sized>(&self, x: &X, rng: &mut R) -> Result<usize> {
        Ok(argmax_with_ties(&self.scores(x)?, rng))
    }
}

/// Hypothesis from a closure returning `q(·|x)`.
pub struct FnHypothesis<F>(pub F);

impl<X, F: Fn(&X) -> Result<Vec<f64>>> Hypothesis<X> for FnHypothesis<F> {
    fn scores(&self, x: &X) -> Result<Vec<f64>> {
        (self.0)(x)
    }
}

/// Classification by a single parameter: `argmax_y p_θ(y|x)`.
#[derive(Debug, Clone)]
pub struct PlugInHypothesis<'a, M> {
    pub model: &'a M,
    pub theta: Vec<f64>,
}

impl<M: ConditionalModel> Hypothesis<M::Input> for PlugInHypothesis<'_, M> {
    fn scores(&self, x: &M::Input) -> Result<Vec<f64>> {
        self.model.probs(&self.theta, x)
    }
}

/// The MAP rule `argmax_y f(y|x)` as a hypothesis.
pub struct MapHypothesis<'a, T>(pub &'a T);

impl<T: GroundTruth> Hypothesis<T::Input> for MapHypothesis<'_, T> {
    fn scores(&self, x: &T::Input) -> Result<Vec<f64>> {
        self.0.conditional(x)
    }
}

pub fn map_classify<T: GroundTruth, R: Rng + ?Sized>(
    truth: &T,
    x: &T::Input,
    rng: &mut R,
) -> Result<usize> {
    MapHypothesis(truth).classify(x, rng)
}

/// `E(h_MAP; x) = 1 − max_y f(y|x)`.
pub fn map_misclassification_at<T: GroundTruth>(truth: &T, x: &T::Input) -> Result<f64> {
    let f = truth.conditional(x)?;
    Ok(1.0 - f.iter().copied().fold(0.0, f64::max))
}

/// `1 − f(y|x)` for the class `y` a classifier returned.
pub fn misclassification_of_class<T: GroundTruth>(
    truth: &T,
    x: &T::Input,
    y: usize,
) -> Result<f64> {
    let f = truth.conditional(x)?;
    f.get(y)
        .map(|p| 1.0 - p)
        .ok_or_else(|| Error::invalid(format!("class {y} out of range")))
}

/// `E(h; x, zⁿ) = 1 − f(h(x, zⁿ)|x)`, computed exactly.
pub fn misclassification_at<T, H, R>(truth: &T, h: &H, x: &T::Input, rng: &mut R) -> Result<f64>
where
    T: GroundTruth,
    H: Hypothesis<T::Input> + ?Sized,
    R: Rng + ?Sized,
{
    let y = h.classify(x, rng)?;
    misclassification_of_class(truth, x, y)
}

/// `E(h) = E{E(h; X)}` as an exact expectation over a finite marginal.
pub fn misclassification_rate<T, H, R>(truth: &T, h: &H, rng: &mut R) -> Result<f64>
where
    T: GroundTruth,
    H: Hypothesis<T::Input> + ?Sized,
    R: Rng + ?Sized,
{
    let (points, weights) = truth.marginal().support().ok_or_else(|| {
        Error::Unsupported(
            "exact misclassification rate needs a finite input marginal; \
             use misclassification_rate_on with an evaluation panel"
                .into(),
        )
    })?;
    misclassification_rate_on(truth, h, &points, &weights, rng)
}

/// Weighted average of `E(h; x)` over an evaluation list.
pub fn misclassification_rate_on<T, H, R>(
    truth: &T,
    h: &H,
    points: &[T::Input],
    weights: &[f64],
    rng: &mut R,
) -> Result<f64>
where
    T: GroundTruth,
    H: Hypothesis<T::Input> + ?Sized,
    R: Rng + ?Sized,
{
    if points.is_empty() || points.len() != weights.len() {
        return Err(Error::invalid("evaluation list needs one weight per point"));
    }
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    for (x, w) in points.iter().zip(weights) {
        acc += w * misclassification_at(truth, h, x, rng)?;
    }
    Ok(acc / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::SoftmaxLinearModel;
    use crate::rng::stream;
    use rand::SeedableRng;

    #[test]
    fn map_picks_strict_maximum() {
        let mut rng = stream(1, &[]);
        let t = TableTruth::single(vec![0.7, 0.3]).unwrap();
        assert_eq!(map_classify(&t, &0, &mut rng).unwrap(), 0);
        let t = TableTruth::single(vec![0.5, 0.3, 0.2]).unwrap();
        assert_eq!(map_classify(&t, &0, &mut rng).unwrap(), 0);
    }

    #[test]
    fn uniform_truth_ties_are_uniform() {
        let mut rng = stream(17, &[crate::rng::Stream::TieBreak as u64]);
        for k in [2usize, 3, 4] {
            let t = TableTruth::single(vec![1.0 / k as f64; k]).unwrap();
            let mut counts = vec![0usize; k];
            let draws = 10_000;
            for _ in 0..draws {
                counts[map_classify(&t, &0, &mut rng).unwrap()] += 1;
            }
            for c in counts {
                assert!((c as f64 / draws as f64 - 1.0 / k as f64).abs() < 0.02);
            }
        }
    }

    #[test]
    fn misclassification_examples() {
        let mut rng = stream(2, &[]);
        let t = TableTruth::single(vec![0.7, 0.3]).unwrap();
        let e = misclassification_at(&t, &MapHypothesis(&t), &0, &mut rng).unwrap();
        assert!((e - 0.3).abs() < 1e-15);
        assert!((map_misclassification_at(&t, &0).unwrap() - 0.3).abs() < 1e-15);

        let certain = TableTruth::single(vec![1.0, 0.0]).unwrap();
        let wrong = FnHypothesis(|_: &usize| Ok(vec![0.0, 1.0]));
        assert_eq!(
            misclassification_at(&certain, &wrong, &0, &mut rng).unwrap(),
            1.0
        );
    }

    #[test]
    fn rate_is_marginal_expectation() {
        let mut rng = stream(3, &[]);
        let t = TableTruth::new(vec![vec![0.7, 0.3], vec![0.9, 0.1]], vec![1.0, 1.0]).unwrap();
        let r = misclassification_rate(&t, &MapHypothesis(&t), &mut rng).unwrap();
        assert!((r - 0.2).abs() < 1e-15);

        let single = TableTruth::single(vec![0.6, 0.4]).unwrap();
        let r = misclassification_rate(&single, &MapHypothesis(&single), &mut rng).unwrap();
        assert!((r - map_misclassification_at(&single, &0).unwrap()).abs() < 1e-15);

        let uniform = TableTruth::new(vec![vec![0.25; 4], vec![0.25; 4]], vec![0.3, 0.7]).unwrap();
        let any = FnHypothesis(|x: &usize| {
            Ok(if *x == 0 {
                vec![0.0, 1.0, 0.0, 0.0]
            } else {
                vec![0.0, 0.0, 0.0, 1.0]
            })
        });
        let r = misclassification_rate(&uniform, &any, &mut rng).unwrap();
        assert!((r - 0.75).abs() < 1e-15);
    }

    #[test]
    fn sampler_marginal_has_no_exact_rate() {
        let model = SoftmaxLinearModel::new(2, 1).unwrap();
        let marginal = XMarginal::Sampler(Arc::new(|r: &mut StreamRng| vec![r.gen::<f64>()]));
        let truth = ModelTruth::new(model, vec![1.0], marginal).unwrap();
        let mut rng = stream(4, &[]);
        let err = misclassification_rate(&truth, &MapHypothesis(&truth), &mut rng).unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)));
    }

    #[test]
    fn map_dominates_random_hypotheses() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        for _ in 0..2000 {
            let k = rng.gen_range(2..6);
            let raw: Vec<f64> = (0..k).map(|_| rng.gen::<f64>()).collect();
            let s: f64 = raw.iter().sum();
            let t = TableTruth::single(raw.iter().map(|v| v / s).collect()).unwrap();
            let q: Vec<f64> = (0..k).map(|_| rng.gen::<f64>()).collect();
            let h = FnHypothesis(|_: &usize| Ok(q.clone()));
            let e_q = misclassification_at(&t, &h, &0, &mut rng).unwrap();
            let e_map = map_misclassification_at(&t, &0).unwrap();
            assert!(e_map <= e_q + 1e-12);
            assert!((0.0..=1.0).contains(&e_q));
            let scaled = FnHypothesis(|_: &usize| Ok(q.iter().map(|v| 3.7 * v).collect()));
            assert_eq!(
                h.classify(&0, &mut rng).unwrap(),
                scaled.classify(&0, &mut rng).unwrap()
            );
        }
    }
}
