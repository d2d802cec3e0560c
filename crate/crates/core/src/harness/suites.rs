//! Randomized property suites behind the `check`, `oracle` and `decay`
//! commands. Every suite is seeded and reports how many instances it
//! ran and how many violated the property.

use std::fmt;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;

use super::config::ExperimentConfig;
use super::experiment::{run_experiment, ExperimentOutput, RunOptions};
use crate::bounds::{
    bound_report, delta_gap, fisher_rhs, redundancy, regret_from_sups, worst_log_ratio,
};
use crate::decision::{argmax_with_ties, ModelTruth, XMarginal};
use crate::error::Result;
use crate::models::{model_kl, CategoricalTableModel, ConditionalModel, SoftmaxLinearModel};
use crate::nml::{constrained_sup, nml_distribution};
use crate::numerics::{
    central_gradient, central_hessian, chi2_cdf, chi2_inverse_cdf, kl_divergence, norm,
    total_variation, SymmetricMatrix,
};
use crate::optim::OptimizerConfig;
use crate::oracle::{grid_delta, grid_sup, GridOracleConfig};
use crate::region::ParameterRegion;
use crate::rng::{stream, StreamRng};

/// Outcome of one suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: String,
    pub instances: usize,
    pub violations: usize,
    /// Largest `lhs − rhs` seen (negative when every instance held).
    pub worst_excess: f64,
    pub elapsed_secs: f64,
    pub passed: bool,
    pub note: String,
}

impl fmt::Display for SuiteResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {} instances, {} violations, worst excess {:.3e}, {:.1}s",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.instances,
            self.violations,
            self.worst_excess,
            self.elapsed_secs
        )?;
        if !self.note.is_empty() {
            write!(f, " ({})", self.note)?;
        }
        Ok(())
    }
}

/// Counts violations of `lhs ≤ rhs + tol`.
struct Tally {
    name: String,
    start: Instant,
    instances: usize,
    violations: usize,
    worst: f64,
    notes: Vec<String>,
}

impl Tally {
    fn new(name: &str) -> Self {
        Self {
            name: name.into(),
            start: Instant::now(),
            instances: 0,
            violations: 0,
            worst: f64::NEG_INFINITY,
            notes: Vec::new(),
        }
    }

    fn check(&mut self, lhs: f64, rhs: f64, tol: f64) {
        self.instances += 1;
        let excess = lhs - rhs;
        self.worst = self.worst.max(excess);
        if !(excess <= tol) {
            self.violations += 1;
        }
    }

    fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    fn finish(self, min_instances: usize) -> SuiteResult {
        let passed = self.violations == 0 && self.instances >= min_instances;
        SuiteResult {
            name: self.name,
            instances: self.instances,
            violations: self.violations,
            worst_excess: self.worst,
            elapsed_secs: self.start.elapsed().as_secs_f64(),
            passed,
            note: self.notes.join("; "),
        }
    }
}

/// Instance counts of the `check` suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuiteSizes {
    pub gap_bound: usize,
    pub redundancy_gap: usize,
    pub redundancy_split: usize,
    pub fisher_bound: usize,
    pub nested_pairs: usize,
    pub pinsker: usize,
    pub oracle: usize,
}

impl Default for SuiteSizes {
    fn default() -> Self {
        Self {
            gap_bound: 2000,
            redundancy_gap: 1000,
            redundancy_split: 500,
            fisher_bound: 500,
            nested_pairs: 500,
            pinsker: 1000,
            oracle: 100,
        }
    }
}

pub const SUITE_TOL: f64 = 1e-8;
pub const ORACLE_SUP_TOL: f64 = 1e-4;
pub const ORACLE_DELTA_TOL: f64 = 1e-3;
pub const UNRESTRICTED_TOL: f64 = 1e-3;
pub const CHI2_ROUND_TRIP_TOL: f64 = 1e-9;
pub const CHI2_CLOSED_FORM_TOL: f64 = 1e-10;
pub const TRACE_REL_TOL: f64 = 1e-9;
pub const FISHER_HESSIAN_TOL: f64 = 1e-4;
pub const BERNOULLI_CLOSED_FORM_TOL: f64 = 1e-6;

/// A model together with one query input.
#[derive(Debug, Clone)]
enum Query {
    Table(CategoricalTableModel, usize),
    Softmax(SoftmaxLinearModel, Vec<f64>),
}

macro_rules! on_query {
    ($q:expr, |$m:ident, $x:ident| $body:expr) => {
        match $q {
            Query::Table($m, $x) => $body,
            Query::Softmax($m, $x) => $body,
        }
    };
}

fn gaussian_vec(rng: &mut StreamRng, d: usize, scale: f64) -> Vec<f64> {
    (0..d)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Bernoulli, categorical table or softmax, by `kind % 3`.
fn random_query(rng: &mut StreamRng, kind: usize) -> Query {
    match kind % 3 {
        0 => Query::Table(CategoricalTableModel::bernoulli(), 0),
        1 => {
            let inputs = rng.gen_range(1..=3);
            let classes = rng.gen_range(3..=4);
            let x = rng.gen_range(0..inputs);
            Query::Table(
                CategoricalTableModel::new(inputs, classes).expect("valid sizes"),
                x,
            )
        }
        _ => {
            let classes = rng.gen_range(2..=4);
            let features = rng.gen_range(1..=3);
            let x = gaussian_vec(rng, features, 1.0);
            Query::Softmax(
                SoftmaxLinearModel::new(classes, features).expect("valid sizes"),
                x,
            )
        }
    }
}

/// A query whose model has at most three parameters.
fn small_query(rng: &mut StreamRng, kind: usize) -> Query {
    match kind % 5 {
        0 => Query::Table(CategoricalTableModel::bernoulli(), 0),
        1 => Query::Table(CategoricalTableModel::new(1, 3).expect("valid"), 0),
        2 => Query::Table(CategoricalTableModel::new(1, 4).expect("valid"), 0),
        3 => {
            let m = rng.gen_range(1..=3);
            Query::Softmax(
                SoftmaxLinearModel::new(2, m).expect("valid"),
                gaussian_vec(rng, m, 1.0),
            )
        }
        _ => Query::Softmax(
            SoftmaxLinearModel::new(3, 1).expect("valid"),
            gaussian_vec(rng, 1, 1.0),
        ),
    }
}

fn random_ball(rng: &mut StreamRng, d: usize) -> ParameterRegion {
    let center = gaussian_vec(rng, d, 1.5);
    let r = rng.gen_range(0.05..1.5);
    ParameterRegion::ball(center, r).expect("positive radius")
}

fn random_simplex(rng: &mut StreamRng, k: usize, allow_zeros: bool) -> Vec<f64> {
    let mut v: Vec<f64> = (0..k).map(|_| -rng.gen::<f64>().max(1e-12).ln()).collect();
    if allow_zeros && rng.gen_bool(0.3) {
        let j = rng.gen_range(0..k);
        v[j] = 0.0;
    }
    let total: f64 = v.iter().sum();
    v.iter().map(|x| x / total).collect()
}

/// Regions relative to θ₀, cycling through singleton, ball containing θ₀
/// and ball excluding θ₀.
fn region_around(rng: &mut StreamRng, theta0: &[f64], variant: usize) -> ParameterRegion {
    let d = theta0.len();
    let dir = gaussian_vec(rng, d, 1.0);
    let dn = norm(&dir).max(1e-12);
    let shifted = |dist: f64| -> Vec<f64> {
        theta0
            .iter()
            .zip(&dir)
            .map(|(t, u)| t + dist * u / dn)
            .collect()
    };
    match variant % 3 {
        0 => ParameterRegion::singleton(shifted(rng.gen_range(0.0..1.0))),
        1 => {
            let off = rng.gen_range(0.0..1.0);
            ParameterRegion::ball(shifted(off), off + rng.gen_range(0.05..1.0))
                .expect("positive radius")
        }
        _ => {
            let r = rng.gen_range(0.05..1.0);
            ParameterRegion::ball(shifted(r + rng.gen_range(0.1..1.5)), r).expect("positive radius")
        }
    }
}

fn opt(seed: u64, i: usize) -> OptimizerConfig {
    OptimizerConfig::default().derive(&[seed, i as u64])
}

/// `gap ≤ exp(Δ + ℒ) − 1` on random models, truths and regions.
pub fn gap_bound_suite(instances: usize, seed: u64) -> Result<SuiteResult> {
    let mut t = Tally::new("gap-bound");
    let mut rng = stream(seed, &[101]);
    let (mut inside, mut outside) = (0, 0);
    for i in 0..instances {
        let q = random_query(&mut rng, i);
        on_query!(&q, |m, x| {
            let theta0 = gaussian_vec(&mut rng, m.param_dim(), 1.5);
            let region = region_around(&mut rng, &theta0, i / 3);
            if region.contains(&theta0) {
                inside += 1;
            } else {
                outside += 1;
            }
            let truth = ModelTruth::new(m.clone(), theta0, XMarginal::uniform(vec![x.to_owned()]))?;
            let r = bound_report(&truth, m, &region, x, &opt(seed, i), &mut rng)?;
            t.check(r.gap, r.gap_rhs, SUITE_TOL);
        });
    }
    t.note(format!("{inside} regions contain θ₀, {outside} exclude it"));
    Ok(t.finish(instances))
}

/// `gap(h_q) ≤ e^{R(f,q)} − 1` for the rule `argmax q`: half the
/// instances use random `q`, half the NML distribution of a random ball.
pub fn redundancy_gap_suite(instances: usize, seed: u64) -> Result<SuiteResult> {
    let mut t = Tally::new("redundancy-gap");
    let mut rng = stream(seed, &[102]);
    for i in 0..instances {
        let (f, q) = if i % 2 == 0 {
            let k = rng.gen_range(2..=6);
            (
                random_simplex(&mut rng, k, true),
                random_simplex(&mut rng, k, false),
            )
        } else {
            let query = random_query(&mut rng, i / 2);
            on_query!(&query, |m, x| {
                let f = random_simplex(&mut rng, m.num_classes(), true);
                let region = random_ball(&mut rng, m.param_dim());
                (f, nml_distribution(m, &region, x, &opt(seed, i))?.q)
            })
        };
        let pick = argmax_with_ties(&q, &mut rng);
        let f_max = f.iter().copied().fold(0.0, f64::max);
        t.check(f_max - f[pick], redundancy(&f, &q).exp_m1(), SUITE_TOL);
    }
    Ok(t.finish(instances))
}

/// `R(f, q) ≤ Δ(f, Θ) + REG_max(Θ, q)`.
///
/// The solver's Δ is attained at a feasible point θ*, so the supremum in
/// `REG_max` is taken as the larger of the solver value and `ln p_θ*/q`.
pub fn redundancy_split_suite(instances: usize, seed: u64) -> Result<SuiteResult> {
    let mut t = Tally::new("redundancy-split");
    let mut rng = stream(seed, &[103]);
    for i in 0..instances {
        let query = random_query(&mut rng, i);
        on_query!(&query, |m, x| {
            let k = m.num_classes();
            let theta0 = gaussian_vec(&mut rng, m.param_dim(), 1.5);
            let f = if i % 4 == 3 {
                random_simplex(&mut rng, k, true)
            } else {
                m.probs(&theta0, x)?
            };
            let region = region_around(&mut rng, &theta0, i / 3);
            let cfg = opt(seed, i);
            let nml = nml_distribution(m, &region, x, &cfg.derive(&[1]))?;
            let q = if i % 2 == 0 {
                nml.q.clone()
            } else {
                random_simplex(&mut rng, k, false)
            };
            let delta = delta_gap(&f, m, &region, x, &cfg.derive(&[2]))?;
            let at_star = m.probs(&delta.argmin, x)?;
            let reg = regret_from_sups(&nml.per_class_sup, &q).max(regret_from_sups(&at_star, &q));
            t.check(redundancy(&f, &q), delta.value + reg, SUITE_TOL);
        });
    }
    Ok(t.finish(instances))
}

/// `e^ℒ − 1 ≤ Σ_k ‖θ_k − θ₁‖·sqrt(σ̄_k)` on balls, plus the Bernoulli
/// interval closed form `e^ℒ − 1 = σ(b) − σ(a)`.
pub fn fisher_bound_suite(instances: usize, seed: u64) -> Result<Vec<SuiteResult>> {
    let mut t = Tally::new("fisher-bound");
    let mut rng = stream(seed, &[104]);
    for i in 0..instances {
        let query = random_query(&mut rng, i);
        on_query!(&query, |m, x| {
            let region = random_ball(&mut rng, m.param_dim());
            let nml = nml_distribution(m, &region, x, &opt(seed, i))?;
            let rhs = fisher_rhs(m, &region, x, &nml.per_class_argmax)?.sum_term;
            t.check(nml.leakage_nats.exp_m1(), rhs, SUITE_TOL);
        });
    }
    let mut c = Tally::new("fisher-bound-bernoulli-closed-form");
    let m = CategoricalTableModel::bernoulli();
    let sigmoid = |v: f64| 1.0 / (1.0 + (-v).exp());
    for i in 0..100 {
        let center: f64 = rng.gen_range(-4.0..4.0);
        let r: f64 = rng.gen_range(0.01..3.0);
        let region = ParameterRegion::ball(vec![center], r)?;
        let nml = nml_distribution(&m, &region, &0, &opt(seed, 10_000 + i))?;
        let exact = sigmoid(center + r) - sigmoid(center - r);
        let err = (nml.leakage_nats.exp_m1() - exact).abs();
        c.check(err, 0.0, BERNOULLI_CLOSED_FORM_TOL);
    }
    Ok(vec![t.finish(instances), c.finish(100)])
}

/// Leakage properties: `ℒ = ln Z`, monotonicity under inclusion, zero for
/// a single point, `ln K` for a huge ball.
pub fn leakage_suite(nested_pairs: usize, seed: u64) -> Result<Vec<SuiteResult>> {
    let mut rng = stream(seed, &[105]);
    let mut exact = Tally::new("leakage-is-log-normalizer");
    let mut mono = Tally::new("leakage-monotone");
    for i in 0..nested_pairs {
        let query = random_query(&mut rng, i);
        on_query!(&query, |m, x| {
            let d = m.param_dim();
            let small_r = rng.gen_range(0.05..1.0);
            let small = ParameterRegion::ball(gaussian_vec(&mut rng, d, 1.5), small_r)?;
            let shift = gaussian_vec(&mut rng, d, 0.3);
            let center: Vec<f64> = small
                .center()
                .iter()
                .zip(&shift)
                .map(|(c, s)| c + s)
                .collect();
            let big_r = small_r + norm(&shift) + rng.gen_range(0.0..0.5);
            let big = ParameterRegion::ball(center, big_r)?;
            let cfg = opt(seed, i);
            let a = nml_distribution(m, &small, x, &cfg)?;
            let b = nml_distribution(m, &big, x, &cfg)?;
            mono.check(a.leakage_nats, b.leakage_nats, SUITE_TOL);
            for nml in [&a, &b] {
                let z: f64 = nml.per_class_sup.iter().sum();
                let bit_exact = nml.leakage_nats.to_bits() == nml.normalizer.ln().to_bits();
                exact.check(
                    if bit_exact {
                        (nml.normalizer - z).abs()
                    } else {
                        f64::INFINITY
                    },
                    0.0,
                    1e-15,
                );
            }
        });
    }
    let mut plug = Tally::new("plug-in-leakage-zero");
    for i in 0..300 {
        let query = random_query(&mut rng, i);
        on_query!(&query, |m, x| {
            let region = ParameterRegion::singleton(gaussian_vec(&mut rng, m.param_dim(), 2.0));
            let l = nml_distribution(m, &region, x, &opt(seed, i))?.leakage_nats;
            plug.check(l.abs(), 0.0, 0.0);
        });
    }
    let mut wide = Tally::new("near-unrestricted-leakage");
    for k in 2..=6 {
        let m = CategoricalTableModel::new(1, k)?;
        for j in 0..10 {
            let region = ParameterRegion::ball(gaussian_vec(&mut rng, k - 1, 1.0), 1e3)?;
            let l = nml_distribution(&m, &region, &0, &opt(seed, 100 * k + j))?.leakage_nats;
            wide.check((l - (k as f64).ln()).abs(), 0.0, UNRESTRICTED_TOL);
        }
    }
    let n_exact = 2 * nested_pairs;
    Ok(vec![
        exact.finish(n_exact),
        mono.finish(nested_pairs),
        plug.finish(300),
        wide.finish(50),
    ])
}

/// χ² quantiles, eigen-solver trace, Pinsker, Fisher versus KL Hessian.
pub fn numerics_suite(pinsker_pairs: usize, seed: u64) -> Result<Vec<SuiteResult>> {
    let mut rng = stream(seed, &[106]);
    let mut chi = Tally::new("chi2-round-trip");
    for _ in 0..1000 {
        let dof = rng.gen_range(1..=12);
        let p = rng.gen_range(0.001..0.999);
        let q = chi2_inverse_cdf(dof, p)?;
        chi.check((chi2_cdf(dof, q) - p).abs(), 0.0, CHI2_ROUND_TRIP_TOL);
    }
    let mut g2 = Tally::new("chi2-two-dof-closed-form");
    for _ in 0..500 {
        let p: f64 = rng.gen_range(0.001..0.999);
        let exact = -2.0 * (-p).ln_1p();
        g2.check(
            (chi2_inverse_cdf(2, p)? - exact).abs(),
            0.0,
            CHI2_CLOSED_FORM_TOL,
        );
    }
    let mut tr = Tally::new("eigen-trace-identity");
    for _ in 0..500 {
        let d = rng.gen_range(1..=8);
        let rows: Vec<Vec<f64>> = (0..d).map(|i| gaussian_vec(&mut rng, i + 1, 2.0)).collect();
        let a = SymmetricMatrix::from_lower(&rows);
        let trace = a.trace();
        let sum: f64 = a.eigenvalues().iter().sum();
        let scale = a.frobenius_norm().max(1.0);
        tr.check((sum - trace).abs() / scale, 0.0, TRACE_REL_TOL);
    }
    let mut pin = Tally::new("pinsker");
    for _ in 0..pinsker_pairs {
        let k = rng.gen_range(2..=8);
        let p = random_simplex(&mut rng, k, true);
        let q = random_simplex(&mut rng, k, false);
        pin.check(
            total_variation(&p, &q),
            (kl_divergence(&p, &q) / 2.0).sqrt(),
            1e-12,
        );
    }
    let mut fisher = Tally::new("fisher-equals-kl-hessian");
    let mut grad = Tally::new("kl-gradient-vanishes");
    for i in 0..150 {
        let query = random_query(&mut rng, i);
        on_query!(&query, |m, x| {
            let theta0 = gaussian_vec(&mut rng, m.param_dim(), 1.0);
            let kl = |t: &[f64]| model_kl(m, &theta0, t, x).expect("valid parameters");
            let h = central_hessian(kl, &theta0, 1e-4);
            let fi = m.fisher_at(&theta0, x)?;
            let mut err: f64 = 0.0;
            for (a, row) in h.iter().enumerate() {
                for (b, v) in row.iter().enumerate() {
                    err = err.max((v - fi.get(a, b)).abs());
                }
            }
            fisher.check(err, 0.0, FISHER_HESSIAN_TOL);
            grad.check(norm(&central_gradient(kl, &theta0, 1e-5)), 0.0, 1e-6);
        });
    }
    Ok(vec![
        chi.finish(1000),
        g2.finish(500),
        tr.finish(500),
        pin.finish(pinsker_pairs),
        fisher.finish(150),
        grad.finish(150),
    ])
}

/// Solver sup and Δ against the dense grid at `d ≤ 3`.
pub fn oracle_suite(instances: usize, seed: u64) -> Result<Vec<SuiteResult>> {
    let mut rng = stream(seed, &[107]);
    let grid = GridOracleConfig::default();
    let mut sup = Tally::new("oracle-sup");
    let mut del = Tally::new("oracle-delta");
    for i in 0..instances {
        let query = small_query(&mut rng, i);
        on_query!(&query, |m, x| {
            let d = m.param_dim();
            let center = gaussian_vec(&mut rng, d, 1.5);
            let r = rng.gen_range(0.1..2.0);
            let region = ParameterRegion::ball(center.clone(), r)?;
            let cfg = opt(seed, i);
            let mut worst: f64 = 0.0;
            for y in 0..m.num_classes() {
                let s = constrained_sup(m, &region, x, y, &cfg.derive(&[y as u64]))?.value;
                worst = worst.max((s - grid_sup(m, &center, r, x, y, &grid)?).abs());
            }
            sup.check(worst, 0.0, ORACLE_SUP_TOL);
            let theta0 = gaussian_vec(&mut rng, d, 1.5);
            let f = m.probs(&theta0, x)?;
            let solver = delta_gap(&f, m, &region, x, &cfg.derive(&[99]))?;
            debug_assert!((worst_log_ratio(m, &f, &solver.argmin, x)? - solver.value).abs() < 1e-9);
            del.check(
                (solver.value - grid_delta(&f, m, &center, r, x, &grid)?).abs(),
                0.0,
                ORACLE_DELTA_TOL,
            );
        });
    }
    Ok(vec![sup.finish(instances), del.finish(instances)])
}

/// All `check` suites in order.
pub fn check_suites(sizes: &SuiteSizes, seed: u64) -> Result<Vec<SuiteResult>> {
    let mut out = vec![
        gap_bound_suite(sizes.gap_bound, seed)?,
        redundancy_gap_suite(sizes.redundancy_gap, seed)?,
        redundancy_split_suite(sizes.redundancy_split, seed)?,
    ];
    out.extend(fisher_bound_suite(sizes.fisher_bound, seed)?);
    out.extend(leakage_suite(sizes.nested_pairs, seed)?);
    out.extend(numerics_suite(sizes.pinsker, seed)?);
    Ok(out)
}

pub const DECAY_SLOPE_RANGE: (f64, f64) = (-0.65, -0.35);
pub const DECAY_MIN_COVERAGE: f64 = 0.90;

/// Judges a Berry-Esseen decay run: the chain on covered records, coverage
/// at every `n`, and the log-log slope of the median leakage.
pub fn judge_decay(out: &ExperimentOutput) -> Vec<SuiteResult> {
    let start = Instant::now();
    let s = &out.summary;
    let covered = out
        .records
        .iter()
        .filter(|r| r.covered == Some(true))
        .count();
    let failures: usize = s.per_n.iter().map(|p| p.chain_failures).sum();
    let chain = SuiteResult {
        name: "decay-chain".into(),
        instances: covered,
        violations: failures,
        worst_excess: out
            .records
            .iter()
            .filter(|r| r.covered == Some(true))
            .filter_map(|r| {
                let e = r.exp_leakage_minus_1?;
                Some((r.gap? - e).max(e - r.k_over_sqrt_n?))
            })
            .fold(f64::NEG_INFINITY, f64::max),
        elapsed_secs: start.elapsed().as_secs_f64(),
        passed: failures == 0 && covered > 0,
        note: String::new(),
    };
    let coverages: Vec<f64> = s
        .per_n
        .iter()
        .filter_map(|p| p.coverage_frequency)
        .collect();
    let min_cov = coverages.iter().copied().fold(f64::INFINITY, f64::min);
    let coverage = SuiteResult {
        name: "decay-coverage".into(),
        instances: coverages.len(),
        violations: coverages
            .iter()
            .filter(|&&c| c < DECAY_MIN_COVERAGE)
            .count(),
        worst_excess: DECAY_MIN_COVERAGE - min_cov,
        elapsed_secs: 0.0,
        passed: coverages.len() == s.per_n.len() && min_cov >= DECAY_MIN_COVERAGE,
        note: format!("per-n coverage {coverages:?}"),
    };
    let (lo, hi) = DECAY_SLOPE_RANGE;
    let slope_ok = s.slope.is_some_and(|v| (lo..=hi).contains(&v));
    let slope = SuiteResult {
        name: "decay-slope".into(),
        instances: s.per_n.len(),
        violations: usize::from(!slope_ok),
        worst_excess: s.slope.map_or(f64::INFINITY, |v| (lo - v).max(v - hi)),
        elapsed_secs: 0.0,
        passed: slope_ok,
        note: format!("slope {:?} in [{lo}, {hi}]", s.slope),
    };
    vec![chain, coverage, slope]
}

/// The preset decay study.
pub fn decay_suite(
    replications: usize,
    seed: u64,
    workers: usize,
) -> Result<(ExperimentOutput, Vec<SuiteResult>)> {
    let mut cfg = ExperimentConfig::decay_preset(seed);
    cfg.experiment.replications = replications;
    let out = run_experiment(
        &cfg,
        &RunOptions {
            workers,
            dataset_dir: None,
        },
    )?;
    let verdict = judge_decay(&out);
    Ok((out, verdict))
}

/// Over-parameterized softmax: the median (over replications) of the
/// panel-mean gap falls from the smallest to the largest `n`, and
/// the gap bound holds on every record.
pub fn overparam_suite(
    replications: usize,
    seed: u64,
    workers: usize,
) -> Result<(ExperimentOutput, Vec<SuiteResult>)> {
    let cfg = ExperimentConfig::overparam_preset(seed, replications);
    let out = run_experiment(
        &cfg,
        &RunOptions {
            workers,
            dataset_dir: None,
        },
    )?;
    let start = Instant::now();
    let per_n = &out.summary.per_n;
    let first = per_n.first().and_then(|p| p.median_panel_mean_gap);
    let last = per_n.last().and_then(|p| p.median_panel_mean_gap);
    let decreasing = matches!((first, last), (Some(a), Some(b)) if b < a);
    let gap_bound_fail = out
        .records
        .iter()
        .filter(|r| r.gap_bound_holds != Some(true))
        .count();
    let results = vec![
        SuiteResult {
            name: "overparam-gap-decreases".into(),
            instances: per_n.len(),
            violations: usize::from(!decreasing),
            worst_excess: match (first, last) {
                (Some(a), Some(b)) => b - a,
                _ => f64::INFINITY,
            },
            elapsed_secs: start.elapsed().as_secs_f64(),
            passed: decreasing,
            note: format!("median panel-mean gap {first:?} -> {last:?}"),
        },
        SuiteResult {
            name: "overparam-gap-bound".into(),
            instances: out.records.len(),
            violations: gap_bound_fail,
            worst_excess: out
                .records
                .iter()
                .filter_map(|r| Some(r.gap? - r.gap_rhs?))
                .fold(f64::NEG_INFINITY, f64::max),
            elapsed_secs: 0.0,
            passed: gap_bound_fail == 0 && !out.records.is_empty(),
            note: String::new(),
        },
    ];
    Ok((out, results))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suites_pass() {
        let sizes = SuiteSizes {
            gap_bound: 30,
            redundancy_gap: 30,
            redundancy_split: 12,
            fisher_bound: 12,
            nested_pairs: 12,
            pinsker: 50,
            oracle: 5,
        };
        for r in check_suites(&sizes, 1).unwrap() {
            assert!(r.passed, "{r}");
        }
        for r in oracle_suite(sizes.oracle, 1).unwrap() {
            assert!(r.passed, "{r}");
        }
    }

    #[test]
    fn display_marks_failures() {
        let mut t = Tally::new("demo");
        t.check(1.0, 0.0, 1e-8);
        let r = t.finish(1);
        assert!(!r.passed);
        assert!(r
            .to_string()
            .starts_with("FAIL demo: 1 instances, 1 violations"));
    }
}
