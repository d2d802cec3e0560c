//! The replication runner.
//!
//! Every `(replication, n)` pair is an independent task: draw a dataset,
//! fit the MLE, build the region, then evaluate every bound at each
//! evaluation input. Tasks run on a fixed-size pool and are merged in
//! `(replication, n, x_index)` order.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Family, ScheduleKind, SigmaMinMode, SCHEMA_VERSION};
use super::data::{generate_dataset, write_dataset_csv, InputCodec};
use crate::bounds::{bound_report, decay_constant, BoundReport};
use crate::decision::{ModelTruth, XMarginal};
use crate::error::{Error, Result};
use crate::estimators::{
    berry_esseen_radius, plug_in_region, schedule_radius, sigma_min, MaximumLikelihood, MleWarning,
    RadiusSchedule,
};
use crate::models::{CategoricalTableModel, OverparamSoftmaxModel, SoftmaxLinearModel};
use crate::numerics::{distance, least_squares, median};
use crate::optim::OptimizerConfig;
use crate::region::ParameterRegion;
use crate::rng::{derive_seed, stream, Stream, StreamRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    Ok,
    Skipped,
}

/// One row of `records.csv`: a flattened bound report for a single
/// `(replication, n, x)` together with its provenance. Classes are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub schema_version: u32,
    pub replication: usize,
    /// Seed of this replication's dataset.
    pub seed: u64,
    pub n: usize,
    pub x_index: usize,
    /// Input columns joined with spaces.
    pub x: String,
    pub schedule: ScheduleKind,
    pub status: RecordStatus,
    pub skip_reason: Option<String>,
    pub radius: Option<f64>,
    /// `‖θ̂ − θ₀‖ ≤ ρ` for ball regions.
    pub covered: Option<bool>,
    pub mle_warning: Option<MleWarning>,
    pub nml_class: Option<usize>,
    pub map_class: Option<usize>,
    pub gap: Option<f64>,
    pub delta: Option<f64>,
    pub leakage: Option<f64>,
    pub exp_leakage_minus_1: Option<f64>,
    pub redundancy: Option<f64>,
    pub regret: Option<f64>,
    pub gap_rhs: Option<f64>,
    pub fisher_rhs: Option<f64>,
    pub ball_rhs: Option<f64>,
    pub k_over_sqrt_n: Option<f64>,
    pub k_frozen_over_sqrt_n: Option<f64>,
    pub gap_bound_holds: Option<bool>,
    pub fisher_bound_holds: Option<bool>,
    pub redundancy_gap_holds: Option<bool>,
    pub redundancy_split_holds: Option<bool>,
    /// `gap ≤ e^ℒ − 1 ≤ K/√n`, evaluated only when the coverage event held.
    pub chain_holds: Option<bool>,
    pub converged: Option<bool>,
    /// Written to `timing.csv` only, so `records.csv` is reproducible.
    #[serde(skip)]
    pub wall_time_secs: f64,
}

impl ExperimentRecord {
    /// Some inequality that must always hold failed.
    pub fn is_violation(&self) -> bool {
        [
            self.gap_bound_holds,
            self.fisher_bound_holds,
            self.redundancy_gap_holds,
            self.redundancy_split_holds,
        ]
        .contains(&Some(false))
            || self.gap.is_some_and(|g| g < -1e-12)
    }

    fn skeleton(task: &TaskMeta, x_index: usize, x: String, schedule: ScheduleKind) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            replication: task.replication,
            seed: task.data_seed,
            n: task.n,
            x_index,
            x,
            schedule,
            status: RecordStatus::Ok,
            skip_reason: None,
            radius: None,
            covered: None,
            mle_warning: task.warning,
            nml_class: None,
            map_class: None,
            gap: None,
            delta: None,
            leakage: None,
            exp_leakage_minus_1: None,
            redundancy: None,
            regret: None,
            gap_rhs: None,
            fisher_rhs: None,
            ball_rhs: None,
            k_over_sqrt_n: None,
            k_frozen_over_sqrt_n: None,
            gap_bound_holds: None,
            fisher_bound_holds: None,
            redundancy_gap_holds: None,
            redundancy_split_holds: None,
            chain_holds: None,
            converged: None,
            wall_time_secs: 0.0,
        }
    }

    fn fill(&mut self, r: &BoundReport, tol: f64) {
        let exp_l = r.exp_leakage_minus_1();
        self.nml_class = Some(r.nml_class + 1);
        self.map_class = Some(r.map_class + 1);
        self.gap = Some(r.gap);
        self.delta = Some(r.delta);
        self.leakage = Some(r.leakage);
        self.exp_leakage_minus_1 = Some(exp_l);
        self.redundancy = Some(r.redundancy);
        self.regret = Some(r.regret);
        self.gap_rhs = Some(r.gap_rhs);
        self.fisher_rhs = r.fisher_rhs;
        self.ball_rhs = r.ball_rhs;
        self.gap_bound_holds = Some(r.gap <= r.gap_rhs + tol);
        self.fisher_bound_holds = r.fisher_rhs.map(|rhs| exp_l <= rhs + tol);
        self.redundancy_gap_holds = Some(r.gap <= r.redundancy.exp_m1() + tol);
        self.redundancy_split_holds = Some(r.redundancy <= r.delta + r.regret + tol);
        self.converged = Some(r.converged);
    }
}

#[derive(Debug, Clone, Copy)]
struct TaskMeta {
    replication: usize,
    n: usize,
    data_seed: u64,
    warning: Option<MleWarning>,
}

/// Aggregates for one sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeSummary {
    pub n: usize,
    pub records: usize,
    pub skipped: usize,
    pub median_gap: Option<f64>,
    pub mean_gap: Option<f64>,
    /// Median over replications of the gap averaged over the evaluation inputs.
    pub median_panel_mean_gap: Option<f64>,
    pub median_exp_leakage_minus_1: Option<f64>,
    pub median_gap_rhs: Option<f64>,
    pub median_fisher_rhs: Option<f64>,
    pub median_ball_rhs: Option<f64>,
    pub median_k_over_sqrt_n: Option<f64>,
    pub median_k_frozen_over_sqrt_n: Option<f64>,
    /// Fraction of feasible replications whose ball contained θ₀.
    pub coverage_frequency: Option<f64>,
    pub violations: usize,
    /// Covered records on which the Berry-Esseen chain failed.
    pub chain_failures: usize,
    pub not_converged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub master_seed: u64,
    pub family: Family,
    pub schedule: ScheduleKind,
    pub replications: usize,
    pub theta0: Vec<f64>,
    pub per_n: Vec<SizeSummary>,
    /// Least-squares slope of `ln median(e^ℒ − 1)` against `ln n`.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub n0_epsilon: Option<f64>,
    /// Smallest grid `n` from which on the panel-mean gap is at most
    /// `n0_epsilon` in at least a `1 − δ` fraction of replications.
    pub n0: Option<usize>,
    pub total_violations: usize,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub records: Vec<ExperimentRecord>,
    pub summary: Summary,
}

impl ExperimentOutput {
    pub fn violations(&self) -> Vec<&ExperimentRecord> {
        self.records.iter().filter(|r| r.is_violation()).collect()
    }
}

/// Execution settings that do not affect the results.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Pool size; 0 means one thread per core.
    pub workers: usize,
    /// Where to export the generated datasets, if anywhere.
    pub dataset_dir: Option<PathBuf>,
}

/// Runs the configured study.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let m = &cfg.model;
    match m.family {
        Family::Bernoulli | Family::Categorical => {
            let model = CategoricalTableModel::new(m.inputs, m.classes)?;
            let points: Vec<usize> = (0..m.inputs).collect();
            let weights = m
                .input_weights
                .clone()
                .unwrap_or_else(|| vec![1.0; m.inputs]);
            let marginal = XMarginal::Finite {
                points: points.clone(),
                weights,
            };
            run_family(cfg, opts, model, marginal, points)
        }
        Family::Softmax => {
            let model = SoftmaxLinearModel::new(m.classes, m.features)?;
            let (marginal, panel) = gaussian_inputs(m.features, cfg);
            run_family(cfg, opts, model, marginal, panel)
        }
        Family::OverparamSoftmax => {
            let model = OverparamSoftmaxModel::new(m.classes, m.features)?;
            let (marginal, panel) = gaussian_inputs(m.features, cfg);
            run_family(cfg, opts, model, marginal, panel)
        }
    }
}

/// Standard normal features and the fixed evaluation panel drawn from them.
fn gaussian_inputs(m: usize, cfg: &ExperimentConfig) -> (XMarginal<Vec<f64>>, Vec<Vec<f64>>) {
    let draw = move |rng: &mut StreamRng| -> Vec<f64> {
        (0..m).map(|_| rng.sample(StandardNormal)).collect()
    };
    let mut rng = stream(cfg.experiment.seed, &[Stream::Panel as u64]);
    let panel = (0..cfg.experiment.panel_size)
        .map(|_| draw(&mut rng))
        .collect();
    (XMarginal::Sampler(Arc::new(draw)), panel)
}

fn resolve_theta0<M: MaximumLikelihood>(model: &M, cfg: &ExperimentConfig) -> Result<Vec<f64>> {
    let theta = match (&cfg.truth.theta, cfg.truth.seed) {
        (Some(t), _) => t.clone(),
        (None, Some(seed)) => {
            let mut rng = stream(seed, &[Stream::Truth as u64]);
            (0..model.param_dim())
                .map(|_| cfg.truth.scale * rng.sample::<f64, _>(StandardNormal))
                .collect()
        }
        (None, None) => return Err(Error::Config("truth needs `theta` or `seed`".into())),
    };
    model
        .check_theta(&theta)
        .map_err(|e| Error::Config(format!("truth.theta: {e}")))?;
    Ok(theta)
}

/// Inputs and weights over which `σ_min` of the unconditional Fisher
/// matrix is computed.
fn fisher_points<X: Clone>(marginal: &XMarginal<X>, cfg: &ExperimentConfig) -> Vec<(X, f64)> {
    match marginal.support() {
        Some((points, weights)) => points.into_iter().zip(weights).collect(),
        None => {
            let mut rng = stream(cfg.experiment.seed, &[Stream::Panel as u64, 1]);
            let k = cfg.experiment.fisher_samples;
            (0..k)
                .map(|_| (marginal.sample(&mut rng), 1.0 / k as f64))
                .collect()
        }
    }
}

struct Shared<'a, M: MaximumLikelihood> {
    cfg: &'a ExperimentConfig,
    truth: ModelTruth<M>,
    panel: Vec<M::Input>,
    fisher: Vec<(M::Input, f64)>,
    oracle_sigma_min: Option<f64>,
    dataset_dir: Option<&'a Path>,
}

fn run_family<M>(
    cfg: &ExperimentConfig,
    opts: &RunOptions,
    model: M,
    marginal: XMarginal<M::Input>,
    panel: Vec<M::Input>,
) -> Result<ExperimentOutput>
where
    M: MaximumLikelihood + Clone,
    M::Input: InputCodec,
{
    let theta0 = resolve_theta0(&model, cfg)?;
    let fisher = fisher_points(&marginal, cfg);
    let truth = ModelTruth::new(model, theta0, marginal)?;
    let oracle_sigma_min = match (cfg.region.schedule, cfg.region.sigma_min) {
        (ScheduleKind::BerryEsseen, SigmaMinMode::Oracle) => {
            let s = sigma_min(
                &truth.model,
                &truth.theta0,
                fisher.iter().map(|(x, w)| (x, *w)),
            )?;
            if !(s > 0.0) {
                return Err(Error::Config(format!(
                    "σ_min(θ₀) = {s:e}: the Berry-Esseen schedule needs an identifiable model"
                )));
            }
            Some(s)
        }
        _ => None,
    };
    if let Some(dir) = &opts.dataset_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let shared = Shared {
        cfg,
        truth,
        panel,
        fisher,
        oracle_sigma_min,
        dataset_dir: opts.dataset_dir.as_deref(),
    };

    let tasks: Vec<(usize, usize)> = (0..cfg.experiment.replications)
        .flat_map(|rep| cfg.experiment.n.iter().map(move |&n| (rep, n)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<TaskOutput>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(rep, n)| run_task(&shared, rep, n))
            .collect()
    });
    let mut outputs = Vec::with_capacity(results.len());
    for r in results {
        outputs.push(r?);
    }
    let summary = summarize(cfg, &shared.truth.theta0, &outputs);
    let records = outputs.into_iter().flat_map(|t| t.records).collect();
    Ok(ExperimentOutput {
        config: cfg.clone(),
        records,
        summary,
    })
}

struct TaskOutput {
    n: usize,
    covered: Option<bool>,
    panel_mean_gap: Option<f64>,
    records: Vec<ExperimentRecord>,
}

fn run_task<M>(sh: &Shared<'_, M>, rep: usize, n: usize) -> Result<TaskOutput>
where
    M: MaximumLikelihood,
    M::Input: InputCodec,
{
    let cfg = sh.cfg;
    let model = &sh.truth.model;
    let rep_seed = derive_seed(cfg.experiment.seed, &[rep as u64]);
    let task_seed = derive_seed(rep_seed, &[n as u64]);
    let data_seed = derive_seed(task_seed, &[Stream::Data as u64]);
    let start = Instant::now();

    let data = generate_dataset(&sh.truth, n, data_seed)?;
    if let Some(dir) = sh.dataset_dir {
        write_dataset_csv(&data, &dir.join(format!("rep{rep}_n{n}.csv")))?;
    }
    let fit = model.fit_mle(&data)?;
    let theta_hat = &fit.theta;
    let meta = TaskMeta {
        replication: rep,
        n,
        data_seed,
        warning: fit.warning,
    };
    let schedule = cfg.region.schedule;
    let x_label = |x: &M::Input| x.to_columns().join(" ");
    let ball_seed =
        |x_index: usize| derive_seed(task_seed, &[Stream::BallSampling as u64, x_index as u64]);

    // Berry-Esseen radius, shared by every query of this dataset.
    let mut be_sigma_min = None;
    let mut be_radius = None;
    if schedule == ScheduleKind::BerryEsseen {
        let s = match sh.oracle_sigma_min {
            Some(s) => s,
            None => sigma_min(model, theta_hat, sh.fisher.iter().map(|(x, w)| (x, *w)))?,
        };
        be_sigma_min = Some(s);
        let delta = cfg.region.delta.unwrap_or_default();
        match berry_esseen_radius(model.param_dim(), n, delta, cfg.region.c, s) {
            Ok(r) => be_radius = Some(r),
            Err(e @ (Error::InfeasibleSampleSize { .. } | Error::InvalidArgument(_))) => {
                let records = sh
                    .panel
                    .iter()
                    .enumerate()
                    .map(|(i, x)| {
                        let mut rec = ExperimentRecord::skeleton(&meta, i, x_label(x), schedule);
                        rec.status = RecordStatus::Skipped;
                        rec.skip_reason = Some(e.to_string());
                        rec
                    })
                    .collect();
                return Ok(TaskOutput {
                    n,
                    covered: None,
                    panel_mean_gap: None,
                    records,
                });
            }
            Err(e) => return Err(e),
        }
    }
    let frozen_radius = match (be_sigma_min, cfg.experiment.n.last()) {
        (Some(s), Some(&n_max)) => {
            let delta = cfg.region.delta.unwrap_or_default();
            berry_esseen_radius(model.param_dim(), n_max, delta, cfg.region.c, s).ok()
        }
        _ => None,
    };
    // A single Fisher-scaled ball built at the first evaluation input.
    let shared_radius = match (schedule, cfg.region.per_query) {
        (ScheduleKind::FisherScaled, false) => Some(fisher_scaled_radius(
            sh,
            theta_hat,
            &sh.panel[0],
            n,
            ball_seed(0),
        )?),
        _ => None,
    };
    let setup_secs = start.elapsed().as_secs_f64();

    let mut records = Vec::with_capacity(sh.panel.len());
    for (i, x) in sh.panel.iter().enumerate() {
        let t0 = Instant::now();
        let mut rec = ExperimentRecord::skeleton(&meta, i, x_label(x), schedule);
        let radius = match schedule {
            ScheduleKind::Fixed => cfg.region.radius,
            ScheduleKind::FisherScaled => match shared_radius {
                Some(r) => Some(r),
                None => Some(fisher_scaled_radius(sh, theta_hat, x, n, ball_seed(i))?),
            },
            ScheduleKind::BerryEsseen => be_radius,
            ScheduleKind::PlugIn => None,
        };
        let region = match radius {
            Some(r) => ParameterRegion::ball(theta_hat.clone(), r)?,
            None => plug_in_region(theta_hat),
        };
        let opt = OptimizerConfig {
            seed: derive_seed(task_seed, &[Stream::Optimizer as u64, i as u64]),
            ..cfg.optimizer.clone()
        };
        let mut tie = stream(task_seed, &[Stream::TieBreak as u64, i as u64]);
        let report = bound_report(&sh.truth, model, &region, x, &opt, &mut tie)?;
        rec.fill(&report, cfg.tolerance.inequality);
        rec.radius = radius;
        if let Some(r) = radius {
            rec.covered = Some(distance(theta_hat, &sh.truth.theta0) <= r);
        }
        if let (Some(rho), Some(s)) = (be_radius, be_sigma_min) {
            let sqrt_n = (n as f64).sqrt();
            let k = decay_constant(model, &sh.truth.theta0, rho, x, s, ball_seed(i))? / sqrt_n;
            rec.k_over_sqrt_n = Some(k);
            rec.k_frozen_over_sqrt_n = frozen_radius
                .map(|fr| {
                    decay_constant(model, &sh.truth.theta0, fr, x, s, ball_seed(i))
                        .map(|v| v / sqrt_n)
                })
                .transpose()?;
            if rec.covered == Some(true) {
                let tol = cfg.tolerance.inequality;
                let exp_l = report.exp_leakage_minus_1();
                rec.chain_holds = Some(report.gap <= exp_l + tol && exp_l <= k + tol);
            }
        }
        rec.wall_time_secs = t0.elapsed().as_secs_f64() + setup_secs / sh.panel.len() as f64;
        records.push(rec);
    }
    let gaps: Vec<f64> = records.iter().filter_map(|r| r.gap).collect();
    Ok(TaskOutput {
        n,
        covered: records.first().and_then(|r| r.covered),
        panel_mean_gap: (!gaps.is_empty()).then(|| gaps.iter().sum::<f64>() / gaps.len() as f64),
        records,
    })
}

fn fisher_scaled_radius<M: MaximumLikelihood>(
    sh: &Shared<'_, M>,
    theta_hat: &[f64],
    x: &M::Input,
    n: usize,
    seed: u64,
) -> Result<f64> {
    let epsilon = sh.cfg.region.epsilon.unwrap_or_default();
    schedule_radius(
        &sh.truth.model,
        theta_hat,
        &RadiusSchedule::FisherScaled { epsilon },
        x,
        n,
        seed,
    )
}

fn median_of(
    records: &[&ExperimentRecord],
    field: impl Fn(&ExperimentRecord) -> Option<f64>,
) -> Option<f64> {
    let values: Vec<f64> = records.iter().filter_map(|r| field(r)).collect();
    median(&values)
}

fn summarize(cfg: &ExperimentConfig, theta0: &[f64], tasks: &[TaskOutput]) -> Summary {
    let mut per_n = Vec::new();
    let mut panel_gaps_by_n = Vec::new();
    for &n in &cfg.experiment.n {
        let at_n: Vec<&TaskOutput> = tasks.iter().filter(|t| t.n == n).collect();
        let all: Vec<&ExperimentRecord> = at_n.iter().flat_map(|t| t.records.iter()).collect();
        let ok: Vec<&ExperimentRecord> = all
            .iter()
            .copied()
            .filter(|r| r.status == RecordStatus::Ok)
            .collect();
        let gaps: Vec<f64> = ok.iter().filter_map(|r| r.gap).collect();
        let covered: Vec<bool> = at_n.iter().filter_map(|t| t.covered).collect();
        let panel_gaps: Vec<f64> = at_n.iter().filter_map(|t| t.panel_mean_gap).collect();
        per_n.push(SizeSummary {
            n,
            records: ok.len(),
            skipped: all.len() - ok.len(),
            median_gap: median(&gaps),
            mean_gap: (!gaps.is_empty()).then(|| gaps.iter().sum::<f64>() / gaps.len() as f64),
            median_panel_mean_gap: median(&panel_gaps),
            median_exp_leakage_minus_1: median_of(&ok, |r| r.exp_leakage_minus_1),
            median_gap_rhs: median_of(&ok, |r| r.gap_rhs),
            median_fisher_rhs: median_of(&ok, |r| r.fisher_rhs),
            median_ball_rhs: median_of(&ok, |r| r.ball_rhs),
            median_k_over_sqrt_n: median_of(&ok, |r| r.k_over_sqrt_n),
            median_k_frozen_over_sqrt_n: median_of(&ok, |r| r.k_frozen_over_sqrt_n),
            coverage_frequency: (!covered.is_empty())
                .then(|| covered.iter().filter(|&&c| c).count() as f64 / covered.len() as f64),
            violations: ok.iter().filter(|r| r.is_violation()).count(),
            chain_failures: ok.iter().filter(|r| r.chain_holds == Some(false)).count(),
            not_converged: ok.iter().filter(|r| r.converged == Some(false)).count(),
        });
        panel_gaps_by_n.push(panel_gaps);
    }
    let fit = decay_fit(&per_n);
    let n0 = cfg.experiment.n0_epsilon.and_then(|eps| {
        let delta = cfg.region.delta.unwrap_or(0.05);
        empirical_n0(&cfg.experiment.n, &panel_gaps_by_n, eps, delta)
    });
    Summary {
        schema_version: SCHEMA_VERSION,
        master_seed: cfg.experiment.seed,
        family: cfg.model.family,
        schedule: cfg.region.schedule,
        replications: cfg.experiment.replications,
        theta0: theta0.to_vec(),
        slope: fit.map(|f| f.0),
        intercept: fit.map(|f| f.1),
        n0_epsilon: cfg.experiment.n0_epsilon,
        n0,
        total_violations: per_n.iter().map(|s| s.violations).sum(),
        per_n,
    }
}

/// Log-log least squares over the sizes with a positive median leakage.
pub fn decay_fit(per_n: &[SizeSummary]) -> Option<(f64, f64)> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = per_n
        .iter()
        .filter_map(|s| {
            let m = s.median_exp_leakage_minus_1?;
            (m > 0.0 && m.is_finite()).then(|| ((s.n as f64).ln(), m.ln()))
        })
        .unzip();
    if xs.len() < 2 {
        return None;
    }
    least_squares(&xs, &ys)
}

fn empirical_n0(grid: &[usize], panel_gaps: &[Vec<f64>], eps: f64, delta: f64) -> Option<usize> {
    let good: Vec<bool> = panel_gaps
        .iter()
        .map(|g| {
            !g.is_empty()
                && g.iter().filter(|&&v| v <= eps).count() as f64 >= (1.0 - delta) * g.len() as f64
        })
        .collect();
    let first_bad_from_end = good.iter().rposition(|&ok| !ok);
    match first_bad_from_end {
        None => grid.first().copied(),
        Some(i) => grid.get(i + 1).copied(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(schedule: &str, extra: &str) -> ExperimentConfig {
        let text = format!(
            r#"
schema_version = 1
[model]
family = "categorical"
classes = 3
inputs = 2
[truth]
seed = 5
[region]
schedule = "{schedule}"
{extra}
[experiment]
n = [20, 200]
replications = 3
seed = 11
"#
        );
        ExperimentConfig::from_toml_str(&text).unwrap()
    }

    #[test]
    fn plug_in_records_have_zero_leakage() {
        let out = run_experiment(&small("plug-in", ""), &RunOptions::default()).unwrap();
        assert_eq!(out.records.len(), 3 * 2 * 2);
        assert!(out.records.iter().all(|r| r.leakage == Some(0.0)));
        assert_eq!(out.summary.total_violations, 0);
        assert!(out.summary.slope.is_none());
    }

    #[test]
    fn record_order_and_worker_independence() {
        let cfg = small("fixed", "radius = 0.3");
        let one = run_experiment(
            &cfg,
            &RunOptions {
                workers: 1,
                ..Default::default()
            },
        )
        .unwrap();
        let four = run_experiment(
            &cfg,
            &RunOptions {
                workers: 4,
                ..Default::default()
            },
        )
        .unwrap();
        let key = |r: &ExperimentRecord| (r.replication, r.n, r.x_index);
        assert!(one.records.windows(2).all(|w| key(&w[0]) < key(&w[1])));
        let strip = |o: &ExperimentOutput| {
            o.records
                .iter()
                .map(|r| ExperimentRecord {
                    wall_time_secs: 0.0,
                    ..r.clone()
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(strip(&one), strip(&four));
        assert!(one
            .records
            .iter()
            .all(|r| r.gap_bound_holds == Some(true) && r.fisher_bound_holds == Some(true)));
    }

    #[test]
    fn earlier_replications_do_not_depend_on_count() {
        let mut cfg = small("fixed", "radius = 0.3");
        let three = run_experiment(&cfg, &RunOptions::default()).unwrap();
        cfg.experiment.replications = 1;
        let one = run_experiment(&cfg, &RunOptions::default()).unwrap();
        for (a, b) in one.records.iter().zip(&three.records) {
            assert_eq!(a.gap, b.gap);
            assert_eq!(a.seed, b.seed);
        }
    }

    #[test]
    fn infeasible_berry_esseen_sizes_are_skipped() {
        // 1 − δ + c/√n ≥ 1 at n = 20 but not at n = 200 (√200 ≈ 14.1).
        let cfg = small("berry-esseen", "delta = 0.2\nc = 0.9");
        let out = run_experiment(&cfg, &RunOptions::default()).unwrap();
        let (skipped, ok): (Vec<_>, Vec<_>) = out.records.iter().partition(|r| r.n == 20);
        assert!(skipped
            .iter()
            .all(|r| r.status == RecordStatus::Skipped && r.skip_reason.is_some()));
        assert!(ok
            .iter()
            .all(|r| r.status == RecordStatus::Ok && r.k_over_sqrt_n.is_some()));
        assert_eq!(out.summary.per_n[0].skipped, 6);
    }

    #[test]
    fn overparam_rejects_berry_esseen() {
        let mut cfg = ExperimentConfig::overparam_preset(1, 1);
        cfg.region.schedule = ScheduleKind::BerryEsseen;
        cfg.region.delta = Some(0.05);
        assert!(matches!(
            run_experiment(&cfg, &RunOptions::default()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn n0_is_first_size_of_the_good_tail() {
        let grid = [10, 100, 1000];
        let gaps = vec![vec![0.3, 0.0], vec![0.0, 0.0], vec![0.0, 0.01]];
        assert_eq!(empirical_n0(&grid, &gaps, 0.05, 0.05), Some(100));
        let bad_tail = vec![vec![0.0], vec![0.0], vec![0.2]];
        assert_eq!(empirical_n0(&grid, &bad_tail, 0.05, 0.05), None);
    }
}
