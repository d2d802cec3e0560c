use std::sync::Arc;

use metanml::decision::{ModelTruth, XMarginal};
use metanml::estimators::MaximumLikelihood;
use metanml::harness::experiment::{run_experiment, RecordStatus, RunOptions};
use metanml::harness::{generate_dataset, ExperimentConfig};
use metanml::models::{CategoricalTableModel, ConditionalModel, SoftmaxLinearModel};
use metanml::numerics::{distance, median};
use metanml::rng::StreamRng;
use rand::Rng;

fn median_error<M: MaximumLikelihood>(truth: &ModelTruth<M>, n: usize, trials: usize) -> f64 {
    let errs: Vec<f64> = (0..trials)
        .map(|t| {
            let data = generate_dataset(truth, n, 1000 + t as u64).unwrap();
            distance(&truth.model.fit_mle(&data).unwrap().theta, &truth.theta0)
        })
        .collect();
    median(&errs).unwrap()
}

#[test]
fn mle_is_consistent() {
    let table = CategoricalTableModel::new(2, 3).unwrap();
    let truth = ModelTruth::new(
        table,
        vec![0.4, -0.3, 1.0, 0.2],
        XMarginal::uniform(vec![0, 1]),
    )
    .unwrap();
    assert!(median_error(&truth, 10_000, 50) < median_error(&truth, 100, 50));

    let soft = SoftmaxLinearModel::new(3, 2).unwrap();
    let gauss = XMarginal::Sampler(Arc::new(|r: &mut StreamRng| {
        vec![r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0)]
    }));
    let truth = ModelTruth::new(soft, vec![0.8, -0.5, 0.1, 0.9], gauss).unwrap();
    let (small, large) = (
        median_error(&truth, 100, 50),
        median_error(&truth, 10_000, 50),
    );
    assert!(large < small / 5.0, "{small} -> {large}");
}

#[test]
fn overparam_fit_is_shift_representative() {
    let cfg = ExperimentConfig::overparam_preset(7, 1);
    let model = metanml::models::OverparamSoftmaxModel::new(3, 2).unwrap();
    let gauss = XMarginal::Sampler(Arc::new(|r: &mut StreamRng| {
        vec![
            r.sample(rand_distr::StandardNormal),
            r.sample(rand_distr::StandardNormal),
        ]
    }));
    let theta0 = cfg.truth.theta.clone().unwrap();
    let truth = ModelTruth::new(model.clone(), theta0.clone(), gauss).unwrap();
    let fit = model
        .fit_mle(&generate_dataset(&truth, 10_000, 3).unwrap())
        .unwrap();
    assert_eq!(fit.warning, None);
    // Conditionals agree even though the parameters differ by a shift.
    let x = vec![0.3, -1.1];
    let p = model.probs(&fit.theta, &x).unwrap();
    let q = model.probs(&theta0, &x).unwrap();
    assert!(p.iter().zip(&q).all(|(a, b)| (a - b).abs() < 0.05));
    assert!(distance(&fit.theta, &theta0) > 0.1);
}

fn config(schedule: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml_str(&format!(
        r#"
schema_version = 1
[model]
family = "softmax"
classes = 3
features = 2
[truth]
theta = [0.8, -0.5, 0.1, 0.9]
[region]
schedule = "{schedule}"
radius = 1.5
[experiment]
n = [2000]
replications = 4
seed = 3
panel_size = 6
"#
    ))
    .unwrap()
}

#[test]
fn plug_in_schedule_has_zero_leakage() {
    let out = run_experiment(&config("plug-in"), &RunOptions::default()).unwrap();
    assert_eq!(out.records.len(), 24);
    for r in &out.records {
        assert_eq!(r.leakage, Some(0.0));
        assert_eq!(r.exp_leakage_minus_1, Some(0.0));
        assert_eq!(r.gap_bound_holds, Some(true));
        assert!(r.ball_rhs.is_none());
    }
}

#[test]
fn covering_ball_has_zero_delta() {
    let out = run_experiment(&config("fixed"), &RunOptions::default()).unwrap();
    assert!(out.records.iter().all(|r| r.status == RecordStatus::Ok));
    assert!(out.records.iter().all(|r| r.covered == Some(true)));
    for r in &out.records {
        assert!(r.delta.unwrap() < 1e-6, "{r:?}");
        assert_eq!(r.gap_bound_holds, Some(true));
    }
    assert_eq!(out.summary.per_n[0].coverage_frequency, Some(1.0));
    assert_eq!(out.violations().len(), 0);
}

#[test]
fn berry_esseen_radius_shrinks_with_n() {
    let mut cfg = ExperimentConfig::decay_preset(5);
    cfg.experiment.replications = 3;
    let out = run_experiment(&cfg, &RunOptions::default()).unwrap();
    let radius_at = |n: usize| {
        out.records
            .iter()
            .find(|r| r.n == n)
            .unwrap()
            .radius
            .unwrap()
    };
    let ratio = radius_at(10_000) / radius_at(100);
    assert!((ratio - 0.1).abs() < 1e-12);
    let s = &out.summary.per_n;
    assert!(s[2].median_k_over_sqrt_n.unwrap() < s[0].median_k_over_sqrt_n.unwrap());
}
