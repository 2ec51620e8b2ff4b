use std::time::Duration;

use dsegym_core::{rng_for, AgentKind, DesignPoint, Environment, ParameterSpace, TrialRng};
use dsegym_dataset::{Dataset, TrajectoryRecord, SCHEMA_VERSION};
use dsegym_envs::{BuiltinEnv, EnvOptions, SyntheticEnv};
use dsegym_proxy::{
    evaluate_rmse, hyperparam_search, rmse, speed_benchmark, time_pass, ForestParams, ProxyError, RandomForestModel,
};
use proptest::prelude::*;
use rand::Rng;

fn env(delay_ms: u64) -> SyntheticEnv {
    let options = EnvOptions {
        step_delay: Duration::from_millis(delay_ms),
        ..EnvOptions::default()
    };
    "dram-small".parse::<BuiltinEnv>().unwrap().make("stream", "low-latency", options).unwrap()
}

fn uniform_dataset(n: usize, agent: AgentKind, rng: &mut TrialRng) -> Dataset {
    let env = env(0);
    let space = env.space().clone();
    let id = format!("{agent}-uniform");
    let records = (0..n)
        .map(|i| {
            let p = space.sample_uniform(rng);
            let obs = env.observe(&p).unwrap();
            TrajectoryRecord {
                schema_version: SCHEMA_VERSION,
                experiment_id: id.clone(),
                env_id: "dram-small".into(),
                workload_id: "stream".into(),
                agent_type: agent,
                hyperparam_digest: String::new(),
                seed: 0,
                step_index: i as u64,
                design: space.to_map(&p),
                observation: obs.metrics,
                reward: 0.0,
                wall_time_ms: 0,
            }
        })
        .collect();
    Dataset::from_records(records).unwrap()
}

fn space() -> ParameterSpace {
    "dram-small".parse::<BuiltinEnv>().unwrap().space()
}

#[test]
fn single_tree_without_bootstrap_fits_a_constant_exactly() {
    let mut d = uniform_dataset(200, AgentKind::RW, &mut rng_for(1, 0)).into_records();
    for r in &mut d {
        r.observation.insert("latency".into(), 0.25);
    }
    let d = Dataset::from_records(d).unwrap();
    let params = ForestParams {
        n_trees: 1,
        bootstrap: false,
        ..ForestParams::default()
    };
    let m = RandomForestModel::train(&d, &space(), "latency", params, 3).unwrap();
    assert_eq!(evaluate_rmse(&m, &d).unwrap().rmse, 0.0);
}

#[test]
fn single_tree_exact_fit_on_real_metrics() {
    // the cost model is deterministic, so duplicate designs never conflict
    let d = uniform_dataset(1500, AgentKind::RW, &mut rng_for(2, 0));
    let params = ForestParams {
        n_trees: 1,
        bootstrap: false,
        max_depth: None,
        min_samples_leaf: 1,
        feature_subsample: 1.0,
    };
    for target in ["latency", "power", "energy"] {
        let m = RandomForestModel::train(&d, &space(), target, params, 0).unwrap();
        assert_eq!(evaluate_rmse(&m, &d).unwrap().rmse, 0.0, "{target}");
    }
}

#[test]
fn model_file_round_trip_predicts_bit_exactly() {
    let d = uniform_dataset(500, AgentKind::RW, &mut rng_for(3, 0));
    let m = RandomForestModel::train(&d, &space(), "power", ForestParams::default(), 9).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("power.json");
    m.save(&path).unwrap();
    let back = RandomForestModel::load(&path).unwrap();
    assert_eq!(back, m);
    let mut rng = rng_for(4, 0);
    for _ in 0..1000 {
        let p = space().sample_uniform(&mut rng);
        assert_eq!(m.predict(&p).unwrap().to_bits(), back.predict(&p).unwrap().to_bits());
    }
}

#[test]
fn training_is_deterministic_per_seed() {
    let d = uniform_dataset(300, AgentKind::RW, &mut rng_for(5, 0));
    let a = RandomForestModel::train(&d, &space(), "energy", ForestParams::default(), 1).unwrap();
    let b = RandomForestModel::train(&d, &space(), "energy", ForestParams::default(), 1).unwrap();
    assert_eq!(a, b);
}

#[test]
fn missing_metric_is_an_error() {
    let mut d = uniform_dataset(10, AgentKind::RW, &mut rng_for(6, 0)).into_records();
    d[3].observation.remove("power");
    let d = Dataset::from_records(d).unwrap();
    assert!(matches!(
        RandomForestModel::train(&d, &space(), "power", ForestParams::default(), 0),
        Err(ProxyError::MissingMetric { step: 3, .. })
    ));
    assert!(RandomForestModel::train(&d, &space(), "latency", ForestParams::default(), 0).is_ok());
}

#[test]
fn report_counts_and_normalization() {
    let train = uniform_dataset(400, AgentKind::ACO, &mut rng_for(7, 0));
    let test = uniform_dataset(123, AgentKind::RW, &mut rng_for(8, 0));
    let m = RandomForestModel::train(&train, &space(), "latency", ForestParams::default(), 0).unwrap();
    let r = evaluate_rmse(&m, &test).unwrap();
    assert_eq!(r.n_test, 123);
    assert_eq!(r.n_train, 400);
    assert_eq!(r.train_provenance[&AgentKind::ACO], 400);
    assert_eq!(r.test_provenance[&AgentKind::RW], 123);
    let actual: Vec<f64> = test.records().iter().map(|r| r.observation["latency"]).collect();
    let predicted: Vec<f64> = test.records().iter().map(|r| m.predict_design(&r.design).unwrap()).collect();
    assert_eq!(r.rmse, rmse(&predicted, &actual));
    let range = actual.iter().cloned().fold(f64::MIN, f64::max) - actual.iter().cloned().fold(f64::MAX, f64::min);
    assert!((r.normalized_rmse_percent.unwrap() - r.rmse / range * 100.0).abs() < 1e-12);
}

#[test]
fn duplicating_rows_leaves_mean_prediction_unchanged() {
    let d = uniform_dataset(300, AgentKind::RW, &mut rng_for(9, 0));
    let doubled = dsegym_dataset::merge(&[d.clone(), {
        let mut r = d.clone().into_records();
        for x in &mut r {
            x.experiment_id.push_str("-copy");
        }
        Dataset::from_records(r).unwrap()
    }])
    .unwrap();
    let params = ForestParams {
        n_trees: 10,
        ..ForestParams::default()
    };
    let mut qrng = rng_for(10, 0);
    let queries: Vec<DesignPoint> = (0..200).map(|_| space().sample_uniform(&mut qrng)).collect();
    let mean_prediction = |data: &Dataset| -> Vec<f64> {
        let mut acc = vec![0.0; queries.len()];
        for seed in 0..20 {
            let m = RandomForestModel::train(data, &space(), "latency", params, seed).unwrap();
            for (a, q) in acc.iter_mut().zip(&queries) {
                *a += m.predict(q).unwrap() / 20.0;
            }
        }
        acc
    };
    let (a, b) = (mean_prediction(&d), mean_prediction(&doubled));
    let (lo, hi) = d.records().iter().map(|r| r.observation["latency"]).fold((f64::MAX, f64::MIN), |(l, h), v| (l.min(v), h.max(v)));
    let shift = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64;
    assert!(shift < 0.02 * (hi - lo), "mean shift {shift} vs range {}", hi - lo);
}

#[test]
fn search_contract() {
    let train = uniform_dataset(300, AgentKind::RW, &mut rng_for(11, 0));
    let val = uniform_dataset(100, AgentKind::RW, &mut rng_for(12, 0));
    let one = hyperparam_search(&train, &val, &space(), "latency", 1, 5).unwrap();
    assert_eq!(one.evaluated.len(), 1);
    assert_eq!(one.params, one.evaluated[0].0);
    let many = hyperparam_search(&train, &val, &space(), "latency", 6, 5).unwrap();
    assert_eq!(many.evaluated.len(), 6);
    assert!(many.evaluated.iter().all(|(_, r)| many.validation_rmse <= *r));
    let first_best = many.evaluated.iter().find(|(_, r)| *r == many.validation_rmse).unwrap().0;
    assert_eq!(many.params, first_best);
    let again = hyperparam_search(&train, &val, &space(), "latency", 6, 5).unwrap();
    assert_eq!(again.evaluated, many.evaluated);
    assert_eq!(again.model, many.model);
}

#[test]
fn model_against_itself_is_within_noise() {
    let d = uniform_dataset(500, AgentKind::RW, &mut rng_for(13, 0));
    let m = RandomForestModel::train(&d, &space(), "latency", ForestParams::default(), 0).unwrap();
    let mut rng = rng_for(14, 0);
    let points: Vec<DesignPoint> = (0..100).map(|_| space().sample_uniform(&mut rng)).collect();
    let run = || time_pass(&points, 20, |p| {
        std::hint::black_box(m.predict(p).unwrap());
    });
    let ratio = run().as_secs_f64() / run().as_secs_f64();
    assert!((0.5..=2.0).contains(&ratio), "{ratio}");
}

#[test]
fn proxy_is_much_faster_than_a_slow_simulator() {
    let d = uniform_dataset(2000, AgentKind::RW, &mut rng_for(15, 0));
    let m = RandomForestModel::train(&d, &space(), "latency", ForestParams::default(), 0).unwrap();
    let mut rng = rng_for(16, 0);
    let points: Vec<DesignPoint> = (0..100).map(|_| space().sample_uniform(&mut rng)).collect();
    let r10 = speed_benchmark(&m, &mut env(10), &points).unwrap();
    assert!(r10.speedup >= 100.0, "{r10:?}");
    let r20 = speed_benchmark(&m, &mut env(20), &points).unwrap();
    // compare on the env side alone so model-timing jitter does not enter twice
    let env_ratio = r20.env_seconds / r10.env_seconds;
    assert!((1.4..=2.6).contains(&env_ratio), "{env_ratio}");
    let speed_ratio = r20.speedup / r10.speedup;
    assert!((1.4..=2.6).contains(&speed_ratio), "{r10:?} {r20:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn predictions_stay_in_training_range(seed in 0u64..10_000, n in 20usize..300, depth in prop::option::of(1usize..12)) {
        let d = uniform_dataset(n, AgentKind::RW, &mut rng_for(seed, 0));
        let params = ForestParams { n_trees: 8, max_depth: depth, ..ForestParams::default() };
        let m = RandomForestModel::train(&d, &space(), "energy", params, seed).unwrap();
        let (lo, hi) = m.target_range;
        let mut rng = rng_for(seed, 1);
        let dim = space().encoded_dim();
        for _ in 0..10_000 {
            // arbitrary feature vectors, not just grid points
            let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-0.5..1.5)).collect();
            let y = m.predict_encoded(&x);
            prop_assert!(y >= lo && y <= hi);
        }
    }
}
