use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::process::Command;

use dsegym_agents::{build_agent, AgentConfigs, HyperparamSet};
use dsegym_core::{
    AgentKind, DesignPoint, EnvError, Environment, Observation, ParameterSpace, ParameterSpec, StepResult, WorkloadSpec,
};
use dsegym_dataset::{load_file, Manifest};
use dsegym_envs::BuiltinEnv;
use dsegym_orchestrator::*;
use proptest::prelude::*;

const DRAM: BuiltinEnv = BuiltinEnv {
    model: dsegym_envs::ModelKind::Dram,
    small: true,
};

fn spec(agent: AgentKind, budget: u64) -> TrialSpec {
    TrialSpec::shipped(DRAM, "stream", "low-power", agent, budget).unwrap()
}

/// Trajectory lines with `wall_time_ms` zeroed.
fn normalized_lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|line| {
            let mut v: serde_json::Value = serde_json::from_str(line).unwrap();
            v["wall_time_ms"] = 0.into();
            v.to_string()
        })
        .collect()
}

/// 16·16·4·4 = 4096 points; reward peaks at (11, 4, 2, 1) with an
/// interaction between the first two parameters. Fails on demand.
struct GridEnv {
    space: ParameterSpace,
    workload: WorkloadSpec,
    fail_at: Option<u64>,
    steps: u64,
}

impl GridEnv {
    fn new(fail_at: Option<u64>) -> Self {
        GridEnv {
            space: ParameterSpace::new(vec![
                ParameterSpec::numeric("a", 0.0, 15.0, 1.0),
                ParameterSpec::numeric("b", 0.0, 15.0, 1.0),
                ParameterSpec::categorical("c", ["w", "x", "y", "z"]),
                ParameterSpec::numeric("d", 1.0, 4.0, 1.0),
            ])
            .unwrap(),
            workload: WorkloadSpec::new("grid"),
            fail_at,
            steps: 0,
        }
    }

    fn reward(p: &DesignPoint) -> f64 {
        let [a, b, c, d] = [0, 1, 2, 3].map(|i| p.indices[i] as f64);
        let core = (a - 11.0).powi(2) + (b - 4.0).powi(2) + 0.5 * (a - 11.0) * (b - 4.0);
        1.0 / (1.0 + core + (c - 2.0).abs() + 0.3 * (d - 1.0).powi(2))
    }
}

impl Environment for GridEnv {
    fn id(&self) -> &str {
        "grid"
    }

    fn reset(&mut self) -> Observation {
        self.steps = 0;
        Observation::initial()
    }

    fn step(&mut self, point: &DesignPoint) -> Result<StepResult, EnvError> {
        if self.fail_at == Some(self.steps) {
            return Err(EnvError::SimulatorCrashed("exit status 3".into()));
        }
        self.steps += 1;
        let reward = Self::reward(point);
        Ok(StepResult {
            observation: Observation::new([("score", reward)])?,
            reward,
            done: true,
            info: BTreeMap::new(),
        })
    }

    fn space(&self) -> &ParameterSpace {
        &self.space
    }

    fn workload(&self) -> &WorkloadSpec {
        &self.workload
    }
}

fn grid_meta(seed: u64) -> TrialMeta {
    TrialMeta {
        experiment_id: format!("grid.s{seed}"),
        env_id: "grid".into(),
        workload_id: "grid".into(),
        seed,
    }
}

#[test]
fn sample_accounting() {
    let dir = tempfile::tempdir().unwrap();
    for agent in AgentKind::ALL {
        let mut s = spec(agent, 37);
        s.out_dir = Some(dir.path().to_path_buf());
        let r = run_trial(&s, 4).unwrap();
        assert_eq!(r.samples_used, 37);
        let (records, report) = load_file(r.trajectory.as_ref().unwrap()).unwrap();
        assert!(!report.truncated_tail);
        assert_eq!(records.len(), 37);
        assert!(records.iter().enumerate().all(|(i, rec)| rec.step_index == i as u64));
        let best = records.iter().map(|rec| rec.reward).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(r.best_reward, best);
        let first_best = records.iter().find(|rec| rec.reward == best).unwrap();
        assert_eq!(r.best_design, first_best.design);
    }
}

#[test]
fn budget_one_is_one_record() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = spec(AgentKind::GA, 1);
    s.out_dir = Some(dir.path().to_path_buf());
    let r = run_trial(&s, 0).unwrap();
    let (records, _) = load_file(r.trajectory.unwrap()).unwrap();
    assert_eq!(records.len(), 1);
    assert_eq!(r.best_reward, records[0].reward);
    assert_eq!(r.best_design, records[0].design);
    assert!(run_trial(&spec(AgentKind::GA, 0), 0).is_err());
}

#[test]
fn trials_stop_once_the_space_is_exhausted() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = spec(AgentKind::RW, 100_000);
    s.out_dir = Some(dir.path().to_path_buf());
    let r = run_trial(&s, 2).unwrap();
    assert!(r.samples_used < 100_000);
    let (records, _) = load_file(r.trajectory.unwrap()).unwrap();
    assert_eq!(records.len() as u64, r.samples_used);
    let distinct: BTreeSet<String> = records.iter().map(|rec| format!("{:?}", rec.design)).collect();
    assert_eq!(distinct.len(), 2304);
    // the last step is the one that completed the space
    let before: BTreeSet<String> = records[..records.len() - 1]
        .iter()
        .map(|rec| format!("{:?}", rec.design))
        .collect();
    assert_eq!(before.len(), 2303);
}

#[test]
fn replay_is_byte_identical_modulo_wall_time() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for agent in AgentKind::ALL {
        let mut s = spec(agent, 150);
        s.out_dir = Some(a.path().to_path_buf());
        let ra = run_trial(&s, 9).unwrap();
        s.out_dir = Some(b.path().to_path_buf());
        let rb = run_trial(&s, 9).unwrap();
        assert_eq!(
            normalized_lines(ra.trajectory.as_ref().unwrap()),
            normalized_lines(rb.trajectory.as_ref().unwrap())
        );
        s.out_dir = None;
        let other = run_trial(&s, 10).unwrap();
        assert_ne!(other.improvements, ra.improvements, "{agent}");
    }
}

#[test]
fn random_walker_finds_the_enumerated_optimum_of_4096_points() {
    let env = GridEnv::new(None);
    let oracle = env
        .space()
        .enumerate(4096)
        .unwrap()
        .map(|p| GridEnv::reward(&p))
        .fold(f64::NEG_INFINITY, f64::max);
    for seed in 0..5 {
        let mut env = GridEnv::new(None);
        let mut agent = build_agent(AgentKind::RW, env.space(), &HyperparamSet::new(), false).unwrap();
        let r = run_trial_with(&mut env, agent.as_mut(), &grid_meta(seed), 100_000, None).unwrap();
        assert_eq!(r.best_reward, oracle);
        assert_eq!(r.best_design["a"], dsegym_core::ParamValue::Number(11.0));
    }
}

#[test]
fn env_failure_leaves_a_flagged_partial_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let mut env = GridEnv::new(Some(12));
    let mut agent = build_agent(AgentKind::GA, env.space(), &AgentConfigs::shipped().defaults(AgentKind::GA).unwrap(), false)
        .unwrap();
    let err = run_trial_with(&mut env, agent.as_mut(), &grid_meta(1), 50, Some(dir.path())).unwrap_err();
    match &err {
        OrchestratorError::Trial { samples_used, .. } => assert_eq!(*samples_used, 12),
        other => panic!("unexpected {other}"),
    }
    assert!(err.is_runtime());
    let (manifest, dataset) = Manifest::build(dir.path()).unwrap();
    assert_eq!(dataset.len(), 12);
    assert_eq!(manifest.files.len(), 1);
    assert!(manifest.files[0].failure.as_deref().unwrap().contains("exit status 3"));
}

fn plan(agents: &[AgentKind], budgets: Vec<u64>, seeds: Vec<u64>) -> SweepPlan {
    let mut p = SweepPlan::from_grids(DRAM, "stream", "low-power", &AgentConfigs::shipped(), agents).unwrap();
    p.budgets = budgets;
    p.seeds = seeds;
    p
}

#[test]
fn single_trial_sweep() {
    let mut p = plan(&[AgentKind::RW], vec![50], vec![3]);
    p.configs.truncate(1);
    let out = run_sweep(&p).unwrap();
    let a = out.summary.agent(AgentKind::RW, 50).unwrap();
    assert_eq!(a.trials, 1);
    assert_eq!(a.iqr, 0.0);
    assert_eq!(a.mean_normalized_reward, 1.0);
    assert_eq!(a.best.reward, out.results[0].best_reward);
}

#[test]
fn sweep_summary_is_consistent_with_its_trials() {
    let p = plan(&[AgentKind::GA, AgentKind::ACO], vec![20, 200], vec![0, 1]);
    let out = run_sweep(&p).unwrap();
    assert_eq!(out.results.len(), (12 + 12) * 2);
    for agent in [AgentKind::GA, AgentKind::ACO] {
        for budget in [20, 200] {
            let a = out.summary.agent(agent, budget).unwrap();
            let bests: Vec<f64> = out
                .results
                .iter()
                .filter(|r| r.agent == agent)
                .map(|r| r.at_budget(budget).best_reward)
                .collect();
            assert_eq!(a.trials, bests.len());
            assert_eq!(a.best.reward, bests.iter().copied().fold(f64::NEG_INFINITY, f64::max));
            assert!(a.five.q1 <= a.five.median && a.five.median <= a.five.q3);
            assert_eq!(a.iqr, a.five.q3 - a.five.q1);
        }
    }
    // a prefix is the trial a smaller budget would have run
    for r in out.results.iter().take(6) {
        let mut s = spec(r.agent, 20);
        s.hyperparams = r.hyperparams.clone();
        let direct = run_trial(&s, r.seed).unwrap();
        let prefix = r.at_budget(20);
        assert_eq!(direct.best_reward, prefix.best_reward);
        assert_eq!(direct.improvements, prefix.improvements);
    }
}

#[test]
fn sweep_summary_is_independent_of_parallelism() {
    let mut p = plan(&AgentKind::ALL, vec![30, 120], vec![0, 1]);
    let serial = run_sweep(&p).unwrap();
    p.parallelism = 8;
    let parallel = run_sweep(&p).unwrap();
    assert_eq!(serial.summary, parallel.summary);
}

#[test]
fn failed_trials_are_recorded_and_the_sweep_continues() {
    let mut p = plan(&[AgentKind::RW], vec![10], vec![0, 1]);
    // a reward on a metric the DRAM model does not produce
    p.reward = dsegym_core::RewardSpec::Reciprocal { metric: "area".into() };
    let bad = run_sweep(&p).unwrap();
    assert_eq!(bad.summary.failures.len(), 2);
    assert!(bad.summary.agents.is_empty());
}

#[test]
fn report_is_deterministic_with_one_column_per_budget() {
    let p = plan(&[AgentKind::RW], vec![100, 1000, 100_000, 250_000], vec![0]);
    let report = run_sweep(&p).unwrap().report();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let files_a = write_report(&report, a.path()).unwrap();
    write_report(&report, b.path()).unwrap();
    for (path, name) in files_a.iter().zip(REPORT_FILES) {
        assert_eq!(std::fs::read(path).unwrap(), std::fs::read(b.path().join(name)).unwrap());
    }
    let norm = std::fs::read_to_string(a.path().join("normalized_reward.csv")).unwrap();
    let header = norm.lines().next().unwrap();
    assert_eq!(
        header,
        "env,workload,objective,agent,budget_100,budget_1000,budget_100000,budget_250000"
    );
    assert_eq!(norm.lines().count(), 2);
    let quartiles = std::fs::read_to_string(a.path().join("quartiles.csv")).unwrap();
    assert_eq!(quartiles.lines().count(), 1 + 4);
    // saved and reloaded reports render identically
    report.save(a.path().join("sweep.json")).unwrap();
    let reloaded = SweepReport::load(a.path().join("sweep.json")).unwrap();
    assert_eq!(reloaded, report);
}

#[test]
fn oracle_matches_stepping_every_point() {
    for env in BuiltinEnv::small_variants() {
        let w = env.default_workload();
        for (name, reward) in env.objectives(w).unwrap() {
            let o = enumerate_oracle(env, w, &reward).unwrap();
            let mut e = env.make(w, &name, Default::default()).unwrap();
            let best = env
                .space()
                .enumerate(4096)
                .unwrap()
                .map(|p| e.step(&p).unwrap().reward)
                .fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(o.best_reward, best, "{env} {name}");
            assert!(o.optimal_points >= 1);
        }
    }
}

fn dsegym(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_dsegym")).args(args).output().unwrap()
}

#[test]
fn cli_exit_codes() {
    assert_eq!(dsegym(&["--help"]).status.code(), Some(0));
    assert_eq!(dsegym(&["--version"]).status.code(), Some(0));
    assert_eq!(dsegym(&[]).status.code(), Some(1));
    assert_eq!(dsegym(&["run", "--bogus"]).status.code(), Some(1));
    assert_eq!(dsegym(&["run", "--env", "tpu", "--agent", "RW"]).status.code(), Some(1));
    assert_eq!(dsegym(&["run", "--env", "dram-small", "--agent", "RW", "--budget", "0"]).status.code(), Some(1));

    let ok = dsegym(&["run", "--env", "dram-small", "--agent", "GA", "--budget", "20", "--hp", "mutation_prob=0.1"]);
    assert_eq!(ok.status.code(), Some(0));
    let result: serde_json::Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert_eq!(result["samples_used"], 20);
    assert_eq!(result["hyperparams"]["mutation_prob"], 0.1);

    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    std::fs::write(
        &config,
        "env = \"dram-small\"\nagents = [\"RW\"]\nbudgets = [5]\nseeds = [0]\n[reward]\nmode = \"Reciprocal\"\nmetric = \"area\"\n",
    )
    .unwrap();
    let failed = dsegym(&["run", "--config", config.to_str().unwrap()]);
    assert_eq!(failed.status.code(), Some(2), "{}", String::from_utf8_lossy(&failed.stderr));
}

#[test]
fn cli_pipeline_from_sweep_to_proxy() {
    let dir = tempfile::tempdir().unwrap();
    let d = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let runs = d("runs");
    let sweep = dsegym(&[
        "sweep", "--env", "dram-small", "--agents", "RW,ACO", "--budgets", "40,80", "--seeds", "0,1", "--out", &runs,
        "--parallel", "2",
    ]);
    assert_eq!(sweep.status.code(), Some(0), "{}", String::from_utf8_lossy(&sweep.stderr));
    for name in REPORT_FILES {
        assert!(Path::new(&runs).join(name).exists());
    }
    let again = d("again");
    assert_eq!(
        dsegym(&["report", "--summary", &format!("{runs}/sweep.json"), "--out", &again]).status.code(),
        Some(0)
    );
    for name in REPORT_FILES {
        assert_eq!(
            std::fs::read(Path::new(&runs).join(name)).unwrap(),
            std::fs::read(Path::new(&again).join(name)).unwrap()
        );
    }

    let merged = d("merged.jsonl");
    assert_eq!(dsegym(&["aggregate", "--input", &runs, "--out", &merged]).status.code(), Some(0));
    let manifest = Manifest::read(&runs).unwrap();
    assert_eq!(manifest.total_records, (1 + 12) * 2 * 80);

    let mixed = d("mixed.jsonl");
    let mix = dsegym(&["mix", "--input", &merged, "--weights", "RW=0.5,ACO=0.5", "--size", "200", "--out", &mixed]);
    assert_eq!(mix.status.code(), Some(0));
    let counts: BTreeMap<String, usize> = serde_json::from_slice(&mix.stdout).unwrap();
    assert_eq!(counts["RW"], 100);
    assert_eq!(counts["ACO"], 100);

    let model = d("model.json");
    let train = ["train-proxy", "--data", &mixed, "--env", "dram-small", "--target", "latency", "--out", &model];
    assert_eq!(dsegym(&train).status.code(), Some(0));
    let eval = dsegym(&["eval-proxy", "--model", &model, "--data", &merged]);
    assert_eq!(eval.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&eval.stdout).unwrap();
    assert_eq!(report["n_test"], manifest.total_records);
    let bench = dsegym(&["bench-proxy", "--model", &model, "--env", "dram-small", "--delay-ms", "1", "--queries", "10"]);
    assert_eq!(bench.status.code(), Some(0));

    let oracle = dsegym(&["enumerate-oracle", "--env", "dram-small", "--objective", "low-power"]);
    let o: serde_json::Value = serde_json::from_slice(&oracle.stdout).unwrap();
    assert_eq!(o["points"], 2304);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn quartiles_are_ordered(values in prop::collection::vec(-1e6f64..1e6, 1..60)) {
        let f = FiveNumber::of(&values).unwrap();
        let (q1, q3, iqr) = interquartile_range(&values).unwrap();
        prop_assert!(f.min <= f.q1 && f.q1 <= f.median && f.median <= f.q3 && f.q3 <= f.max);
        prop_assert_eq!((q1, q3, iqr), (f.q1, f.q3, f.q3 - f.q1));
    }

    #[test]
    fn normalized_rewards_lie_in_the_unit_interval(
        rows in prop::collection::vec((0usize..5, 0u64..3, -5.0f64..5.0), 1..40)
    ) {
        let triples: Vec<(AgentKind, u64, f64)> =
            rows.iter().map(|&(a, b, r)| (AgentKind::ALL[a], b, r)).collect();
        let norm = mean_normalized_reward(&triples).unwrap();
        prop_assert!(norm.values().all(|v| (0.0..=1.0).contains(v)));
    }
}

#[test]
fn prefix_best_is_monotone_in_budget() {
    let r = run_trial(&spec(AgentKind::RL, 400), 5).unwrap();
    let mut last = f64::NEG_INFINITY;
    for b in [1, 2, 5, 10, 50, 100, 399, 400] {
        let p = r.at_budget(b);
        assert_eq!(p.samples_used, b);
        assert!(p.best_reward >= last);
        last = p.best_reward;
    }
    assert_eq!(r.at_budget(400).best_reward, r.best_reward);
}
