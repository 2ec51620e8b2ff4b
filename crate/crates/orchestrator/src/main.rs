use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use dsegym_agents::{HyperValue, HyperparamSet};
use dsegym_core::{rng_for, AgentKind, Environment};
use dsegym_dataset::{export, import, merge, sample_mixture, split, Manifest};
use dsegym_envs::{BuiltinEnv, EnvOptions};
use dsegym_orchestrator::{
    enumerate_oracle, run_sweep, run_trial, write_report, ExperimentConfig, OrchestratorError, SweepReport,
};
use dsegym_proxy::{evaluate_rmse, hyperparam_search, speed_benchmark, ForestParams, RandomForestModel};

#[derive(Parser)]
#[command(name = "dsegym", version, about = "Design space exploration gym")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trial and print its result.
    Run(RunArgs),
    /// Run every grid configuration × seed and write the summary and report.
    Sweep(SweepArgs),
    /// Merge the trajectory files of a directory into one dataset and a manifest.
    Aggregate {
        /// Directory of *.jsonl trajectory files.
        #[arg(long)]
        input: PathBuf,
        /// Merged dataset file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample a training set with fixed proportions per agent type.
    Mix {
        #[arg(long)]
        input: PathBuf,
        /// Proportions such as `GA=0.25,ACO=0.25,BO=0.25,RL=0.25`.
        #[arg(long)]
        weights: String,
        #[arg(long)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a random-forest proxy for one metric.
    TrainProxy {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        env: String,
        /// Metric to predict, e.g. `latency`.
        #[arg(long)]
        target: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Random-search this many forest configurations on a validation split.
        #[arg(long)]
        search: Option<usize>,
        #[arg(long, default_value_t = 0.2)]
        validation_fraction: f64,
    },
    /// RMSE of a proxy model on a dataset.
    EvalProxy {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Time a proxy model against the environment it stands in for.
    BenchProxy {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        env: String,
        #[arg(long)]
        workload: Option<String>,
        #[arg(long, default_value_t = 10)]
        delay_ms: u64,
        #[arg(long, default_value_t = 100)]
        queries: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write the CSV tables of a saved sweep.
    Report {
        /// A sweep.json file.
        #[arg(long)]
        summary: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Brute-force optimum of a small space.
    EnumerateOracle {
        #[arg(long)]
        env: String,
        #[arg(long)]
        workload: Option<String>,
        #[arg(long, default_value = "low-latency")]
        objective: String,
    },
}

#[derive(Args)]
struct Common {
    /// Experiment file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    env: Option<String>,
    #[arg(long)]
    workload: Option<String>,
    /// low-power, low-latency, joint or budget (low-energy on accel).
    #[arg(long)]
    objective: Option<String>,
    /// Agent defaults and sweep grids file.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    delay_ms: Option<u64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    agent: Option<AgentKind>,
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Hyperparameter override `name=value`; repeatable.
    #[arg(long = "hp", value_parser = parse_hyperparam)]
    hyperparams: Vec<(String, HyperValue)>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated; all five by default.
    #[arg(long, value_delimiter = ',')]
    agents: Vec<AgentKind>,
    #[arg(long, value_delimiter = ',')]
    budgets: Vec<u64>,
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    #[arg(long)]
    parallel: Option<usize>,
}

fn parse_hyperparam(s: &str) -> Result<(String, HyperValue), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("`{s}` is not name=value"))?;
    let value = if let Ok(b) = v.parse::<bool>() {
        HyperValue::Bool(b)
    } else if let Ok(i) = v.parse::<i64>() {
        HyperValue::Int(i)
    } else if let Ok(x) = v.parse::<f64>() {
        HyperValue::Float(x)
    } else {
        return Err(format!("`{v}` is not a number or boolean"));
    };
    Ok((k.trim().to_string(), value))
}

fn base_config(common: &Common) -> Result<ExperimentConfig, OrchestratorError> {
    let mut c = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig {
            env: common
                .env
                .clone()
                .ok_or_else(|| OrchestratorError::Invalid("--env or --config is required".into()))?,
            workload: None,
            objective: None,
            reward: None,
            agents: AgentKind::ALL.to_vec(),
            hyperparams: BTreeMap::new(),
            grid: None,
            budgets: vec![1000],
            seeds: vec![0],
            step_delay_ms: 0,
            out_dir: None,
            parallel: 1,
        },
    };
    if let Some(e) = &common.env {
        c.env = e.clone();
    }
    if common.workload.is_some() {
        c.workload = common.workload.clone();
    }
    if common.objective.is_some() {
        c.objective = common.objective.clone();
        c.reward = None;
    }
    if common.grid.is_some() {
        c.grid = common.grid.clone();
    }
    if common.out.is_some() {
        c.out_dir = common.out.clone();
    }
    if let Some(d) = common.delay_ms {
        c.step_delay_ms = d;
    }
    Ok(c)
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("outputs serialize"));
}

fn builtin(env: &str) -> Result<BuiltinEnv, OrchestratorError> {
    Ok(env.parse()?)
}

fn cmd_run(args: RunArgs) -> Result<(), OrchestratorError> {
    let mut c = base_config(&args.common)?;
    if let Some(a) = args.agent {
        c.agents = vec![a];
    }
    if c.agents.len() != 1 {
        return Err(OrchestratorError::Invalid("`run` needs exactly one --agent".into()));
    }
    let agent = c.agents[0];
    if let Some(b) = args.budget {
        c.budgets = vec![b];
    }
    if let Some(s) = args.seed {
        c.seeds = vec![s];
    }
    let overrides = c.hyperparams.entry(agent).or_insert_with(HyperparamSet::new);
    for (k, v) in args.hyperparams {
        overrides.set(k, v);
    }
    c.validate()?;
    let spec = c.trial_spec(agent, c.budgets[0])?;
    let result = run_trial(&spec, c.seeds[0])?;
    print_json(&result);
    Ok(())
}

/// Returns the number of failed trials.
fn cmd_sweep(args: SweepArgs) -> Result<usize, OrchestratorError> {
    let mut c = base_config(&args.common)?;
    if !args.agents.is_empty() {
        c.agents = args.agents;
    }
    if !args.budgets.is_empty() {
        c.budgets = args.budgets;
    }
    if !args.seeds.is_empty() {
        c.seeds = args.seeds;
    }
    if let Some(p) = args.parallel {
        c.parallel = p;
    }
    c.validate()?;
    let outcome = run_sweep(&c.sweep_plan()?)?;
    let report = outcome.report();
    match &c.out_dir {
        Some(dir) => {
            report.save(dir.join(SweepReport::FILE))?;
            for path in write_report(&report, dir)? {
                eprintln!("wrote {}", path.display());
            }
        }
        None => print_json(&report),
    }
    Ok(report.summary.failures.len())
}

fn parse_weights(s: &str) -> Result<BTreeMap<AgentKind, f64>, OrchestratorError> {
    s.split(',')
        .map(|part| {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| OrchestratorError::Invalid(format!("`{part}` is not AGENT=weight")))?;
            let agent: AgentKind = k.trim().parse().map_err(OrchestratorError::Invalid)?;
            let w: f64 = v
                .trim()
                .parse()
                .map_err(|_| OrchestratorError::Invalid(format!("`{v}` is not a number")))?;
            Ok((agent, w))
        })
        .collect()
}

fn cmd_mix(input: &Path, weights: &str, size: usize, seed: u64, out: &Path) -> Result<(), OrchestratorError> {
    let dataset = import(input)?;
    let weights = parse_weights(weights)?;
    let sources = weights.keys().map(|&a| (a, dataset.by_agent(a))).collect();
    let mixed = sample_mixture(&sources, &weights, size, &mut rng_for(seed, 0))?;
    export(&mixed, out)?;
    print_json(&mixed.agent_counts());
    Ok(())
}

fn cmd_train_proxy(
    data: &Path,
    env: &str,
    target: &str,
    out: &Path,
    seed: u64,
    search: Option<usize>,
    validation_fraction: f64,
) -> Result<(), OrchestratorError> {
    let dataset = import(data)?;
    let space = builtin(env)?.space();
    let model = match search {
        Some(budget) => {
            let (train, val) = split(&dataset, validation_fraction, &mut rng_for(seed, 1))?;
            let outcome = hyperparam_search(&train, &val, &space, target, budget, seed)?;
            eprintln!("validation RMSE {} with {:?}", outcome.validation_rmse, outcome.params);
            RandomForestModel::train(&dataset, &space, target, outcome.params, seed)?
        }
        None => RandomForestModel::train(&dataset, &space, target, ForestParams::default(), seed)?,
    };
    model.save(out)?;
    Ok(())
}

fn cmd_bench_proxy(
    model: &Path,
    env: &str,
    workload: Option<String>,
    delay_ms: u64,
    queries: usize,
    seed: u64,
) -> Result<(), OrchestratorError> {
    let model = RandomForestModel::load(model)?;
    let env = builtin(env)?;
    let workload = workload.unwrap_or_else(|| env.default_workload().to_string());
    let options = EnvOptions {
        step_delay: Duration::from_millis(delay_ms),
        seed,
        ..EnvOptions::default()
    };
    let mut e = env.make(&workload, "low-latency", options)?;
    let mut rng = rng_for(seed, 0);
    let points: Vec<_> = (0..queries).map(|_| e.space().sample_uniform(&mut rng)).collect();
    print_json(&speed_benchmark(&model, &mut e, &points)?);
    Ok(())
}

fn execute(command: Command) -> Result<usize, OrchestratorError> {
    match command {
        Command::Run(args) => cmd_run(args)?,
        Command::Sweep(args) => return cmd_sweep(args),
        Command::Aggregate { input, out } => {
            let (manifest, dataset) = Manifest::build(&input)?;
            manifest.write(&input)?;
            export(&merge(&[dataset])?, &out)?;
            print_json(&manifest);
        }
        Command::Mix {
            input,
            weights,
            size,
            seed,
            out,
        } => cmd_mix(&input, &weights, size, seed, &out)?,
        Command::TrainProxy {
            data,
            env,
            target,
            out,
            seed,
            search,
            validation_fraction,
        } => cmd_train_proxy(&data, &env, &target, &out, seed, search, validation_fraction)?,
        Command::EvalProxy { model, data } => {
            let model = RandomForestModel::load(model)?;
            print_json(&evaluate_rmse(&model, &import(data)?)?);
        }
        Command::BenchProxy {
            model,
            env,
            workload,
            delay_ms,
            queries,
            seed,
        } => cmd_bench_proxy(&model, &env, workload, delay_ms, queries, seed)?,
        Command::Report { summary, out } => {
            for path in write_report(&SweepReport::load(summary)?, out)? {
                eprintln!("wrote {}", path.display());
            }
        }
        Command::EnumerateOracle {
            env,
            workload,
            objective,
        } => {
            let env = builtin(&env)?;
            let workload = workload.unwrap_or_else(|| env.default_workload().to_string());
            let reward = env.objective(&workload, &objective)?;
            print_json(&enumerate_oracle(env, &workload, &reward)?);
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli.command) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(failed) => {
            eprintln!("error: {failed} trial(s) failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_runtime() { 2 } else { 1 })
        }
    }
}
