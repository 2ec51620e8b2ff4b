//! CSV tables behind the sweep plots.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use dsegym_core::AgentKind;

use crate::sweep::SweepReport;
use crate::OrchestratorError;

/// Files written by [`write_report`], in order.
pub const REPORT_FILES: [&str; 4] = [
    "quartiles.csv",
    "normalized_reward.csv",
    "time_to_completion.csv",
    "configs.csv",
];

fn csv_error(path: &Path, e: csv::Error) -> OrchestratorError {
    OrchestratorError::Io(path.display().to_string(), std::io::Error::other(e))
}

fn write_table(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<(), OrchestratorError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| OrchestratorError::Io(path.display().to_string(), e))
}

/// Writes the report tables into `dir`. The output is a function of
/// `report` alone: the same report always produces the same bytes.
///
/// * `quartiles.csv`: one five-number summary row per agent and budget.
/// * `normalized_reward.csv`: one row per agent, one column per budget.
/// * `time_to_completion.csv`: mean and median trial wall time.
/// * `configs.csv`: best reward of every configuration and seed.
pub fn write_report(report: &SweepReport, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>, OrchestratorError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| OrchestratorError::Io(dir.display().to_string(), e))?;
    let s = &report.summary;
    let head = |cols: &[&str]| -> Vec<String> { cols.iter().map(|c| c.to_string()).collect() };
    let context = [s.env.clone(), s.workload.clone(), s.objective.clone()];

    let quartiles: Vec<Vec<String>> = s
        .agents
        .iter()
        .map(|a| {
            let mut row = context.to_vec();
            row.extend([
                a.agent.to_string(),
                a.budget.to_string(),
                a.trials.to_string(),
                a.five.min.to_string(),
                a.five.q1.to_string(),
                a.five.median.to_string(),
                a.five.q3.to_string(),
                a.five.max.to_string(),
                a.iqr.to_string(),
                a.best.reward.to_string(),
                a.best.hyperparams.clone(),
            ]);
            row
        })
        .collect();

    let mut normalized: BTreeMap<AgentKind, BTreeMap<u64, f64>> = BTreeMap::new();
    for a in &s.agents {
        normalized.entry(a.agent).or_default().insert(a.budget, a.mean_normalized_reward);
    }
    let mut norm_header = head(&["env", "workload", "objective", "agent"]);
    norm_header.extend(s.budgets.iter().map(|b| format!("budget_{b}")));
    let norm_rows: Vec<Vec<String>> = normalized
        .iter()
        .map(|(agent, by_budget)| {
            let mut row = context.to_vec();
            row.push(agent.to_string());
            row.extend(s.budgets.iter().map(|b| by_budget.get(b).map(f64::to_string).unwrap_or_default()));
            row
        })
        .collect();

    let timing_rows: Vec<Vec<String>> = report
        .timings
        .iter()
        .map(|t| {
            let mut row = context.to_vec();
            row.extend([
                t.agent.to_string(),
                t.budget.to_string(),
                t.trials.to_string(),
                t.mean_seconds.to_string(),
                t.median_seconds.to_string(),
            ]);
            row
        })
        .collect();

    let config_rows: Vec<Vec<String>> = s
        .configs
        .iter()
        .flat_map(|c| {
            c.seeds.iter().zip(&c.best_rewards).map(move |(seed, r)| {
                vec![
                    c.agent.to_string(),
                    c.digest.clone(),
                    c.hyperparams.clone(),
                    c.budget.to_string(),
                    seed.to_string(),
                    r.to_string(),
                ]
            })
        })
        .collect();

    let tables = [
        (
            head(&[
                "env", "workload", "objective", "agent", "budget", "trials", "min", "q1", "median", "q3", "max", "iqr",
                "best_reward", "best_config",
            ]),
            quartiles,
        ),
        (norm_header, norm_rows),
        (
            head(&["env", "workload", "objective", "agent", "budget", "trials", "mean_seconds", "median_seconds"]),
            timing_rows,
        ),
        (
            head(&["agent", "digest", "hyperparams", "budget", "seed", "best_reward"]),
            config_rows,
        ),
    ];
    let mut written = Vec::new();
    for (name, (header, rows)) in REPORT_FILES.iter().zip(tables) {
        let path = dir.join(name);
        write_table(&path, &header, &rows)?;
        written.push(path);
    }
    Ok(written)
}
