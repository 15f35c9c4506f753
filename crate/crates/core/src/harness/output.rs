use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::stats::{mean, quantile};
use super::{RunRecord, SuiteSummary};
use crate::error::{Error, Result};
use crate::mdp::RegretTrace;

pub const RUNS_CSV: &str = "runs.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const PLOT_CSV: &str = "plot.csv";

#[derive(Debug, Serialize, Deserialize)]
struct RunRow {
    config_id: String,
    seed: u64,
    t: u64,
    episode: u64,
    per_episode_regret: f64,
    cumulative_regret: f64,
}

/// Mean and interquartile band of cumulative regret at one timestep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub t: u64,
    pub mean: f64,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |source| Error::Csv { path: path.to_owned(), source }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_owned(), source }
}

fn write_runs(records: &[RunRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    if records.is_empty() {
        w.write_record(["config_id", "seed", "t", "episode", "per_episode_regret", "cumulative_regret"])
            .map_err(csv_err(path))?;
    }
    for r in records {
        let tr = &r.trace;
        for i in 0..tr.len() {
            w.serialize(RunRow {
                config_id: tr.config_id.clone(),
                seed: tr.seed,
                t: tr.timesteps[i],
                episode: tr.episodes[i],
                per_episode_regret: tr.per_episode_regret[i],
                cumulative_regret: tr.cumulative_regret[i],
            })
            .map_err(csv_err(path))?;
        }
    }
    w.flush().map_err(io_err(path))
}

/// Cumulative regret of every record on the union of their time axes,
/// carrying each trace's last value forward.
pub fn plot_data(records: &[RunRecord]) -> Vec<PlotRow> {
    let grid: BTreeSet<u64> = records.iter().flat_map(|r| r.trace.timesteps.iter().copied()).collect();
    let mut cursors = vec![0usize; records.len()];
    grid.into_iter()
        .map(|t| {
            let values: Vec<f64> = records
                .iter()
                .zip(cursors.iter_mut())
                .map(|(r, cur)| {
                    let tr = &r.trace;
                    while *cur < tr.len() && tr.timesteps[*cur] <= t {
                        *cur += 1;
                    }
                    if *cur == 0 {
                        0.0
                    } else {
                        tr.cumulative_regret[*cur - 1]
                    }
                })
                .collect();
            PlotRow {
                t,
                mean: mean(&values),
                median: quantile(&values, 0.5),
                q25: quantile(&values, 0.25),
                q75: quantile(&values, 0.75),
            }
        })
        .collect()
}

/// Write `runs.csv`, `summary.json` and `plot.csv` into `dir`.
pub fn emit_results(records: &[RunRecord], summary: &SuiteSummary, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_runs(records, &dir.join(RUNS_CSV))?;

    let summary_path = dir.join(SUMMARY_JSON);
    let json =
        serde_json::to_string_pretty(summary).map_err(|source| Error::Json { path: summary_path.clone(), source })?;
    fs::write(&summary_path, json).map_err(io_err(&summary_path))?;

    let plot_path = dir.join(PLOT_CSV);
    let mut w = csv::Writer::from_path(&plot_path).map_err(csv_err(&plot_path))?;
    let rows = plot_data(records);
    if rows.is_empty() {
        w.write_record(["t", "mean", "median", "q25", "q75"]).map_err(csv_err(&plot_path))?;
    }
    for row in rows {
        w.serialize(row).map_err(csv_err(&plot_path))?;
    }
    w.flush().map_err(io_err(&plot_path))
}

/// Parse a `runs.csv` back into traces, one per (config_id, seed), in file order.
pub fn read_runs_csv(path: &Path) -> Result<Vec<RegretTrace>> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let mut traces: Vec<RegretTrace> = Vec::new();
    for row in reader.deserialize() {
        let row: RunRow = row.map_err(csv_err(path))?;
        let same = traces.last().is_some_and(|t| t.seed == row.seed && t.config_id == row.config_id);
        if !same {
            traces.push(RegretTrace::new(row.config_id.clone(), row.seed));
        }
        let tr = traces.last_mut().expect("just pushed");
        tr.timesteps.push(row.t);
        tr.episodes.push(row.episode);
        tr.per_episode_regret.push(row.per_episode_regret);
        tr.cumulative_regret.push(row.cumulative_regret);
    }
    Ok(traces)
}

pub fn read_summary(path: &Path) -> Result<SuiteSummary> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| Error::Json { path: path.to_owned(), source })
}

/// Rebuild a summary from the `runs.csv` in `dir`. The stored
/// `summary.json`, when present, supplies the config echo and realized regret.
pub fn summarize_dir(dir: &Path) -> Result<SuiteSummary> {
    let traces = read_runs_csv(&dir.join(RUNS_CSV))?;
    let stored = dir.join(SUMMARY_JSON);
    let stored = stored.exists().then(|| read_summary(&stored)).transpose()?;
    let records: Vec<RunRecord> = traces
        .into_iter()
        .map(|trace| RunRecord {
            config_id: trace.config_id.clone(),
            seed: trace.seed,
            episodes: trace.episodes.last().copied().unwrap_or(0),
            trace,
            cumulative_reward: Vec::new(),
            realized_regret: Vec::new(),
            visit_log: Vec::new(),
            elapsed_secs: 0.0,
        })
        .collect();
    let mut summary = SuiteSummary::from_records(stored.as_ref().and_then(|s| s.config.as_ref()), &records, 0.0);
    if let Some(stored) = stored {
        if stored.seeds == summary.seeds {
            summary.total_realized_regret = stored.total_realized_regret;
            summary.realized_regret = stored.realized_regret;
        }
        summary.wall_clock_secs = stored.wall_clock_secs;
    }
    Ok(summary)
}
