//! Seeded Monte Carlo experiments: runs, suites, and result files.

mod config;
mod output;
mod run;
pub mod stats;

pub use config::{build_prior, AgentSpec, EnvironmentSpec, ExperimentConfig, Mode, PriorSpec};
pub use output::{
    emit_results, plot_data, read_runs_csv, read_summary, summarize_dir, PlotRow, PLOT_CSV, RUNS_CSV, SUMMARY_JSON,
};
pub use run::{
    build_agent, build_environment, run_episodic, run_infinite, run_single, simulate_episodic, simulate_infinite,
    RunRecord, VisitLogEntry,
};

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use stats::Aggregate;

/// Environment variable overriding the suite worker count.
pub const WORKERS_ENV: &str = "PSRL_WORKERS";

/// Aggregate view of a suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub config_id: String,
    pub config: Option<ExperimentConfig>,
    pub num_seeds: usize,
    pub seeds: Vec<u64>,
    pub total_regret: Vec<f64>,
    pub total_realized_regret: Vec<f64>,
    pub regret: Option<Aggregate>,
    pub realized_regret: Option<Aggregate>,
    pub software_version: String,
    pub wall_clock_secs: f64,
}

impl SuiteSummary {
    pub fn from_records(config: Option<&ExperimentConfig>, records: &[RunRecord], wall_clock_secs: f64) -> Self {
        let total_regret: Vec<f64> = records.iter().map(RunRecord::total_regret).collect();
        let total_realized_regret: Vec<f64> =
            records.iter().map(|r| r.realized_regret.last().copied().unwrap_or(0.0)).collect();
        Self {
            config_id: config
                .map(ExperimentConfig::config_id)
                .or_else(|| records.first().map(|r| r.config_id.clone()))
                .unwrap_or_default(),
            config: config.cloned(),
            num_seeds: records.len(),
            seeds: records.iter().map(|r| r.seed).collect(),
            regret: Aggregate::of(&total_regret),
            realized_regret: Aggregate::of(&total_realized_regret),
            total_regret,
            total_realized_regret,
            software_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_clock_secs,
        }
    }

    pub fn mean_regret(&self) -> f64 {
        self.regret.map_or(f64::NAN, |a| a.mean)
    }
}

/// Per-seed records, ordered by seed index, plus their summary.
#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub records: Vec<RunRecord>,
    pub summary: SuiteSummary,
}

fn worker_count(config: &ExperimentConfig) -> Option<usize> {
    std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse().ok()).or(config.workers).filter(|n| *n > 0)
}

/// Run `num_seeds` replicas with seeds `base_seed + i`. Replicas may run in
/// parallel; records are always returned in seed order. The first failing
/// seed (in seed order) aborts the suite.
pub fn run_suite(config: &ExperimentConfig) -> Result<SuiteResult> {
    config.validate()?;
    let started = Instant::now();
    let seeds: Vec<u64> = (0..config.num_seeds).map(|i| config.seed(i)).collect();
    let run_all = || -> Vec<Result<RunRecord>> {
        seeds
            .par_iter()
            .map(|&seed| run_single(config, seed).map_err(|e| Error::SeedFailed { seed, source: Box::new(e) }))
            .collect()
    };
    let results = match worker_count(config) {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(run_all),
        None => run_all(),
    };
    let records = results.into_iter().collect::<Result<Vec<_>>>()?;
    let summary = SuiteSummary::from_records(Some(config), &records, started.elapsed().as_secs_f64());
    Ok(SuiteResult { records, summary })
}
