use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use psrl_core::env::RiverSwimParams;
use psrl_core::harness::{
    emit_results, run_suite, summarize_dir, AgentSpec, EnvironmentSpec, ExperimentConfig, Mode, SuiteSummary,
};
use psrl_core::theory::{verify_all, VerifyScale};

#[derive(Parser)]
#[command(name = "psrl", version, about = "Posterior sampling vs UCRL2 regret experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seeded suite and write runs.csv, summary.json and plot.csv.
    Run(RunArgs),
    /// Recompute the summary of a results directory from its runs.csv.
    Summarize { dir: PathBuf },
    /// Run the theory checks and write a JSON report.
    Verify {
        /// Smaller sample sizes for a fast smoke run.
        #[arg(long)]
        quick: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "verify_report.json")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum EnvKind {
    Riverswim,
    #[value(alias = "random_mdp")]
    RandomMdp,
}

#[derive(Clone, Copy, ValueEnum)]
enum AgentKind {
    Psrl,
    Ucrl2,
    Oracle,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeKind {
    #[value(alias = "episodic-tau")]
    Episodic,
    #[value(alias = "infinite-horizon-doubling")]
    Infinite,
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config; flags given alongside override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    env: Option<EnvKind>,
    /// States of a random MDP.
    #[arg(long, default_value_t = 10)]
    states: usize,
    /// Actions of a random MDP.
    #[arg(long, default_value_t = 5)]
    actions: usize,
    /// Fix the random MDP instead of drawing one per seed.
    #[arg(long)]
    env_seed: Option<u64>,
    #[arg(long)]
    agent: Option<AgentKind>,
    #[arg(long)]
    mode: Option<ModeKind>,
    #[arg(long)]
    tau: Option<usize>,
    #[arg(long = "T", visible_alias = "total-steps")]
    total_steps: Option<u64>,
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    base_seed: Option<u64>,
    /// UCRL2 confidence parameter.
    #[arg(long)]
    delta: Option<f64>,
    /// Planning horizon in infinite-horizon mode.
    #[arg(long)]
    planning_horizon: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = "PSRL_WORKERS")]
    workers: Option<usize>,
}

impl RunArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::from_json_file(path)?,
            None => ExperimentConfig::riverswim(AgentSpec::Psrl { prior: None }, Mode::Episodic),
        };
        if let Some(env) = self.env {
            c.environment = match env {
                EnvKind::Riverswim => EnvironmentSpec::Riverswim { params: RiverSwimParams::default() },
                EnvKind::RandomMdp => EnvironmentSpec::RandomMdp {
                    num_states: self.states,
                    num_actions: self.actions,
                    env_seed: self.env_seed,
                    well_specified: false,
                },
            };
        }
        if let Some(agent) = self.agent {
            c.agent = match agent {
                AgentKind::Psrl => AgentSpec::Psrl { prior: None },
                AgentKind::Ucrl2 => AgentSpec::Ucrl2 { delta: self.delta.unwrap_or(0.05) },
                AgentKind::Oracle => AgentSpec::Oracle,
            };
        } else if let (Some(d), AgentSpec::Ucrl2 { delta }) = (self.delta, &mut c.agent) {
            *delta = d;
        }
        if self.delta.is_some() && !matches!(c.agent, AgentSpec::Ucrl2 { .. }) {
            bail!("--delta only applies to the ucrl2 agent");
        }
        if let Some(mode) = self.mode {
            c.mode = match mode {
                ModeKind::Episodic => Mode::Episodic,
                ModeKind::Infinite => Mode::Infinite,
            };
        }
        c.tau = self.tau.unwrap_or(c.tau);
        c.total_steps = self.total_steps.unwrap_or(c.total_steps);
        c.num_seeds = self.seeds.unwrap_or(c.num_seeds);
        c.base_seed = self.base_seed.unwrap_or(c.base_seed);
        c.planning_horizon = self.planning_horizon.or(c.planning_horizon);
        c.workers = self.workers.or(c.workers);
        if let Some(out) = &self.out {
            c.output = Some(out.clone());
        }
        c.validate()?;
        Ok(c)
    }
}

fn print_summary(summary: &SuiteSummary) {
    println!("config: {}", summary.config_id);
    println!("seeds: {}", summary.num_seeds);
    if let Some(a) = summary.regret {
        println!(
            "total regret: mean {:.4} (se {:.4}), median {:.4}, IQR [{:.4}, {:.4}]",
            a.mean, a.std_error, a.median, a.q25, a.q75
        );
    }
    if let Some(a) = summary.realized_regret {
        println!("realized regret: mean {:.4}, median {:.4}", a.mean, a.median);
    }
}

fn run(args: &RunArgs) -> Result<()> {
    let config = args.config()?;
    let dir = config.output.clone().unwrap_or_else(|| Path::new("results").join(config.config_id()));
    let suite = run_suite(&config)?;
    emit_results(&suite.records, &suite.summary, &dir)?;
    print_summary(&suite.summary);
    println!("results written to {}", dir.display());
    Ok(())
}

fn verify(quick: bool, seed: u64, out: &Path) -> Result<bool> {
    let scale = if quick { VerifyScale::Quick } else { VerifyScale::Full };
    let reports = verify_all(scale, seed)?;
    for r in &reports {
        println!(
            "{} {}: statistic {:.6}, threshold {:.6}, n = {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.statistic,
            r.threshold,
            r.sample_size
        );
    }
    let json = serde_json::to_string_pretty(&reports)?;
    fs::write(out, json).with_context(|| format!("writing {}", out.display()))?;
    println!("report written to {}", out.display());
    Ok(reports.iter().all(|r| r.passed))
}

fn main() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => run(&args)?,
        Command::Summarize { dir } => {
            let summary = summarize_dir(&dir)?;
            print_summary(&summary);
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Verify { quick, seed, out } => {
            if !verify(quick, seed, &out)? {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
