use std::time::Instant;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::config::{build_prior, AgentSpec, EnvironmentSpec, ExperimentConfig, Mode};
use crate::agent::{cyclic_stage, doubling_trigger, Agent, EpisodeMode, FixedPolicyAgent, PsrlAgent, Ucrl2Agent};
use crate::env::{make_riverswim, sample_random_mdp, sample_well_specified_mdp, EnvState};
use crate::error::{Error, Result};
use crate::mdp::{evaluate_policy, optimal_gains, solve_optimal, RegretTrace, TabularMdp, GAIN_HORIZON_CAP};
use crate::posterior::prior_default;
use crate::rng;

/// `N_{t_k}(s_t, a_t)` for one step, with the episode it belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisitLogEntry {
    pub episode: u64,
    pub t_k: u64,
    pub visits_at_episode_start: u64,
}

/// Everything one seeded run produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_id: String,
    pub seed: u64,
    pub trace: RegretTrace,
    /// Realized cumulative reward at each trace point.
    pub cumulative_reward: Vec<f64>,
    /// Regret against realized rewards at each trace point: in episodic
    /// mode the optimal expected episode value minus realized reward.
    pub realized_regret: Vec<f64>,
    pub episodes: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub visit_log: Vec<VisitLogEntry>,
    pub elapsed_secs: f64,
}

impl RunRecord {
    pub fn total_regret(&self) -> f64 {
        self.trace.total()
    }
}

/// The true MDP for a run of `config` with seed `seed`.
pub fn build_environment(config: &ExperimentConfig, seed: u64) -> Result<TabularMdp> {
    match &config.environment {
        EnvironmentSpec::Riverswim { params } => {
            let mut params = params.clone();
            params.horizon = config.tau;
            make_riverswim(&params)
        }
        EnvironmentSpec::RandomMdp { num_states, num_actions, env_seed, well_specified } => {
            let prior = match &config.agent {
                AgentSpec::Psrl { prior: Some(p) } => p.build(*num_states, *num_actions)?,
                _ => prior_default(*num_states, *num_actions),
            };
            let mut env_rng = rng::stream(env_seed.unwrap_or(seed), rng::ENV_MODEL);
            if *well_specified {
                sample_well_specified_mdp(&prior, config.tau, &mut env_rng)
            } else {
                sample_random_mdp(&prior, config.tau, &mut env_rng)
            }
        }
    }
}

/// The agent described by `config` for the given true MDP.
pub fn build_agent(config: &ExperimentConfig, truth: &TabularMdp) -> Result<Box<dyn Agent>> {
    let (s, a) = (truth.num_states(), truth.num_actions());
    let horizon = config.planning_horizon();
    let mode = match config.mode {
        Mode::Episodic => EpisodeMode::FixedHorizon,
        Mode::Infinite => EpisodeMode::Doubling,
    };
    Ok(match &config.agent {
        AgentSpec::Psrl { prior } => {
            let prior = build_prior(prior.as_ref(), s, a)?;
            Box::new(PsrlAgent::new(prior, horizon, truth.initial_dist().to_vec(), mode)?)
        }
        AgentSpec::Ucrl2 { delta } => Box::new(Ucrl2Agent::new(s, a, horizon, *delta)?),
        AgentSpec::Oracle => {
            let planning = truth.clone().with_horizon(horizon)?;
            Box::new(FixedPolicyAgent::optimal(&planning))
        }
    })
}

/// Episodic simulation of an arbitrary agent against `truth`, which must
/// have horizon `tau`. Episode `k` starts at `t_k = (k − 1) τ + 1` and is
/// scored by exact evaluation of the agent's policy under `truth`.
pub fn simulate_episodic(
    config: &ExperimentConfig,
    seed: u64,
    truth: &TabularMdp,
    agent: &mut dyn Agent,
    agent_rng: &mut dyn RngCore,
) -> Result<RunRecord> {
    let started = Instant::now();
    let tau = config.tau as u64;
    if truth.horizon() != config.tau {
        return Err(Error::Config("true MDP horizon must equal tau".into()));
    }
    let mut env_rng = rng::stream(seed, rng::ENV_DYNAMICS);
    let optimal_start = truth.weighted(solve_optimal(truth).1.stage(1));
    let num_episodes = config.total_steps.div_ceil(tau);

    let mut trace = RegretTrace::new(config.config_id(), seed);
    let mut cumulative_reward = Vec::with_capacity(num_episodes as usize);
    let mut realized_regret = Vec::with_capacity(num_episodes as usize);
    let mut visit_log = Vec::new();
    let mut env = EnvState::start(truth, &mut env_rng);
    let (mut total_reward, mut total_realized) = (0.0, 0.0);

    for k in 1..=num_episodes {
        let t_k = (k - 1) * tau + 1;
        if k > 1 {
            env.reset_episode(truth, &mut env_rng);
        }
        let policy = agent.begin_episode(t_k, agent_rng)?.clone();
        policy.validate(truth.num_actions())?;
        let regret = optimal_start - truth.weighted(evaluate_policy(truth, &policy).stage(1));
        let start_counts = config.log_visits.then(|| agent.stats().visit_counts().to_vec());

        let steps = tau.min(config.total_steps - (k - 1) * tau);
        let mut episode_reward = 0.0;
        for stage in 1..=steps as usize {
            let s = env.current_state;
            let a = agent.act(s, stage)?;
            if let Some(counts) = &start_counts {
                visit_log.push(VisitLogEntry {
                    episode: k,
                    t_k,
                    visits_at_episode_start: counts[s * truth.num_actions() + a],
                });
            }
            let out = env.step(truth, a, &mut env_rng)?;
            agent.observe(s, a, out.reward, out.next_state)?;
            episode_reward += out.reward;
        }
        total_reward += episode_reward;
        total_realized += optimal_start - episode_reward;
        trace.push(t_k + steps - 1, k, regret);
        cumulative_reward.push(total_reward);
        realized_regret.push(total_realized);
    }

    Ok(RunRecord {
        config_id: config.config_id(),
        seed,
        trace,
        cumulative_reward,
        realized_regret,
        episodes: num_episodes,
        visit_log,
        elapsed_secs: started.elapsed().as_secs_f64(),
    })
}

/// One unbroken trajectory of `T` steps. The agent replans when the
/// doubling rule fires and otherwise follows its policy cyclically. Regret
/// at time `t` is `t ρ* − Σ realized rewards`, where `ρ*` is the optimal
/// gain from the realized start state.
pub fn simulate_infinite(
    config: &ExperimentConfig,
    seed: u64,
    truth: &TabularMdp,
    agent: &mut dyn Agent,
    agent_rng: &mut dyn RngCore,
) -> Result<RunRecord> {
    let started = Instant::now();
    let horizon = config.planning_horizon();
    let mut env_rng = rng::stream(seed, rng::ENV_DYNAMICS);
    let gains = optimal_gains(truth, GAIN_HORIZON_CAP)?;
    let mut env = EnvState::start(truth, &mut env_rng);
    let gain = gains[env.current_state];

    let mut trace = RegretTrace::new(config.config_id(), seed);
    let mut cumulative_reward = Vec::new();
    let mut realized_regret = Vec::new();
    let mut episode = 1u64;
    agent.begin_episode(1, agent_rng)?.validate(truth.num_actions())?;
    let mut episode_start = agent.stats().clone();
    let mut step_in_episode = 0u64;
    let mut total_reward = 0.0;
    let mut recorded = 0.0;

    for t in 1..=config.total_steps {
        let s = env.current_state;
        let a = agent.act(s, cyclic_stage(step_in_episode, horizon))?;
        let out = env.step(truth, a, &mut env_rng)?;
        agent.observe(s, a, out.reward, out.next_state)?;
        total_reward += out.reward;
        step_in_episode += 1;

        let replan = t < config.total_steps && doubling_trigger(agent.stats(), &episode_start);
        if replan || t % config.trace_interval == 0 || t == config.total_steps {
            let regret = t as f64 * gain - total_reward;
            trace.push(t, episode, regret - recorded);
            recorded = regret;
            cumulative_reward.push(total_reward);
            realized_regret.push(regret);
        }
        if replan {
            episode += 1;
            agent.begin_episode(t + 1, agent_rng)?.validate(truth.num_actions())?;
            episode_start = agent.stats().clone();
            step_in_episode = 0;
        }
    }

    Ok(RunRecord {
        config_id: config.config_id(),
        seed,
        trace,
        cumulative_reward,
        realized_regret,
        episodes: episode,
        visit_log: Vec::new(),
        elapsed_secs: started.elapsed().as_secs_f64(),
    })
}

fn run_with(config: &ExperimentConfig, seed: u64, expected: Mode) -> Result<RunRecord> {
    config.validate()?;
    if config.mode != expected {
        return Err(Error::Config(format!("config mode is {:?}, expected {expected:?}", config.mode)));
    }
    let truth = build_environment(config, seed)?;
    let mut agent = build_agent(config, &truth)?;
    let mut agent_rng = rng::stream(seed, rng::AGENT);
    match expected {
        Mode::Episodic => simulate_episodic(config, seed, &truth, agent.as_mut(), &mut agent_rng),
        Mode::Infinite => simulate_infinite(config, seed, &truth, agent.as_mut(), &mut agent_rng),
    }
}

/// Episodic run of the configured agent and environment.
pub fn run_episodic(config: &ExperimentConfig, seed: u64) -> Result<RunRecord> {
    run_with(config, seed, Mode::Episodic)
}

/// Infinite-horizon doubling run of the configured agent and environment.
pub fn run_infinite(config: &ExperimentConfig, seed: u64) -> Result<RunRecord> {
    run_with(config, seed, Mode::Infinite)
}

/// Dispatch on the configured mode.
pub fn run_single(config: &ExperimentConfig, seed: u64) -> Result<RunRecord> {
    run_with(config, seed, config.mode)
}
