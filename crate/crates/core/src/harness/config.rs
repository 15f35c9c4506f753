use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env::RiverSwimParams;
use crate::error::{Error, Result};
use crate::posterior::{prior_default, NormalGamma, PosteriorParams, DEFAULT_NORMAL_GAMMA};

/// Which environment to simulate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvironmentSpec {
    Riverswim {
        #[serde(default)]
        params: RiverSwimParams,
    },
    RandomMdp {
        num_states: usize,
        num_actions: usize,
        /// Fixed environment seed; when absent every run draws its own MDP.
        #[serde(default)]
        env_seed: Option<u64>,
        /// Emit Gaussian rewards with prior-drawn precision instead of clipped
        /// deterministic means, so that the true MDP is an exact prior draw.
        #[serde(default)]
        well_specified: bool,
    },
}

impl EnvironmentSpec {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            EnvironmentSpec::Riverswim { params } => (params.num_states, 2),
            EnvironmentSpec::RandomMdp { num_states, num_actions, .. } => (*num_states, *num_actions),
        }
    }

    fn label(&self) -> String {
        match self {
            EnvironmentSpec::Riverswim { .. } => "riverswim".into(),
            EnvironmentSpec::RandomMdp { num_states, num_actions, well_specified, .. } => {
                let ws = if *well_specified { "-ws" } else { "" };
                format!("random{num_states}x{num_actions}{ws}")
            }
        }
    }
}

/// Override of the conjugate prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    /// Dirichlet concentration per entry; `1/S` when absent.
    #[serde(default)]
    pub dirichlet_concentration: Option<f64>,
    #[serde(default = "default_normal_gamma")]
    pub normal_gamma: NormalGamma,
}

fn default_normal_gamma() -> NormalGamma {
    DEFAULT_NORMAL_GAMMA
}

impl PriorSpec {
    pub fn build(&self, num_states: usize, num_actions: usize) -> Result<PosteriorParams> {
        let c = self.dirichlet_concentration.unwrap_or(1.0 / num_states as f64);
        PosteriorParams::uniform(num_states, num_actions, c, self.normal_gamma)
    }
}

/// Build the prior for a shape, honouring an optional override.
pub fn build_prior(spec: Option<&PriorSpec>, num_states: usize, num_actions: usize) -> Result<PosteriorParams> {
    match spec {
        Some(p) => p.build(num_states, num_actions),
        None => Ok(prior_default(num_states, num_actions)),
    }
}

fn default_delta() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentSpec {
    Psrl {
        #[serde(default)]
        prior: Option<PriorSpec>,
    },
    Ucrl2 {
        #[serde(default = "default_delta")]
        delta: f64,
    },
    /// Plays the true MDP's optimal policy.
    Oracle,
}

impl AgentSpec {
    fn label(&self) -> &'static str {
        match self {
            AgentSpec::Psrl { .. } => "psrl",
            AgentSpec::Ucrl2 { .. } => "ucrl2",
            AgentSpec::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Reset every `tau` steps; regret scored per episode by exact evaluation.
    #[serde(alias = "episodic-tau", alias = "episodic_tau")]
    Episodic,
    /// Single trajectory with doubling-triggered replanning.
    #[serde(alias = "infinite-horizon-doubling", alias = "infinite_horizon_doubling")]
    Infinite,
}

fn default_tau() -> usize {
    20
}
fn default_total_steps() -> u64 {
    10_000
}
fn default_num_seeds() -> usize {
    20
}
fn default_trace_interval() -> u64 {
    100
}

/// One experiment: environment x agent x mode, replicated over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub environment: EnvironmentSpec,
    pub agent: AgentSpec,
    pub mode: Mode,
    #[serde(default = "default_tau")]
    pub tau: usize,
    #[serde(default = "default_total_steps", alias = "T")]
    pub total_steps: u64,
    #[serde(default = "default_num_seeds")]
    pub num_seeds: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Planning horizon in infinite mode; defaults to `tau`.
    #[serde(default)]
    pub planning_horizon: Option<usize>,
    /// Infinite mode records the trace at least this often.
    #[serde(default = "default_trace_interval")]
    pub trace_interval: u64,
    /// Record `N_{t_k}(s_t, a_t)` at every step (episodic mode).
    #[serde(default)]
    pub log_visits: bool,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(environment: EnvironmentSpec, agent: AgentSpec, mode: Mode) -> Self {
        Self {
            environment,
            agent,
            mode,
            tau: default_tau(),
            total_steps: default_total_steps(),
            num_seeds: default_num_seeds(),
            base_seed: 0,
            planning_horizon: None,
            trace_interval: default_trace_interval(),
            log_visits: false,
            output: None,
            workers: None,
        }
    }

    pub fn riverswim(agent: AgentSpec, mode: Mode) -> Self {
        Self::new(EnvironmentSpec::Riverswim { params: RiverSwimParams::default() }, agent, mode)
    }

    pub fn random_mdp(num_states: usize, num_actions: usize, agent: AgentSpec, mode: Mode) -> Self {
        Self::new(
            EnvironmentSpec::RandomMdp { num_states, num_actions, env_seed: None, well_specified: false },
            agent,
            mode,
        )
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_owned(), source })?;
        let config: Self =
            serde_json::from_str(&text).map_err(|source| Error::Json { path: path.to_owned(), source })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tau == 0 {
            return Err(Error::Config("tau must be at least 1".into()));
        }
        if self.total_steps < self.tau as u64 {
            return Err(Error::Config(format!("T = {} must be at least tau = {}", self.total_steps, self.tau)));
        }
        if self.num_seeds == 0 {
            return Err(Error::Config("num_seeds must be at least 1".into()));
        }
        if self.planning_horizon == Some(0) {
            return Err(Error::Config("planning horizon must be positive".into()));
        }
        if self.trace_interval == 0 {
            return Err(Error::Config("trace interval must be positive".into()));
        }
        if let AgentSpec::Ucrl2 { delta } = self.agent {
            if !(delta > 0.0 && delta < 1.0) {
                return Err(Error::Config(format!("delta {delta} outside (0, 1)")));
            }
        }
        let (s, a) = self.environment.shape();
        if s == 0 || a == 0 {
            return Err(Error::Config("environment needs at least one state and action".into()));
        }
        Ok(())
    }

    pub fn planning_horizon(&self) -> usize {
        match self.mode {
            Mode::Episodic => self.tau,
            Mode::Infinite => self.planning_horizon.unwrap_or(self.tau),
        }
    }

    /// Stable identifier built from the fields that determine the runs.
    pub fn config_id(&self) -> String {
        let mode = match self.mode {
            Mode::Episodic => "episodic",
            Mode::Infinite => "infinite",
        };
        format!(
            "{}-{}-{}-tau{}-T{}",
            self.environment.label(),
            self.agent.label(),
            mode,
            self.planning_horizon(),
            self.total_steps
        )
    }

    /// Seed of replica `index`.
    pub fn seed(&self, index: usize) -> u64 {
        self.base_seed + index as u64
    }
}
