//! Posterior sampling for reinforcement learning on finite MDPs, with a
//! UCRL2 baseline, the RiverSwim and random-MDP environments, a seeded
//! experiment harness, and empirical checks of the regret analysis.

pub mod agent;
pub mod env;
pub mod error;
pub mod harness;
pub mod mdp;
pub mod posterior;
pub mod rng;
pub mod theory;

pub use agent::{Agent, EpisodeMode, FixedPolicyAgent, PsrlAgent, Ucrl2Agent};
pub use env::{make_riverswim, sample_random_mdp, EnvState, RiverSwimParams};
pub use error::{Error, Result};
pub use harness::{
    run_episodic, run_infinite, run_suite, AgentSpec, EnvironmentSpec, ExperimentConfig, Mode, RunRecord,
};
pub use mdp::{evaluate_policy, solve_optimal, Policy, RegretTrace, RewardModel, TabularMdp, ValueFunction};
pub use posterior::{prior_default, PosteriorParams, SufficientStats};
