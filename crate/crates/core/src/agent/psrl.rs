use rand::RngCore;

use super::{Agent, EpisodeMode};
use crate::error::{Error, Result};
use crate::mdp::{solve_optimal, Policy, TabularMdp};
use crate::posterior::{PosteriorParams, SufficientStats};

/// Posterior sampling: at each episode start draw one MDP from the
/// posterior and follow its optimal policy for the whole episode.
#[derive(Debug, Clone)]
pub struct PsrlAgent {
    prior: PosteriorParams,
    stats: SufficientStats,
    planning_horizon: usize,
    initial_dist: Vec<f64>,
    mode: EpisodeMode,
    policy: Policy,
    last_sample: Option<TabularMdp>,
}

impl PsrlAgent {
    /// `initial_dist` is the start distribution attached to sampled MDPs; it
    /// does not affect the planned policy.
    pub fn new(
        prior: PosteriorParams,
        planning_horizon: usize,
        initial_dist: Vec<f64>,
        mode: EpisodeMode,
    ) -> Result<Self> {
        if planning_horizon == 0 {
            return Err(Error::Config("planning horizon must be positive".into()));
        }
        if initial_dist.len() != prior.num_states() {
            return Err(Error::ShapeMismatch("initial distribution does not match prior".into()));
        }
        let stats = SufficientStats::new(prior.num_states(), prior.num_actions());
        let policy = Policy::constant(prior.num_states(), planning_horizon, 0);
        Ok(Self { prior, stats, planning_horizon, initial_dist, mode, policy, last_sample: None })
    }

    pub fn with_stats(mut self, stats: SufficientStats) -> Result<Self> {
        if (stats.num_states(), stats.num_actions()) != (self.prior.num_states(), self.prior.num_actions()) {
            return Err(Error::ShapeMismatch("stats do not match prior".into()));
        }
        self.stats = stats;
        Ok(self)
    }

    pub fn prior(&self) -> &PosteriorParams {
        &self.prior
    }

    pub fn mode(&self) -> EpisodeMode {
        self.mode
    }

    pub fn planning_horizon(&self) -> usize {
        self.planning_horizon
    }

    /// The MDP sampled at the most recent episode start.
    pub fn last_sample(&self) -> Option<&TabularMdp> {
        self.last_sample.as_ref()
    }
}

impl Agent for PsrlAgent {
    fn begin_episode(&mut self, _t_k: u64, rng: &mut dyn RngCore) -> Result<&Policy> {
        let sampled = self.prior.posterior(&self.stats)?.sample(self.planning_horizon, &self.initial_dist, rng)?;
        self.policy = solve_optimal(&sampled).0;
        self.last_sample = Some(sampled);
        Ok(&self.policy)
    }

    fn policy(&self) -> &Policy {
        &self.policy
    }

    fn stats(&self) -> &SufficientStats {
        &self.stats
    }

    fn observe(&mut self, s: usize, a: usize, reward: f64, next: usize) -> Result<()> {
        self.stats.record_step(s, a, reward, next)
    }

    fn name(&self) -> &'static str {
        "psrl"
    }
}
