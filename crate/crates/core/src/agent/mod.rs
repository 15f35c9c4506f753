//! Learning agents: posterior sampling, UCRL2, and a planning oracle used
//! as a zero-regret reference.

mod psrl;
mod ucrl2;

pub use psrl::PsrlAgent;
pub use ucrl2::{
    build_confidence_set, extended_value_iteration_episodic, inner_l1_max, reward_width, transition_width,
    ConfidenceSet, Ucrl2Agent,
};

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mdp::{solve_optimal, Policy, TabularMdp};
use crate::posterior::SufficientStats;

/// How episode boundaries are decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeMode {
    /// Replan every `horizon` steps; the environment resets in between.
    FixedHorizon,
    /// Replan when some (s, a) visit count doubles; the policy is followed
    /// cyclically in the meantime.
    Doubling,
}

/// An agent interacting with a tabular MDP in episodes.
pub trait Agent: Send {
    /// Compute the policy for the episode starting at global time `t_k` (1-based).
    fn begin_episode(&mut self, t_k: u64, rng: &mut dyn RngCore) -> Result<&Policy>;

    fn policy(&self) -> &Policy;

    fn stats(&self) -> &SufficientStats;

    fn observe(&mut self, s: usize, a: usize, reward: f64, next: usize) -> Result<()>;

    fn name(&self) -> &'static str;

    /// Action at state `s` and 1-based stage `stage` of the current policy.
    fn act(&self, s: usize, stage: usize) -> Result<usize> {
        self.policy().try_action(s, stage)
    }
}

/// Doubling rule: true iff some pair has `N_now ≥ 2 · max(1, N_start)`.
pub fn doubling_trigger(now: &SufficientStats, episode_start: &SufficientStats) -> bool {
    now.visit_counts().iter().zip(episode_start.visit_counts()).any(|(&n, &n0)| n >= 2 * n0.max(1))
}

/// Stage used at `step` (0-based) steps into an episode when a horizon-`h`
/// policy is followed cyclically.
pub fn cyclic_stage(step: u64, horizon: usize) -> usize {
    (step % horizon as u64) as usize + 1
}

/// Follows one fixed policy forever; with [`FixedPolicyAgent::optimal`] it
/// is the zero-regret reference.
#[derive(Debug, Clone)]
pub struct FixedPolicyAgent {
    policy: Policy,
    stats: SufficientStats,
    name: &'static str,
}

impl FixedPolicyAgent {
    pub fn new(policy: Policy, num_actions: usize) -> Result<Self> {
        policy.validate(num_actions)?;
        let stats = SufficientStats::new(policy.num_states(), num_actions);
        Ok(Self { policy, stats, name: "fixed" })
    }

    /// The optimal policy of a known MDP.
    pub fn optimal(truth: &TabularMdp) -> Self {
        Self {
            policy: solve_optimal(truth).0,
            stats: SufficientStats::new(truth.num_states(), truth.num_actions()),
            name: "oracle",
        }
    }
}

impl Agent for FixedPolicyAgent {
    fn begin_episode(&mut self, _t_k: u64, _rng: &mut dyn RngCore) -> Result<&Policy> {
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
        self.name
    }
}
