//! Experimental testbeds and a seeded step simulator for any [`TabularMdp`].

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_index, Error, Result};
use crate::mdp::{RewardModel, TabularMdp};
use crate::posterior::{sample_dirichlet, PosteriorParams};

pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;

/// Replace one transition row of the generated chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowOverride {
    pub state: usize,
    pub action: usize,
    pub row: Vec<f64>,
}

/// RiverSwim dynamics. Defaults are the usual six-state construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RiverSwimParams {
    pub num_states: usize,
    /// RIGHT from an interior state: probability of moving right.
    pub right_forward: f64,
    /// RIGHT from an interior state: probability of staying.
    pub right_stay: f64,
    /// RIGHT from an interior state: probability of being pushed back.
    pub right_back: f64,
    /// RIGHT from the leftmost state: probability of staying.
    pub start_right_stay: f64,
    /// RIGHT from the rightmost state: probability of staying.
    pub end_right_stay: f64,
    /// Reward for LEFT in the leftmost state.
    pub left_reward: f64,
    /// Reward for RIGHT in the rightmost state.
    pub right_reward: f64,
    pub horizon: usize,
    pub row_overrides: Vec<RowOverride>,
}

impl Default for RiverSwimParams {
    fn default() -> Self {
        Self {
            num_states: 6,
            right_forward: 0.3,
            right_stay: 0.6,
            right_back: 0.1,
            start_right_stay: 0.7,
            end_right_stay: 0.7,
            left_reward: 0.005,
            right_reward: 1.0,
            horizon: 20,
            row_overrides: Vec::new(),
        }
    }
}

/// Build RiverSwim: a chain where LEFT always succeeds and RIGHT fights the
/// current. The agent starts in the leftmost state.
pub fn make_riverswim(params: &RiverSwimParams) -> Result<TabularMdp> {
    let n = params.num_states;
    if n < 2 {
        return Err(Error::Config("RiverSwim needs at least two states".into()));
    }
    let mut p = vec![0.0; n * 2 * n];
    let mut r = vec![0.0; n * 2];
    let row = |s: usize, a: usize| (s * 2 + a) * n;
    for s in 0..n {
        p[row(s, LEFT) + s.saturating_sub(1)] = 1.0;
        let right = row(s, RIGHT);
        if s == 0 {
            p[right] = params.start_right_stay;
            p[right + 1] = 1.0 - params.start_right_stay;
        } else if s == n - 1 {
            p[right + s] = params.end_right_stay;
            p[right + s - 1] = 1.0 - params.end_right_stay;
        } else {
            p[right + s + 1] = params.right_forward;
            p[right + s] = params.right_stay;
            p[right + s - 1] = params.right_back;
        }
    }
    r[LEFT] = params.left_reward;
    r[(n - 1) * 2 + RIGHT] = params.right_reward;
    for o in &params.row_overrides {
        check_index("override state", o.state, n)?;
        check_index("override action", o.action, 2)?;
        if o.row.len() != n {
            return Err(Error::ShapeMismatch(format!("override row has {} entries, expected {n}", o.row.len())));
        }
        let start = row(o.state, o.action);
        p[start..start + n].copy_from_slice(&o.row);
    }
    let mut rho = vec![0.0; n];
    rho[0] = 1.0;
    let mdp = TabularMdp::new(n, 2, params.horizon, p, r, rho)?;
    mdp.validate_environment()?;
    Ok(mdp)
}

/// Random environment drawn from `prior`: Dirichlet rows, prior-marginal
/// mean rewards clipped to [0, 1], deterministic rewards, uniform start.
pub fn sample_random_mdp<R: Rng + ?Sized>(prior: &PosteriorParams, horizon: usize, rng: &mut R) -> Result<TabularMdp> {
    let (s_count, a_count) = (prior.num_states(), prior.num_actions());
    let mut transitions = Vec::with_capacity(s_count * a_count * s_count);
    let mut rewards = Vec::with_capacity(s_count * a_count);
    for s in 0..s_count {
        for a in 0..a_count {
            transitions.extend(sample_dirichlet(prior.dirichlet_row(s, a), rng));
            rewards.push(prior.normal_gamma(s, a).sample_mean(rng).clamp(0.0, 1.0));
        }
    }
    let mdp = TabularMdp::new(s_count, a_count, horizon, transitions, rewards, vec![1.0 / s_count as f64; s_count])?;
    mdp.validate_environment()?;
    Ok(mdp)
}

/// MDP drawn exactly from `prior`, including Gaussian reward emission with
/// the sampled precision. Rewards are unbounded; this is the setting in
/// which the agent's posterior is exact.
pub fn sample_well_specified_mdp<R: Rng + ?Sized>(
    prior: &PosteriorParams,
    horizon: usize,
    rng: &mut R,
) -> Result<TabularMdp> {
    let (s_count, a_count) = (prior.num_states(), prior.num_actions());
    let mut transitions = Vec::with_capacity(s_count * a_count * s_count);
    let mut rewards = Vec::with_capacity(s_count * a_count);
    let mut std_dev = Vec::with_capacity(s_count * a_count);
    for s in 0..s_count {
        for a in 0..a_count {
            transitions.extend(sample_dirichlet(prior.dirichlet_row(s, a), rng));
            let (mean, precision) = prior.normal_gamma(s, a).sample_joint(rng);
            rewards.push(mean);
            std_dev.push(1.0 / precision.sqrt());
        }
    }
    TabularMdp::new(s_count, a_count, horizon, transitions, rewards, vec![1.0 / s_count as f64; s_count])?
        .with_reward_model(RewardModel::Gaussian { std_dev })
}

/// Draw an index from a probability vector.
pub fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding left `u` above the accumulated mass: take the last supported entry.
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(probs.len() - 1)
}

/// Simulator position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvState {
    pub current_state: usize,
    /// Global timestep of the next action (1-based, never reset).
    pub t: u64,
    /// Stage of the next action within the current episode (1-based).
    pub episode_step: usize,
}

/// Result of one environment step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub next_state: usize,
}

impl EnvState {
    /// Start a trajectory at `t = 1` from the initial distribution.
    pub fn start<R: Rng + ?Sized>(mdp: &TabularMdp, rng: &mut R) -> Self {
        Self { current_state: sample_categorical(mdp.initial_dist(), rng), t: 1, episode_step: 1 }
    }

    /// Take action `a`: sample the next state, then the reward.
    pub fn step<R: Rng + ?Sized>(&mut self, mdp: &TabularMdp, a: usize, rng: &mut R) -> Result<StepOutcome> {
        check_index("action", a, mdp.num_actions())?;
        let s = self.current_state;
        let next_state = sample_categorical(mdp.transition_row(s, a), rng);
        let mean = mdp.mean_reward(s, a);
        let reward = match mdp.reward_model() {
            RewardModel::Deterministic => mean,
            RewardModel::Gaussian { std_dev } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + std_dev[s * mdp.num_actions() + a] * z
            }
        };
        self.current_state = next_state;
        self.t += 1;
        self.episode_step += 1;
        Ok(StepOutcome { reward, next_state })
    }

    /// Redraw the state from the initial distribution and restart the
    /// episode counter; the global clock keeps running.
    pub fn reset_episode<R: Rng + ?Sized>(&mut self, mdp: &TabularMdp, rng: &mut R) {
        self.current_state = sample_categorical(mdp.initial_dist(), rng);
        self.episode_step = 1;
    }
}
