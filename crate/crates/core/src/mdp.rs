//! Finite tabular MDPs, finite-horizon planning and regret.
//!
//! Stages are 1-based throughout the public API: a policy is defined for
//! stages `1..=horizon` and a value function for stages `1..=horizon + 1`,
//! with the terminal stage identically zero.

use serde::{Deserialize, Serialize};

use crate::error::{check_index, Error, Result};

const STOCHASTIC_TOL: f64 = 1e-12;

/// Distribution of the realized reward around its mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RewardModel {
    /// The realized reward always equals the mean.
    Deterministic,
    /// Gaussian noise with a per-(s, a) standard deviation, indexed `s * A + a`.
    Gaussian { std_dev: Vec<f64> },
}

/// A complete, known finite-horizon MDP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularMdp {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    /// Dense `S x A x S` tensor, row `(s, a)` at offset `(s * A + a) * S`.
    transitions: Vec<f64>,
    /// Dense `S x A` table.
    mean_rewards: Vec<f64>,
    reward_model: RewardModel,
    initial_dist: Vec<f64>,
}

fn check_distribution(what: &str, row: &[f64]) -> Result<()> {
    if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::InvalidMdp(format!("{what} has a negative or non-finite entry")));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::InvalidMdp(format!("{what} sums to {sum}, not 1")));
    }
    Ok(())
}

impl TabularMdp {
    /// Build an MDP, validating shapes and that every transition row and the
    /// initial distribution lie on the simplex. Mean rewards may be any
    /// finite real; use [`TabularMdp::validate_environment`] for the [0, 1]
    /// support required of simulated environments.
    pub fn new(
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        transitions: Vec<f64>,
        mean_rewards: Vec<f64>,
        initial_dist: Vec<f64>,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 || horizon == 0 {
            return Err(Error::InvalidMdp(format!(
                "S={num_states}, A={num_actions}, horizon={horizon} must all be positive"
            )));
        }
        let sa = num_states * num_actions;
        if transitions.len() != sa * num_states {
            return Err(Error::ShapeMismatch(format!(
                "transition tensor has {} entries, expected {}",
                transitions.len(),
                sa * num_states
            )));
        }
        if mean_rewards.len() != sa {
            return Err(Error::ShapeMismatch(format!(
                "reward table has {} entries, expected {sa}",
                mean_rewards.len()
            )));
        }
        if initial_dist.len() != num_states {
            return Err(Error::ShapeMismatch(format!(
                "initial distribution has {} entries, expected {num_states}",
                initial_dist.len()
            )));
        }
        for (idx, row) in transitions.chunks(num_states).enumerate() {
            let (s, a) = (idx / num_actions, idx % num_actions);
            check_distribution(&format!("transition row (s={s}, a={a})"), row)?;
        }
        check_distribution("initial distribution", &initial_dist)?;
        if let Some(r) = mean_rewards.iter().find(|r| !r.is_finite()) {
            return Err(Error::InvalidMdp(format!("non-finite mean reward {r}")));
        }
        Ok(Self {
            num_states,
            num_actions,
            horizon,
            transitions,
            mean_rewards,
            reward_model: RewardModel::Deterministic,
            initial_dist,
        })
    }

    pub fn with_reward_model(mut self, model: RewardModel) -> Result<Self> {
        if let RewardModel::Gaussian { std_dev } = &model {
            if std_dev.len() != self.num_states * self.num_actions {
                return Err(Error::ShapeMismatch(format!(
                    "reward noise table has {} entries, expected {}",
                    std_dev.len(),
                    self.num_states * self.num_actions
                )));
            }
            if std_dev.iter().any(|s| !s.is_finite() || *s < 0.0) {
                return Err(Error::InvalidMdp("negative or non-finite reward noise".into()));
            }
        }
        self.reward_model = model;
        Ok(self)
    }

    pub fn with_horizon(mut self, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidMdp("horizon must be positive".into()));
        }
        self.horizon = horizon;
        Ok(self)
    }

    pub fn with_initial_dist(mut self, initial_dist: Vec<f64>) -> Result<Self> {
        if initial_dist.len() != self.num_states {
            return Err(Error::ShapeMismatch("initial distribution length".into()));
        }
        check_distribution("initial distribution", &initial_dist)?;
        self.initial_dist = initial_dist;
        Ok(self)
    }

    /// Additional checks for MDPs used as simulated environments: mean
    /// rewards in [0, 1] and deterministic emission (so realized rewards stay
    /// in [0, 1] too).
    pub fn validate_environment(&self) -> Result<()> {
        if let Some(r) = self.mean_rewards.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::InvalidMdp(format!("environment mean reward {r} outside [0, 1]")));
        }
        if self.reward_model != RewardModel::Deterministic {
            return Err(Error::InvalidMdp("environment reward emission must be bounded".into()));
        }
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.num_actions + a) * self.num_states;
        &self.transitions[start..start + self.num_states]
    }

    pub fn transitions(&self) -> &[f64] {
        &self.transitions
    }

    pub fn mean_reward(&self, s: usize, a: usize) -> f64 {
        self.mean_rewards[s * self.num_actions + a]
    }

    pub fn mean_rewards(&self) -> &[f64] {
        &self.mean_rewards
    }

    pub fn reward_model(&self) -> &RewardModel {
        &self.reward_model
    }

    pub fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }

    /// Expected value of `V` after taking `a` in `s`.
    pub fn expected_next(&self, s: usize, a: usize, v: &[f64]) -> f64 {
        self.transition_row(s, a).iter().zip(v).map(|(p, v)| p * v).sum()
    }

    /// Initial-distribution weighted value `Σ_s ρ(s) v(s)`.
    pub fn weighted(&self, v: &[f64]) -> f64 {
        self.initial_dist.iter().zip(v).map(|(p, v)| p * v).sum()
    }
}

/// Nonstationary deterministic policy, `(state, stage) -> action`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Policy {
    num_states: usize,
    horizon: usize,
    /// Stage-major: stage `i` (1-based) occupies `[(i - 1) * S, i * S)`.
    actions: Vec<usize>,
}

impl Policy {
    pub fn new(num_states: usize, horizon: usize, actions: Vec<usize>) -> Result<Self> {
        if actions.len() != num_states * horizon {
            return Err(Error::ShapeMismatch(format!(
                "policy has {} entries, expected {}",
                actions.len(),
                num_states * horizon
            )));
        }
        Ok(Self { num_states, horizon, actions })
    }

    /// The policy playing `action` everywhere.
    pub fn constant(num_states: usize, horizon: usize, action: usize) -> Self {
        Self { num_states, horizon, actions: vec![action; num_states * horizon] }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Action at state `s` and 1-based stage `stage`.
    pub fn action(&self, s: usize, stage: usize) -> usize {
        self.actions[(stage - 1) * self.num_states + s]
    }

    /// Checked lookup.
    pub fn try_action(&self, s: usize, stage: usize) -> Result<usize> {
        if stage == 0 || stage > self.horizon {
            return Err(Error::StageOutOfRange { stage, horizon: self.horizon });
        }
        check_index("state", s, self.num_states)?;
        Ok(self.action(s, stage))
    }

    /// Actions for every state at one stage.
    pub fn stage(&self, stage: usize) -> &[usize] {
        &self.actions[(stage - 1) * self.num_states..stage * self.num_states]
    }

    /// Check that every entry is a valid action for an MDP with `num_actions` actions.
    pub fn validate(&self, num_actions: usize) -> Result<()> {
        match self.actions.iter().find(|&&a| a >= num_actions) {
            Some(&a) => Err(Error::IndexOutOfRange { what: "action", index: a, bound: num_actions }),
            None => Ok(()),
        }
    }
}

/// Finite-horizon value table over stages `1..=horizon + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueFunction {
    num_states: usize,
    horizon: usize,
    values: Vec<f64>,
}

impl ValueFunction {
    fn zeros(num_states: usize, horizon: usize) -> Self {
        Self { num_states, horizon, values: vec![0.0; num_states * (horizon + 1)] }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn value(&self, s: usize, stage: usize) -> f64 {
        self.values[(stage - 1) * self.num_states + s]
    }

    /// Values of every state at a 1-based stage (`horizon + 1` is terminal).
    pub fn stage(&self, stage: usize) -> &[f64] {
        &self.values[(stage - 1) * self.num_states..stage * self.num_states]
    }

    /// Build a value table by backward induction: `backup(stage, next)` must
    /// return the stage values given the next stage's values.
    pub(crate) fn backward<F>(num_states: usize, horizon: usize, mut backup: F) -> Self
    where
        F: FnMut(usize, &[f64], &mut [f64]),
    {
        let mut vf = Self::zeros(num_states, horizon);
        for stage in (1..=horizon).rev() {
            let (head, tail) = vf.values.split_at_mut(stage * num_states);
            let current = &mut head[(stage - 1) * num_states..];
            backup(stage, &tail[..num_states], current);
        }
        vf
    }
}

/// One application of the Bellman operator for the stationary decision rule
/// `stage_actions`: `R̄(s, μ(s)) + Σ_s' P(s' | s, μ(s)) V(s')` for every `s`.
pub fn bellman_backup(mdp: &TabularMdp, stage_actions: &[usize], v_next: &[f64]) -> Vec<f64> {
    stage_actions.iter().enumerate().map(|(s, &a)| mdp.mean_reward(s, a) + mdp.expected_next(s, a, v_next)).collect()
}

/// Exact finite-horizon planning by backward induction. Ties break toward
/// the lowest action index.
pub fn solve_optimal(mdp: &TabularMdp) -> (Policy, ValueFunction) {
    let (s_count, a_count, horizon) = (mdp.num_states(), mdp.num_actions(), mdp.horizon());
    let mut actions = vec![0; s_count * horizon];
    let values = ValueFunction::backward(s_count, horizon, |stage, next, current| {
        for (s, slot) in current.iter_mut().enumerate() {
            let mut best = f64::NEG_INFINITY;
            let mut best_a = 0;
            for a in 0..a_count {
                let q = mdp.mean_reward(s, a) + mdp.expected_next(s, a, next);
                if q > best {
                    best = q;
                    best_a = a;
                }
            }
            *slot = best;
            actions[(stage - 1) * s_count + s] = best_a;
        }
    });
    let policy = Policy { num_states: s_count, horizon, actions };
    (policy, values)
}

/// Value of a fixed policy by backward induction.
pub fn evaluate_policy(mdp: &TabularMdp, policy: &Policy) -> ValueFunction {
    assert_eq!(policy.horizon(), mdp.horizon(), "policy horizon must match the MDP");
    assert_eq!(policy.num_states(), mdp.num_states(), "policy shape must match the MDP");
    ValueFunction::backward(mdp.num_states(), mdp.horizon(), |stage, next, current| {
        for (s, slot) in current.iter_mut().enumerate() {
            let a = policy.action(s, stage);
            *slot = mdp.mean_reward(s, a) + mdp.expected_next(s, a, next);
        }
    })
}

/// Regret of one episode: `Σ_s ρ(s) (V*_1(s) − V^μ_1(s))` under `mdp`.
pub fn episode_regret(mdp: &TabularMdp, policy: &Policy) -> f64 {
    let (_, optimal) = solve_optimal(mdp);
    episode_regret_from(mdp, mdp.weighted(optimal.stage(1)), policy)
}

/// [`episode_regret`] with the optimal start value precomputed.
pub fn episode_regret_from(mdp: &TabularMdp, optimal_start_value: f64, policy: &Policy) -> f64 {
    let v = evaluate_policy(mdp, policy);
    optimal_start_value - mdp.weighted(v.stage(1))
}

/// Largest Bellman residual `max_{s,i} |V_i(s) − (T_μ V_{i+1})(s)|`.
pub fn bellman_residual(mdp: &TabularMdp, policy: &Policy, values: &ValueFunction) -> f64 {
    (1..=mdp.horizon())
        .flat_map(|stage| {
            let backed = bellman_backup(mdp, policy.stage(stage), values.stage(stage + 1));
            values.stage(stage).iter().zip(backed).map(|(v, b)| (v - b).abs()).collect::<Vec<_>>()
        })
        .fold(0.0, f64::max)
}

/// Default cap on the planning horizon used for gain estimation.
pub const GAIN_HORIZON_CAP: usize = 1 << 22;
const GAIN_TOL: f64 = 1e-8;

/// Per-state optimal gain (long-run average reward) by long-horizon
/// undiscounted value iteration. The estimate at horizon `H` is
/// `(V_H − V_{H/2}) / (H/2)`, which is exact for periodic chains once
/// `H` is a multiple of the period; `H` doubles until two successive
/// estimates agree to 1e-8 in every state.
pub fn optimal_gains(mdp: &TabularMdp, horizon_cap: usize) -> Result<Vec<f64>> {
    let s_count = mdp.num_states();
    let mut v = vec![0.0; s_count];
    let mut scratch = vec![0.0; s_count];
    let step = |v: &mut Vec<f64>, scratch: &mut Vec<f64>| {
        for (s, slot) in scratch.iter_mut().enumerate() {
            *slot = (0..mdp.num_actions())
                .map(|a| mdp.mean_reward(s, a) + mdp.expected_next(s, a, v))
                .fold(f64::NEG_INFINITY, f64::max);
        }
        std::mem::swap(v, scratch);
    };

    let mut n = 0usize;
    let mut target = 64usize;
    let mut previous: Option<Vec<f64>> = None;
    let mut last_change = f64::INFINITY;
    while target <= horizon_cap {
        while n < target / 2 {
            step(&mut v, &mut scratch);
            n += 1;
        }
        let half_values = v.clone();
        while n < target {
            step(&mut v, &mut scratch);
            n += 1;
        }
        let half = (target / 2) as f64;
        let estimate: Vec<f64> = v.iter().zip(&half_values).map(|(a, b)| (a - b) / half).collect();
        if let Some(prev) = &previous {
            last_change = estimate.iter().zip(prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if last_change < GAIN_TOL {
                return Ok(estimate);
            }
        }
        previous = Some(estimate);
        target *= 2;
    }
    Err(Error::GainNotConverged { cap: horizon_cap, last_change })
}

/// Optimal gain weighted by the initial distribution.
pub fn gain_optimal(mdp: &TabularMdp, horizon_cap: usize) -> Result<f64> {
    Ok(mdp.weighted(&optimal_gains(mdp, horizon_cap)?))
}

/// Per-episode and cumulative regret through time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretTrace {
    pub config_id: String,
    pub seed: u64,
    /// Timestep at which each entry was recorded.
    pub timesteps: Vec<u64>,
    /// Episode index (1-based) in effect at each entry.
    pub episodes: Vec<u64>,
    pub per_episode_regret: Vec<f64>,
    pub cumulative_regret: Vec<f64>,
}

impl RegretTrace {
    pub fn new(config_id: impl Into<String>, seed: u64) -> Self {
        Self {
            config_id: config_id.into(),
            seed,
            timesteps: Vec::new(),
            episodes: Vec::new(),
            per_episode_regret: Vec::new(),
            cumulative_regret: Vec::new(),
        }
    }

    /// Append an increment; the cumulative column is the running sum.
    pub fn push(&mut self, t: u64, episode: u64, regret: f64) {
        let total = self.total() + regret;
        self.timesteps.push(t);
        self.episodes.push(episode);
        self.per_episode_regret.push(regret);
        self.cumulative_regret.push(total);
    }

    pub fn len(&self) -> usize {
        self.per_episode_regret.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_episode_regret.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.cumulative_regret.last().copied().unwrap_or(0.0)
    }
}
