use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::Agent;
use crate::error::{Error, Result};
use crate::mdp::{Policy, TabularMdp, ValueFunction};
use crate::posterior::SufficientStats;

/// Empirical model plus per-(s, a) L1 and reward radii.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceSet {
    num_states: usize,
    num_actions: usize,
    p_hat: Vec<f64>,
    r_hat: Vec<f64>,
    p_width: Vec<f64>,
    r_width: Vec<f64>,
    delta: f64,
}

impl ConfidenceSet {
    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn p_hat(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.num_actions + a) * self.num_states;
        &self.p_hat[start..start + self.num_states]
    }

    pub fn r_hat(&self, s: usize, a: usize) -> f64 {
        self.r_hat[s * self.num_actions + a]
    }

    pub fn p_width(&self, s: usize, a: usize) -> f64 {
        self.p_width[s * self.num_actions + a]
    }

    pub fn r_width(&self, s: usize, a: usize) -> f64 {
        self.r_width[s * self.num_actions + a]
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Confidence set centred on an exact model with zero radii.
    pub fn exact(mdp: &TabularMdp) -> Self {
        let sa = mdp.num_states() * mdp.num_actions();
        Self {
            num_states: mdp.num_states(),
            num_actions: mdp.num_actions(),
            p_hat: mdp.transitions().to_vec(),
            r_hat: mdp.mean_rewards().to_vec(),
            p_width: vec![0.0; sa],
            r_width: vec![0.0; sa],
            delta: 1.0,
        }
    }

    /// Whether `mdp` satisfies every transition and reward constraint.
    pub fn contains(&self, mdp: &TabularMdp) -> bool {
        (0..self.num_states).all(|s| {
            (0..self.num_actions).all(|a| {
                let l1: f64 = self.p_hat(s, a).iter().zip(mdp.transition_row(s, a)).map(|(p, q)| (p - q).abs()).sum();
                l1 <= self.p_width(s, a) && (self.r_hat(s, a) - mdp.mean_reward(s, a)).abs() <= self.r_width(s, a)
            })
        })
    }
}

/// L1 radius of the transition confidence ball,
/// `sqrt(14 S log(2 A t_k / δ) / max(1, N))`.
pub fn transition_width(num_states: usize, num_actions: usize, visits: u64, t_k: u64, delta: f64) -> f64 {
    let log_term = (2.0 * num_actions as f64 * t_k as f64 / delta).ln();
    (14.0 * num_states as f64 * log_term / visits.max(1) as f64).sqrt()
}

/// Reward radius, `sqrt(7 log(2 S A t_k / δ) / (2 max(1, N)))`.
pub fn reward_width(num_states: usize, num_actions: usize, visits: u64, t_k: u64, delta: f64) -> f64 {
    let log_term = (2.0 * (num_states * num_actions) as f64 * t_k as f64 / delta).ln();
    (7.0 * log_term / (2.0 * visits.max(1) as f64)).sqrt()
}

/// Build the UCRL2 confidence set at episode start `t_k`.
pub fn build_confidence_set(stats: &SufficientStats, t_k: u64, delta: f64) -> Result<ConfidenceSet> {
    if t_k == 0 {
        return Err(Error::Config("t_k must be at least 1".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Config(format!("delta {delta} outside (0, 1)")));
    }
    let (s_count, a_count) = (stats.num_states(), stats.num_actions());
    let sa = s_count * a_count;
    let mut cs = ConfidenceSet {
        num_states: s_count,
        num_actions: a_count,
        p_hat: Vec::with_capacity(sa * s_count),
        r_hat: Vec::with_capacity(sa),
        p_width: Vec::with_capacity(sa),
        r_width: Vec::with_capacity(sa),
        delta,
    };
    for s in 0..s_count {
        for a in 0..a_count {
            let n = stats.visits(s, a);
            cs.p_hat.extend(stats.empirical_row(s, a));
            cs.r_hat.push(stats.empirical_reward(s, a));
            cs.p_width.push(transition_width(s_count, a_count, n, t_k, delta));
            cs.r_width.push(reward_width(s_count, a_count, n, t_k, delta));
        }
    }
    Ok(cs)
}

/// States ordered by `v` descending, ties toward the lower index.
fn descending_order(v: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&i, &j| v[j].total_cmp(&v[i]).then(i.cmp(&j)));
    order
}

fn inner_l1_max_ordered(p_hat: &[f64], radius: f64, order: &[usize]) -> Vec<f64> {
    let mut p = p_hat.to_vec();
    let best = order[0];
    p[best] = (p_hat[best] + radius / 2.0).min(1.0);
    let mut excess: f64 = p.iter().sum::<f64>() - 1.0;
    for &j in order.iter().rev() {
        if excess <= 0.0 {
            break;
        }
        if j == best {
            continue;
        }
        let take = p[j].min(excess);
        p[j] -= take;
        excess -= take;
    }
    p
}

/// Maximise `p · V` over the simplex intersected with the L1 ball of radius
/// `radius` around `p_hat`: move up to `radius / 2` mass onto the best state
/// and take it back from the worst states first.
pub fn inner_l1_max(p_hat: &[f64], radius: f64, v: &[f64]) -> Vec<f64> {
    inner_l1_max_ordered(p_hat, radius, &descending_order(v))
}

/// Optimistic finite-horizon backward induction over the confidence set.
/// Optimistic rewards are clipped at 1; ties break toward the lowest action.
pub fn extended_value_iteration_episodic(cs: &ConfidenceSet, horizon: usize) -> (Policy, ValueFunction) {
    let (s_count, a_count) = (cs.num_states, cs.num_actions);
    let mut actions = vec![0; s_count * horizon];
    let values = ValueFunction::backward(s_count, horizon, |stage, next, current| {
        let order = descending_order(next);
        for (s, slot) in current.iter_mut().enumerate() {
            let mut best = f64::NEG_INFINITY;
            let mut best_a = 0;
            for a in 0..a_count {
                let reward = (cs.r_hat(s, a) + cs.r_width(s, a)).min(1.0);
                let p = inner_l1_max_ordered(cs.p_hat(s, a), cs.p_width(s, a), &order);
                let q = reward + p.iter().zip(next).map(|(p, v)| p * v).sum::<f64>();
                if q > best {
                    best = q;
                    best_a = a;
                }
            }
            *slot = best;
            actions[(stage - 1) * s_count + s] = best_a;
        }
    });
    (Policy::new(s_count, horizon, actions).expect("shape is consistent"), values)
}

/// UCRL2 adapted to finite-horizon planning.
#[derive(Debug, Clone)]
pub struct Ucrl2Agent {
    stats: SufficientStats,
    delta: f64,
    planning_horizon: usize,
    policy: Policy,
    last_set: Option<ConfidenceSet>,
    last_values: Option<ValueFunction>,
}

impl Ucrl2Agent {
    pub fn new(num_states: usize, num_actions: usize, planning_horizon: usize, delta: f64) -> Result<Self> {
        if planning_horizon == 0 {
            return Err(Error::Config("planning horizon must be positive".into()));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Config(format!("delta {delta} outside (0, 1)")));
        }
        Ok(Self {
            stats: SufficientStats::new(num_states, num_actions),
            delta,
            planning_horizon,
            policy: Policy::constant(num_states, planning_horizon, 0),
            last_set: None,
            last_values: None,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn confidence_set(&self) -> Option<&ConfidenceSet> {
        self.last_set.as_ref()
    }

    /// Optimistic values computed at the latest episode start.
    pub fn optimistic_values(&self) -> Option<&ValueFunction> {
        self.last_values.as_ref()
    }
}

impl Agent for Ucrl2Agent {
    fn begin_episode(&mut self, t_k: u64, _rng: &mut dyn RngCore) -> Result<&Policy> {
        let cs = build_confidence_set(&self.stats, t_k, self.delta)?;
        let (policy, values) = extended_value_iteration_episodic(&cs, self.planning_horizon);
        self.policy = policy;
        self.last_set = Some(cs);
        self.last_values = Some(values);
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
        "ucrl2"
    }
}
