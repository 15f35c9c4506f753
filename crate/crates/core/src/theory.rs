//! Empirical checks of the analytical properties of posterior sampling:
//! equality in law of the sampled and true MDP at episode starts, regret
//! equivalence, confidence-set coverage, the width-sum bound, the
//! Bellman-error telescoping identity, and UCRL2 optimism.
//!
//! Statistical checks use a 4 standard error threshold. Every check is a
//! deterministic function of its seed.

use std::collections::BTreeMap;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::{Agent, ConfidenceSet, EpisodeMode, PsrlAgent, Ucrl2Agent};
use crate::env::{make_riverswim, sample_random_mdp, sample_well_specified_mdp, EnvState, RiverSwimParams};
use crate::error::{Error, Result};
use crate::harness::{run_episodic, AgentSpec, ExperimentConfig, Mode, VisitLogEntry};
use crate::mdp::{bellman_backup, evaluate_policy, solve_optimal, Policy, TabularMdp};
use crate::posterior::{prior_default, PosteriorParams, SufficientStats};
use crate::rng::{self, SimRng};

/// Standard-error multiple used by every statistical check.
pub const Z_THRESHOLD: f64 = 4.0;

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub passed: bool,
    pub sample_size: u64,
    pub seed: u64,
    #[serde(default)]
    pub details: BTreeMap<String, f64>,
}

impl CheckReport {
    fn new(name: &str, statistic: f64, threshold: f64, passed: bool, sample_size: u64, seed: u64) -> Self {
        Self { name: name.into(), statistic, threshold, passed, sample_size, seed, details: BTreeMap::new() }
    }

    fn detail(mut self, key: &str, value: f64) -> Self {
        self.details.insert(key.into(), value);
        self
    }
}

/// Where the true MDP comes from. The posterior sampling checks need the
/// truth to be a draw from the agent's prior; a fixed truth is rejected.
#[derive(Debug, Clone)]
pub enum TruthSource {
    DrawFromPrior,
    Fixed(TabularMdp),
}

fn require_prior_draw(truth: &TruthSource, check: &str) -> Result<()> {
    match truth {
        TruthSource::DrawFromPrior => Ok(()),
        TruthSource::Fixed(_) => {
            Err(Error::Config(format!("{check} requires the true MDP to be drawn from the prior, not fixed")))
        }
    }
}

/// Two-sample z statistic for equal means.
pub fn two_sample_z(xs: &[f64], ys: &[f64]) -> f64 {
    let (mx, vx) = mean_var(xs);
    let (my, vy) = mean_var(ys);
    let se = (vx / xs.len() as f64 + vy / ys.len() as f64).sqrt();
    z_ratio(mx - my, se)
}

/// One-sample z statistic for mean zero.
pub fn one_sample_z(xs: &[f64]) -> f64 {
    let (m, v) = mean_var(xs);
    z_ratio(m, (v / xs.len() as f64).sqrt())
}

fn z_ratio(diff: f64, se: f64) -> f64 {
    if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = if xs.len() > 1 { xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (m, v)
}

/// Play one episode of `tau` steps from the current environment state and
/// return the visited `(s, a, s')` triples.
fn play_episode(
    truth: &TabularMdp,
    agent: &mut dyn Agent,
    env: &mut EnvState,
    env_rng: &mut SimRng,
    tau: usize,
) -> Result<Vec<(usize, usize, usize)>> {
    let mut path = Vec::with_capacity(tau);
    for stage in 1..=tau {
        let s = env.current_state;
        let a = agent.act(s, stage)?;
        let out = env.step(truth, a, env_rng)?;
        agent.observe(s, a, out.reward, out.next_state)?;
        path.push((s, a, out.next_state));
    }
    Ok(path)
}

fn replica_rngs(seed: u64, replica: usize) -> (SimRng, SimRng, SimRng) {
    let base = rng::derive_seed(seed, &format!("replica-{replica}"));
    (rng::stream(base, rng::ENV_MODEL), rng::stream(base, rng::ENV_DYNAMICS), rng::stream(base, rng::AGENT))
}

/// Sizes for the posterior sampling lemma check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LemmaCheckConfig {
    pub horizon: usize,
    /// Episodes at which `M*` and `M_k` are compared.
    pub episodes: Vec<u64>,
    pub replicas: usize,
    pub seed: u64,
}

impl Default for LemmaCheckConfig {
    fn default() -> Self {
        Self { horizon: 5, episodes: vec![1, 3, 5], replicas: 10_000, seed: 0 }
    }
}

/// Test functions compared between the true and sampled MDP.
fn lemma_battery(m: &TabularMdp, fixed: &Policy) -> [f64; 3] {
    let value = evaluate_policy(m, fixed).value(0, 1);
    let max_reward = m.mean_rewards().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let indicator = if m.transition_row(0, 0)[0] > 0.5 { 1.0 } else { 0.0 };
    [value, max_reward, indicator]
}

const LEMMA_G_NAMES: [&str; 3] = ["fixed_policy_value", "max_mean_reward", "self_loop_indicator"];

/// Compare `E[g(M*)]` with `E[g(M_k)]` at fixed episodes across replicas in
/// which `M*` is drawn from `prior` and PSRL runs from that prior.
pub fn check_posterior_sampling_lemma(
    prior: &PosteriorParams,
    truth: &TruthSource,
    cfg: &LemmaCheckConfig,
) -> Result<CheckReport> {
    require_prior_draw(truth, "posterior sampling lemma check")?;
    let k_max = cfg.episodes.iter().copied().max().unwrap_or(1);
    let fixed = Policy::constant(prior.num_states(), cfg.horizon, 0);
    let per_replica: Vec<Vec<([f64; 3], [f64; 3])>> = (0..cfg.replicas)
        .into_par_iter()
        .map(|i| -> Result<_> {
            let (mut model_rng, mut env_rng, mut agent_rng) = replica_rngs(cfg.seed, i);
            let truth = sample_well_specified_mdp(prior, cfg.horizon, &mut model_rng)?;
            let mut agent =
                PsrlAgent::new(prior.clone(), cfg.horizon, truth.initial_dist().to_vec(), EpisodeMode::FixedHorizon)?;
            let mut env = EnvState::start(&truth, &mut env_rng);
            let mut out = Vec::new();
            for k in 1..=k_max {
                if k > 1 {
                    env.reset_episode(&truth, &mut env_rng);
                }
                agent.begin_episode((k - 1) * cfg.horizon as u64 + 1, &mut agent_rng)?;
                if cfg.episodes.contains(&k) {
                    let sampled = agent.last_sample().expect("sampled at episode start");
                    out.push((lemma_battery(&truth, &fixed), lemma_battery(sampled, &fixed)));
                }
                if k < k_max {
                    play_episode(&truth, &mut agent, &mut env, &mut env_rng, cfg.horizon)?;
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let mut report =
        CheckReport::new("posterior_sampling_lemma", 0.0, Z_THRESHOLD, true, cfg.replicas as u64, cfg.seed);
    let mut worst: f64 = 0.0;
    let mut sorted_episodes = cfg.episodes.clone();
    sorted_episodes.sort_unstable();
    for (j, k) in sorted_episodes.iter().enumerate() {
        for (g, name) in LEMMA_G_NAMES.iter().enumerate() {
            let xs: Vec<f64> = per_replica.iter().map(|r| r[j].0[g]).collect();
            let ys: Vec<f64> = per_replica.iter().map(|r| r[j].1[g]).collect();
            let z = two_sample_z(&xs, &ys);
            worst = worst.max(z.abs());
            report = report.detail(&format!("z_{name}_k{k}"), z);
        }
    }
    report.statistic = worst;
    report.passed = worst < Z_THRESHOLD;
    Ok(report)
}

/// Sizes for the regret equivalence check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegretEquivalenceConfig {
    pub horizon: usize,
    pub episodes: u64,
    pub replicas: usize,
    pub seed: u64,
}

impl Default for RegretEquivalenceConfig {
    fn default() -> Self {
        Self { horizon: 5, episodes: 10, replicas: 10_000, seed: 0 }
    }
}

/// Per-episode regret `Δ_k` and its sampled-model counterpart `Δ̃_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretPair {
    pub regret: f64,
    pub sampled_regret: f64,
    /// `τ` times the spread of mean rewards across both models; bounds
    /// `|Δ_k − Δ̃_k|` (equal to `τ` for rewards spanning [0, 1]).
    pub bound: f64,
}

/// Run PSRL on `truth` and compute `(Δ_k, Δ̃_k)` for each episode.
pub fn regret_pairs(
    prior: &PosteriorParams,
    truth: &TabularMdp,
    episodes: u64,
    env_rng: &mut SimRng,
    agent_rng: &mut dyn RngCore,
) -> Result<Vec<RegretPair>> {
    let tau = truth.horizon();
    let optimal = truth.weighted(solve_optimal(truth).1.stage(1));
    let mut agent = PsrlAgent::new(prior.clone(), tau, truth.initial_dist().to_vec(), EpisodeMode::FixedHorizon)?;
    let mut env = EnvState::start(truth, env_rng);
    let mut pairs = Vec::with_capacity(episodes as usize);
    for k in 1..=episodes {
        if k > 1 {
            env.reset_episode(truth, env_rng);
        }
        let policy = agent.begin_episode((k - 1) * tau as u64 + 1, agent_rng)?.clone();
        let sampled = agent.last_sample().expect("sampled at episode start");
        let true_value = truth.weighted(evaluate_policy(truth, &policy).stage(1));
        let sampled_value = truth.weighted(evaluate_policy(sampled, &policy).stage(1));
        let rewards = truth.mean_rewards().iter().chain(sampled.mean_rewards());
        let (lo, hi) = rewards.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(*r), hi.max(*r)));
        pairs.push(RegretPair {
            regret: optimal - true_value,
            sampled_regret: sampled_value - true_value,
            bound: tau as f64 * (hi - lo),
        });
        play_episode(truth, &mut agent, &mut env, env_rng, tau)?;
    }
    Ok(pairs)
}

/// `E[Σ Δ_k] = E[Σ Δ̃_k]` via a paired one-sample test on per-replica
/// differences, plus the deterministic bound on each `|Δ_k − Δ̃_k|`.
pub fn check_regret_equivalence(
    prior: &PosteriorParams,
    truth: &TruthSource,
    cfg: &RegretEquivalenceConfig,
) -> Result<CheckReport> {
    require_prior_draw(truth, "regret equivalence check")?;
    let per_replica: Vec<(f64, f64, u64)> = (0..cfg.replicas)
        .into_par_iter()
        .map(|i| -> Result<_> {
            let (mut model_rng, mut env_rng, mut agent_rng) = replica_rngs(cfg.seed, i);
            let truth = sample_well_specified_mdp(prior, cfg.horizon, &mut model_rng)?;
            let pairs = regret_pairs(prior, &truth, cfg.episodes, &mut env_rng, &mut agent_rng)?;
            let regret: f64 = pairs.iter().map(|p| p.regret).sum();
            let sampled: f64 = pairs.iter().map(|p| p.sampled_regret).sum();
            let violations =
                pairs.iter().filter(|p| (p.regret - p.sampled_regret).abs() > p.bound + 1e-9).count() as u64;
            Ok((regret, sampled, violations))
        })
        .collect::<Result<_>>()?;

    let diffs: Vec<f64> = per_replica.iter().map(|(r, s, _)| r - s).collect();
    let z = one_sample_z(&diffs);
    let violations: u64 = per_replica.iter().map(|p| p.2).sum();
    let n = per_replica.len() as f64;
    Ok(CheckReport::new(
        "regret_equivalence",
        z.abs(),
        Z_THRESHOLD,
        z.abs() < Z_THRESHOLD && violations == 0,
        cfg.replicas as u64,
        cfg.seed,
    )
    .detail("z", z)
    .detail("mean_total_regret", per_replica.iter().map(|p| p.0).sum::<f64>() / n)
    .detail("mean_total_sampled_regret", per_replica.iter().map(|p| p.1).sum::<f64>() / n)
    .detail("bound_violations", violations as f64))
}

/// Confidence radius `sqrt(14 S log(2 S A m t_k) / max(1, N))` used for both
/// transitions (L1) and rewards in the analysis.
pub fn beta_width(num_states: usize, num_actions: usize, visits: u64, t_k: u64, m: u64) -> f64 {
    let s = num_states as f64;
    let log_term = (2.0 * s * num_actions as f64 * m as f64 * t_k as f64).ln();
    (14.0 * s * log_term / visits.max(1) as f64).sqrt()
}

/// [`beta_width`] at the counts recorded in `stats` for `(s, a)`.
pub fn beta_analysis(stats: &SufficientStats, s: usize, a: usize, t_k: u64, m: u64) -> f64 {
    beta_width(stats.num_states(), stats.num_actions(), stats.visits(s, a), t_k, m)
}

/// Whether `truth` lies inside the analysis confidence set built from `stats`.
pub fn in_analysis_set(truth: &TabularMdp, stats: &SufficientStats, t_k: u64, m: u64) -> bool {
    (0..truth.num_states()).all(|s| {
        (0..truth.num_actions()).all(|a| {
            let beta = beta_analysis(stats, s, a, t_k, m);
            let l1: f64 =
                stats.empirical_row(s, a).iter().zip(truth.transition_row(s, a)).map(|(p, q)| (p - q).abs()).sum();
            l1 <= beta && (stats.empirical_reward(s, a) - truth.mean_reward(s, a)).abs() <= beta
        })
    })
}

/// Sizes for the coverage check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverageConfig {
    pub num_states: usize,
    pub num_actions: usize,
    pub horizon: usize,
    /// Number of episodes per replica, also the `m` inside the radius.
    pub episodes: u64,
    pub replicas: usize,
    pub seed: u64,
}

impl Default for CoverageConfig {
    fn default() -> Self {
        Self { num_states: 6, num_actions: 2, horizon: 20, episodes: 100, replicas: 200, seed: 0 }
    }
}

/// Frequency with which the true MDP falls outside the analysis confidence
/// set at episode starts, against `1/m` plus 4 binomial standard errors.
/// True MDPs come from the prior with rewards clipped to [0, 1], the support
/// the radius is designed for.
pub fn check_confidence_coverage(cfg: &CoverageConfig) -> Result<CheckReport> {
    let prior = prior_default(cfg.num_states, cfg.num_actions);
    let m = cfg.episodes;
    let violations: Vec<u64> = (0..cfg.replicas)
        .into_par_iter()
        .map(|i| -> Result<u64> {
            let (mut model_rng, mut env_rng, mut agent_rng) = replica_rngs(cfg.seed, i);
            let truth = sample_random_mdp(&prior, cfg.horizon, &mut model_rng)?;
            let mut agent =
                PsrlAgent::new(prior.clone(), cfg.horizon, truth.initial_dist().to_vec(), EpisodeMode::FixedHorizon)?;
            let mut env = EnvState::start(&truth, &mut env_rng);
            let mut count = 0;
            for k in 1..=m {
                if k > 1 {
                    env.reset_episode(&truth, &mut env_rng);
                }
                let t_k = (k - 1) * cfg.horizon as u64 + 1;
                if !in_analysis_set(&truth, agent.stats(), t_k, m) {
                    count += 1;
                }
                agent.begin_episode(t_k, &mut agent_rng)?;
                play_episode(&truth, &mut agent, &mut env, &mut env_rng, cfg.horizon)?;
            }
            Ok(count)
        })
        .collect::<Result<_>>()?;
    let trials = cfg.replicas as u64 * m;
    let rate = violations.iter().sum::<u64>() as f64 / trials as f64;
    let p0 = 1.0 / m as f64;
    let threshold = p0 + Z_THRESHOLD * (p0 * (1.0 - p0) / trials as f64).sqrt();
    Ok(CheckReport::new("confidence_coverage", rate, threshold, rate <= threshold, trials, cfg.seed)
        .detail("violations", violations.iter().sum::<u64>() as f64))
}

/// `Σ_k Σ_i min(β_k(s_t, a_t), 1)` over a logged run with `m` episodes.
pub fn width_sum(log: &[VisitLogEntry], num_states: usize, num_actions: usize, m: u64) -> f64 {
    log.iter().map(|e| beta_width(num_states, num_actions, e.visits_at_episode_start, e.t_k, m).min(1.0)).sum()
}

/// `min(τ Σ min(β, 1), T) ≤ τ S sqrt(30 A T log(S A T))` on a logged run.
pub fn check_width_sum_bound(
    log: &[VisitLogEntry],
    tau: usize,
    num_states: usize,
    num_actions: usize,
    total_steps: u64,
) -> CheckReport {
    let m = log.iter().map(|e| e.episode).max().unwrap_or(0);
    let raw = tau as f64 * width_sum(log, num_states, num_actions, m.max(1));
    let statistic = raw.min(total_steps as f64);
    let (s, a, t) = (num_states as f64, num_actions as f64, total_steps as f64);
    let threshold = tau as f64 * s * (30.0 * a * t * (s * a * t).ln()).sqrt();
    CheckReport::new("width_sum_bound", statistic, threshold, statistic <= threshold, log.len() as u64, 0)
        .detail("unclamped", raw)
        .detail("episodes", m as f64)
}

/// Terms of the telescoping decomposition for one episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BellmanDecomposition {
    /// `(V^k_1 − V^*_1)(s_1)` for the executed policy.
    pub value_gap: f64,
    /// `Σ_i (T^k − T^*) V^k_{i+1}(s_i)`.
    pub bellman_error: f64,
    /// `Σ_i d_i`, the martingale-difference term.
    pub martingale: f64,
}

impl BellmanDecomposition {
    pub fn residual(&self) -> f64 {
        (self.value_gap - self.bellman_error - self.martingale).abs()
    }
}

/// Decompose the value gap of `policy` between `sampled` and `truth` along
/// the realized `path` of `(s_i, a_i, s_{i+1})`, with
/// `d_i = Σ_s' P*(s' | s_i, a_i) Δ_{i+1}(s') − Δ_{i+1}(s_{i+1})` and
/// `Δ = V^k − V^*`.
pub fn bellman_decomposition(
    truth: &TabularMdp,
    sampled: &TabularMdp,
    policy: &Policy,
    path: &[(usize, usize, usize)],
) -> BellmanDecomposition {
    let vk = evaluate_policy(sampled, policy);
    let vs = evaluate_policy(truth, policy);
    let s1 = path[0].0;
    let mut bellman_error = 0.0;
    let mut martingale = 0.0;
    for (i, &(s, a, next)) in path.iter().enumerate() {
        let stage = i + 1;
        let rule = policy.stage(stage);
        let next_k = vk.stage(stage + 1);
        bellman_error += bellman_backup(sampled, rule, next_k)[s] - bellman_backup(truth, rule, next_k)[s];
        let gap: Vec<f64> = next_k.iter().zip(vs.stage(stage + 1)).map(|(k, t)| k - t).collect();
        martingale += truth.expected_next(s, a, &gap) - gap[next];
    }
    BellmanDecomposition { value_gap: vk.value(s1, 1) - vs.value(s1, 1), bellman_error, martingale }
}

/// Sizes for the telescoping identity check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BellmanCheckConfig {
    pub num_states: usize,
    pub num_actions: usize,
    pub horizon: usize,
    pub episodes: u64,
    pub replicas: usize,
    pub seed: u64,
}

impl Default for BellmanCheckConfig {
    fn default() -> Self {
        Self { num_states: 3, num_actions: 2, horizon: 5, episodes: 20, replicas: 50, seed: 0 }
    }
}

/// Verify the telescoping identity exactly on realized PSRL episodes and
/// test that the martingale term has mean zero.
pub fn check_bellman_error_identity(cfg: &BellmanCheckConfig) -> Result<CheckReport> {
    let prior = prior_default(cfg.num_states, cfg.num_actions);
    let per_replica: Vec<Vec<BellmanDecomposition>> = (0..cfg.replicas)
        .into_par_iter()
        .map(|i| -> Result<_> {
            let (mut model_rng, mut env_rng, mut agent_rng) = replica_rngs(cfg.seed, i);
            let truth = sample_random_mdp(&prior, cfg.horizon, &mut model_rng)?;
            let mut agent =
                PsrlAgent::new(prior.clone(), cfg.horizon, truth.initial_dist().to_vec(), EpisodeMode::FixedHorizon)?;
            let mut env = EnvState::start(&truth, &mut env_rng);
            let mut out = Vec::new();
            for k in 1..=cfg.episodes {
                if k > 1 {
                    env.reset_episode(&truth, &mut env_rng);
                }
                let policy = agent.begin_episode((k - 1) * cfg.horizon as u64 + 1, &mut agent_rng)?.clone();
                let sampled = agent.last_sample().expect("sampled at episode start").clone();
                let path = play_episode(&truth, &mut agent, &mut env, &mut env_rng, cfg.horizon)?;
                out.push(bellman_decomposition(&truth, &sampled, &policy, &path));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let all: Vec<BellmanDecomposition> = per_replica.into_iter().flatten().collect();
    let max_residual = all.iter().map(BellmanDecomposition::residual).fold(0.0, f64::max);
    let martingales: Vec<f64> = all.iter().map(|d| d.martingale).collect();
    let z = one_sample_z(&martingales);
    Ok(CheckReport::new(
        "bellman_error_identity",
        max_residual,
        1e-8,
        max_residual < 1e-8 && z.abs() < Z_THRESHOLD,
        all.len() as u64,
        cfg.seed,
    )
    .detail("martingale_z", z)
    .detail("martingale_mean", martingales.iter().sum::<f64>() / martingales.len() as f64))
}

/// Sizes for the UCRL2 optimism check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimismConfig {
    pub runs: usize,
    pub total_steps: u64,
    pub tau: usize,
    pub delta: f64,
    pub seed: u64,
}

impl Default for OptimismConfig {
    fn default() -> Self {
        Self { runs: 5, total_steps: 10_000, tau: 20, delta: 0.05, seed: 0 }
    }
}

/// Number of states where the optimistic value falls below the true optimal
/// value by more than 1e-8 whenever the true MDP is inside the set.
pub fn optimism_violations(
    cs: &ConfidenceSet,
    optimistic: &[f64],
    truth: &TabularMdp,
    optimal: &[f64],
) -> Option<usize> {
    cs.contains(truth).then(|| optimistic.iter().zip(optimal).filter(|(o, v)| **o < **v - 1e-8).count())
}

/// Run episodic UCRL2 on RiverSwim and check optimism at every episode
/// start where the true MDP lies inside the confidence set.
pub fn check_evi_optimism(cfg: &OptimismConfig) -> Result<CheckReport> {
    let truth = make_riverswim(&RiverSwimParams { horizon: cfg.tau, ..RiverSwimParams::default() })?;
    let optimal = solve_optimal(&truth).1;
    let results: Vec<(u64, u64, u64)> = (0..cfg.runs)
        .into_par_iter()
        .map(|i| -> Result<_> {
            let (_, mut env_rng, mut agent_rng) = replica_rngs(cfg.seed, i);
            let mut agent = Ucrl2Agent::new(truth.num_states(), truth.num_actions(), cfg.tau, cfg.delta)?;
            let mut env = EnvState::start(&truth, &mut env_rng);
            let (mut episodes, mut inside, mut violations) = (0, 0, 0);
            for k in 1..=cfg.total_steps / cfg.tau as u64 {
                if k > 1 {
                    env.reset_episode(&truth, &mut env_rng);
                }
                agent.begin_episode((k - 1) * cfg.tau as u64 + 1, &mut agent_rng)?;
                let cs = agent.confidence_set().expect("built at episode start");
                let values = agent.optimistic_values().expect("built at episode start");
                if let Some(v) = optimism_violations(cs, values.stage(1), &truth, optimal.stage(1)) {
                    inside += 1;
                    violations += v as u64;
                }
                episodes += 1;
                play_episode(&truth, &mut agent, &mut env, &mut env_rng, cfg.tau)?;
            }
            Ok((episodes, inside, violations))
        })
        .collect::<Result<_>>()?;
    let episodes: u64 = results.iter().map(|r| r.0).sum();
    let inside: u64 = results.iter().map(|r| r.1).sum();
    let violations: u64 = results.iter().map(|r| r.2).sum();
    Ok(CheckReport::new("evi_optimism", violations as f64, 0.0, violations == 0, episodes, cfg.seed)
        .detail("episodes_with_truth_inside", inside as f64))
}

/// Full check battery at the requested scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyScale {
    /// Smaller replica counts for smoke testing.
    Quick,
    /// Sample sizes used for acceptance.
    Full,
}

/// Run every check and return the reports in a fixed order.
pub fn verify_all(scale: VerifyScale, seed: u64) -> Result<Vec<CheckReport>> {
    let shrink = |n: usize, quick: usize| if scale == VerifyScale::Full { n } else { quick };
    let small_prior = prior_default(3, 2);

    let lemma = LemmaCheckConfig { replicas: shrink(10_000, 1_000), seed, ..Default::default() };
    let equivalence = RegretEquivalenceConfig { replicas: shrink(10_000, 1_000), seed, ..Default::default() };
    let coverage = CoverageConfig { replicas: shrink(200, 20), seed, ..Default::default() };
    let bellman = BellmanCheckConfig { replicas: shrink(50, 10), seed, ..Default::default() };
    let optimism =
        OptimismConfig { runs: shrink(5, 1), total_steps: shrink(10_000, 2_000) as u64, seed, ..Default::default() };

    let mut reports = vec![
        check_posterior_sampling_lemma(&small_prior, &TruthSource::DrawFromPrior, &lemma)?,
        check_regret_equivalence(&small_prior, &TruthSource::DrawFromPrior, &equivalence)?,
        check_confidence_coverage(&coverage)?,
        check_bellman_error_identity(&bellman)?,
        check_evi_optimism(&optimism)?,
    ];

    // Width-sum bound on logged PSRL RiverSwim runs.
    let mut run_cfg = ExperimentConfig::riverswim(AgentSpec::Psrl { prior: None }, Mode::Episodic);
    run_cfg.log_visits = true;
    run_cfg.total_steps = shrink(10_000, 2_000) as u64;
    let runs = shrink(5, 1);
    let mut worst: Option<CheckReport> = None;
    for i in 0..runs {
        let record = run_episodic(&run_cfg, seed + i as u64)?;
        let mut report = check_width_sum_bound(&record.visit_log, run_cfg.tau, 6, 2, run_cfg.total_steps);
        report.seed = record.seed;
        let replace = match &worst {
            None => true,
            Some(w) => !report.passed || (w.passed && report.statistic / report.threshold > w.statistic / w.threshold),
        };
        if replace {
            worst = Some(report);
        }
    }
    let mut width = worst.expect("at least one run");
    width.details.insert("runs".into(), runs as f64);
    reports.push(width);
    Ok(reports)
}
