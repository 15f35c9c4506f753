use psrl_core::agent::{EpisodeMode, FixedPolicyAgent, PsrlAgent};
use psrl_core::harness::{
    emit_results, read_runs_csv, read_summary, run_episodic, run_infinite, run_suite, simulate_episodic,
    simulate_infinite, summarize_dir, AgentSpec, EnvironmentSpec, ExperimentConfig, Mode, PriorSpec, SuiteSummary,
    RUNS_CSV, SUMMARY_JSON,
};
use psrl_core::mdp::{optimal_gains, Policy, TabularMdp};
use psrl_core::posterior::{NormalGamma, PosteriorParams};
use psrl_core::rng::{self, SimRng};
use psrl_core::{make_riverswim, Error, RiverSwimParams};
use rand::SeedableRng;

fn psrl() -> AgentSpec {
    AgentSpec::Psrl { prior: None }
}

fn point_mass_prior(truth: &TabularMdp) -> PosteriorParams {
    let alpha = truth.transitions().iter().map(|p| 1e9 * p + 1e-9).collect();
    let ng = truth.mean_rewards().iter().map(|&mu0| NormalGamma { mu0, kappa: 1e12, alpha: 1e6, beta: 1e-6 }).collect();
    PosteriorParams::new(truth.num_states(), truth.num_actions(), alpha, ng).unwrap()
}

#[test]
fn oracle_has_zero_regret() {
    let mut c = ExperimentConfig::riverswim(AgentSpec::Oracle, Mode::Episodic);
    c.total_steps = 2_000;
    let r = run_episodic(&c, 3).unwrap();
    assert_eq!(r.total_regret(), 0.0);
    assert_eq!(r.episodes, 100);
}

#[test]
fn t_equal_tau_is_one_episode() {
    let mut c = ExperimentConfig::riverswim(psrl(), Mode::Episodic);
    c.total_steps = 20;
    let r = run_episodic(&c, 0).unwrap();
    assert_eq!(r.trace.len(), 1);
    assert_eq!(r.trace.timesteps, vec![20]);
}

#[test]
fn partial_last_episode_is_counted() {
    let mut c = ExperimentConfig::riverswim(psrl(), Mode::Episodic);
    c.total_steps = 1_010;
    let r = run_episodic(&c, 0).unwrap();
    assert_eq!(r.episodes, 51);
    assert_eq!(*r.trace.timesteps.last().unwrap(), 1_010);
    let cum = &r.trace.cumulative_regret;
    assert!(cum[0] >= -1e-10 && cum.windows(2).all(|w| w[1] >= w[0] - 1e-10));
}

#[test]
fn point_mass_psrl_has_zero_regret() {
    let c = ExperimentConfig::riverswim(psrl(), Mode::Episodic);
    let truth = make_riverswim(&RiverSwimParams::default()).unwrap();
    let mut agent =
        PsrlAgent::new(point_mass_prior(&truth), 20, truth.initial_dist().to_vec(), EpisodeMode::FixedHorizon).unwrap();
    let mut agent_rng = rng::stream(0, rng::AGENT);
    let r = simulate_episodic(&c, 0, &truth, &mut agent, &mut agent_rng).unwrap();
    assert!(r.total_regret().abs() < 1e-8, "{}", r.total_regret());
}

#[test]
fn results_round_trip_through_csv() {
    let mut c = ExperimentConfig::riverswim(AgentSpec::Ucrl2 { delta: 0.05 }, Mode::Episodic);
    c.total_steps = 400;
    c.num_seeds = 3;
    let suite = run_suite(&c).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_results(&suite.records, &suite.summary, dir.path()).unwrap();

    let traces = read_runs_csv(&dir.path().join(RUNS_CSV)).unwrap();
    let originals: Vec<_> = suite.records.iter().map(|r| r.trace.clone()).collect();
    assert_eq!(traces, originals);

    let rebuilt = summarize_dir(dir.path()).unwrap();
    for (total, trace) in rebuilt.total_regret.iter().zip(&traces) {
        assert_eq!(*total, *trace.cumulative_regret.last().unwrap());
    }
    assert_eq!(rebuilt.total_regret, suite.summary.total_regret);
    assert_eq!(rebuilt.total_realized_regret, suite.summary.total_realized_regret);
    let stored = read_summary(&dir.path().join(SUMMARY_JSON)).unwrap();
    assert_eq!(stored.config.as_ref(), Some(&c));
    assert_eq!(stored.seeds, vec![0, 1, 2]);
}

#[test]
fn empty_records_write_headers_only() {
    let dir = tempfile::tempdir().unwrap();
    let summary = SuiteSummary::from_records(None, &[], 0.0);
    emit_results(&[], &summary, dir.path()).unwrap();
    let text = std::fs::read_to_string(dir.path().join(RUNS_CSV)).unwrap();
    assert_eq!(text, "config_id,seed,t,episode,per_episode_regret,cumulative_regret\n");
    assert_eq!(read_summary(&dir.path().join(SUMMARY_JSON)).unwrap().num_seeds, 0);
}

#[test]
fn suite_is_seed_indexed() {
    let mut c = ExperimentConfig::riverswim(psrl(), Mode::Episodic);
    c.total_steps = 300;
    c.base_seed = 40;
    c.num_seeds = 1;
    let single = run_suite(&c).unwrap();
    assert_eq!(single.records[0].trace, run_episodic(&c, 40).unwrap().trace);
    assert_eq!(single.summary.mean_regret(), single.records[0].total_regret());

    c.num_seeds = 3;
    let small = run_suite(&c).unwrap();
    c.num_seeds = 6;
    let large = run_suite(&c).unwrap();
    for (a, b) in small.records.iter().zip(&large.records) {
        assert_eq!(a.trace, b.trace);
    }
    assert_eq!(large.summary.seeds, (40..46).collect::<Vec<_>>());

    let mut reversed = large.records.clone();
    reversed.reverse();
    let flipped = SuiteSummary::from_records(Some(&c), &reversed, 0.0);
    assert!((flipped.mean_regret() - large.summary.mean_regret()).abs() < 1e-9);
}

#[test]
fn failing_seed_is_identified() {
    let prior = PriorSpec {
        dirichlet_concentration: Some(-1.0),
        normal_gamma: NormalGamma { mu0: 1.0, kappa: 1.0, alpha: 1.0, beta: 1.0 },
    };
    let mut c = ExperimentConfig::riverswim(AgentSpec::Psrl { prior: Some(prior) }, Mode::Episodic);
    c.total_steps = 100;
    c.base_seed = 7;
    c.num_seeds = 2;
    match run_suite(&c) {
        Err(Error::SeedFailed { seed, .. }) => assert_eq!(seed, 7),
        other => panic!("expected a seed failure, got {other:?}"),
    }
}

#[test]
fn wrong_mode_is_rejected() {
    let c = ExperimentConfig::riverswim(psrl(), Mode::Infinite);
    assert!(matches!(run_episodic(&c, 0), Err(Error::Config(_))));
}

#[test]
fn infinite_single_state_has_zero_regret() {
    let mut c = ExperimentConfig::new(
        EnvironmentSpec::RandomMdp { num_states: 1, num_actions: 1, env_seed: Some(0), well_specified: false },
        psrl(),
        Mode::Infinite,
    );
    c.total_steps = 1_000;
    let r = run_infinite(&c, 0).unwrap();
    assert!(r.trace.cumulative_regret.iter().all(|x| x.abs() < 1e-9));
}

#[test]
fn infinite_trace_axis_is_strictly_increasing_and_ends_at_t() {
    for agent in [psrl(), AgentSpec::Ucrl2 { delta: 0.05 }] {
        let mut c = ExperimentConfig::riverswim(agent, Mode::Infinite);
        c.total_steps = 3_000;
        let r = run_infinite(&c, 1).unwrap();
        let t = &r.trace.timesteps;
        assert!(t.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(*t.last().unwrap(), 3_000);
        assert!(r.episodes > 1);
    }
}

#[test]
fn suboptimal_agent_accrues_the_gain_gap() {
    // action 0 stays put (reward 0.2 at state 0, 0.6 at state 1);
    // action 1 moves to the other state with probability 0.5 (reward 0.4 / 0.9)
    let truth = TabularMdp::new(
        2,
        2,
        20,
        vec![1.0, 0.0, 0.5, 0.5, 0.0, 1.0, 0.5, 0.5],
        vec![0.2, 0.4, 0.6, 0.9],
        vec![1.0, 0.0],
    )
    .unwrap();
    let rho_star = optimal_gains(&truth, 1 << 22).unwrap()[0];
    // the agent always plays action 0 and stays at state 0 forever
    let rho_agent = 0.2;
    let mut c = ExperimentConfig::riverswim(AgentSpec::Oracle, Mode::Infinite);
    c.total_steps = 100_000;
    let mut agent = FixedPolicyAgent::new(Policy::constant(2, 20, 0), 2).unwrap();
    let mut agent_rng = SimRng::seed_from_u64(0);
    let r = simulate_infinite(&c, 0, &truth, &mut agent, &mut agent_rng).unwrap();
    let expected = (rho_star - rho_agent) * 100_000.0;
    assert!((r.total_regret() - expected).abs() < 1e-6 * expected, "{} vs {expected}", r.total_regret());

    // an agent that keeps moving has a stochastic trajectory
    let mut mover = FixedPolicyAgent::new(Policy::constant(2, 20, 1), 2).unwrap();
    let r = simulate_infinite(&c, 1, &truth, &mut mover, &mut agent_rng).unwrap();
    let expected = (rho_star - 0.65) * 100_000.0;
    // per-step reward sd is at most 0.25 with lag-one correlation 0; allow 4 s.e.
    let tol = 4.0 * 0.25 * (100_000f64).sqrt();
    assert!((r.total_regret() - expected).abs() < tol, "{} vs {expected}", r.total_regret());
}
