use psrl_core::agent::{Agent, EpisodeMode, PsrlAgent, Ucrl2Agent};
use psrl_core::env::{make_riverswim, EnvState, RiverSwimParams, LEFT, RIGHT};
use psrl_core::mdp::{episode_regret, TabularMdp};
use psrl_core::posterior::prior_default;
use psrl_core::rng::SimRng;
use rand::SeedableRng;

#[test]
fn ucrl2_without_data_is_maximally_optimistic_on_riverswim() {
    let river = make_riverswim(&RiverSwimParams::default()).unwrap();
    let mut agent = Ucrl2Agent::new(6, 2, 20, 0.05).unwrap();
    agent.begin_episode(1, &mut SimRng::seed_from_u64(0)).unwrap();
    let values = agent.optimistic_values().unwrap();
    assert!(values.stage(1).iter().all(|v| (*v - 20.0).abs() < 1e-12));
    // the set admits a model that jumps straight to the rightmost state
    let jump = TabularMdp::new(
        6,
        2,
        20,
        (0..12).flat_map(|_| [0.0, 0.0, 0.0, 0.0, 0.0, 1.0]).collect(),
        vec![1.0; 12],
        vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    )
    .unwrap();
    let cs = agent.confidence_set().unwrap();
    assert!(cs.contains(&jump));
    assert!(cs.contains(&river));
}

#[test]
fn ucrl2_swims_right_once_left_is_well_known() {
    let river = make_riverswim(&RiverSwimParams::default()).unwrap();
    let mut agent = Ucrl2Agent::new(6, 2, 20, 0.05).unwrap();
    let mut rng = SimRng::seed_from_u64(1);
    let mut env = EnvState::start(&river, &mut rng);
    for _ in 0..200 {
        let s = env.current_state;
        let out = env.step(&river, LEFT, &mut rng).unwrap();
        agent.observe(s, LEFT, out.reward, out.next_state).unwrap();
    }
    let policy = agent.begin_episode(201, &mut rng).unwrap();
    assert_eq!(policy.action(0, 1), RIGHT);
}

#[test]
fn psrl_episodes_are_seed_deterministic_and_valid() {
    let river = make_riverswim(&RiverSwimParams::default()).unwrap();
    let run = |seed: u64| {
        let mut agent =
            PsrlAgent::new(prior_default(6, 2), 20, river.initial_dist().to_vec(), EpisodeMode::FixedHorizon).unwrap();
        let mut rng = SimRng::seed_from_u64(seed);
        let mut env_rng = SimRng::seed_from_u64(seed + 100);
        let mut env = EnvState::start(&river, &mut env_rng);
        let mut regrets = Vec::new();
        for k in 0..30u64 {
            env.reset_episode(&river, &mut env_rng);
            let policy = agent.begin_episode(k * 20 + 1, &mut rng).unwrap().clone();
            policy.validate(2).unwrap();
            regrets.push(episode_regret(&river, &policy));
            for stage in 1..=20 {
                let s = env.current_state;
                let a = agent.act(s, stage).unwrap();
                assert_eq!(a, agent.act(s, stage).unwrap());
                let out = env.step(&river, a, &mut env_rng).unwrap();
                agent.observe(s, a, out.reward, out.next_state).unwrap();
            }
        }
        assert!(agent.act(0, 21).is_err());
        regrets
    };
    assert_eq!(run(3), run(3));
    assert!(run(3).iter().all(|r| (-1e-10..=20.0).contains(r)));
}
