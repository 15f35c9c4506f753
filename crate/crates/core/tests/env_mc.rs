use psrl_core::env::{make_riverswim, sample_random_mdp, EnvState, RiverSwimParams, LEFT, RIGHT};
use psrl_core::mdp::TabularMdp;
use psrl_core::posterior::prior_default;
use psrl_core::rng::SimRng;
use rand::SeedableRng;

fn within_3_se(count: u64, n: u64, p: f64) -> bool {
    let se = (p * (1.0 - p) / n as f64).sqrt();
    (count as f64 / n as f64 - p).abs() <= 3.0 * se
}

#[test]
fn step_frequencies_match_the_row() {
    let river = make_riverswim(&RiverSwimParams::default()).unwrap();
    let row = river.transition_row(2, RIGHT).to_vec();
    let mut rng = SimRng::seed_from_u64(21);
    let n = 100_000u64;
    let mut counts = vec![0u64; river.num_states()];
    for _ in 0..n {
        let mut env = EnvState { current_state: 2, t: 1, episode_step: 1 };
        counts[env.step(&river, RIGHT, &mut rng).unwrap().next_state] += 1;
    }
    for (s, &p) in row.iter().enumerate() {
        assert!(within_3_se(counts[s], n, p), "state {s}: {} vs {p}", counts[s]);
    }
}

#[test]
fn uniform_resets_hit_every_state_equally() {
    let prior = prior_default(10, 2);
    let mdp = sample_random_mdp(&prior, 20, &mut SimRng::seed_from_u64(1)).unwrap();
    let mut rng = SimRng::seed_from_u64(2);
    let mut env = EnvState::start(&mdp, &mut rng);
    let n = 100_000u64;
    let mut counts = [0u64; 10];
    for _ in 0..n {
        env.reset_episode(&mdp, &mut rng);
        counts[env.current_state] += 1;
    }
    assert!(counts.iter().all(|&c| within_3_se(c, n, 0.1)), "{counts:?}");
}

#[test]
fn random_mdp_rows_average_to_uniform() {
    let prior = prior_default(10, 5);
    let mut rng = SimRng::seed_from_u64(3);
    let draws = 200; // 200 MDPs x 50 rows = 10^4 rows
    let mut mean = vec![0.0; 10];
    let mut rows = 0;
    for _ in 0..draws {
        let m = sample_random_mdp(&prior, 20, &mut rng).unwrap();
        for s in 0..10 {
            for a in 0..5 {
                for (acc, p) in mean.iter_mut().zip(m.transition_row(s, a)) {
                    *acc += p;
                }
                rows += 1;
            }
        }
        assert!(m.mean_rewards().iter().all(|r| (0.0..=1.0).contains(r)));
    }
    assert_eq!(rows, 10_000);
    assert!(mean.iter().all(|m| (m / rows as f64 - 0.1).abs() < 0.02), "{mean:?}");
}

#[test]
fn riverswim_left_at_origin_and_resets() {
    let river = make_riverswim(&RiverSwimParams::default()).unwrap();
    let mut rng = SimRng::seed_from_u64(4);
    let mut env = EnvState::start(&river, &mut rng);
    assert_eq!(env.current_state, 0);
    let out = env.step(&river, LEFT, &mut rng).unwrap();
    assert_eq!((out.next_state, out.reward), (0, 0.005));
    for _ in 0..30 {
        env.step(&river, RIGHT, &mut rng).unwrap();
    }
    env.reset_episode(&river, &mut rng);
    assert_eq!(env.current_state, 0);
    assert_eq!(env.episode_step, 1);
    assert_eq!(env.t, 32);
}

#[test]
fn deterministic_rows_fix_the_next_state() {
    let m = TabularMdp::new(
        3,
        1,
        2,
        vec![0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0],
        vec![0.1, 0.2, 0.3],
        vec![1.0, 0.0, 0.0],
    )
    .unwrap();
    let mut rng = SimRng::seed_from_u64(0);
    let mut env = EnvState::start(&m, &mut rng);
    let visited: Vec<usize> = (0..6).map(|_| env.step(&m, 0, &mut rng).unwrap().next_state).collect();
    assert_eq!(visited, vec![2, 1, 0, 2, 1, 0]);
}
