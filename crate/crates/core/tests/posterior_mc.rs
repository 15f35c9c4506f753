use psrl_core::env::sample_categorical;
use psrl_core::harness::stats::quantile;
use psrl_core::posterior::{
    posterior_mean_mdp, prior_default, sample_dirichlet, sample_mdp, NormalGamma, PosteriorParams, SufficientStats,
};
use psrl_core::rng::SimRng;
use rand::SeedableRng;

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

#[test]
fn dirichlet_mean_matches_closed_form() {
    let ng = NormalGamma { mu0: 1.0, kappa: 1.0, alpha: 1.0, beta: 1.0 };
    let prior = PosteriorParams::uniform(2, 1, 0.5, ng).unwrap();
    let mut stats = SufficientStats::new(2, 1);
    for _ in 0..1000 {
        stats.record_step(0, 0, 0.0, 0).unwrap();
    }
    let alpha = prior.posterior(&stats).unwrap().dirichlet_row(0, 0).to_vec();
    assert_eq!(alpha, vec![1000.5, 0.5]);

    let n = 100_000;
    let mut rng = SimRng::seed_from_u64(11);
    let mut sum = [0.0; 2];
    for _ in 0..n {
        let row = sample_dirichlet(&alpha, &mut rng);
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        sum[0] += row[0];
        sum[1] += row[1];
    }
    let a0 = 1001.0;
    for (i, &a) in alpha.iter().enumerate() {
        let mean = a / a0;
        let sd = (a * (a0 - a) / (a0 * a0 * (a0 + 1.0))).sqrt();
        let se = sd / (n as f64).sqrt();
        assert!((sum[i] / n as f64 - mean).abs() < 3.0 * se, "component {i}");
    }
}

#[test]
fn posterior_concentrates_on_the_data_row() {
    let p = [0.2, 0.5, 0.3];
    let prior = prior_default(3, 1);
    let mut data_rng = SimRng::seed_from_u64(5);
    let mut sample_rng = SimRng::seed_from_u64(6);
    let mut medians = Vec::new();
    for n in [100, 1_000, 10_000] {
        let mut stats = SufficientStats::new(3, 1);
        for _ in 0..n {
            let next = sample_categorical(&p, &mut data_rng);
            stats.record_step(0, 0, 0.5, next).unwrap();
        }
        let dists: Vec<f64> = (0..400)
            .map(|_| {
                let m = sample_mdp(&prior, &stats, 1, &[1.0, 0.0, 0.0], &mut sample_rng).unwrap();
                l1(m.transition_row(0, 0), &p)
            })
            .collect();
        medians.push(quantile(&dists, 0.5));
    }
    assert!(medians[0] > medians[1] && medians[1] > medians[2], "{medians:?}");
}

#[test]
fn posterior_mean_converges_to_the_data_row() {
    let p = [0.1, 0.6, 0.3];
    let mut rng = SimRng::seed_from_u64(9);
    let mut stats = SufficientStats::new(3, 1);
    for _ in 0..100_000 {
        let next = sample_categorical(&p, &mut rng);
        stats.record_step(0, 0, 0.5, next).unwrap();
    }
    let mean = posterior_mean_mdp(&prior_default(3, 1), &stats, 1, &[1.0, 0.0, 0.0]).unwrap();
    assert!(l1(mean.transition_row(0, 0), &p) < 0.01);
}

#[test]
fn zero_data_posterior_mean_is_prior_mean() {
    let stats = SufficientStats::new(2, 2);
    let m = posterior_mean_mdp(&prior_default(2, 2), &stats, 3, &[0.5, 0.5]).unwrap();
    for s in 0..2 {
        for a in 0..2 {
            assert_eq!(m.transition_row(s, a), &[0.5, 0.5]);
            assert_eq!(m.mean_reward(s, a), 1.0);
        }
    }
}

#[test]
fn batch_updates_equal_joint_update() {
    let prior = prior_default(4, 2);
    let mut rng = SimRng::seed_from_u64(1);
    let steps: Vec<(usize, usize, f64, usize)> =
        (0..500).map(|i| (i % 4, i % 2, (i as f64 * 0.37).sin().abs(), (i * 7) % 4)).collect();
    let mut d1 = SufficientStats::new(4, 2);
    let mut d2 = SufficientStats::new(4, 2);
    let mut joint = SufficientStats::new(4, 2);
    for (i, &(s, a, r, n)) in steps.iter().enumerate() {
        if i < 200 {
            d1.record_step(s, a, r, n).unwrap()
        } else {
            d2.record_step(s, a, r, n).unwrap()
        }
        joint.record_step(s, a, r, n).unwrap();
    }
    let mut merged = d2.clone();
    merged.merge(&d1).unwrap();
    assert_eq!(prior.posterior(&merged).unwrap(), prior.posterior(&joint).unwrap());
    // the sampled model is then also identical for a shared RNG state
    let a = sample_mdp(&prior, &merged, 3, &[0.25; 4], &mut rng.clone()).unwrap();
    let b = sample_mdp(&prior, &joint, 3, &[0.25; 4], &mut rng).unwrap();
    assert_eq!(a, b);
}
