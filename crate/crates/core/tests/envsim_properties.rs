use std::time::{Duration, Instant};

use marl_core::envsim::{optimal_joint_return, CoopMatrixGameSpec, EnvConfig, EnvSpec, MultiAgentEnv};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Plays one episode with uniformly random available actions, returning the
/// joint actions, rewards and step count.
fn random_episode(env: &mut dyn MultiAgentEnv, policy_seed: u64) -> (Vec<Vec<usize>>, Vec<f64>, Vec<Vec<f64>>) {
    let spec = env.spec().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(policy_seed);
    let mut res = env.reset();
    assert!(res.conforms_to(&spec) && !res.done);
    let (mut actions, mut rewards, mut states) = (Vec::new(), Vec::new(), vec![res.global_state.clone()]);
    while !res.done {
        let joint: Vec<usize> = res
            .avail_actions
            .iter()
            .map(|row| {
                let ok: Vec<usize> = (0..row.len()).filter(|&a| row[a]).collect();
                ok[rng.random_range(0..ok.len())]
            })
            .collect();
        res = env.step(&joint).unwrap();
        assert!(res.conforms_to(&spec));
        actions.push(joint);
        rewards.push(res.reward);
        states.push(res.global_state.clone());
        assert!(actions.len() <= spec.episode_limit);
    }
    (actions, rewards, states)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn synthetic_shapes_limits_and_determinism(
        scenario in prop::sample::select(vec!["3m", "8m", "2s3z", "5m_vs_6m"]),
        seed in any::<u64>(),
        policy in any::<u64>(),
    ) {
        let cfg = EnvConfig::Synthetic(EnvSpec::scenario(scenario).unwrap());
        let mut a = cfg.build(seed).unwrap();
        let mut b = cfg.build(seed).unwrap();
        for _ in 0..2 {
            let ra = random_episode(a.as_mut(), policy);
            let rb = random_episode(b.as_mut(), policy);
            prop_assert!(ra.0.len() <= cfg.spec().episode_limit);
            prop_assert_eq!(ra, rb);
        }
    }

    #[test]
    fn matrix_return_is_sum_of_table_lookups(
        n_agents in 1usize..4,
        n_actions in 2usize..5,
        n_steps in 1usize..7,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let table: Vec<f64> = (0..n_actions.pow(n_agents as u32)).map(|_| rng.random_range(-5.0..5.0)).collect();
        let game = CoopMatrixGameSpec::new(n_agents, n_actions, table.clone(), n_steps).unwrap();
        let mut env = EnvConfig::Matrix(game.clone()).build(0).unwrap();
        let (actions, rewards, _) = random_episode(env.as_mut(), seed ^ 1);
        prop_assert_eq!(actions.len(), n_steps);
        // row-major: the first agent's action is the most significant digit
        let lookup = |joint: &[usize]| table[joint.iter().fold(0, |acc, &a| acc * n_actions + a)];
        let expected: f64 = actions.iter().map(|j| lookup(j)).sum();
        let got: f64 = rewards.iter().sum();
        prop_assert!((got - expected).abs() < 1e-12);
        let best = table.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(optimal_joint_return(&game).unwrap(), n_steps as f64 * best);
    }
}

#[test]
fn step_latency_is_paid_on_every_step() {
    let spec = EnvSpec::new(2, 3, 4, 4, 1000).with_latency(Duration::from_millis(1));
    let mut env = EnvConfig::Synthetic(spec).build(1).unwrap();
    let start = Instant::now();
    let (actions, _, _) = random_episode(env.as_mut(), 2);
    assert_eq!(actions.len(), 1000);
    assert!(start.elapsed() >= Duration::from_secs(1));
}
