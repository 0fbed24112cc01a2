use marl_core::checks::{chi_square_uniform, hidden_state_isolation, padded_cell_fuzz, replay_sampling_counts};
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[test]
fn replay_sampling_is_uniform() {
    let counts = replay_sampling_counts(50, 8, 12_500, 3);
    assert_eq!(counts.iter().sum::<u64>(), 100_000);
    let (stat, dof) = chi_square_uniform(&counts);
    let p = 1.0 - ChiSquared::new(dof as f64).unwrap().cdf(stat);
    assert!(p > 0.01, "chi-square {stat} on {dof} dof, p = {p}");
}

#[test]
fn padded_cells_never_reach_loss_or_gradient() {
    assert_eq!(padded_cell_fuzz(40, 17), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn interleaved_envs_match_solo_replays(n_envs in 1usize..6, ops in 1usize..300, seed in any::<u64>()) {
        let r = hidden_state_isolation(n_envs, ops, seed).unwrap();
        prop_assert_eq!(r.mismatched_envs, 0);
        prop_assert_eq!(r.boundary_violations, 0);
    }
}
