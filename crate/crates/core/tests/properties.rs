//! Property tests across modules.

mod common;

use covert::eavesdropper::{Belief, Trajectory};
use covert::mdp::{
    check_structural_assumptions, check_value_shape, solve_dp, verify_threshold_structure,
};
use covert::policy::{ActionMode, ThresholdPolicy};
use covert::rng::stream;
use proptest::prelude::*;

fn labels() -> impl Strategy<Value = Vec<(bool, u32)>> {
    prop::collection::vec((any::<bool>(), 1u32..1000), 1..200)
}

proptest! {
    #[test]
    fn belief_incremental_equals_batch(obs in labels()) {
        let mut belief = Belief::new();
        for (k, (one, i)) in obs.iter().enumerate() {
            belief.observe(if *one { Trajectory::One } else { Trajectory::Two }, f64::from(*i));
            let prefix = &obs[..=k];
            let num: f64 = prefix.iter().filter(|(one, _)| *one).map(|(_, i)| f64::from(*i)).sum();
            let den: f64 = prefix.iter().map(|(_, i)| f64::from(*i)).sum();
            prop_assert_eq!(belief.delta(), num / den);
        }
    }

    #[test]
    fn belief_is_invariant_to_incentive_scaling(obs in labels(), power in -8i32..8) {
        let scale = 2f64.powi(power);
        let label = |one: bool| if one { Trajectory::One } else { Trajectory::Two };
        let base = Belief::from_observations(obs.iter().map(|(o, i)| (label(*o), f64::from(*i))));
        let scaled = Belief::from_observations(obs.iter().map(|(o, i)| (label(*o), scale * f64::from(*i))));
        prop_assert_eq!(base.delta(), scaled.delta());
        prop_assert_eq!(base.map_choice(), scaled.map_choice());
    }

    #[test]
    fn projection_yields_monotone_clamped_rows(
        theta in prop::collection::vec(-50.0f64..100.0, 12),
        hi in 1.0f64..60.0,
    ) {
        let mut theta = theta;
        ThresholdPolicy::project(&mut theta, 4, 0.0, hi);
        for row in theta.chunks(4) {
            prop_assert!(row.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(row.iter().all(|t| (0.0..=hi).contains(t)));
        }
        let rows: Vec<Vec<f64>> = theta.chunks(4).map(<[f64]>::to_vec).collect();
        prop_assert!(ThresholdPolicy::new(rows, 1.0).is_ok());
    }

    #[test]
    fn cold_smooth_mode_agrees_with_hard_mode_away_from_thresholds(
        raw in prop::collection::vec(0.0f64..20.0, 3),
    ) {
        let mut row = raw;
        row.sort_by(f64::total_cmp);
        let policy = ThresholdPolicy::new(vec![row.clone()], 1e-4).unwrap();
        for b in 0..=20usize {
            if row.iter().all(|t| (b as f64 - t).abs() >= 1.0) {
                prop_assert_eq!(
                    policy.stationary_action(b, 0, ActionMode::Smooth),
                    policy.stationary_action(b, 0, ActionMode::Hard)
                );
            }
        }
    }

    #[test]
    fn transition_masses_sum_to_one(seed in any::<u64>()) {
        let mut rng = stream(seed, 0);
        let model = common::random_model(&mut rng, 3, 6, 2, 4, false);
        for o in 0..3 {
            for b in 0..=6 {
                for u in 0..model.num_actions() {
                    let total: f64 = model.transition_distribution(b, o, u).unwrap().iter().map(|t| t.2).sum();
                    prop_assert!((total - 1.0).abs() < 1e-12);
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn checked_models_have_threshold_policies_and_shaped_values(
        seed in any::<u64>(),
        states in 2usize..=4,
        queue in 5usize..=20,
        levels in 2usize..=3,
        horizon in 3usize..=25,
        flat in any::<bool>(),
    ) {
        let mut rng = stream(seed, 1);
        let model = common::random_model(&mut rng, states, queue, levels, horizon, flat);
        let report = check_structural_assumptions(&model);
        let solution = solve_dp(&model).unwrap();
        if report.value_premises_hold() {
            prop_assert!(check_value_shape(&solution.values).is_empty());
        }
        if report.passes() {
            let threshold = verify_threshold_structure(&solution.policy);
            prop_assert!(threshold.passes(), "{:?}", threshold.violations);
        }
    }
}
