//! Solves the finite-horizon MDP and prints the optimal policy at a few stages.
//!
//! `cargo run --example solve_dp [config.toml]`

use covert::harness::ExperimentConfig;
use covert::mdp::{check_value_shape, solve_dp, verify_threshold_structure};

fn main() -> covert::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "configs/tiny.toml".into());
    let config = ExperimentConfig::load(path.as_ref())?;
    let (model, _) = config.derive_model()?;
    let solution = solve_dp(&model)?;
    println!(
        "M = {}, N = {}, actions = {}, schedule refinement rounds = {}",
        model.queue_capacity(),
        model.horizon(),
        model.num_actions(),
        solution.rounds
    );
    for u in 0..model.num_actions() {
        let a = model.action(u)?;
        println!("action {u}: {:?} at incentive {}", a.kind, model.incentives()[a.incentive]);
    }
    let horizon = model.horizon();
    for n in [horizon, horizon.div_ceil(2), 1] {
        for o in 0..model.num_oracle_states() {
            println!("n = {n:>3}, o = {o}: u*(b = 0..M) = {:?}", solution.policy.column(n, o));
        }
    }
    for o in 0..model.num_oracle_states() {
        println!("V(N, o = {o}, b = M) = {:.6}", solution.value_at_start(o));
    }
    println!(
        "threshold structure: {}; value shape violations: {}",
        if verify_threshold_structure(&solution.policy).passes() { "monotone" } else { "violated" },
        check_value_shape(&solution.values).len()
    );
    Ok(())
}
