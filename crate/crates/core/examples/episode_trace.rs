//! Steps through one episode of the control loop and prints every query.
//!
//! `cargo run --example episode_trace [config.toml]`

use covert::harness::{run_seeded, Environment, ExperimentConfig};
use covert::mdp::solve_dp;

fn main() -> covert::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "configs/tiny.toml".into());
    let config = ExperimentConfig::load(path.as_ref())?;
    let env = Environment::from_config(&config)?;
    let solution = solve_dp(&env.model)?;
    let trace = run_seeded(&env, &solution.policy, config.seed, 0)?;
    println!("  n  o  b  u  learn  incentive  success  belief    cost");
    for s in &trace.steps {
        println!(
            "{:>3} {:>2} {:>2} {:>2}  {:<5}  {:>9}  {:<7}  {:.3}  {:>7.4}",
            s.n, s.oracle_state, s.queue, s.action, s.learn, s.incentive, s.success, s.belief, s.cost
        );
    }
    println!(
        "final queue {}, spend {}, total cost {:.5}, eavesdropper MAP correct: {}",
        trace.final_queue, trace.spend, trace.total_cost, trace.map_correct
    );
    Ok(())
}
