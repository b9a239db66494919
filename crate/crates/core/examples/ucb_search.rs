//! Treats every threshold table on a grid as a bandit arm and runs UCB.
//!
//! `cargo run --release --example ucb_search [config.toml]`

use covert::harness::{derived_seed, Environment, ExperimentConfig, UCB_SALT};
use covert::policy::ucb_search;

fn main() -> covert::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "configs/tiny.toml".into());
    let config = ExperimentConfig::load(path.as_ref())?;
    let env = Environment::from_config(&config)?;
    let model = &env.model;
    let grid = config.ucb.grid(model.queue_capacity());
    let outcome = ucb_search(
        &env,
        &grid,
        model.num_oracle_states(),
        model.num_actions(),
        &config.ucb.params(),
        derived_seed(config.seed, UCB_SALT),
        None,
    )?;
    let state = &outcome.state;
    println!("{} arms over {} episodes", outcome.arms.len(), state.episodes);
    let mut order: Vec<usize> = (0..outcome.arms.len()).collect();
    order.sort_by_key(|a| std::cmp::Reverse(state.counts[*a]));
    for &a in order.iter().take(5) {
        println!(
            "arm {a:>4}: pulls {:>6}, mean cost {:.5}, thresholds {:?}",
            state.counts[a],
            -state.means[a],
            outcome.arms[a].thresholds()
        );
    }
    println!("selected arm {} with thresholds {:?}", outcome.best_arm, outcome.best.thresholds());
    Ok(())
}
