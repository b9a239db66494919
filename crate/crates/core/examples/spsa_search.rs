//! Searches stationary threshold policies with SPSA and compares the result
//! with the initial policy.
//!
//! `cargo run --release --example spsa_search [config.toml]`

use covert::harness::{derived_seed, evaluate_policy, Environment, ExperimentConfig, SPSA_SALT};
use covert::policy::{spsa_search, ThresholdPolicy};

fn main() -> covert::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "configs/federated.toml".into());
    let config = ExperimentConfig::load(path.as_ref())?;
    let env = Environment::from_config(&config)?;
    let model = &env.model;
    let initial = ThresholdPolicy::evenly_spaced(
        model.num_oracle_states(),
        model.num_actions(),
        model.queue_capacity(),
        config.spsa.temperature,
    );
    let params = config.spsa.params(derived_seed(config.seed, SPSA_SALT));
    let outcome = spsa_search(&env, &initial, model.queue_capacity(), &params)?;
    let stride = (outcome.trace.len() / 10).max(1);
    for r in outcome.trace.iter().step_by(stride) {
        println!("iteration {:>5}: paired cost {:.5}", r.iteration, r.cost());
    }
    let before = evaluate_policy(&env, &initial, config.seed, config.episodes)?;
    let after = evaluate_policy(&env, &outcome.policy, config.seed, config.episodes)?;
    println!("initial cost {:.5} ± {:.5}", before.cost.mean, before.cost.stderr);
    println!("searched cost {:.5} ± {:.5}", after.cost.mean, after.cost.stderr);
    for (o, row) in outcome.policy.thresholds().iter().enumerate() {
        println!("thresholds o = {o}: {row:.2?}");
    }
    Ok(())
}
