//! Runs the learning and obfuscating gradient recursions side by side until
//! the learner has made its budget of successful steps.
//!
//! `cargo run --example dual_sg [config.toml]`

use covert::gradient::{DualSgState, QueryKind};
use covert::harness::ExperimentConfig;
use covert::objective::norm_sq;
use covert::rng::stream;
use rand::Rng;

fn main() -> covert::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "configs/federated.toml".into());
    let config = ExperimentConfig::load(path.as_ref())?;
    let budget = config.budget()?;
    println!(
        "F = {:.3}, gamma = {}, sigma^2 = {}, epsilon = {} -> M = {}, mu = {:.4}",
        budget.initial_gap, budget.lipschitz, budget.noise_variance, budget.target, budget.steps, budget.step_size
    );
    let oracle = config.oracle_model()?;
    let objective = config.objective();
    let decoy = config.decoy();
    let mut sg = DualSgState::new(config.learner_start(), config.obfuscation_start(), budget.step_size)?;
    let (mut reply, mut noise, mut coin, mut synth) =
        (stream(1, 0), stream(1, 1), stream(1, 2), stream(1, 3));
    let top = oracle.num_incentives() - 1;
    let mut queries = 0;
    while sg.successful_steps < budget.steps {
        queries += 1;
        let kind = if coin.random_bool(0.5) { QueryKind::Learn } else { QueryKind::Obfuscate };
        let query = sg.make_query(kind).to_vec();
        let response = oracle.respond(&query, 0, top, objective.as_ref(), &mut reply, &mut noise)?;
        let synthetic = match kind {
            QueryKind::Learn => Vec::new(),
            QueryKind::Obfuscate => sg.synthetic_response(config.sg.synthetic, Some(&decoy), &oracle, &mut synth)?,
        };
        sg.update(kind, &response, &synthetic)?;
    }
    println!("{queries} queries for {} successful learning steps", sg.successful_steps);
    println!("|grad f(x_hat)|^2 = {:.4}", norm_sq(&objective.gradient(&sg.learn_estimate)));
    println!("learner estimate:    {:.3?}", sg.learn_estimate);
    println!("obfuscator estimate: {:.3?}", sg.obfuscate_estimate);
    Ok(())
}
