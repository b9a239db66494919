//! Builds the oracle from the federated participation model and samples it.
//!
//! `cargo run --example oracle_sampling [config.toml]`

use covert::harness::ExperimentConfig;
use covert::objective::Quadratic;
use covert::rng::stream;

fn main() -> covert::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "configs/federated.toml".into());
    let config = ExperimentConfig::load(path.as_ref())?;
    let oracle = config.oracle_model()?;
    println!("oracle states: {}, incentive levels: {}", oracle.num_states(), oracle.num_incentives());
    for (o, row) in oracle.transition_matrix().iter().enumerate() {
        let row: Vec<String> = row.iter().map(|p| format!("{p:.4}")).collect();
        println!("P_O row {o}: [{}]", row.join(", "));
    }
    let pi = oracle.stationary_distribution();
    println!("stationary distribution: {pi:.4?}");

    let objective = Quadratic::centered(1.0, config.sg.dim);
    let query = vec![1.0; config.sg.dim];
    let draws = 20_000;
    let mut reply = stream(config.seed, 0);
    let mut noise = stream(config.seed, 1);
    for o in 0..oracle.num_states() {
        let mut line = format!("state {o}:");
        for i in 0..oracle.num_incentives() {
            let mut hits = 0;
            for _ in 0..draws {
                if oracle.respond(&query, o, i, &objective, &mut reply, &mut noise)?.success {
                    hits += 1;
                }
            }
            line += &format!(
                "  Γ={:.2} observed={:.3}",
                oracle.success_probability(o, i)?,
                hits as f64 / draws as f64
            );
        }
        println!("{line}");
    }
    Ok(())
}
