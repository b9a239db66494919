//! Runs the R1–R6 structural checks on a config, and on the same config with a
//! queue weight that does not depend on the queue state.
//!
//! `cargo run --example check_structure [config.toml]`

use covert::harness::{ExperimentConfig, QueueShape};

fn main() -> covert::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "configs/federated.toml".into());
    let mut config = ExperimentConfig::load(path.as_ref())?;
    let (_, report) = config.derive_model()?;
    println!("as configured:\n{report}");
    config.mdp.queue_weight = QueueShape::Poly { poly: vec![1.0] };
    let (_, flat) = config.derive_model()?;
    println!("with a flat queue weight:\n{flat}");
    Ok(())
}
