//! Compares DP, searched, greedy and random policies on one config.
//!
//! `cargo run --release --example benchmark [config.toml]`

use covert::harness::{benchmark, Environment, ExperimentConfig, PolicyKind};

fn main() -> covert::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "configs/federated.toml".into());
    let config = ExperimentConfig::load(path.as_ref())?;
    let env = Environment::from_config(&config)?;
    let report = benchmark(&config, &env, &PolicyKind::ALL)?;
    if let Some(v) = report.dp_value {
        println!("DP value from a full queue: {v:.5}");
    }
    print!("{report}");
    Ok(())
}
