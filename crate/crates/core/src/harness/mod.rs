//! Experiment harness: configuration, episode simulation, evaluation and
//! benchmarking.

mod benchmark;
mod config;
mod episode;
mod output;

pub use benchmark::{
    benchmark, derived_seed, dp_stationary_surrogate, BenchmarkReport, BenchmarkRow, PolicyKind,
    SELECT_SALT, SPSA_SALT, UCB_SALT,
};
pub use config::{
    policy_from_toml, policy_to_toml, CostMode, ExperimentConfig, LabelerKind, MdpConfig,
    ObjectiveKind, OracleConfig, Participation, QueueShape, SgConfig, SpsaConfig, UcbConfig,
};
pub use episode::{
    evaluate_policy, evaluate_traces, mean_cost, run_episode, run_seeded, Environment,
    EpisodeTrace, Estimate, PolicyEvaluation, StepRecord,
};
pub use output::{write_episodes, write_spsa_trace, write_steps, write_ucb_trace};
