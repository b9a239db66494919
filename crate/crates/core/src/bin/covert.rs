use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use covert::harness::{
    benchmark, derived_seed, dp_stationary_surrogate, evaluate_policy, evaluate_traces,
    policy_from_toml, policy_to_toml, run_seeded, write_episodes, write_spsa_trace, write_steps,
    write_ucb_trace, Environment, ExperimentConfig, PolicyKind, SELECT_SALT, SPSA_SALT, UCB_SALT,
};
use covert::mdp::{check_value_shape, solve_dp, verify_threshold_structure};
use covert::policy::{spsa_search, ucb_search, Constant, Policy, ThresholdPolicy, UniformRandom};

#[derive(Parser)]
#[command(name = "covert", about = "Covert stochastic optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (TOML).
    #[arg(long, global = true, default_value = "configs/federated.toml")]
    config: PathBuf,
    /// Overrides the master seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the Monte-Carlo episode count in the config.
    #[arg(long, global = true)]
    episodes: Option<usize>,
    /// Directory for CSV and JSON outputs.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the MDP by backward induction and report its structure.
    Solve,
    /// Search threshold policies with SPSA.
    SearchSpsa,
    /// Search threshold policies with UCB over a threshold grid.
    SearchUcb,
    /// Simulate episodes of one policy.
    Simulate {
        #[arg(long, value_enum, default_value = "greedy")]
        policy: SimPolicy,
        /// Threshold policy file; overrides `--policy`.
        #[arg(long)]
        thresholds: Option<PathBuf>,
    },
    /// Compare DP, searched, greedy and random policies.
    Benchmark,
    /// Run the structural assumption checks.
    Check,
}

#[derive(Clone, Copy, ValueEnum)]
enum SimPolicy {
    DpOptimal,
    DpStationary,
    Greedy,
    Random,
}

fn write_json(dir: &Path, name: &str, value: &serde_json::Value) -> covert::Result<()> {
    fs::write(dir.join(name), serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn run(cli: Cli) -> covert::Result<()> {
    let mut config = ExperimentConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(episodes) = cli.episodes {
        config.episodes = episodes;
        config.validate()?;
    }
    let out = cli.out_dir.as_path();
    fs::create_dir_all(out)?;
    let (model, report) = config.derive_model()?;
    let env = Environment::new(&config, model)?;
    let model = &env.model;

    match cli.command {
        Command::Check => {
            print!("{report}");
            write_json(
                out,
                "check.json",
                &json!({ "passes": report.passes(), "report": report }),
            )?;
        }
        Command::Solve => {
            print!("{report}");
            let solution = solve_dp(model)?;
            let threshold = verify_threshold_structure(&solution.policy);
            let shape = check_value_shape(&solution.values);
            solution.write_csv(File::create(out.join("dp_policy.csv"))?)?;
            let starts: Vec<f64> = (0..model.num_oracle_states())
                .map(|o| solution.value_at_start(o))
                .collect();
            println!("schedule refinement rounds: {}", solution.rounds);
            println!("V(N, o, M) per oracle state: {starts:?}");
            println!(
                "threshold structure: {}",
                if threshold.passes() {
                    "monotone"
                } else {
                    "violated"
                }
            );
            println!("value shape violations: {}", shape.len());
            write_json(
                out,
                "solve.json",
                &json!({
                    "queue_capacity": model.queue_capacity(),
                    "horizon": model.horizon(),
                    "actions": model.num_actions(),
                    "rounds": solution.rounds,
                    "value_at_start": starts,
                    "threshold_structure": threshold.passes(),
                    "threshold_violations": threshold.violations.len(),
                    "value_shape_violations": shape.len(),
                    "assumptions": report,
                    "schedule": solution.schedule.entries(),
                }),
            )?;
        }
        Command::SearchSpsa => {
            let initial = ThresholdPolicy::evenly_spaced(
                model.num_oracle_states(),
                model.num_actions(),
                model.queue_capacity(),
                config.spsa.temperature,
            );
            let params = config.spsa.params(derived_seed(config.seed, SPSA_SALT));
            let outcome = spsa_search(&env, &initial, model.queue_capacity(), &params)?;
            write_spsa_trace(File::create(out.join("spsa_trace.csv"))?, &outcome.trace)?;
            fs::write(
                out.join("spsa_policy.toml"),
                policy_to_toml(&outcome.policy)?,
            )?;
            let eval = evaluate_policy(&env, &outcome.policy, config.seed, config.episodes)?;
            println!("thresholds: {:?}", outcome.policy.thresholds());
            println!("cost {:.6} ± {:.6}", eval.cost.mean, eval.cost.stderr);
            write_json(
                out,
                "spsa.json",
                &json!({ "policy": outcome.policy, "evaluation": eval }),
            )?;
        }
        Command::SearchUcb => {
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
            write_ucb_trace(File::create(out.join("ucb_trace.csv"))?, &outcome.state)?;
            fs::write(out.join("ucb_policy.toml"), policy_to_toml(&outcome.best)?)?;
            let eval = evaluate_policy(&env, &outcome.best, config.seed, config.episodes)?;
            println!(
                "arms: {}, best arm: {}",
                outcome.arms.len(),
                outcome.best_arm
            );
            println!("thresholds: {:?}", outcome.best.thresholds());
            println!("cost {:.6} ± {:.6}", eval.cost.mean, eval.cost.stderr);
            write_json(
                out,
                "ucb.json",
                &json!({
                    "arms": outcome.arms.len(),
                    "best_arm": outcome.best_arm,
                    "policy": outcome.best,
                    "counts": outcome.state.counts,
                    "means": outcome.state.means,
                    "evaluation": eval,
                }),
            )?;
        }
        Command::Simulate { policy, thresholds } => {
            let chosen: Box<dyn Policy> = match (thresholds, policy) {
                (Some(path), _) => Box::new(policy_from_toml(&fs::read_to_string(path)?)?),
                (None, SimPolicy::Greedy) => Box::new(Constant(model.num_actions() - 1)),
                (None, SimPolicy::Random) => Box::new(UniformRandom {
                    actions: model.num_actions(),
                }),
                (None, SimPolicy::DpOptimal) => Box::new(solve_dp(model)?.policy),
                (None, SimPolicy::DpStationary) => {
                    let solution = solve_dp(model)?;
                    let seed = derived_seed(config.seed, SELECT_SALT);
                    let (p, _) = dp_stationary_surrogate(
                        &env,
                        &solution,
                        config.spsa.temperature,
                        seed,
                        config.episodes,
                    )?;
                    Box::new(p)
                }
            };
            let traces = evaluate_traces(config.episodes, |k| {
                run_seeded(&env, chosen.as_ref(), config.seed, k)
            })?;
            write_episodes(File::create(out.join("episodes.csv"))?, &traces)?;
            write_steps(File::create(out.join("episode0_steps.csv"))?, &traces[0])?;
            let eval = evaluate_policy(&env, chosen.as_ref(), config.seed, config.episodes)?;
            println!(
                "cost {:.6} ± {:.6}, completion {:.3}, MAP-correct {:.3}, spend {:.2}",
                eval.cost.mean,
                eval.cost.stderr,
                eval.completion_rate,
                eval.map_correct_rate,
                eval.spend.mean
            );
            write_json(out, "simulate.json", &json!({ "evaluation": eval }))?;
        }
        Command::Benchmark => {
            let result = benchmark(&config, &env, &PolicyKind::ALL)?;
            print!("{result}");
            result.write(out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
