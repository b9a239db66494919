//! Policy comparison: DP, searched threshold policies, greedy and random.

use std::fmt;
use std::path::Path;

use serde::Serialize;

use super::config::ExperimentConfig;
use super::episode::{evaluate_policy, mean_cost, Environment, Estimate, PolicyEvaluation};
use crate::error::Result;
use crate::mdp::{solve_dp, DpSolution};
use crate::policy::{spsa_search, ucb_search, Constant, Policy, ThresholdPolicy, UniformRandom};

/// Seed offsets giving search, selection and evaluation disjoint streams.
pub const SELECT_SALT: u64 = 0x005e_1ec7;
pub const SPSA_SALT: u64 = 0x5b5a;
pub const UCB_SALT: u64 = 0x0cb;

pub fn derived_seed(seed: u64, salt: u64) -> u64 {
    seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    /// Non-stationary DP policy table.
    DpOptimal,
    /// Best threshold table read off a single DP stage.
    DpStationary,
    Spsa,
    Ucb,
    /// Learn at the highest incentive on every query.
    Greedy,
    /// Uniform over all actions.
    Random,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 6] = [
        PolicyKind::DpOptimal,
        PolicyKind::DpStationary,
        PolicyKind::Spsa,
        PolicyKind::Ucb,
        PolicyKind::Greedy,
        PolicyKind::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::DpOptimal => "dp-optimal",
            PolicyKind::DpStationary => "dp-optimal-stationary",
            PolicyKind::Spsa => "spsa",
            PolicyKind::Ucb => "ucb",
            PolicyKind::Greedy => "greedy",
            PolicyKind::Random => "random",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Reads a threshold table off every DP stage and keeps the one with the
/// lowest Monte-Carlo cost over `episodes` selection episodes.
pub fn dp_stationary_surrogate(
    env: &Environment,
    solution: &DpSolution,
    temperature: f64,
    seed: u64,
    episodes: usize,
) -> Result<(ThresholdPolicy, Estimate)> {
    let actions = env.model.num_actions();
    let mut candidates: Vec<ThresholdPolicy> = Vec::new();
    for n in 1..=env.model.horizon() {
        let p = ThresholdPolicy::from_policy_stage(&solution.policy, n, actions, temperature);
        if !candidates.contains(&p) {
            candidates.push(p);
        }
    }
    let mut best: Option<(ThresholdPolicy, Estimate)> = None;
    for p in candidates {
        let est = mean_cost(env, &p, seed, episodes)?;
        if best.as_ref().is_none_or(|(_, b)| est.mean < b.mean) {
            best = Some((p, est));
        }
    }
    Ok(best.expect("horizon is at least one"))
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkRow {
    pub policy: PolicyKind,
    #[serde(flatten)]
    pub evaluation: PolicyEvaluation,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkReport {
    pub seed: u64,
    pub episodes: usize,
    pub queue_capacity: usize,
    pub horizon: usize,
    /// Optimal expected cost from a full queue, averaged over the initial
    /// oracle distribution.
    pub dp_value: Option<f64>,
    pub rows: Vec<BenchmarkRow>,
    /// Threshold tables of the searched policies.
    pub policies: Vec<(PolicyKind, ThresholdPolicy)>,
    /// Policies that could not be run, with the reason.
    pub skipped: Vec<(PolicyKind, String)>,
}

impl BenchmarkReport {
    pub fn row(&self, kind: PolicyKind) -> Option<&PolicyEvaluation> {
        self.rows
            .iter()
            .find(|r| r.policy == kind)
            .map(|r| &r.evaluation)
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "policy",
            "episodes",
            "mean_cost",
            "cost_stderr",
            "completion_rate",
            "map_correct_rate",
            "mean_spend",
            "mean_grad_norm_sq",
            "mean_final_queue",
        ])?;
        for r in &self.rows {
            let e = &r.evaluation;
            w.write_record([
                r.policy.name().to_string(),
                e.episodes.to_string(),
                format!("{:.9}", e.cost.mean),
                format!("{:.9}", e.cost.stderr),
                format!("{:.6}", e.completion_rate),
                format!("{:.6}", e.map_correct_rate),
                format!("{:.6}", e.spend.mean),
                format!("{:.9}", e.gradient_norm_sq.mean),
                format!("{:.6}", e.final_queue.mean),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `benchmark.csv` and `benchmark.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.write_csv(std::fs::File::create(dir.join("benchmark.csv"))?)?;
        std::fs::write(
            dir.join("benchmark.json"),
            serde_json::to_string_pretty(self)?,
        )?;
        Ok(())
    }
}

impl fmt::Display for BenchmarkReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<22} {:>12} {:>10} {:>10} {:>10} {:>10}",
            "policy", "cost", "±stderr", "complete", "map-ok", "spend"
        )?;
        for r in &self.rows {
            let e = &r.evaluation;
            writeln!(
                f,
                "{:<22} {:>12.5} {:>10.5} {:>10.3} {:>10.3} {:>10.2}",
                r.policy.name(),
                e.cost.mean,
                e.cost.stderr,
                e.completion_rate,
                e.map_correct_rate,
                e.spend.mean
            )?;
        }
        for (k, why) in &self.skipped {
            writeln!(f, "{k}: skipped ({why})")?;
        }
        Ok(())
    }
}

/// Evaluates each requested policy on episodes `0..episodes` of the master
/// seed. Searches and surrogate selection draw from derived seeds.
pub fn benchmark(
    config: &ExperimentConfig,
    env: &Environment,
    kinds: &[PolicyKind],
) -> Result<BenchmarkReport> {
    let seed = config.seed;
    let episodes = config.episodes;
    let model = &env.model;
    let actions = model.num_actions();
    let needs_dp = kinds
        .iter()
        .any(|k| matches!(k, PolicyKind::DpOptimal | PolicyKind::DpStationary));
    let solution = if needs_dp {
        Some(solve_dp(model)?)
    } else {
        None
    };
    let dp_value = solution.as_ref().map(|s| {
        model
            .initial_oracle()
            .iter()
            .enumerate()
            .map(|(o, p)| p * s.value_at_start(o))
            .sum()
    });

    let mut report = BenchmarkReport {
        seed,
        episodes,
        queue_capacity: model.queue_capacity(),
        horizon: model.horizon(),
        dp_value,
        rows: Vec::new(),
        policies: Vec::new(),
        skipped: Vec::new(),
    };
    for &kind in kinds {
        let policy: Box<dyn Policy> = match kind {
            PolicyKind::DpOptimal => Box::new(solution.as_ref().expect("solved").policy.clone()),
            PolicyKind::DpStationary => {
                let (p, _) = dp_stationary_surrogate(
                    env,
                    solution.as_ref().expect("solved"),
                    config.spsa.temperature,
                    derived_seed(seed, SELECT_SALT),
                    episodes,
                )?;
                report.policies.push((kind, p.clone()));
                Box::new(p)
            }
            PolicyKind::Spsa => {
                let initial = ThresholdPolicy::evenly_spaced(
                    model.num_oracle_states(),
                    actions,
                    model.queue_capacity(),
                    config.spsa.temperature,
                );
                let out = spsa_search(
                    env,
                    &initial,
                    model.queue_capacity(),
                    &config.spsa.params(derived_seed(seed, SPSA_SALT)),
                )?;
                report.policies.push((kind, out.policy.clone()));
                Box::new(out.policy)
            }
            PolicyKind::Ucb => {
                let grid = config.ucb.grid(model.queue_capacity());
                match ucb_search(
                    env,
                    &grid,
                    model.num_oracle_states(),
                    actions,
                    &config.ucb.params(),
                    derived_seed(seed, UCB_SALT),
                    None,
                ) {
                    Ok(out) => {
                        report.policies.push((kind, out.best.clone()));
                        Box::new(out.best)
                    }
                    Err(e) => {
                        report.skipped.push((kind, e.to_string()));
                        continue;
                    }
                }
            }
            PolicyKind::Greedy => Box::new(Constant(actions - 1)),
            PolicyKind::Random => Box::new(UniformRandom { actions }),
        };
        let evaluation = evaluate_policy(env, policy.as_ref(), seed, episodes)?;
        report.rows.push(BenchmarkRow {
            policy: kind,
            evaluation,
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::tests_support::tiny;

    #[test]
    fn tiny_benchmark_runs_and_writes() {
        let mut cfg = ExperimentConfig::from_toml(tiny()).unwrap();
        cfg.spsa.iterations = 50;
        cfg.ucb.episodes = 200;
        let env = Environment::from_config(&cfg).unwrap();
        let report = benchmark(&cfg, &env, &PolicyKind::ALL).unwrap();
        assert_eq!(report.rows.len() + report.skipped.len(), 6);
        let greedy = report.row(PolicyKind::Greedy).unwrap();
        assert_eq!(greedy.spend.mean, 12.0);
        assert_eq!(greedy.map_correct_rate, 1.0);
        let dir = tempfile::tempdir().unwrap();
        report.write(dir.path()).unwrap();
        let csv = std::fs::read_to_string(dir.path().join("benchmark.csv")).unwrap();
        assert_eq!(csv.lines().count(), report.rows.len() + 1);
        assert!(dir.path().join("benchmark.json").exists());
    }

    #[test]
    fn dp_row_is_no_worse_than_heuristics_in_scheduled_mode() {
        let mut cfg = ExperimentConfig::from_toml(tiny()).unwrap();
        cfg.mdp.cost_mode = crate::harness::CostMode::Scheduled;
        cfg.mdp.fixed_point_iterations = 0;
        cfg.episodes = 4000;
        let env = Environment::from_config(&cfg).unwrap();
        let report = benchmark(
            &cfg,
            &env,
            &[
                PolicyKind::DpOptimal,
                PolicyKind::Greedy,
                PolicyKind::Random,
            ],
        )
        .unwrap();
        let dp = report.row(PolicyKind::DpOptimal).unwrap().cost;
        assert!((dp.mean - report.dp_value.unwrap()).abs() < 4.0 * dp.stderr + 1e-9);
        for k in [PolicyKind::Greedy, PolicyKind::Random] {
            let e = report.row(k).unwrap().cost;
            assert!(dp.mean <= e.mean + 3.0 * (dp.stderr + e.stderr), "{k}");
        }
    }
}
