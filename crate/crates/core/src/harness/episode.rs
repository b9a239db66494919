//! The stochastic control loop: one episode of queries against the oracle
//! under a given policy, with the eavesdropper watching.

use rayon::prelude::*;
use serde::Serialize;

use super::config::{CostMode, ExperimentConfig, LabelerKind};
use crate::eavesdropper::{Belief, Labeler, Trajectory};
use crate::error::{Error, Result};
use crate::gradient::{DualSgState, QueryKind, SyntheticMode};
use crate::mdp::MdpModel;
use crate::objective::{norm_sq, Objective, Quadratic};
use crate::oracle::sample_index;
use crate::policy::{EpisodeCost, Policy};
use crate::rng::EpisodeStreams;

/// Everything needed to simulate episodes.
pub struct Environment {
    pub model: MdpModel,
    pub objective: Box<dyn Objective>,
    pub decoy: Quadratic,
    pub learner_start: Vec<f64>,
    pub obfuscation_start: Vec<f64>,
    pub step_size: f64,
    pub synthetic: SyntheticMode,
    pub labeler: Labeler,
    pub cost_mode: CostMode,
}

impl Environment {
    pub fn new(config: &ExperimentConfig, model: MdpModel) -> Result<Self> {
        let learner_start = config.learner_start();
        let obfuscation_start = config.obfuscation_start();
        let labeler = match config.sg.labeler {
            LabelerKind::GroundTruth => Labeler::GroundTruth,
            LabelerKind::Bisector => Labeler::bisector(&learner_start, &obfuscation_start),
        };
        Ok(Self {
            objective: config.objective(),
            decoy: config.decoy(),
            step_size: config.budget()?.step_size,
            synthetic: config.sg.synthetic,
            cost_mode: config.mdp.cost_mode,
            model,
            learner_start,
            obfuscation_start,
            labeler,
        })
    }

    /// Builds the model from the config and wraps it.
    pub fn from_config(config: &ExperimentConfig) -> Result<Self> {
        let (model, _) = config.derive_model()?;
        Self::new(config, model)
    }

    pub fn with_cost_mode(mut self, mode: CostMode) -> Self {
        self.cost_mode = mode;
        self
    }
}

/// One query of an episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepRecord {
    /// Queries remaining, counting this one.
    pub n: usize,
    pub oracle_state: usize,
    pub queue: usize,
    pub action: usize,
    pub learn: bool,
    pub incentive: f64,
    pub success: bool,
    /// Eavesdropper belief before this query.
    pub belief: f64,
    /// Unweighted stage cost.
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeTrace {
    pub steps: Vec<StepRecord>,
    pub final_queue: usize,
    pub terminal_cost: f64,
    /// Stage costs weighted by `1/N` plus the terminal cost.
    pub total_cost: f64,
    pub spend: f64,
    pub final_belief: f64,
    pub map_choice: Trajectory,
    /// Whether the eavesdropper's MAP trajectory is the learning one.
    pub map_correct: bool,
    /// `‖∇f(x̂)‖²` at the end of the episode.
    pub gradient_norm_sq: f64,
}

impl EpisodeTrace {
    pub fn completed(&self) -> bool {
        self.final_queue == 0
    }

    /// Checks the trace invariants: queue nonincreasing, decreasing only on
    /// successful learning steps, length at most `horizon`.
    pub fn validate(&self, horizon: usize, queue_capacity: usize) -> Result<()> {
        if self.steps.len() > horizon {
            return Err(Error::Numeric(format!(
                "trace has {} steps for horizon {horizon}",
                self.steps.len()
            )));
        }
        let mut b = queue_capacity;
        for (k, s) in self.steps.iter().enumerate() {
            if s.queue != b {
                return Err(Error::Numeric(format!(
                    "queue jumped to {} at step {k}, expected {b}",
                    s.queue
                )));
            }
            if s.success && !s.learn {
                return Err(Error::Numeric(format!(
                    "obfuscating step {k} marked successful"
                )));
            }
            if s.success {
                b -= 1;
            }
        }
        if b != self.final_queue {
            return Err(Error::Numeric(format!(
                "final queue {} disagrees with the step record {b}",
                self.final_queue
            )));
        }
        Ok(())
    }
}

/// Runs one episode: action from the policy, stage cost, query, oracle reply,
/// dual-SG update, queue decrement on success, oracle state step; terminal
/// cost at the end. All randomness comes from `streams`.
pub fn run_episode(
    env: &Environment,
    policy: &dyn Policy,
    streams: &mut EpisodeStreams,
) -> Result<EpisodeTrace> {
    let model = &env.model;
    let oracle = model.oracle();
    let horizon = model.horizon();
    let actions = model.num_actions();
    let weight = model.stage_weight();

    let mut sg = DualSgState::new(
        env.learner_start.clone(),
        env.obfuscation_start.clone(),
        env.step_size,
    )?;
    let mut o = sample_index(
        model.initial_oracle(),
        rand::Rng::random(&mut streams.oracle_state),
    );
    let mut b = model.queue_capacity();
    let mut belief = Belief::new();
    let mut spent = 0.0;
    let mut total = 0.0;
    let mut steps = Vec::with_capacity(horizon);

    for n in (1..=horizon).rev() {
        let step = horizon - n;
        let u = policy.action(n, o, b, &mut streams.policy);
        if u >= actions {
            return Err(Error::index("action", u, actions).at_step(step));
        }
        let action = model.action(u)?;
        let incentive = model.incentives()[action.incentive];
        let delta = belief.delta();
        let cost = match env.cost_mode {
            CostMode::Realized => model.stage_cost_clamped(b, o, u, spent, delta),
            CostMode::Scheduled => model.scheduled_cost(n, b, o, u),
        }
        .map_err(|e| e.at_step(step))?;

        let query = sg.make_query(action.kind).to_vec();
        let response = oracle
            .respond(
                &query,
                o,
                action.incentive,
                env.objective.as_ref(),
                &mut streams.reply,
                &mut streams.noise,
            )
            .map_err(|e| e.at_step(step))?;
        let success = action.kind == QueryKind::Learn && response.success && b > 0;
        match action.kind {
            QueryKind::Learn if b > 0 => sg.update(action.kind, &response, &[]),
            QueryKind::Learn => Ok(()),
            QueryKind::Obfuscate => {
                let decoy: &dyn Objective = &env.decoy;
                let synthetic = sg
                    .synthetic_response(env.synthetic, Some(decoy), oracle, &mut streams.synthetic)
                    .map_err(|e| e.at_step(step))?;
                sg.update(action.kind, &response, &synthetic)
            }
        }
        .map_err(|e| e.at_step(step))?;

        belief.observe(env.labeler.classify(&query, action.kind), incentive);
        steps.push(StepRecord {
            n,
            oracle_state: o,
            queue: b,
            action: u,
            learn: action.kind.is_learn(),
            incentive,
            success,
            belief: delta,
            cost,
        });
        total += weight * cost;
        spent += incentive;
        if success {
            b -= 1;
        }
        o = oracle
            .step_state(o, &mut streams.oracle_state)
            .map_err(|e| e.at_step(step))?;
    }

    let terminal_cost = model.terminal_cost()[b];
    let map_choice = belief.map_choice();
    let trace = EpisodeTrace {
        steps,
        final_queue: b,
        terminal_cost,
        total_cost: total + terminal_cost,
        spend: spent,
        final_belief: belief.delta(),
        map_choice,
        map_correct: map_choice == Trajectory::One,
        gradient_norm_sq: norm_sq(&env.objective.gradient(&sg.learn_estimate)),
    };
    trace.validate(horizon, model.queue_capacity())?;
    Ok(trace)
}

/// Episode `episode` of the run seeded by `seed`.
pub fn run_seeded(
    env: &Environment,
    policy: &dyn Policy,
    seed: u64,
    episode: u64,
) -> Result<EpisodeTrace> {
    run_episode(env, policy, &mut EpisodeStreams::new(seed, episode))
}

impl EpisodeCost for Environment {
    fn episode_cost(&self, policy: &dyn Policy, seed: u64, episode: u64) -> Result<f64> {
        Ok(run_seeded(self, policy, seed, episode)?.total_cost)
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        if samples.is_empty() {
            return Self {
                mean: f64::NAN,
                stderr: f64::NAN,
            };
        }
        let mean = samples.iter().sum::<f64>() / n;
        let var = if samples.len() > 1 {
            samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            stderr: (var / n).sqrt(),
        }
    }
}

/// Monte-Carlo summary of a policy over episodes `0..episodes`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyEvaluation {
    pub episodes: usize,
    pub cost: Estimate,
    pub completion_rate: f64,
    pub map_correct_rate: f64,
    pub spend: Estimate,
    pub gradient_norm_sq: Estimate,
    pub final_queue: Estimate,
}

/// Runs the episodes in parallel and aggregates in episode order, so the
/// result depends only on `(policy, seed, episodes)`.
pub fn evaluate_traces<F, T>(episodes: usize, run: F) -> Result<Vec<T>>
where
    F: Fn(u64) -> Result<T> + Sync + Send,
    T: Send,
{
    (0..episodes as u64).into_par_iter().map(run).collect()
}

pub fn evaluate_policy(
    env: &Environment,
    policy: &dyn Policy,
    seed: u64,
    episodes: usize,
) -> Result<PolicyEvaluation> {
    if episodes == 0 {
        return Err(Error::Config(
            "evaluation needs at least one episode".into(),
        ));
    }
    let traces = evaluate_traces(episodes, |k| run_seeded(env, policy, seed, k))?;
    let collect = |f: &dyn Fn(&EpisodeTrace) -> f64| -> Vec<f64> { traces.iter().map(f).collect() };
    let n = episodes as f64;
    Ok(PolicyEvaluation {
        episodes,
        cost: Estimate::from_samples(&collect(&|t| t.total_cost)),
        completion_rate: traces.iter().filter(|t| t.completed()).count() as f64 / n,
        map_correct_rate: traces.iter().filter(|t| t.map_correct).count() as f64 / n,
        spend: Estimate::from_samples(&collect(&|t| t.spend)),
        gradient_norm_sq: Estimate::from_samples(&collect(&|t| t.gradient_norm_sq)),
        final_queue: Estimate::from_samples(&collect(&|t| t.final_queue as f64)),
    })
}

/// Mean episode cost only.
pub fn mean_cost<E: EpisodeCost + ?Sized>(
    env: &E,
    policy: &dyn Policy,
    seed: u64,
    episodes: usize,
) -> Result<Estimate> {
    let costs = evaluate_traces(episodes, |k| env.episode_cost(policy, seed, k))?;
    Ok(Estimate::from_samples(&costs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{Constant, UniformRandom};

    fn env(success: f64) -> Environment {
        let text = crate::harness::config::tests_support::tiny()
            .replace("0.5, 0.9", &format!("{success}, {success}"));
        Environment::from_config(&ExperimentConfig::from_toml(&text).unwrap()).unwrap()
    }

    #[test]
    fn always_obfuscate_keeps_queue_full() {
        let e = env(0.9);
        let t = run_seeded(&e, &Constant(1), 1, 0).unwrap();
        assert!(t.steps.iter().all(|s| s.queue == 3 && s.cost <= 0.0));
        assert_eq!(t.final_queue, 3);
        assert!(!t.map_correct);
    }

    #[test]
    fn certain_success_empties_queue_in_m_steps() {
        let e = env(1.0);
        let t = run_seeded(&e, &Constant(2), 1, 0).unwrap();
        let hit = t.steps.iter().position(|s| s.queue == 0).unwrap();
        assert_eq!(hit, 3);
        assert!(t.completed());
        assert!(t.map_correct);
        assert_eq!(t.spend, 6.0);
    }

    #[test]
    fn trace_total_is_weighted_sum() {
        let e = env(0.5);
        let t = run_seeded(&e, &UniformRandom { actions: 4 }, 4, 2).unwrap();
        let sum: f64 = t.steps.iter().map(|s| s.cost).sum::<f64>() / 6.0 + t.terminal_cost;
        assert!((sum - t.total_cost).abs() < 1e-12);
        assert_eq!(
            e.episode_cost(&UniformRandom { actions: 4 }, 4, 2).unwrap(),
            t.total_cost
        );
    }

    #[test]
    fn evaluation_is_deterministic() {
        let e = env(0.5);
        let p = UniformRandom { actions: 4 };
        let a = evaluate_policy(&e, &p, 8, 64).unwrap();
        let b = evaluate_policy(&e, &p, 8, 64).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn estimate_of_constant_samples() {
        let e = Estimate::from_samples(&[2.0; 5]);
        assert_eq!(e.mean, 2.0);
        assert_eq!(e.stderr, 0.0);
    }
}
