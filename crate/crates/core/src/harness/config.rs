//! TOML experiment configuration and model assembly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gradient::{compute_budget, SgBudget, SyntheticMode};
use crate::mdp::{check_structural_assumptions, MdpModel, ModelSpec, StructureReport};
use crate::objective::{norm_sq, Objective, Quadratic, Rippled};
use crate::oracle::{participation_chain, NoiseKind, OracleModel};
use crate::policy::{ArmGrid, SpsaParams, StepSchedule, ThresholdPolicy, UcbParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    /// Monte-Carlo episodes per evaluated policy.
    #[serde(default = "default_episodes")]
    pub episodes: usize,
    pub oracle: OracleConfig,
    pub sg: SgConfig,
    pub mdp: MdpConfig,
    #[serde(default)]
    pub spsa: SpsaConfig,
    #[serde(default)]
    pub ucb: UcbConfig,
}

fn default_episodes() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Participation {
    pub clients: usize,
    /// Probability a client keeps its participation status between queries.
    pub stay: f64,
    /// Upper client count of each oracle state.
    pub levels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    /// `Γ(o, i)`: rows are oracle states, columns incentive levels.
    pub success: Vec<Vec<f64>>,
    /// Explicit `P_O`; exclusive with `participation`.
    #[serde(default)]
    pub transition: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub participation: Option<Participation>,
    #[serde(default)]
    pub noise_variance: f64,
    #[serde(default)]
    pub noise: NoiseKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveKind {
    #[default]
    Quadratic,
    Rippled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelerKind {
    /// The eavesdropper clusters queries perfectly.
    #[default]
    GroundTruth,
    /// Hyperplane bisecting the two starting points.
    Bisector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgConfig {
    pub dim: usize,
    /// Curvature `γ` of the synthetic bowl.
    pub lipschitz: f64,
    /// Target `ε` on `E‖∇f(x̂)‖²`.
    pub target: f64,
    /// Learner start; defaults to the all-ones vector.
    #[serde(default)]
    pub start: Option<Vec<f64>>,
    #[serde(default)]
    pub objective: ObjectiveKind,
    #[serde(default)]
    pub ripple_amplitude: f64,
    #[serde(default = "one")]
    pub ripple_frequency: f64,
    #[serde(default)]
    pub synthetic: SyntheticMode,
    /// Distance between the learner start and the obfuscation start.
    #[serde(default = "default_separation")]
    pub separation: f64,
    #[serde(default)]
    pub labeler: LabelerKind,
}

fn one() -> f64 {
    1.0
}

fn default_separation() -> f64 {
    10.0
}

/// A per-queue-state weight, given as explicit values for `b = 0..=M` or as a
/// polynomial in `x = b / M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QueueShape {
    Values(Vec<f64>),
    Poly { poly: Vec<f64> },
}

impl QueueShape {
    pub fn evaluate(&self, queue_capacity: usize) -> Result<Vec<f64>> {
        match self {
            QueueShape::Values(v) => {
                if v.len() != queue_capacity + 1 {
                    return Err(Error::Config(format!(
                        "queue shape lists {} values but M + 1 = {}",
                        v.len(),
                        queue_capacity + 1
                    )));
                }
                Ok(v.clone())
            }
            QueueShape::Poly { poly } => Ok((0..=queue_capacity)
                .map(|b| {
                    let x = b as f64 / queue_capacity as f64;
                    poly.iter().rev().fold(0.0, |acc, c| acc * x + c)
                })
                .collect()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostMode {
    /// Stage costs use the realized spend and eavesdropper belief.
    #[default]
    Realized,
    /// Stage costs use the model's reference schedule, as the DP does.
    Scheduled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpConfig {
    /// Overrides the successful-step budget derived from the SG parameters.
    #[serde(default)]
    pub queue_capacity: Option<usize>,
    pub horizon: usize,
    pub incentives: Vec<f64>,
    pub queue_weight: QueueShape,
    pub oracle_weight: Vec<f64>,
    pub terminal_cost: QueueShape,
    #[serde(default = "default_fixed_point_iterations")]
    pub fixed_point_iterations: usize,
    #[serde(default = "default_belief_floor")]
    pub belief_floor: f64,
    #[serde(default)]
    pub initial_oracle: Option<Vec<f64>>,
    #[serde(default)]
    pub cost_mode: CostMode,
}

fn default_fixed_point_iterations() -> usize {
    3
}

fn default_belief_floor() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpsaConfig {
    pub step: f64,
    pub perturbation: f64,
    pub iterations: usize,
    pub temperature: f64,
    /// Queue states per search-parameter unit; defaults to `M + 1`.
    pub scale: Option<f64>,
}

impl Default for SpsaConfig {
    fn default() -> Self {
        Self {
            step: 0.01,
            perturbation: 0.1,
            iterations: 3000,
            temperature: 1.0,
            scale: None,
        }
    }
}

impl SpsaConfig {
    pub fn params(&self, seed: u64) -> SpsaParams {
        SpsaParams {
            step: StepSchedule::Constant(self.step),
            perturbation: self.perturbation,
            iterations: self.iterations,
            seed,
            scale: self.scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UcbConfig {
    pub episodes: usize,
    pub exploration: f64,
    /// Threshold values per table entry; defaults to every queue value.
    pub grid: Option<Vec<f64>>,
    /// Allow non-monotone tables.
    pub full_grid: bool,
    /// Share one threshold row across oracle states.
    pub tied: bool,
}

impl Default for UcbConfig {
    fn default() -> Self {
        Self {
            episodes: 10_000,
            exploration: 1.0,
            grid: None,
            full_grid: false,
            tied: false,
        }
    }
}

impl UcbConfig {
    pub fn params(&self) -> UcbParams {
        UcbParams {
            episodes: self.episodes,
            exploration: self.exploration,
        }
    }

    pub fn grid(&self, queue_capacity: usize) -> ArmGrid {
        ArmGrid {
            values: self
                .grid
                .clone()
                .unwrap_or_else(|| (0..=queue_capacity).map(|b| b as f64).collect()),
            monotone: !self.full_grid,
            tied: self.tied,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(Error::Config("episodes must be at least 1".into()));
        }
        if self.mdp.horizon == 0 {
            return Err(Error::Config("horizon N must be at least 1".into()));
        }
        if self.mdp.queue_capacity == Some(0) {
            return Err(Error::Config("queue capacity M must be at least 1".into()));
        }
        if self.sg.dim == 0 {
            return Err(Error::Config("sg.dim must be at least 1".into()));
        }
        if let Some(x0) = &self.sg.start {
            if x0.len() != self.sg.dim {
                return Err(Error::Config(format!(
                    "sg.start has {} entries but sg.dim = {}",
                    x0.len(),
                    self.sg.dim
                )));
            }
        }
        let levels = self.oracle.success.first().map_or(0, Vec::len);
        if self.mdp.incentives.len() != levels {
            return Err(Error::Config(format!(
                "{} incentive values for {levels} success columns",
                self.mdp.incentives.len()
            )));
        }
        if !self.mdp.incentives.iter().all(|i| *i > 0.0)
            || !self.mdp.incentives.windows(2).all(|w| w[0] < w[1])
        {
            return Err(Error::Config(
                "incentives must be positive and increasing".into(),
            ));
        }
        if self.mdp.oracle_weight.len() != self.oracle.success.len() {
            return Err(Error::Config(format!(
                "{} oracle weights for {} oracle states",
                self.mdp.oracle_weight.len(),
                self.oracle.success.len()
            )));
        }
        match (&self.oracle.transition, &self.oracle.participation) {
            (Some(_), Some(_)) => Err(Error::Config(
                "give either oracle.transition or oracle.participation, not both".into(),
            )),
            (None, None) => Err(Error::Config(
                "oracle needs a transition matrix or a participation model".into(),
            )),
            (_, Some(p)) if p.levels.len() != self.oracle.success.len() => {
                Err(Error::Config(format!(
                    "{} participation levels for {} oracle states",
                    p.levels.len(),
                    self.oracle.success.len()
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn oracle_model(&self) -> Result<OracleModel> {
        let transition = match (&self.oracle.transition, &self.oracle.participation) {
            (Some(t), _) => t.clone(),
            (None, Some(p)) => participation_chain(p.clients, p.stay, &p.levels)?,
            (None, None) => {
                return Err(Error::Config(
                    "oracle needs a transition matrix or a participation model".into(),
                ))
            }
        };
        OracleModel::new(
            self.oracle.success.clone(),
            transition,
            self.oracle.noise_variance,
            self.oracle.noise,
        )
    }

    pub fn learner_start(&self) -> Vec<f64> {
        self.sg
            .start
            .clone()
            .unwrap_or_else(|| vec![1.0; self.sg.dim])
    }

    /// The learner's objective, with minimizer at the origin.
    pub fn objective(&self) -> Box<dyn Objective> {
        let bowl = Quadratic::centered(self.sg.lipschitz, self.sg.dim);
        match self.sg.objective {
            ObjectiveKind::Quadratic => Box::new(bowl),
            ObjectiveKind::Rippled => Box::new(Rippled {
                bowl,
                amplitude: self.sg.ripple_amplitude,
                frequency: self.sg.ripple_frequency,
            }),
        }
    }

    /// Smoothness constant of the configured objective.
    pub fn smoothness(&self) -> f64 {
        match self.sg.objective {
            ObjectiveKind::Quadratic => self.sg.lipschitz,
            ObjectiveKind::Rippled => {
                self.sg.lipschitz
                    + self.sg.ripple_amplitude.abs() * self.sg.ripple_frequency.powi(2)
            }
        }
    }

    /// Unit direction from the minimizer to the learner start.
    fn outward(&self) -> Vec<f64> {
        let x0 = self.learner_start();
        let norm = norm_sq(&x0).sqrt();
        if norm > 0.0 {
            x0.iter().map(|x| x / norm).collect()
        } else {
            let mut e = vec![0.0; self.sg.dim];
            e[0] = 1.0;
            e
        }
    }

    /// Obfuscation start `ẑ₀ = x₀ + Δ_sep·u`, with `u` pointing away from the
    /// minimizer.
    pub fn obfuscation_start(&self) -> Vec<f64> {
        let u = self.outward();
        self.learner_start()
            .iter()
            .zip(&u)
            .map(|(x, e)| x + self.sg.separation * e)
            .collect()
    }

    /// Decoy bowl centred a further `Δ_sep` beyond the obfuscation start.
    pub fn decoy(&self) -> Quadratic {
        let u = self.outward();
        let centre = self
            .obfuscation_start()
            .iter()
            .zip(&u)
            .map(|(z, e)| z + self.sg.separation * e)
            .collect();
        Quadratic::new(self.sg.lipschitz, centre)
    }

    /// Successful-step budget for the configured objective and start.
    pub fn budget(&self) -> Result<SgBudget> {
        let objective = self.objective();
        let x0 = self.learner_start();
        let minimum = objective.value(&vec![0.0; self.sg.dim]);
        let gap = objective.value(&x0) - minimum;
        compute_budget(
            gap,
            self.smoothness(),
            self.oracle.noise_variance,
            self.sg.target,
        )
    }

    pub fn queue_capacity(&self) -> Result<usize> {
        match self.mdp.queue_capacity {
            Some(m) => Ok(m),
            None => Ok(self.budget()?.steps),
        }
    }

    /// Assembles the MDP and runs the structural checks on it.
    pub fn derive_model(&self) -> Result<(MdpModel, StructureReport)> {
        let m = self.queue_capacity()?;
        let model = MdpModel::new(ModelSpec {
            queue_capacity: m,
            horizon: self.mdp.horizon,
            oracle: self.oracle_model()?,
            incentives: self.mdp.incentives.clone(),
            queue_weight: self.mdp.queue_weight.evaluate(m)?,
            oracle_weight: self.mdp.oracle_weight.clone(),
            terminal_cost: self.mdp.terminal_cost.evaluate(m)?,
            schedule: None,
            fixed_point_iterations: self.mdp.fixed_point_iterations,
            belief_floor: self.mdp.belief_floor,
            initial_oracle: self.mdp.initial_oracle.clone(),
        })?;
        let report = check_structural_assumptions(&model);
        Ok((model, report))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolicyFile {
    temperature: f64,
    thresholds: Vec<Vec<f64>>,
}

/// Threshold policy as a TOML document with `temperature` and `thresholds`.
pub fn policy_to_toml(policy: &ThresholdPolicy) -> Result<String> {
    toml::to_string(&PolicyFile {
        temperature: policy.temperature(),
        thresholds: policy.thresholds().to_vec(),
    })
    .map_err(|e| Error::Config(e.to_string()))
}

/// Parses and validates a policy written by [`policy_to_toml`].
pub fn policy_from_toml(text: &str) -> Result<ThresholdPolicy> {
    let file: PolicyFile = toml::from_str(text)?;
    ThresholdPolicy::new(file.thresholds, file.temperature)
}

#[cfg(test)]
pub(crate) mod tests_support {
    const TINY: &str = r#"
seed = 3
episodes = 20

[oracle]
success = [[0.5, 0.9]]
transition = [[1.0]]
noise_variance = 0.0
noise = "none"

[sg]
dim = 2
lipschitz = 1.0
target = 0.5

[mdp]
queue_capacity = 3
horizon = 6
incentives = [1.0, 2.0]
queue_weight = [1.0, 1.0, 1.0, 1.0]
oracle_weight = [1.0]
terminal_cost = { poly = [0.0, 0.0, 4.0] }
"#;

    pub(crate) fn tiny() -> &'static str {
        TINY
    }
}
