//! Simultaneous perturbation stochastic approximation over policy
//! parameters.
//!
//! Each iteration flips an independent fair ±1 sign per parameter, runs one
//! episode at `Θ + δΔ` and one at `Θ − δΔ` on common random numbers, and steps
//! along `(C⁺ − C⁻)/(2δΔ_j)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{EpisodeCost, Smoothed, ThresholdPolicy};
use crate::error::{Error, Result};
use crate::rng::stream;

/// Step size `φ_k` per iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepSchedule {
    Constant(f64),
    /// `a / (k + 1 + offset)^exponent`.
    Decaying {
        a: f64,
        offset: f64,
        exponent: f64,
    },
}

impl StepSchedule {
    pub fn at(&self, k: usize) -> f64 {
        match *self {
            StepSchedule::Constant(phi) => phi,
            StepSchedule::Decaying {
                a,
                offset,
                exponent,
            } => a / (k as f64 + 1.0 + offset).powf(exponent),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpsaParams {
    pub step: StepSchedule,
    /// Perturbation magnitude `δ`.
    pub perturbation: f64,
    pub iterations: usize,
    pub seed: u64,
    /// Queue states per unit of search parameter in [`spsa_search`];
    /// `None` uses `M + 1`, so parameters are fractions of the queue range.
    #[serde(default)]
    pub scale: Option<f64>,
}

/// One row of the search trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpsaRecord {
    pub iteration: usize,
    pub cost_plus: f64,
    pub cost_minus: f64,
    pub parameters: Vec<f64>,
}

impl SpsaRecord {
    pub fn cost(&self) -> f64 {
        0.5 * (self.cost_plus + self.cost_minus)
    }
}

/// Salt separating the perturbation stream from episode streams.
const SIGN_STREAM: u64 = u64::MAX - 17;

/// Generic SPSA loop. `cost(θ, k)` evaluates parameters on the random
/// numbers of iteration `k`; `project` restores feasibility after each step.
pub fn spsa_minimize<F, P>(
    initial: Vec<f64>,
    params: &SpsaParams,
    mut cost: F,
    mut project: P,
) -> Result<(Vec<f64>, Vec<SpsaRecord>)>
where
    F: FnMut(&[f64], u64) -> Result<f64>,
    P: FnMut(&mut [f64]),
{
    if !(params.perturbation > 0.0) {
        return Err(Error::Config(format!(
            "SPSA perturbation must be positive, got {}",
            params.perturbation
        )));
    }
    let mut theta = initial;
    let mut signs_rng = stream(params.seed, SIGN_STREAM);
    let mut trace = Vec::with_capacity(params.iterations);
    let delta = params.perturbation;
    for k in 0..params.iterations {
        let signs: Vec<f64> = theta
            .iter()
            .map(|_| {
                if signs_rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect();
        let plus: Vec<f64> = theta
            .iter()
            .zip(&signs)
            .map(|(t, s)| t + delta * s)
            .collect();
        let minus: Vec<f64> = theta
            .iter()
            .zip(&signs)
            .map(|(t, s)| t - delta * s)
            .collect();
        let c_plus = cost(&plus, k as u64)?;
        let c_minus = cost(&minus, k as u64)?;
        let phi = params.step.at(k);
        let diff = c_plus - c_minus;
        for (t, s) in theta.iter_mut().zip(&signs) {
            *t -= phi * diff / (2.0 * delta * s);
        }
        project(&mut theta);
        trace.push(SpsaRecord {
            iteration: k,
            cost_plus: c_plus,
            cost_minus: c_minus,
            parameters: theta.clone(),
        });
    }
    Ok((theta, trace))
}

#[derive(Debug, Clone)]
pub struct SpsaOutcome {
    pub policy: ThresholdPolicy,
    pub trace: Vec<SpsaRecord>,
}

/// SPSA over the thresholds of a stationary policy, acting through the
/// sigmoid approximation.
///
/// The search runs on rescaled thresholds `Ȳ / s`, with `s` from
/// [`SpsaParams::scale`], so the step and perturbation sizes are measured in
/// units of `s` queue states. After each step every row is projected onto the
/// nondecreasing cone and clamped into `[0, (M + 1)/s]`. Trace parameters are
/// reported in queue units.
pub fn spsa_search<E: EpisodeCost + ?Sized>(
    env: &E,
    initial: &ThresholdPolicy,
    queue_capacity: usize,
    params: &SpsaParams,
) -> Result<SpsaOutcome> {
    let actions = initial.num_actions();
    let rows = initial.num_oracle_states();
    let tau = initial.temperature();
    let upper = (queue_capacity + 1) as f64;
    let scale = params.scale.unwrap_or(upper);
    if !(scale > 0.0) {
        return Err(Error::Config(format!(
            "SPSA scale must be positive, got {scale}"
        )));
    }
    let to_table = |theta: &[f64]| -> Vec<Vec<f64>> {
        theta
            .chunks(actions)
            .map(|row| row.iter().map(|t| t * scale).collect())
            .collect()
    };
    let start: Vec<f64> = initial.parameters().iter().map(|t| t / scale).collect();
    let (theta, mut trace) = spsa_minimize(
        start,
        params,
        |theta, k| {
            let policy = Smoothed(ThresholdPolicy::unchecked(to_table(theta), tau));
            env.episode_cost(&policy, params.seed, k)
        },
        |theta| ThresholdPolicy::project(theta, actions, 0.0, upper / scale),
    )?;
    debug_assert_eq!(theta.len(), rows * actions);
    for r in &mut trace {
        for t in &mut r.parameters {
            *t *= scale;
        }
    }
    Ok(SpsaOutcome {
        policy: ThresholdPolicy::new(to_table(&theta), tau)?,
        trace,
    })
}
