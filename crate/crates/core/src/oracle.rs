//! Incentivized stochastic oracle.
//!
//! The oracle sits in one of `R` Markovian states. A query carrying incentive
//! index `i` in state `o` is answered with a noisy gradient with probability
//! `Γ(o, i)` and with the all-zero (non-informative) reply otherwise.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::Objective;

const STOCHASTIC_TOL: f64 = 1e-12;

/// Distribution of the additive gradient noise.
///
/// Every kind is zero mean with `E‖η‖² = σ²`, split evenly over coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    #[default]
    Gaussian,
    Uniform,
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleModel {
    success: Vec<Vec<f64>>,
    transition: Vec<Vec<f64>>,
    noise_variance: f64,
    noise: NoiseKind,
}

/// One oracle reply. `gradient` is exactly zero when `success` is false.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleResponse {
    pub success: bool,
    pub gradient: Vec<f64>,
}

impl OracleModel {
    /// Builds a model from the success matrix `Γ` (states × incentive levels)
    /// and the row-stochastic oracle state chain.
    ///
    /// `Γ` is not required to be monotone in the incentive here; the
    /// structural checks in [`crate::mdp`] report that separately.
    pub fn new(
        success: Vec<Vec<f64>>,
        transition: Vec<Vec<f64>>,
        noise_variance: f64,
        noise: NoiseKind,
    ) -> Result<Self> {
        let states = success.len();
        if states == 0 {
            return Err(Error::Config("oracle needs at least one state".into()));
        }
        let levels = success[0].len();
        if levels == 0 {
            return Err(Error::Config(
                "oracle needs at least one incentive level".into(),
            ));
        }
        for (o, row) in success.iter().enumerate() {
            if row.len() != levels {
                return Err(Error::Shape {
                    expected: levels,
                    got: row.len(),
                });
            }
            if let Some(p) = row.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return Err(Error::Config(format!(
                    "success probability {p} in state {o} outside [0, 1]"
                )));
            }
        }
        if transition.len() != states {
            return Err(Error::Shape {
                expected: states,
                got: transition.len(),
            });
        }
        for (o, row) in transition.iter().enumerate() {
            if row.len() != states {
                return Err(Error::Shape {
                    expected: states,
                    got: row.len(),
                });
            }
            if row.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
                return Err(Error::Config(format!(
                    "oracle transition row {o} has a negative or non-finite entry"
                )));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::Config(format!(
                    "oracle transition row {o} sums to {total}, not 1"
                )));
            }
        }
        if !(noise_variance >= 0.0) || !noise_variance.is_finite() {
            return Err(Error::Config(format!(
                "noise variance must be finite and nonnegative, got {noise_variance}"
            )));
        }
        Ok(Self {
            success,
            transition,
            noise_variance,
            noise,
        })
    }

    /// Single-state oracle with the given success probabilities per incentive.
    pub fn memoryless(success: Vec<f64>, noise_variance: f64, noise: NoiseKind) -> Result<Self> {
        Self::new(vec![success], vec![vec![1.0]], noise_variance, noise)
    }

    pub fn num_states(&self) -> usize {
        self.success.len()
    }

    pub fn num_incentives(&self) -> usize {
        self.success[0].len()
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn noise_kind(&self) -> NoiseKind {
        self.noise
    }

    pub fn success_matrix(&self) -> &[Vec<f64>] {
        &self.success
    }

    pub fn transition_matrix(&self) -> &[Vec<f64>] {
        &self.transition
    }

    /// `Γ(o, i)` with bounds checking.
    pub fn success_probability(&self, o: usize, i: usize) -> Result<f64> {
        let row = self
            .success
            .get(o)
            .ok_or_else(|| Error::index("oracle state", o, self.num_states()))?;
        row.get(i)
            .copied()
            .ok_or_else(|| Error::index("incentive", i, self.num_incentives()))
    }

    /// `P_O(o, o′)`.
    pub fn transition_probability(&self, o: usize, next: usize) -> Result<f64> {
        let row = self
            .transition
            .get(o)
            .ok_or_else(|| Error::index("oracle state", o, self.num_states()))?;
        row.get(next)
            .copied()
            .ok_or_else(|| Error::index("oracle state", next, self.num_states()))
    }

    /// True when every row of `Γ` is nondecreasing in the incentive index.
    pub fn is_incentive_monotone(&self) -> bool {
        self.success
            .iter()
            .all(|row| row.windows(2).all(|w| w[0] <= w[1]))
    }

    pub fn has_positive_transitions(&self) -> bool {
        self.transition.iter().flatten().all(|p| *p > 0.0)
    }

    /// Bernoulli(Γ(o, i)) draw. Consumes exactly one uniform variate.
    pub fn sample_success<R: Rng + ?Sized>(&self, o: usize, i: usize, rng: &mut R) -> Result<bool> {
        let p = self.success_probability(o, i)?;
        let u: f64 = rng.random();
        Ok(u < p)
    }

    /// Zero-mean noise vector with `E‖η‖² = σ²`.
    pub fn sample_noise<R: Rng + ?Sized>(&self, dim: usize, rng: &mut R) -> Vec<f64> {
        if dim == 0 || self.noise_variance == 0.0 {
            return vec![0.0; dim];
        }
        let per_coord = self.noise_variance / dim as f64;
        match self.noise {
            NoiseKind::None => vec![0.0; dim],
            NoiseKind::Gaussian => {
                let sd = per_coord.sqrt();
                (0..dim)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(rng);
                        sd * z
                    })
                    .collect()
            }
            NoiseKind::Uniform => {
                let half_width = (3.0 * per_coord).sqrt();
                (0..dim)
                    .map(|_| rng.random_range(-half_width..=half_width))
                    .collect()
            }
        }
    }

    /// Answers `query` in oracle state `o` with incentive index `i`.
    ///
    /// The success draw comes from `reply_rng` (one variate per call) and the
    /// noise from `noise_rng`, so paired runs can share reply outcomes.
    pub fn respond<R1, R2>(
        &self,
        query: &[f64],
        o: usize,
        i: usize,
        objective: &dyn Objective,
        reply_rng: &mut R1,
        noise_rng: &mut R2,
    ) -> Result<OracleResponse>
    where
        R1: Rng + ?Sized,
        R2: Rng + ?Sized,
    {
        if query.len() != objective.dim() {
            return Err(Error::Shape {
                expected: objective.dim(),
                got: query.len(),
            });
        }
        let success = self.sample_success(o, i, reply_rng)?;
        if !success {
            return Ok(OracleResponse {
                success,
                gradient: vec![0.0; query.len()],
            });
        }
        let mut gradient = objective.gradient(query);
        if gradient.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numeric(
                "objective returned a non-finite gradient".into(),
            ));
        }
        for (g, e) in gradient
            .iter_mut()
            .zip(self.sample_noise(query.len(), noise_rng))
        {
            *g += e;
        }
        Ok(OracleResponse { success, gradient })
    }

    /// Next oracle state drawn from row `o` of `P_O`. One uniform variate.
    pub fn step_state<R: Rng + ?Sized>(&self, o: usize, rng: &mut R) -> Result<usize> {
        let row = self
            .transition
            .get(o)
            .ok_or_else(|| Error::index("oracle state", o, self.num_states()))?;
        Ok(sample_index(row, rng.random()))
    }

    /// Stationary distribution of `P_O` by power iteration.
    pub fn stationary_distribution(&self) -> Vec<f64> {
        stationary_distribution(&self.transition)
    }
}

/// Inverse-CDF draw from a probability row given a uniform variate.
pub(crate) fn sample_index(row: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (k, p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    // rounding: fall back to the last state with positive mass
    row.iter().rposition(|p| *p > 0.0).unwrap_or(row.len() - 1)
}

pub fn stationary_distribution(transition: &[Vec<f64>]) -> Vec<f64> {
    let n = transition.len();
    let mut pi = vec![1.0 / n as f64; n];
    for _ in 0..100_000 {
        let mut next = vec![0.0; n];
        for (o, row) in transition.iter().enumerate() {
            for (k, p) in row.iter().enumerate() {
                next[k] += pi[o] * p;
            }
        }
        let delta: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        pi = next;
        if delta < 1e-15 {
            break;
        }
    }
    pi
}

fn ln_choose(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (1..=k).map(|j| ((n - k + j) as f64 / j as f64).ln()).sum()
}

fn binomial_pmf(n: usize, k: usize, p: f64) -> f64 {
    if k > n {
        return 0.0;
    }
    if p <= 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if p >= 1.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    (ln_choose(n, k) + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln()).exp()
}

/// Oracle state chain induced by `clients` independently participating
/// clients, each a two-state Markov chain that keeps its current status
/// (connected or not) with probability `stay`.
///
/// The participating-client count is binned at `levels` (ascending minimum
/// counts; the first bin also absorbs counts below `levels[0]`) and the count
/// chain is lumped onto the bins with stationary weights.
pub fn participation_chain(clients: usize, stay: f64, levels: &[usize]) -> Result<Vec<Vec<f64>>> {
    if levels.is_empty() {
        return Err(Error::Config(
            "participation model needs at least one level".into(),
        ));
    }
    if !levels.windows(2).all(|w| w[0] < w[1]) || *levels.last().unwrap() > clients {
        return Err(Error::Config(format!(
            "participation levels {levels:?} must be strictly increasing and at most {clients}"
        )));
    }
    if !(0.0..=1.0).contains(&stay) {
        return Err(Error::Config(format!(
            "stay probability {stay} outside [0, 1]"
        )));
    }
    let bin_of = |k: usize| levels.iter().rposition(|l| k >= *l).unwrap_or(0);
    // symmetric per-client chain: stationary participation is 1/2
    let weight: Vec<f64> = (0..=clients)
        .map(|k| binomial_pmf(clients, k, 0.5))
        .collect();

    let r = levels.len();
    let mut chain = vec![vec![0.0; r]; r];
    let mut mass = vec![0.0; r];
    for k in 0..=clients {
        let from = bin_of(k);
        mass[from] += weight[k];
        // K' = Bin(k, stay) + Bin(clients − k, 1 − stay)
        let keep: Vec<f64> = (0..=k).map(|j| binomial_pmf(k, j, stay)).collect();
        let join: Vec<f64> = (0..=clients - k)
            .map(|j| binomial_pmf(clients - k, j, 1.0 - stay))
            .collect();
        for (a, pa) in keep.iter().enumerate() {
            for (b, pb) in join.iter().enumerate() {
                chain[from][bin_of(a + b)] += weight[k] * pa * pb;
            }
        }
    }
    for (row, m) in chain.iter_mut().zip(&mass) {
        if *m <= 0.0 {
            return Err(Error::Config(
                "participation level has zero stationary mass".into(),
            ));
        }
        let total: f64 = row.iter().sum();
        for p in row.iter_mut() {
            *p /= total;
        }
    }
    Ok(chain)
}
