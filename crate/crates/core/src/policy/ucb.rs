//! Upper-confidence-bound search over a grid of threshold tables.
//!
//! Every arm is a complete threshold table; pulling an arm runs one episode
//! with that stationary policy and observes the negative episode cost.

use serde::{Deserialize, Serialize};

use super::{EpisodeCost, ThresholdPolicy};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UcbParams {
    /// Total episodes `T`.
    pub episodes: usize,
    /// Multiplier on the confidence radius `sqrt(2 ln T / n)`.
    pub exploration: f64,
}

impl Default for UcbParams {
    fn default() -> Self {
        Self {
            episodes: 10_000,
            exploration: 1.0,
        }
    }
}

/// Pull counts, running means and the cumulative regret trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BanditState {
    pub counts: Vec<u64>,
    pub means: Vec<f64>,
    pub episodes: u64,
    /// Arm pulled at each episode.
    pub pulls: Vec<usize>,
    /// Cumulative regret after each episode, against the best arm mean.
    pub regret: Vec<f64>,
}

impl BanditState {
    fn new(arms: usize) -> Self {
        Self {
            counts: vec![0; arms],
            means: vec![0.0; arms],
            episodes: 0,
            pulls: Vec::new(),
            regret: Vec::new(),
        }
    }

    fn record(&mut self, arm: usize, reward: f64) {
        self.episodes += 1;
        self.counts[arm] += 1;
        self.means[arm] += (reward - self.means[arm]) / self.counts[arm] as f64;
        self.pulls.push(arm);
    }

    /// Arm with the highest empirical mean among pulled arms (lowest index on ties).
    pub fn best_arm(&self) -> usize {
        let mut best = 0;
        for a in 0..self.means.len() {
            if self.counts[a] > 0 && (self.counts[best] == 0 || self.means[a] > self.means[best]) {
                best = a;
            }
        }
        best
    }

    /// Most-pulled arm.
    pub fn most_pulled(&self) -> usize {
        (0..self.counts.len())
            .max_by_key(|a| (self.counts[*a], std::cmp::Reverse(*a)))
            .unwrap_or(0)
    }

    fn fill_regret(&mut self, means: &[f64]) {
        let best = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut acc = 0.0;
        self.regret = self
            .pulls
            .iter()
            .map(|a| {
                acc += best - means[*a];
                acc
            })
            .collect();
    }

    /// Cumulative regret after `t` episodes.
    pub fn regret_at(&self, t: usize) -> f64 {
        if t == 0 {
            0.0
        } else {
            self.regret[t - 1]
        }
    }
}

/// Runs UCB over `arms` arms: one round-robin pass, then
/// `argmax mean + c·sqrt(2 ln T / n)` with `T` the episode budget.
///
/// `reward(arm, t)` returns the observed reward of episode `t`. Regret is
/// measured against `true_means` when given, otherwise against the final
/// empirical means.
pub fn ucb_run<F>(
    arms: usize,
    params: &UcbParams,
    mut reward: F,
    true_means: Option<&[f64]>,
) -> Result<BanditState>
where
    F: FnMut(usize, u64) -> Result<f64>,
{
    if arms == 0 {
        return Err(Error::Search("bandit needs at least one arm".into()));
    }
    if params.episodes < arms {
        return Err(Error::Search(format!(
            "{} episodes cannot cover {arms} arms once; use a coarser threshold grid",
            params.episodes
        )));
    }
    if let Some(m) = true_means {
        if m.len() != arms {
            return Err(Error::Shape {
                expected: arms,
                got: m.len(),
            });
        }
    }
    let mut state = BanditState::new(arms);
    let log_t = (params.episodes as f64).ln();
    for t in 0..params.episodes {
        let arm = if t < arms {
            t
        } else {
            let mut best = 0;
            let mut best_score = f64::NEG_INFINITY;
            for a in 0..arms {
                let score = state.means[a]
                    + params.exploration * (2.0 * log_t / state.counts[a] as f64).sqrt();
                if score > best_score {
                    best_score = score;
                    best = a;
                }
            }
            best
        };
        let r = reward(arm, t as u64)?;
        state.record(arm, r);
    }
    let means = true_means.map_or_else(|| state.means.clone(), <[f64]>::to_vec);
    state.fill_regret(&means);
    Ok(state)
}

/// Threshold values each table entry may take.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmGrid {
    pub values: Vec<f64>,
    /// Keep only tables whose rows are nondecreasing in the action index.
    pub monotone: bool,
    /// Use one shared row for every oracle state.
    #[serde(default)]
    pub tied: bool,
}

/// Upper limit on enumerated arms.
const MAX_ARMS: u128 = 2_000_000;

impl ArmGrid {
    /// Every queue value `0..=M`, monotone rows only.
    pub fn queue_values(queue_capacity: usize) -> Self {
        Self {
            values: (0..=queue_capacity).map(|b| b as f64).collect(),
            monotone: true,
            tied: false,
        }
    }

    fn rows(&self, actions: usize) -> Vec<Vec<f64>> {
        let v = self.values.len();
        let mut out = Vec::new();
        let mut idx = vec![0usize; actions];
        loop {
            if !self.monotone || idx.windows(2).all(|w| w[0] <= w[1]) {
                out.push(idx.iter().map(|k| self.values[*k]).collect());
            }
            // odometer increment
            let mut pos = actions;
            loop {
                if pos == 0 {
                    return out;
                }
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < v {
                    break;
                }
                idx[pos] = 0;
            }
            if self.monotone {
                // jump straight to the next nondecreasing index tuple
                for k in pos + 1..actions {
                    idx[k] = idx[pos];
                }
            }
        }
    }

    fn row_count(&self, actions: usize) -> u128 {
        let v = self.values.len() as u128;
        let a = actions as u128;
        if self.monotone {
            // multisets of size a from v values: C(v + a − 1, a)
            let mut c: u128 = 1;
            for k in 0..a {
                c = c * (v + k) / (k + 1);
            }
            c
        } else {
            v.checked_pow(actions as u32).unwrap_or(u128::MAX)
        }
    }

    /// Number of arms for `states` oracle states and `actions` actions.
    pub fn arm_count(&self, states: usize, actions: usize) -> u128 {
        let rows = self.row_count(actions);
        if self.tied {
            return rows;
        }
        (0..states)
            .try_fold(1u128, |acc, _| acc.checked_mul(rows))
            .unwrap_or(u128::MAX)
    }

    /// All tables as policies, in lexicographic order of rows.
    pub fn enumerate(
        &self,
        states: usize,
        actions: usize,
        temperature: f64,
    ) -> Result<Vec<ThresholdPolicy>> {
        let count = self.arm_count(states, actions);
        if count > MAX_ARMS {
            return Err(Error::Search(format!(
                "threshold grid has {count} arms; restrict the grid values or use SPSA"
            )));
        }
        let rows = self.rows(actions);
        if self.tied {
            return Ok(rows
                .into_iter()
                .map(|r| ThresholdPolicy::unchecked(vec![r; states], temperature))
                .collect());
        }
        let mut tables: Vec<Vec<Vec<f64>>> = vec![Vec::new()];
        for _ in 0..states {
            tables = tables
                .into_iter()
                .flat_map(|t| {
                    rows.iter().map(move |r| {
                        let mut next = t.clone();
                        next.push(r.clone());
                        next
                    })
                })
                .collect();
        }
        Ok(tables
            .into_iter()
            .map(|t| ThresholdPolicy::unchecked(t, temperature))
            .collect())
    }
}

#[derive(Debug, Clone)]
pub struct UcbOutcome {
    pub arms: Vec<ThresholdPolicy>,
    pub best_arm: usize,
    pub best: ThresholdPolicy,
    pub state: BanditState,
}

/// UCB over the arm grid; reward is the negative episode cost under the hard
/// threshold rule.
pub fn ucb_search<E: EpisodeCost + ?Sized>(
    env: &E,
    grid: &ArmGrid,
    states: usize,
    actions: usize,
    params: &UcbParams,
    seed: u64,
    true_costs: Option<&[f64]>,
) -> Result<UcbOutcome> {
    let count = grid.arm_count(states, actions);
    if count > params.episodes as u128 {
        return Err(Error::Search(format!(
            "threshold grid has {count} arms but only {} episodes; use a coarser grid",
            params.episodes
        )));
    }
    let arms = grid.enumerate(states, actions, 1.0)?;
    let true_means: Option<Vec<f64>> = true_costs.map(|c| c.iter().map(|x| -x).collect());
    let state = ucb_run(
        arms.len(),
        params,
        |arm, t| Ok(-env.episode_cost(&arms[arm], seed, t)?),
        true_means.as_deref(),
    )?;
    let best_arm = state.best_arm();
    Ok(UcbOutcome {
        best: arms[best_arm].clone(),
        best_arm,
        arms,
        state,
    })
}
