//! Policies and policy search over stationary threshold tables.

mod spsa;
mod threshold;
mod ucb;

pub use spsa::{spsa_minimize, spsa_search, SpsaOutcome, SpsaParams, SpsaRecord, StepSchedule};
pub use threshold::{ActionMode, ThresholdPolicy};
pub use ucb::{ucb_run, ucb_search, ArmGrid, BanditState, UcbOutcome, UcbParams};

use rand::Rng;

use crate::error::Result;
use crate::mdp::PolicyTable;
use crate::rng::SimRng;

/// Maps `(n, o, b)` to an action index. `n` counts queries remaining.
pub trait Policy: Send + Sync {
    fn action(&self, n: usize, o: usize, b: usize, rng: &mut SimRng) -> usize;
}

/// Anything that can run one seeded episode of a policy and report its cost.
pub trait EpisodeCost: Sync {
    fn episode_cost(&self, policy: &dyn Policy, seed: u64, episode: u64) -> Result<f64>;
}

impl Policy for ThresholdPolicy {
    fn action(&self, _n: usize, o: usize, b: usize, _rng: &mut SimRng) -> usize {
        self.stationary_action(b, o, ActionMode::Hard)
    }
}

/// Threshold policy evaluated through the sigmoid approximation.
#[derive(Debug, Clone, PartialEq)]
pub struct Smoothed(pub ThresholdPolicy);

impl Policy for Smoothed {
    fn action(&self, _n: usize, o: usize, b: usize, _rng: &mut SimRng) -> usize {
        self.0.stationary_action(b, o, ActionMode::Smooth)
    }
}

impl Policy for PolicyTable {
    fn action(&self, n: usize, o: usize, b: usize, _rng: &mut SimRng) -> usize {
        self.get(n, o, b)
    }
}

/// The same action in every state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Constant(pub usize);

impl Policy for Constant {
    fn action(&self, _n: usize, _o: usize, _b: usize, _rng: &mut SimRng) -> usize {
        self.0
    }
}

/// Uniform draw over `actions` action indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UniformRandom {
    pub actions: usize,
}

impl Policy for UniformRandom {
    fn action(&self, _n: usize, _o: usize, _b: usize, rng: &mut SimRng) -> usize {
        rng.random_range(0..self.actions)
    }
}
