use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::PolicyTable;

/// How a threshold table is turned into an action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionMode {
    /// Indicator form: the action whose cell `[Ȳ(o,u), Ȳ(o,u+1))` holds `b`.
    #[default]
    Hard,
    /// Sum of sigmoids, rounded to the nearest action index.
    Smooth,
}

/// Stationary threshold policy: `Ȳ(o, u)` per oracle state and action, each
/// row nondecreasing in the action index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    thresholds: Vec<Vec<f64>>,
    temperature: f64,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl ThresholdPolicy {
    pub fn new(thresholds: Vec<Vec<f64>>, temperature: f64) -> Result<Self> {
        let actions = thresholds.first().map_or(0, Vec::len);
        if thresholds.is_empty() || actions == 0 {
            return Err(Error::Config("threshold table must be nonempty".into()));
        }
        for (o, row) in thresholds.iter().enumerate() {
            if row.len() != actions {
                return Err(Error::Shape {
                    expected: actions,
                    got: row.len(),
                });
            }
            if row.iter().any(|t| !t.is_finite()) {
                return Err(Error::Config(format!("non-finite threshold in state {o}")));
            }
            if !row.windows(2).all(|w| w[0] <= w[1]) {
                return Err(Error::Config(format!(
                    "thresholds for oracle state {o} must be nondecreasing in the action index"
                )));
            }
        }
        if !(temperature > 0.0) {
            return Err(Error::Config(format!(
                "temperature must be positive, got {temperature}"
            )));
        }
        Ok(Self {
            thresholds,
            temperature,
        })
    }

    /// Same as [`ThresholdPolicy::new`] without the monotonicity check; used
    /// for perturbed parameters and full (non-monotone) arm grids.
    pub(crate) fn unchecked(thresholds: Vec<Vec<f64>>, temperature: f64) -> Self {
        Self {
            thresholds,
            temperature,
        }
    }

    /// Thresholds spread evenly over `[0, M + 1]` for every oracle state.
    pub fn evenly_spaced(
        states: usize,
        actions: usize,
        queue_capacity: usize,
        temperature: f64,
    ) -> Self {
        let span = (queue_capacity + 1) as f64;
        let row: Vec<f64> = (0..actions)
            .map(|u| span * u as f64 / actions as f64)
            .collect();
        Self::new(vec![row; states], temperature).expect("evenly spaced rows are monotone")
    }

    /// Stationary policy agreeing with stage `n` of a monotone DP policy:
    /// `Ȳ(o, u) = min{b : u*[n][o][b] ≥ u}`, or `M + 1` if no such `b`.
    pub fn from_policy_stage(
        table: &PolicyTable,
        n: usize,
        actions: usize,
        temperature: f64,
    ) -> Self {
        let m = table.queue_capacity();
        let rows = (0..table.num_oracle_states())
            .map(|o| {
                let col = table.column(n, o);
                let mut row: Vec<f64> = (0..actions)
                    .map(|u| {
                        if u == 0 {
                            return 0.0;
                        }
                        col.iter()
                            .position(|a| *a >= u)
                            .map_or((m + 1) as f64, |b| b as f64)
                    })
                    .collect();
                // non-monotone columns: keep the row feasible
                for k in 1..row.len() {
                    row[k] = row[k].max(row[k - 1]);
                }
                row
            })
            .collect();
        Self::new(rows, temperature).expect("rows made monotone")
    }

    pub fn thresholds(&self) -> &[Vec<f64>] {
        &self.thresholds
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn num_oracle_states(&self) -> usize {
        self.thresholds.len()
    }

    pub fn num_actions(&self) -> usize {
        self.thresholds[0].len()
    }

    /// Flattened parameter vector `Θ` (row-major by oracle state).
    pub fn parameters(&self) -> Vec<f64> {
        self.thresholds.iter().flatten().copied().collect()
    }

    /// Rebuilds a policy from a flat parameter vector of the same layout.
    pub fn with_parameters(&self, theta: &[f64]) -> Result<Self> {
        let a = self.num_actions();
        if theta.len() != a * self.num_oracle_states() {
            return Err(Error::Shape {
                expected: a * self.num_oracle_states(),
                got: theta.len(),
            });
        }
        Self::new(
            theta.chunks(a).map(<[f64]>::to_vec).collect(),
            self.temperature,
        )
    }

    /// `Σ_u σ((b − Ȳ(o,u))/τ)`: a soft count of thresholds at or below `b`.
    pub fn soft_index(&self, b: usize, o: usize) -> f64 {
        let b = b as f64;
        self.thresholds[o]
            .iter()
            .map(|t| sigmoid((b - t) / self.temperature))
            .sum()
    }

    pub fn stationary_action(&self, b: usize, o: usize, mode: ActionMode) -> usize {
        let last = self.num_actions() - 1;
        let count = match mode {
            ActionMode::Hard => self.thresholds[o]
                .iter()
                .filter(|t| **t <= b as f64)
                .count() as f64,
            ActionMode::Smooth => self.soft_index(b, o).round(),
        };
        // below the first threshold the lowest action applies
        ((count - 1.0).max(0.0) as usize).min(last)
    }

    /// Projects each row onto the nondecreasing cone (least squares) and
    /// clamps into `[lo, hi]`.
    pub fn project(theta: &mut [f64], actions: usize, lo: f64, hi: f64) {
        for row in theta.chunks_mut(actions) {
            isotonic(row);
            for t in row.iter_mut() {
                *t = t.clamp(lo, hi);
            }
        }
    }
}

/// In-place pool-adjacent-violators fit of a nondecreasing sequence.
fn isotonic(values: &mut [f64]) {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values.iter() {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (m2, w2) = blocks[blocks.len() - 1];
            let (m1, w1) = blocks[blocks.len() - 2];
            if m1 <= m2 {
                break;
            }
            blocks.pop();
            let w = w1 + w2;
            *blocks.last_mut().unwrap() = ((m1 * w1 as f64 + m2 * w2 as f64) / w as f64, w);
        }
    }
    let mut k = 0;
    for (mean, w) in blocks {
        for v in &mut values[k..k + w] {
            *v = mean;
        }
        k += w;
    }
}
