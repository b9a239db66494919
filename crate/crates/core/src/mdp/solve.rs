//! Backward induction over `(o, b)` with a per-stage cost schedule.

use std::io::Write;

use crate::error::{Error, Result};

use super::model::{MdpModel, ReferenceSchedule};

/// `V[n][o][b]` for `n = 0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    horizon: usize,
    states: usize,
    queue: usize,
    values: Vec<f64>,
}

impl ValueTable {
    fn new(horizon: usize, states: usize, queue: usize) -> Self {
        Self {
            horizon,
            states,
            queue,
            values: vec![0.0; (horizon + 1) * states * (queue + 1)],
        }
    }

    fn idx(&self, n: usize, o: usize, b: usize) -> usize {
        (n * self.states + o) * (self.queue + 1) + b
    }

    pub fn get(&self, n: usize, o: usize, b: usize) -> f64 {
        self.values[self.idx(n, o, b)]
    }

    fn set(&mut self, n: usize, o: usize, b: usize, v: f64) {
        let k = self.idx(n, o, b);
        self.values[k] = v;
    }

    /// `V[n][o][·]` over the queue states.
    pub fn column(&self, n: usize, o: usize) -> &[f64] {
        let start = self.idx(n, o, 0);
        &self.values[start..start + self.queue + 1]
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_oracle_states(&self) -> usize {
        self.states
    }

    pub fn queue_capacity(&self) -> usize {
        self.queue
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// `u*[n][o][b]` for `n = 1..=N` (no decision is taken with zero queries left).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyTable {
    horizon: usize,
    states: usize,
    queue: usize,
    actions: Vec<usize>,
}

impl PolicyTable {
    /// Builds a table from `actions[n − 1][o][b]`.
    pub fn from_nested(actions: Vec<Vec<Vec<usize>>>) -> Result<Self> {
        let horizon = actions.len();
        let states = actions.first().map_or(0, |s| s.len());
        let cols = actions
            .first()
            .and_then(|s| s.first())
            .map_or(0, |c| c.len());
        if horizon == 0 || states == 0 || cols == 0 {
            return Err(Error::Config("policy table must be nonempty".into()));
        }
        let mut flat = Vec::with_capacity(horizon * states * cols);
        for stage in &actions {
            if stage.len() != states {
                return Err(Error::Shape {
                    expected: states,
                    got: stage.len(),
                });
            }
            for col in stage {
                if col.len() != cols {
                    return Err(Error::Shape {
                        expected: cols,
                        got: col.len(),
                    });
                }
                flat.extend_from_slice(col);
            }
        }
        Ok(Self {
            horizon,
            states,
            queue: cols - 1,
            actions: flat,
        })
    }

    fn idx(&self, n: usize, o: usize, b: usize) -> usize {
        ((n - 1) * self.states + o) * (self.queue + 1) + b
    }

    /// Action with `n ≥ 1` queries remaining.
    pub fn get(&self, n: usize, o: usize, b: usize) -> usize {
        self.actions[self.idx(n, o, b)]
    }

    pub fn column(&self, n: usize, o: usize) -> &[usize] {
        let start = self.idx(n, o, 0);
        &self.actions[start..start + self.queue + 1]
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_oracle_states(&self) -> usize {
        self.states
    }

    pub fn queue_capacity(&self) -> usize {
        self.queue
    }
}

/// Result of [`solve_dp`].
#[derive(Debug, Clone)]
pub struct DpSolution {
    pub values: ValueTable,
    pub policy: PolicyTable,
    /// Schedule the final tables were computed with.
    pub schedule: ReferenceSchedule,
    /// Schedule refinement rounds actually performed.
    pub rounds: usize,
}

impl DpSolution {
    /// Optimal expected total cost from `(M, o)`.
    pub fn value_at_start(&self, o: usize) -> f64 {
        self.values
            .get(self.values.horizon(), o, self.values.queue_capacity())
    }

    /// Writes `n,o,b,V,u*` rows; `u*` is empty at `n = 0`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["n", "o", "b", "V", "u"])?;
        let v = &self.values;
        for n in 0..=v.horizon() {
            for o in 0..v.num_oracle_states() {
                for b in 0..=v.queue_capacity() {
                    let u = if n == 0 {
                        String::new()
                    } else {
                        self.policy.get(n, o, b).to_string()
                    };
                    w.write_record([
                        n.to_string(),
                        o.to_string(),
                        b.to_string(),
                        format!("{:.12e}", v.get(n, o, b)),
                        u,
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Relative slack under which two Q-values count as tied.
const TIE_TOL: f64 = 1e-12;

/// Backward induction with the model's current schedule.
///
/// `V₀ = d`; `Q_n(u) = c_n(u)/N + Σ P(y′|y,u) V_{n−1}(y′)`; ties go to the
/// smallest action index.
pub fn backward_induction(model: &MdpModel) -> Result<(ValueTable, PolicyTable)> {
    let horizon = model.horizon();
    let states = model.num_oracle_states();
    let m = model.queue_capacity();
    let actions = model.num_actions();
    let weight = model.stage_weight();
    let p_o = model.oracle().transition_matrix();

    let mut values = ValueTable::new(horizon, states, m);
    let mut policy = vec![vec![vec![0usize; m + 1]; states]; horizon];
    for o in 0..states {
        for b in 0..=m {
            values.set(0, o, b, model.terminal_cost()[b]);
        }
    }
    let mut q = vec![0.0; actions];
    for n in 1..=horizon {
        // E over the next oracle state of V_{n−1}(o′, b), per current state o
        let mut mixed = vec![vec![0.0; m + 1]; states];
        for o in 0..states {
            for b in 0..=m {
                mixed[o][b] = (0..states)
                    .map(|k| p_o[o][k] * values.get(n - 1, k, b))
                    .sum();
            }
        }
        for o in 0..states {
            for b in 0..=m {
                for (u, slot) in q.iter_mut().enumerate() {
                    let c = model.scheduled_cost(n, b, o, u)?;
                    let p = model.step_probability(b, o, u)?;
                    let cont = if p > 0.0 {
                        p * mixed[o][b - 1] + (1.0 - p) * mixed[o][b]
                    } else {
                        mixed[o][b]
                    };
                    let value = weight * c + cont;
                    if !value.is_finite() {
                        return Err(Error::Numeric(format!(
                            "non-finite Q at n={n}, o={o}, b={b}, u={u}"
                        )));
                    }
                    *slot = value;
                }
                let best = q.iter().copied().fold(f64::INFINITY, f64::min);
                let slack = TIE_TOL * best.abs().max(1.0);
                let arg = q.iter().position(|v| *v <= best + slack).unwrap_or(0);
                values.set(n, o, b, best);
                policy[n - 1][o][b] = arg;
            }
        }
    }
    Ok((values, PolicyTable::from_nested(policy)?))
}

/// Solves the MDP, then refines the cost schedule around the optimal policy:
/// recompute the expected `(I_n, δ_n)` under `u*`, re-solve, and repeat up to
/// the model's fixed-point budget or until `u*` stops changing.
pub fn solve_dp(model: &MdpModel) -> Result<DpSolution> {
    let (mut values, mut policy) = backward_induction(model)?;
    let mut current = model.clone();
    let mut rounds = 0;
    for _ in 0..model.fixed_point_iterations() {
        let schedule = current.expected_schedule(|n, o, b| Some(policy.get(n, o, b)));
        current = current.with_schedule(schedule)?;
        let (v, p) = backward_induction(&current)?;
        rounds += 1;
        let unchanged = p == policy;
        values = v;
        policy = p;
        if unchanged {
            break;
        }
    }
    Ok(DpSolution {
        values,
        policy,
        schedule: current.schedule().clone(),
        rounds,
    })
}
