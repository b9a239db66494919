use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gradient::QueryKind;
use crate::oracle::OracleModel;

/// One element of the ordered action list
/// `⟨(0,i¹),…,(0,iⁿ),(1,i¹),…,(1,iⁿ)⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Action {
    pub kind: QueryKind,
    /// Index into the incentive levels.
    pub incentive: usize,
}

/// Cost inputs for the stage with `n` queries remaining: incentive already
/// spent `I_n` and the eavesdropper belief `δ_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub spent: f64,
    pub belief: f64,
}

/// Per-stage `(I_n, δ_n)` used when evaluating stage costs inside the DP.
/// Entry `n − 1` belongs to the stage with `n` queries remaining.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSchedule {
    entries: Vec<ScheduleEntry>,
}

impl ReferenceSchedule {
    pub fn new(entries: Vec<ScheduleEntry>) -> Self {
        Self { entries }
    }

    /// The same `(I, δ)` at every stage.
    pub fn constant(horizon: usize, spent: f64, belief: f64) -> Self {
        Self::new(vec![ScheduleEntry { spent, belief }; horizon])
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entry for the stage with `n ≥ 1` queries remaining.
    pub fn at(&self, n: usize) -> ScheduleEntry {
        self.entries[n - 1]
    }

    pub fn entries(&self) -> &[ScheduleEntry] {
        &self.entries
    }
}

/// Inputs for [`MdpModel::new`].
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub queue_capacity: usize,
    pub horizon: usize,
    pub oracle: OracleModel,
    /// Ascending incentive values, one per column of `Γ`.
    pub incentives: Vec<f64>,
    /// `ψ₁(b)` for `b = 0..=M`.
    pub queue_weight: Vec<f64>,
    /// `ψ₂(o)` per oracle state.
    pub oracle_weight: Vec<f64>,
    /// Terminal cost `d(b)` for `b = 0..=M`.
    pub terminal_cost: Vec<f64>,
    /// Frozen schedule; `None` derives one from the uniform random policy.
    pub schedule: Option<ReferenceSchedule>,
    /// Refinement rounds of the schedule around the DP policy.
    pub fixed_point_iterations: usize,
    /// Lower clamp on `δ_n` when costing a learning query.
    pub belief_floor: f64,
    /// Initial oracle state distribution; `None` uses the stationary one.
    pub initial_oracle: Option<Vec<f64>>,
}

/// Finite-horizon covert-optimization MDP over states `(o, b)`.
#[derive(Debug, Clone)]
pub struct MdpModel {
    queue_capacity: usize,
    horizon: usize,
    oracle: OracleModel,
    incentives: Vec<f64>,
    queue_weight: Vec<f64>,
    oracle_weight: Vec<f64>,
    terminal_cost: Vec<f64>,
    schedule: ReferenceSchedule,
    fixed_point_iterations: usize,
    belief_floor: f64,
    initial_oracle: Vec<f64>,
}

const SHAPE_TOL: f64 = 1e-9;

fn scale_of(values: &[f64]) -> f64 {
    values.iter().fold(1.0f64, |m, v| m.max(v.abs()))
}

/// Nondecreasing check with relative tolerance; returns the first failing index.
pub(crate) fn first_decrease(values: &[f64]) -> Option<usize> {
    let tol = SHAPE_TOL * scale_of(values);
    values
        .windows(2)
        .position(|w| w[1] < w[0] - tol)
        .map(|k| k + 1)
}

/// Discrete convexity (nonnegative second differences); first failing centre.
pub(crate) fn first_concavity(values: &[f64]) -> Option<usize> {
    let tol = SHAPE_TOL * scale_of(values);
    values
        .windows(3)
        .position(|w| w[2] - 2.0 * w[1] + w[0] < -tol)
        .map(|k| k + 1)
}

fn check_weight(name: &str, rule: &str, values: &[f64], require_positive: bool) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config(format!(
            "{rule}: {name} has a non-finite entry"
        )));
    }
    if require_positive {
        if let Some(k) = values.iter().position(|v| *v <= 0.0) {
            return Err(Error::Config(format!(
                "{rule}: {name} must be positive (index {k})"
            )));
        }
    }
    if let Some(k) = first_decrease(values) {
        return Err(Error::Config(format!(
            "{rule}: {name} decreases at index {k}"
        )));
    }
    if let Some(k) = first_concavity(values) {
        return Err(Error::Config(format!(
            "{rule}: {name} is not convex at index {k}"
        )));
    }
    Ok(())
}

impl MdpModel {
    pub fn new(spec: ModelSpec) -> Result<Self> {
        let ModelSpec {
            queue_capacity,
            horizon,
            oracle,
            incentives,
            queue_weight,
            oracle_weight,
            terminal_cost,
            schedule,
            fixed_point_iterations,
            belief_floor,
            initial_oracle,
        } = spec;
        if queue_capacity < 1 {
            return Err(Error::Config("queue capacity M must be at least 1".into()));
        }
        if horizon < 1 {
            return Err(Error::Config("horizon N must be at least 1".into()));
        }
        if incentives.len() != oracle.num_incentives() {
            return Err(Error::Config(format!(
                "{} incentive values for {} success-matrix columns",
                incentives.len(),
                oracle.num_incentives()
            )));
        }
        if incentives.iter().any(|i| !(*i > 0.0)) || !incentives.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config(
                "incentive values must be positive and strictly increasing".into(),
            ));
        }
        if queue_weight.len() != queue_capacity + 1 {
            return Err(Error::Shape {
                expected: queue_capacity + 1,
                got: queue_weight.len(),
            });
        }
        if terminal_cost.len() != queue_capacity + 1 {
            return Err(Error::Shape {
                expected: queue_capacity + 1,
                got: terminal_cost.len(),
            });
        }
        if oracle_weight.len() != oracle.num_states() {
            return Err(Error::Shape {
                expected: oracle.num_states(),
                got: oracle_weight.len(),
            });
        }
        check_weight("queue weight psi1", "R1", &queue_weight, true)?;
        check_weight("oracle weight psi2", "R1", &oracle_weight, true)?;
        check_weight("terminal cost d", "R3", &terminal_cost, false)?;
        if !(belief_floor > 0.0 && belief_floor <= 1.0) {
            return Err(Error::Config(format!(
                "belief floor {belief_floor} outside (0, 1]"
            )));
        }
        let initial_oracle = match initial_oracle {
            Some(p) => {
                if p.len() != oracle.num_states()
                    || p.iter().any(|x| *x < 0.0)
                    || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9
                {
                    return Err(Error::Config(
                        "initial oracle distribution must be a probability vector over states"
                            .into(),
                    ));
                }
                p
            }
            None => oracle.stationary_distribution(),
        };
        let mut model = Self {
            queue_capacity,
            horizon,
            oracle,
            incentives,
            queue_weight,
            oracle_weight,
            terminal_cost,
            schedule: ReferenceSchedule::constant(horizon, 0.0, 0.5),
            fixed_point_iterations,
            belief_floor,
            initial_oracle,
        };
        model.schedule = match schedule {
            Some(s) => {
                if s.len() != horizon {
                    return Err(Error::Shape {
                        expected: horizon,
                        got: s.len(),
                    });
                }
                if s.entries()
                    .iter()
                    .any(|e| !(e.spent >= 0.0) || !(e.belief >= 0.0 && e.belief <= 1.0))
                {
                    return Err(Error::Config(
                        "schedule needs I_n >= 0 and delta_n in [0, 1]".into(),
                    ));
                }
                s
            }
            None => model.expected_schedule(|_, _, _| None),
        };
        Ok(model)
    }

    pub fn queue_capacity(&self) -> usize {
        self.queue_capacity
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn oracle(&self) -> &OracleModel {
        &self.oracle
    }

    pub fn num_oracle_states(&self) -> usize {
        self.oracle.num_states()
    }

    pub fn incentives(&self) -> &[f64] {
        &self.incentives
    }

    pub fn num_actions(&self) -> usize {
        2 * self.incentives.len()
    }

    pub fn queue_weight(&self) -> &[f64] {
        &self.queue_weight
    }

    pub fn oracle_weight(&self) -> &[f64] {
        &self.oracle_weight
    }

    pub fn terminal_cost(&self) -> &[f64] {
        &self.terminal_cost
    }

    pub fn schedule(&self) -> &ReferenceSchedule {
        &self.schedule
    }

    pub fn fixed_point_iterations(&self) -> usize {
        self.fixed_point_iterations
    }

    pub fn belief_floor(&self) -> f64 {
        self.belief_floor
    }

    pub fn initial_oracle(&self) -> &[f64] {
        &self.initial_oracle
    }

    /// Smallest incentive; stands in for `I_n` when nothing has been spent
    /// yet and the obfuscation cost would otherwise be `log 0`.
    pub fn incentive_floor(&self) -> f64 {
        self.incentives[0]
    }

    /// Copy of the model with a different reference schedule.
    pub fn with_schedule(&self, schedule: ReferenceSchedule) -> Result<Self> {
        if schedule.len() != self.horizon {
            return Err(Error::Shape {
                expected: self.horizon,
                got: schedule.len(),
            });
        }
        let mut m = self.clone();
        m.schedule = schedule;
        Ok(m)
    }

    pub fn with_fixed_point_iterations(mut self, rounds: usize) -> Self {
        self.fixed_point_iterations = rounds;
        self
    }

    pub fn action(&self, u: usize) -> Result<Action> {
        let levels = self.incentives.len();
        if u >= 2 * levels {
            return Err(Error::index("action", u, 2 * levels));
        }
        Ok(if u < levels {
            Action {
                kind: QueryKind::Obfuscate,
                incentive: u,
            }
        } else {
            Action {
                kind: QueryKind::Learn,
                incentive: u - levels,
            }
        })
    }

    pub fn action_index(&self, action: Action) -> usize {
        match action.kind {
            QueryKind::Obfuscate => action.incentive,
            QueryKind::Learn => self.incentives.len() + action.incentive,
        }
    }

    pub fn incentive_of(&self, u: usize) -> Result<f64> {
        Ok(self.incentives[self.action(u)?.incentive])
    }

    fn check_state(&self, b: usize, o: usize) -> Result<()> {
        if b > self.queue_capacity {
            return Err(Error::index("queue state", b, self.queue_capacity + 1));
        }
        if o >= self.num_oracle_states() {
            return Err(Error::index("oracle state", o, self.num_oracle_states()));
        }
        Ok(())
    }

    /// Probability that action `u` in `(b, o)` completes a successful
    /// gradient step. Zero for obfuscation and for the empty queue.
    pub fn step_probability(&self, b: usize, o: usize, u: usize) -> Result<f64> {
        self.check_state(b, o)?;
        let a = self.action(u)?;
        if b == 0 || !a.kind.is_learn() {
            return Ok(0.0);
        }
        self.oracle.success_probability(o, a.incentive)
    }

    /// Sparse `P((b′, o′) | (b, o), u)` as `(b′, o′, mass)` triples.
    ///
    /// The oracle state moves by `P_O` every step; the queue drops by one on a
    /// successful learning query and `b = 0` is absorbing.
    pub fn transition_distribution(
        &self,
        b: usize,
        o: usize,
        u: usize,
    ) -> Result<Vec<(usize, usize, f64)>> {
        let p = self.step_probability(b, o, u)?;
        let row = &self.oracle.transition_matrix()[o];
        let mut out = Vec::with_capacity(2 * row.len());
        for (next, po) in row.iter().enumerate() {
            if *po == 0.0 {
                continue;
            }
            if p > 0.0 {
                out.push((b - 1, next, po * p));
            }
            if p < 1.0 {
                out.push((b, next, po * (1.0 - p)));
            }
        }
        Ok(out)
    }

    /// Learning cost of action `u` in `(b, o)` given `I_n` and `δ_n`:
    ///
    /// * learn: `ψ₁(b)/ψ₂(o) · log((I + i/δ)/(I + i))`
    /// * obfuscate: `ψ₂(o)/ψ₁(b) · log(I/(I + i))`, with `I = 0` replaced by
    ///   the smallest incentive.
    pub fn stage_cost(&self, b: usize, o: usize, u: usize, spent: f64, belief: f64) -> Result<f64> {
        self.check_state(b, o)?;
        let a = self.action(u)?;
        if !(spent >= 0.0) {
            return Err(Error::Domain(format!(
                "spent incentive {spent} is negative"
            )));
        }
        if !(belief > 0.0 && belief <= 1.0) {
            return Err(Error::Domain(format!(
                "eavesdropper belief {belief} outside (0, 1]"
            )));
        }
        let i = self.incentives[a.incentive];
        let psi1 = self.queue_weight[b];
        let psi2 = self.oracle_weight[o];
        Ok(match a.kind {
            QueryKind::Learn => psi1 / psi2 * ((spent + i / belief) / (spent + i)).ln(),
            QueryKind::Obfuscate => {
                let spent = if spent > 0.0 {
                    spent
                } else {
                    self.incentive_floor()
                };
                psi2 / psi1 * (spent / (spent + i)).ln()
            }
        })
    }

    /// Stage cost with the belief clamped to `[belief_floor, 1]`.
    pub fn stage_cost_clamped(
        &self,
        b: usize,
        o: usize,
        u: usize,
        spent: f64,
        belief: f64,
    ) -> Result<f64> {
        self.stage_cost(b, o, u, spent, belief.clamp(self.belief_floor, 1.0))
    }

    /// Stage cost at `n` queries remaining using the reference schedule.
    pub fn scheduled_cost(&self, n: usize, b: usize, o: usize, u: usize) -> Result<f64> {
        if n == 0 || n > self.horizon {
            return Err(Error::index("stage", n, self.horizon + 1));
        }
        let e = self.schedule.at(n);
        self.stage_cost_clamped(b, o, u, e.spent, e.belief)
    }

    /// Weight on stage costs in the total cost: `1/N`.
    pub fn stage_weight(&self) -> f64 {
        1.0 / self.horizon as f64
    }

    /// Expected `(I_n, δ_n)` along the state distribution induced by a
    /// policy started at `(M, o ~ initial)`.
    ///
    /// `policy(n, o, b)` returns the action index, or `None` for a uniformly
    /// random action. `δ_n` is the ratio of expected learning incentive to
    /// expected total incentive (`½` when nothing was spent).
    pub fn expected_schedule<F>(&self, policy: F) -> ReferenceSchedule
    where
        F: Fn(usize, usize, usize) -> Option<usize>,
    {
        let states = self.num_oracle_states();
        let m = self.queue_capacity;
        let actions = self.num_actions();
        let mut dist = vec![vec![0.0; m + 1]; states];
        for (o, p) in self.initial_oracle.iter().enumerate() {
            dist[o][m] = *p;
        }
        let mut spent = 0.0;
        let mut learn_weight = 0.0;
        let mut entries = vec![
            ScheduleEntry {
                spent: 0.0,
                belief: 0.5
            };
            self.horizon
        ];
        for n in (1..=self.horizon).rev() {
            let belief = if spent > 0.0 {
                learn_weight / spent
            } else {
                0.5
            };
            entries[n - 1] = ScheduleEntry { spent, belief };
            let mut next = vec![vec![0.0; m + 1]; states];
            for o in 0..states {
                for b in 0..=m {
                    let mass = dist[o][b];
                    if mass == 0.0 {
                        continue;
                    }
                    let choice: Vec<(usize, f64)> = match policy(n, o, b) {
                        Some(u) => vec![(u, 1.0)],
                        None => (0..actions).map(|u| (u, 1.0 / actions as f64)).collect(),
                    };
                    for (u, w) in choice {
                        let a = self.action(u).expect("policy returned a valid action");
                        let i = self.incentives[a.incentive];
                        spent += mass * w * i;
                        if a.kind.is_learn() {
                            learn_weight += mass * w * i;
                        }
                        for (nb, no, p) in self
                            .transition_distribution(b, o, u)
                            .expect("state in range")
                        {
                            next[no][nb] += mass * w * p;
                        }
                    }
                }
            }
            dist = next;
        }
        ReferenceSchedule::new(entries)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::NoiseKind;

    fn tiny(psi1: Vec<f64>) -> MdpModel {
        let oracle = OracleModel::new(
            vec![vec![0.6], vec![0.6]],
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            0.0,
            NoiseKind::None,
        )
        .unwrap();
        let m = psi1.len() - 1;
        MdpModel::new(ModelSpec {
            queue_capacity: m,
            horizon: 3,
            oracle,
            incentives: vec![1.0],
            queue_weight: psi1,
            oracle_weight: vec![1.0, 4.0],
            terminal_cost: (0..=m).map(|b| (b * b) as f64).collect(),
            schedule: None,
            fixed_point_iterations: 0,
            belief_floor: 1e-3,
            initial_oracle: None,
        })
        .unwrap()
    }

    #[test]
    fn learning_transition_splits_mass() {
        let model = tiny(vec![1.0, 1.0, 4.0]);
        let d = model.transition_distribution(2, 0, 1).unwrap();
        let down: f64 = d
            .iter()
            .filter(|(b, o, _)| *b == 1 && *o == 1)
            .map(|x| x.2)
            .sum();
        assert!((down - 0.3).abs() < 1e-15);
        let total: f64 = d.iter().map(|x| x.2).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn obfuscation_keeps_queue() {
        let model = tiny(vec![1.0, 1.0, 4.0]);
        let d = model.transition_distribution(2, 0, 0).unwrap();
        assert!(d.iter().all(|(b, _, _)| *b == 2));
        let empty = model.transition_distribution(0, 1, 1).unwrap();
        assert!(empty.iter().all(|(b, _, _)| *b == 0));
    }

    #[test]
    fn transitions_are_stochastic_everywhere() {
        let model = tiny(vec![1.0, 1.0, 4.0]);
        for b in 0..=2 {
            for o in 0..2 {
                for u in 0..2 {
                    let total: f64 = model
                        .transition_distribution(b, o, u)
                        .unwrap()
                        .iter()
                        .map(|x| x.2)
                        .sum();
                    assert!((total - 1.0).abs() < 1e-12);
                }
            }
        }
        assert!(model.transition_distribution(3, 0, 0).is_err());
        assert!(model.transition_distribution(0, 2, 0).is_err());
        assert!(model.transition_distribution(0, 0, 2).is_err());
    }

    #[test]
    fn stage_cost_examples() {
        // ψ₁(b) = b² would vanish at b = 0, so this fixture starts at 1
        let model = tiny(vec![1.0, 1.0, 4.0]);
        let learn = model.stage_cost(2, 0, 1, 3.0, 0.5).unwrap();
        assert!((learn - 4.0 * (5.0f64 / 4.0).ln()).abs() < 1e-12);
        assert!((learn - 0.89257).abs() < 1e-5);
        let obf = model.stage_cost(2, 0, 0, 3.0, 0.5).unwrap();
        assert!((obf - 0.25 * (0.75f64).ln()).abs() < 1e-12);
        assert!((obf + 0.07192).abs() < 1e-5);
        assert_eq!(model.stage_cost(2, 0, 1, 3.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn zero_belief_is_domain_error() {
        let model = tiny(vec![1.0, 1.0, 4.0]);
        assert!(matches!(
            model.stage_cost(1, 0, 1, 3.0, 0.0),
            Err(Error::Domain(_))
        ));
        assert!(model
            .stage_cost_clamped(1, 0, 1, 3.0, 0.0)
            .unwrap()
            .is_finite());
    }

    #[test]
    fn nothing_spent_uses_incentive_floor() {
        let model = tiny(vec![1.0, 1.0, 4.0]);
        let c = model.stage_cost(1, 0, 0, 0.0, 0.5).unwrap();
        assert!((c - (0.5f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_convex_queue_weight() {
        let oracle = OracleModel::memoryless(vec![0.5], 0.0, NoiseKind::None).unwrap();
        let err = MdpModel::new(ModelSpec {
            queue_capacity: 2,
            horizon: 1,
            oracle,
            incentives: vec![1.0],
            queue_weight: vec![1.0, 3.0, 4.0],
            oracle_weight: vec![1.0],
            terminal_cost: vec![0.0, 1.0, 2.0],
            schedule: None,
            fixed_point_iterations: 0,
            belief_floor: 1e-3,
            initial_oracle: None,
        })
        .unwrap_err();
        assert!(err.to_string().contains("R1"), "{err}");
    }

    #[test]
    fn uniform_schedule_spends_mean_incentive() {
        let model = tiny(vec![1.0, 1.0, 4.0]);
        let s = model.schedule();
        assert_eq!(
            s.at(3),
            ScheduleEntry {
                spent: 0.0,
                belief: 0.5
            }
        );
        assert!((s.at(2).spent - 1.0).abs() < 1e-12);
        assert!((s.at(1).spent - 2.0).abs() < 1e-12);
        assert!((s.at(1).belief - 0.5).abs() < 1e-12);
    }

    #[test]
    fn action_order_is_obfuscate_first() {
        let oracle = OracleModel::memoryless(vec![0.1, 0.2, 0.3], 0.0, NoiseKind::None).unwrap();
        let model = MdpModel::new(ModelSpec {
            queue_capacity: 1,
            horizon: 1,
            oracle,
            incentives: vec![1.0, 2.0, 3.0],
            queue_weight: vec![1.0, 1.0],
            oracle_weight: vec![1.0],
            terminal_cost: vec![0.0, 1.0],
            schedule: None,
            fixed_point_iterations: 0,
            belief_floor: 1e-3,
            initial_oracle: None,
        })
        .unwrap();
        let kinds: Vec<_> = (0..6).map(|u| model.action(u).unwrap()).collect();
        assert_eq!(
            kinds[0],
            Action {
                kind: QueryKind::Obfuscate,
                incentive: 0
            }
        );
        assert_eq!(
            kinds[2],
            Action {
                kind: QueryKind::Obfuscate,
                incentive: 2
            }
        );
        assert_eq!(
            kinds[3],
            Action {
                kind: QueryKind::Learn,
                incentive: 0
            }
        );
        for (u, a) in kinds.iter().enumerate() {
            assert_eq!(model.action_index(*a), u);
        }
    }
}
