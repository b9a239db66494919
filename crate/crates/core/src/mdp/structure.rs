//! Structural checks: monotone-threshold policies, the shape of the value
//! function, and numeric versions of the assumptions that make the optimal
//! action increasing in the queue state.

use std::fmt;

use serde::Serialize;

use super::model::{first_concavity, first_decrease, MdpModel};
use super::solve::{PolicyTable, ValueTable};

/// A decrease of the optimal action between `b − 1` and `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ThresholdViolation {
    pub n: usize,
    pub o: usize,
    pub b: usize,
    pub before: usize,
    pub after: usize,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ThresholdReport {
    pub violations: Vec<ThresholdViolation>,
}

impl ThresholdReport {
    pub fn passes(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `u*[n][o][·]` is nondecreasing in `b` for every `(o, n)`.
pub fn verify_threshold_structure(policy: &PolicyTable) -> ThresholdReport {
    let mut violations = Vec::new();
    for n in 1..=policy.horizon() {
        for o in 0..policy.num_oracle_states() {
            for (k, w) in policy.column(n, o).windows(2).enumerate() {
                if w[1] < w[0] {
                    violations.push(ThresholdViolation {
                        n,
                        o,
                        b: k + 1,
                        before: w[0],
                        after: w[1],
                    });
                }
            }
        }
    }
    ThresholdReport { violations }
}

/// Where `V[n][o][·]` fails to be nondecreasing or convex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ShapeViolation {
    Decreasing { n: usize, o: usize, b: usize },
    Concave { n: usize, o: usize, b: usize },
}

/// Monotonicity and discrete convexity of each value column, with tolerance
/// `1e-9 · max|V|`.
pub fn check_value_shape(values: &ValueTable) -> Vec<ShapeViolation> {
    let tol = 1e-9 * values.max_abs().max(1.0);
    let mut out = Vec::new();
    for n in 0..=values.horizon() {
        for o in 0..values.num_oracle_states() {
            let col = values.column(n, o);
            for (k, w) in col.windows(2).enumerate() {
                if w[1] < w[0] - tol {
                    out.push(ShapeViolation::Decreasing { n, o, b: k + 1 });
                }
            }
            for (k, w) in col.windows(3).enumerate() {
                if w[2] - 2.0 * w[1] + w[0] < -tol {
                    out.push(ShapeViolation::Concave { n, o, b: k + 1 });
                }
            }
        }
    }
    out
}

/// Outcome of one assumption check.
#[derive(Debug, Clone, Serialize)]
pub struct AssumptionCheck {
    pub name: &'static str,
    pub description: &'static str,
    pub violations: usize,
    /// First few violations, human readable.
    pub examples: Vec<String>,
}

impl AssumptionCheck {
    fn new(name: &'static str, description: &'static str) -> Self {
        Self {
            name,
            description,
            violations: 0,
            examples: Vec::new(),
        }
    }

    fn fail(&mut self, msg: impl FnOnce() -> String) {
        self.violations += 1;
        if self.examples.len() < MAX_EXAMPLES {
            self.examples.push(msg());
        }
    }

    pub fn passes(&self) -> bool {
        self.violations == 0
    }
}

const MAX_EXAMPLES: usize = 5;

/// Report of all six assumption checks, in order R1..R6.
#[derive(Debug, Clone, Serialize)]
pub struct StructureReport {
    pub checks: Vec<AssumptionCheck>,
}

impl StructureReport {
    pub fn passes(&self) -> bool {
        self.checks.iter().all(AssumptionCheck::passes)
    }

    pub fn check(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn passed(&self, name: &str) -> bool {
        self.check(name).is_some_and(AssumptionCheck::passes)
    }

    /// R1–R3: the premises for a nondecreasing, convex value function.
    pub fn value_premises_hold(&self) -> bool {
        ["R1", "R2", "R3"].iter().all(|n| self.passed(n))
    }

    pub fn failing(&self) -> Vec<&'static str> {
        self.checks
            .iter()
            .filter(|c| !c.passes())
            .map(|c| c.name)
            .collect()
    }
}

impl fmt::Display for StructureReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let status = if c.passes() { "pass" } else { "FAIL" };
            writeln!(
                f,
                "{:<3} {:<4} {} ({} violations)",
                c.name, status, c.description, c.violations
            )?;
            for e in &c.examples {
                writeln!(f, "      {e}")?;
            }
        }
        Ok(())
    }
}

/// Feasible range `lo ≤ γ ≤ hi` for a positive multiplier (`lo = 0` means
/// any positive value down to zero, exclusive).
#[derive(Debug, Clone, Copy)]
struct Range {
    lo: f64,
    hi: f64,
}

const RATIO_TOL: f64 = 1e-9;

impl Range {
    fn unit() -> Self {
        Range { lo: 0.0, hi: 1.0 }
    }

    /// Restricts to `γ` with `lhs ≤ γ·rhs` (within `tol`).
    fn require(&mut self, lhs: f64, rhs: f64, tol: f64) {
        if rhs > tol {
            self.lo = self.lo.max(lhs / rhs);
        } else if rhs < -tol {
            self.hi = self.hi.min(lhs / rhs);
        } else if lhs > tol {
            self.hi = f64::NEG_INFINITY;
        }
    }

    fn intersect(self, other: Range) -> Range {
        Range {
            lo: self.lo.max(other.lo),
            hi: self.hi.min(other.hi),
        }
    }

    fn feasible(&self) -> bool {
        self.hi > 0.0 && self.lo <= self.hi * (1.0 + RATIO_TOL) + RATIO_TOL
    }
}

/// Determinants of all `k × k` minors (`k ≤ 3`) with nonzero rows, reporting
/// the most negative. Columns outside the chosen rows' supports give zero
/// minors and are skipped.
fn most_negative_minor(matrix: &[Vec<f64>]) -> f64 {
    let n = matrix.len();
    let support: Vec<Vec<usize>> = matrix
        .iter()
        .map(|row| (0..row.len()).filter(|&j| row[j] != 0.0).collect())
        .collect();
    let mut worst = matrix
        .iter()
        .flatten()
        .fold(f64::INFINITY, |m, v| m.min(*v));
    let union = |rows: &[usize]| {
        let mut cols: Vec<usize> = rows
            .iter()
            .flat_map(|r| support[*r].iter().copied())
            .collect();
        cols.sort_unstable();
        cols.dedup();
        cols
    };
    for r0 in 0..n {
        for r1 in r0 + 1..n {
            let cols = union(&[r0, r1]);
            for (a, &c0) in cols.iter().enumerate() {
                for &c1 in &cols[a + 1..] {
                    let det = matrix[r0][c0] * matrix[r1][c1] - matrix[r0][c1] * matrix[r1][c0];
                    worst = worst.min(det);
                }
            }
            for r2 in r1 + 1..n {
                let cols = union(&[r0, r1, r2]);
                for (a, &c0) in cols.iter().enumerate() {
                    for (b, &c1) in cols.iter().enumerate().skip(a + 1) {
                        for &c2 in &cols[b + 1..] {
                            let m = |r: usize, c: usize| matrix[r][c];
                            let det = m(r0, c0) * (m(r1, c1) * m(r2, c2) - m(r1, c2) * m(r2, c1))
                                - m(r0, c1) * (m(r1, c0) * m(r2, c2) - m(r1, c2) * m(r2, c0))
                                + m(r0, c2) * (m(r1, c0) * m(r2, c1) - m(r1, c1) * m(r2, c0));
                            worst = worst.min(det);
                        }
                    }
                }
            }
        }
    }
    worst
}

/// Queue kernel `P(b′ | b, o, u)` as a dense matrix.
pub fn queue_kernel(model: &MdpModel, o: usize, u: usize) -> Vec<Vec<f64>> {
    let m = model.queue_capacity();
    (0..=m)
        .map(|b| {
            let p = model.step_probability(b, o, u).expect("valid state");
            let mut row = vec![0.0; m + 1];
            row[b] += 1.0 - p;
            if p > 0.0 {
                row[b - 1] += p;
            }
            row
        })
        .collect()
}

/// Increasing convex test function `max(0, b − j)` for `j ≥ −1`.
fn hockey_stick(j: isize, b: usize) -> f64 {
    (b as isize - j).max(0) as f64
}

/// Numeric checks of the interval-dominance premises:
///
/// * R1 stage cost nondecreasing and convex in `b`, per stage, state and action;
/// * R2 queue kernels TP3 with conditional mean nondecreasing and convex;
/// * R3 terminal cost nondecreasing and convex;
/// * R4 for each `b′ > b` and adjacent actions, some `α ∈ (0,1]` with
///   `c(b′,u+1) − c(b′,u) ≤ α·(c(b,u+1) − c(b,u))`;
/// * R5 for each `b′ > b` and adjacent actions, some `β ∈ (0,1]` with
///   `f′(P_{b′}(u+1) − P_{b′}(u)) ≤ β·f′(P_b(u+1) − P_b(u))` for every
///   increasing convex `f` (checked on the hockey-stick basis);
/// * R6 a common multiplier for R4 and R5, nondecreasing in `u`.
pub fn check_structural_assumptions(model: &MdpModel) -> StructureReport {
    let m = model.queue_capacity();
    let states = model.num_oracle_states();
    let actions = model.num_actions();
    let horizon = model.horizon();

    let mut r1 = AssumptionCheck::new("R1", "stage cost nondecreasing and convex in b");
    let mut r2 = AssumptionCheck::new(
        "R2",
        "queue kernel TP3, conditional mean nondecreasing and convex",
    );
    let mut r3 = AssumptionCheck::new("R3", "terminal cost nondecreasing and convex");
    let mut r4 = AssumptionCheck::new("R4", "cost differences dominated with alpha in (0,1]");
    let mut r5 = AssumptionCheck::new(
        "R5",
        "transition differences convex-dominated with beta in (0,1]",
    );
    let mut r6 = AssumptionCheck::new("R6", "common multiplier alpha = beta, nondecreasing in u");

    // costs[n-1][o][u][b]
    let costs: Vec<Vec<Vec<Vec<f64>>>> = (1..=horizon)
        .map(|n| {
            (0..states)
                .map(|o| {
                    (0..actions)
                        .map(|u| {
                            (0..=m)
                                .map(|b| model.scheduled_cost(n, b, o, u).unwrap_or(f64::NAN))
                                .collect()
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    for n in 1..=horizon {
        for o in 0..states {
            for u in 0..actions {
                let c = &costs[n - 1][o][u];
                if c.iter().any(|x| !x.is_finite()) {
                    r1.fail(|| format!("n={n} o={o} u={u}: non-finite cost"));
                    continue;
                }
                if let Some(b) = first_decrease(c) {
                    r1.fail(|| format!("n={n} o={o} u={u}: cost decreases at b={b}"));
                }
                if let Some(b) = first_concavity(c) {
                    r1.fail(|| format!("n={n} o={o} u={u}: cost not convex at b={b}"));
                }
            }
        }
    }

    for o in 0..states {
        for u in 0..actions {
            let kernel = queue_kernel(model, o, u);
            let worst = most_negative_minor(&kernel);
            if worst < -1e-12 {
                r2.fail(|| format!("o={o} u={u}: minor {worst:.3e} < 0"));
            }
            let mean: Vec<f64> = kernel
                .iter()
                .map(|row| row.iter().enumerate().map(|(b, p)| b as f64 * p).sum())
                .collect();
            if let Some(b) = first_decrease(&mean) {
                r2.fail(|| format!("o={o} u={u}: conditional mean decreases at b={b}"));
            }
            if let Some(b) = first_concavity(&mean) {
                r2.fail(|| format!("o={o} u={u}: conditional mean not convex at b={b}"));
            }
        }
    }

    let d = model.terminal_cost();
    if let Some(b) = first_decrease(d) {
        r3.fail(|| format!("terminal cost decreases at b={b}"));
    }
    if let Some(b) = first_concavity(d) {
        r3.fail(|| format!("terminal cost not convex at b={b}"));
    }

    // R5 ranges do not depend on the stage: beta[o][u][b][b′]
    let basis: Vec<isize> = (-1..m as isize).collect();
    let mut beta =
        vec![vec![vec![vec![Range::unit(); m + 1]; m + 1]; actions.saturating_sub(1)]; states];
    for o in 0..states {
        for u in 0..actions.saturating_sub(1) {
            let step = |b: usize, v: usize| model.step_probability(b, o, v).expect("valid state");
            // f′P_b(v) = f(b) − p_v(b)·(f(b) − f(b−1))
            let expect = |j: isize, b: usize, v: usize| {
                let p = step(b, v);
                let f = hockey_stick(j, b);
                if p > 0.0 {
                    f - p * (f - hockey_stick(j, b - 1))
                } else {
                    f
                }
            };
            for b in 0..=m {
                for bp in b + 1..=m {
                    let mut range = Range::unit();
                    for &j in &basis {
                        let lhs = expect(j, bp, u + 1) - expect(j, bp, u);
                        let rhs = expect(j, b, u + 1) - expect(j, b, u);
                        range.require(lhs, rhs, 1e-13);
                    }
                    if !range.feasible() {
                        r5.fail(|| format!("o={o} u={u} b={b} b'={bp}: no beta in (0,1]"));
                    }
                    beta[o][u][b][bp] = range;
                }
            }
        }
    }

    for n in 1..=horizon {
        for o in 0..states {
            let scale = costs[n - 1][o]
                .iter()
                .flatten()
                .fold(1.0f64, |s, v| s.max(v.abs()));
            let tol = 1e-12 * scale;
            for b in 0..=m {
                for bp in b + 1..=m {
                    let mut chain = 0.0f64;
                    let mut common_ok = true;
                    for u in 0..actions.saturating_sub(1) {
                        let c = &costs[n - 1][o];
                        let mut alpha = Range::unit();
                        alpha.require(c[u + 1][bp] - c[u][bp], c[u + 1][b] - c[u][b], tol);
                        if !alpha.feasible() {
                            r4.fail(|| {
                                format!("n={n} o={o} u={u} b={b} b'={bp}: no alpha in (0,1]")
                            });
                        }
                        let both = alpha.intersect(beta[o][u][b][bp]);
                        if common_ok {
                            chain = chain.max(both.lo);
                            if !(both.feasible()
                                && chain <= both.hi * (1.0 + RATIO_TOL) + RATIO_TOL)
                            {
                                common_ok = false;
                            }
                        }
                    }
                    if !common_ok {
                        r6.fail(|| {
                            format!("n={n} o={o} b={b} b'={bp}: no common increasing multiplier")
                        });
                    }
                }
            }
        }
    }

    StructureReport {
        checks: vec![r1, r2, r3, r4, r5, r6],
    }
}
