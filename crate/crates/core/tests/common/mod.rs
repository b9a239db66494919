//! Shared model generators and exact oracles for the integration tests.

#![allow(dead_code, clippy::needless_range_loop)]

use covert::mdp::{MdpModel, ModelSpec, ReferenceSchedule};
use covert::oracle::{NoiseKind, OracleModel};
use covert::rng::stream;
use rand::Rng;

/// Random model with the given sizes. `Γ` rows are increasing in the
/// incentive, the oracle chain has positive entries, and the weights are
/// positive, nondecreasing and convex. `flat_queue_weight` makes `ψ₁`
/// constant in the queue state.
pub fn random_model<R: Rng>(
    rng: &mut R,
    states: usize,
    queue_capacity: usize,
    levels: usize,
    horizon: usize,
    flat_queue_weight: bool,
) -> MdpModel {
    let success: Vec<Vec<f64>> = (0..states)
        .map(|_| {
            let mut row: Vec<f64> = (0..levels).map(|_| rng.random_range(0.05..0.95)).collect();
            row.sort_by(f64::total_cmp);
            row
        })
        .collect();
    let transition: Vec<Vec<f64>> = (0..states)
        .map(|_| {
            let raw: Vec<f64> = (0..states).map(|_| rng.random_range(0.1..1.0)).collect();
            let total: f64 = raw.iter().sum();
            raw.iter().map(|x| x / total).collect()
        })
        .collect();
    let oracle =
        OracleModel::new(success, transition, 1.0, NoiseKind::Gaussian).expect("valid oracle");
    let mut incentives = Vec::with_capacity(levels);
    let mut level = 0.0;
    for _ in 0..levels {
        level += rng.random_range(0.5..2.0);
        incentives.push(level);
    }
    let base = rng.random_range(0.5..2.0);
    let (slope, curve) = if flat_queue_weight {
        (0.0, 0.0)
    } else {
        (rng.random_range(0.0..1.0), rng.random_range(0.0..0.5))
    };
    let queue_weight = (0..=queue_capacity)
        .map(|b| base + slope * b as f64 + curve * (b * b) as f64)
        .collect();
    let o_base = rng.random_range(0.5..2.0);
    let o_slope = rng.random_range(0.0..1.0);
    let oracle_weight = (0..states)
        .map(|o| o_base + o_slope * (o * o) as f64)
        .collect();
    let power = rng.random_range(1.0..4.0);
    let scale = rng.random_range(0.1..5.0);
    let terminal_cost = (0..=queue_capacity)
        .map(|b| scale * (b as f64 / queue_capacity as f64).powf(power))
        .collect();
    MdpModel::new(ModelSpec {
        queue_capacity,
        horizon,
        oracle,
        incentives,
        queue_weight,
        oracle_weight,
        terminal_cost,
        schedule: None,
        fixed_point_iterations: 0,
        belief_floor: 0.05,
        initial_oracle: None,
    })
    .expect("valid model")
}

/// Small hand-sized model for exhaustive policy enumeration.
pub fn small_model(
    states: usize,
    queue_capacity: usize,
    horizon: usize,
    fixed_point_iterations: usize,
) -> MdpModel {
    let success: Vec<Vec<f64>> = (0..states).map(|o| vec![0.4 + 0.2 * o as f64]).collect();
    let transition: Vec<Vec<f64>> = (0..states)
        .map(|o| {
            (0..states)
                .map(|k| {
                    if k == o {
                        0.7
                    } else {
                        0.3 / (states - 1).max(1) as f64
                    }
                })
                .collect()
        })
        .collect();
    let transition = if states == 1 {
        vec![vec![1.0]]
    } else {
        transition
    };
    let oracle = OracleModel::new(success, transition, 0.0, NoiseKind::None).expect("valid oracle");
    MdpModel::new(ModelSpec {
        queue_capacity,
        horizon,
        oracle,
        incentives: vec![1.0],
        queue_weight: (0..=queue_capacity).map(|b| 1.0 + (b * b) as f64).collect(),
        oracle_weight: (0..states).map(|o| 1.0 + o as f64).collect(),
        terminal_cost: (0..=queue_capacity).map(|b| 2.0 * (b * b) as f64).collect(),
        schedule: None,
        fixed_point_iterations,
        belief_floor: 0.05,
        initial_oracle: None,
    })
    .expect("valid model")
}

/// Exact expected total cost of the nonstationary policy `act(n, o, b)` from
/// every start state, by backward evaluation. Indexed `[o][b]`.
pub fn exact_policy_value<F>(model: &MdpModel, act: F) -> Vec<Vec<f64>>
where
    F: Fn(usize, usize, usize) -> usize,
{
    let states = model.num_oracle_states();
    let m = model.queue_capacity();
    let mut v: Vec<Vec<f64>> = (0..states)
        .map(|_| model.terminal_cost().to_vec())
        .collect();
    for n in 1..=model.horizon() {
        let mut next = vec![vec![0.0; m + 1]; states];
        for o in 0..states {
            for b in 0..=m {
                let u = act(n, o, b);
                let cost =
                    model.stage_weight() * model.scheduled_cost(n, b, o, u).expect("finite cost");
                let cont: f64 = model
                    .transition_distribution(b, o, u)
                    .expect("valid state")
                    .iter()
                    .map(|&(b2, o2, p)| p * v[o2][b2])
                    .sum();
                next[o][b] = cost + cont;
            }
        }
        v = next;
    }
    v
}

/// Minimum expected cost over every deterministic Markov policy, per start
/// state `[o][b]`, by enumerating all `|U|^(stages·states)` tables.
pub fn brute_force_minimum(model: &MdpModel) -> Vec<Vec<f64>> {
    let states = model.num_oracle_states();
    let m = model.queue_capacity();
    let actions = model.num_actions();
    let horizon = model.horizon();
    let slots = horizon * states * (m + 1);
    let count = (actions as u64).pow(slots as u32);
    assert!(count <= 10_000, "{count} policies is too many to enumerate");
    let mut best = vec![vec![f64::INFINITY; m + 1]; states];
    for code in 0..count {
        let table = |n: usize, o: usize, b: usize| {
            let slot = ((n - 1) * states + o) * (m + 1) + b;
            ((code / (actions as u64).pow(slot as u32)) % actions as u64) as usize
        };
        let v = exact_policy_value(model, table);
        for o in 0..states {
            for b in 0..=m {
                best[o][b] = best[o][b].min(v[o][b]);
            }
        }
    }
    best
}

/// Frozen constant schedule, handy for hand checks.
pub fn constant_schedule(horizon: usize) -> ReferenceSchedule {
    ReferenceSchedule::constant(horizon, 2.0, 0.5)
}

/// Runs `runs` independent learners for exactly `M` successful steps at the
/// step size `μ` from [`compute_budget`] on `f(x) = ½γ‖x‖²` started at
/// `x₀ = (1, …, 1)`, and returns the budget with the mean final `‖∇f(x̂)‖²`.
pub fn sg_contract(
    dim: usize,
    lipschitz: f64,
    noise_variance: f64,
    target: f64,
    runs: u64,
    seed: u64,
) -> (covert::gradient::SgBudget, f64) {
    use covert::gradient::{compute_budget, DualSgState, QueryKind};
    use covert::objective::{norm_sq, Objective, Quadratic};
    let objective = Quadratic::centered(lipschitz, dim);
    let start = vec![1.0; dim];
    let budget =
        compute_budget(objective.value(&start), lipschitz, noise_variance, target).unwrap();
    let oracle = OracleModel::memoryless(vec![1.0], noise_variance, NoiseKind::Gaussian).unwrap();
    let mut total = 0.0;
    for run in 0..runs {
        let mut reply = stream(seed, 2 * run);
        let mut noise = stream(seed, 2 * run + 1);
        let mut sg = DualSgState::new(start.clone(), vec![0.0; dim], budget.step_size).unwrap();
        for _ in 0..budget.steps {
            let query = sg.make_query(QueryKind::Learn).to_vec();
            let response = oracle
                .respond(&query, 0, 0, &objective, &mut reply, &mut noise)
                .unwrap();
            sg.update(QueryKind::Learn, &response, &[]).unwrap();
        }
        total += norm_sq(&objective.gradient(&sg.learn_estimate));
    }
    (budget, total / runs as f64)
}

/// Exact mean and variance of the final queue of the `(b, o)` chain under
/// `act(n, o, b)`, started at `b = M` with the model's initial oracle
/// distribution.
pub fn exact_final_queue<F>(model: &MdpModel, act: F) -> (f64, f64)
where
    F: Fn(usize, usize, usize) -> usize,
{
    let states = model.num_oracle_states();
    let m = model.queue_capacity();
    let mut dist = vec![vec![0.0; m + 1]; states];
    for (o, p) in model.initial_oracle().iter().enumerate() {
        dist[o][m] = *p;
    }
    for n in (1..=model.horizon()).rev() {
        let mut next = vec![vec![0.0; m + 1]; states];
        for o in 0..states {
            for b in 0..=m {
                if dist[o][b] == 0.0 {
                    continue;
                }
                for (b2, o2, p) in model.transition_distribution(b, o, act(n, o, b)).unwrap() {
                    next[o2][b2] += dist[o][b] * p;
                }
            }
        }
        dist = next;
    }
    let moment = |k: i32| -> f64 {
        dist.iter()
            .flat_map(|row| row.iter().enumerate())
            .map(|(b, p)| (b as f64).powi(k) * p)
            .sum()
    };
    let mean = moment(1);
    (mean, moment(2) - mean * mean)
}
