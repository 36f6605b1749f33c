//! Closed-form capacity fixtures: linear approximators fitted to quadratic
//! targets, and chain tasks that differ in one forbidden transition.

/// Composite Simpson rule over `[a, b]` with `n` (even) intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    assert!(n >= 2 && n % 2 == 0, "Simpson needs an even interval count");
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n)
        .map(|k| f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 })
        .sum();
    h / 3.0 * (f(a) + inner + f(b))
}

/// Quadratic target `c2 s^2 + c1 s`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quadratic {
    pub c2: f64,
    pub c1: f64,
}

impl Quadratic {
    pub fn eval(&self, s: f64) -> f64 {
        self.c2 * s * s + self.c1 * s
    }
}

/// The four targets `-s^2 + 2s`, `s^2`, `-0.01 s^2 + 0.02 s`, `0.01 s^2`.
pub const LINEAR_TARGETS: [Quadratic; 4] = [
    Quadratic { c2: -1.0, c1: 2.0 },
    Quadratic { c2: 1.0, c1: 0.0 },
    Quadratic { c2: -0.01, c1: 0.02 },
    Quadratic { c2: 0.01, c1: 0.0 },
];

/// Expected absolute error of `pi(s) = slope * s` against `target` for
/// states uniform on `[0, 1]`.
pub fn linear_expected_error(slope: f64, target: Quadratic) -> f64 {
    simpson(|s| (slope * s - target.eval(s)).abs(), 0.0, 1.0, 20_000)
}

/// Smallest set of candidate slopes covering every target within `eps`,
/// by exhaustive search over subsets.
pub fn min_linear_cover(slopes: &[f64], targets: &[Quadratic], eps: f64) -> Option<Vec<f64>> {
    let errors: Vec<Vec<f64>> = slopes
        .iter()
        .map(|&a| targets.iter().map(|&t| linear_expected_error(a, t)).collect())
        .collect();
    let mut best: Option<Vec<usize>> = None;
    for mask in 1u32..(1 << slopes.len()) {
        let chosen: Vec<usize> = (0..slopes.len()).filter(|i| mask & (1 << i) != 0).collect();
        let covers = (0..targets.len()).all(|t| chosen.iter().any(|&i| errors[i][t] < eps));
        if covers && best.as_ref().is_none_or(|b| chosen.len() < b.len()) {
            best = Some(chosen);
        }
    }
    best.map(|b| b.into_iter().map(|i| slopes[i]).collect())
}

/// Chain task on states `0..=4` where one transition `from -> to` between
/// neighbours is forbidden.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChainTask {
    pub from: usize,
    pub to: usize,
}

pub const CHAIN_LAST: usize = 4;

pub const CHAIN_TASKS: [ChainTask; 6] = [
    ChainTask { from: 1, to: 2 },
    ChainTask { from: 2, to: 3 },
    ChainTask { from: 3, to: 4 },
    ChainTask { from: 3, to: 2 },
    ChainTask { from: 2, to: 1 },
    ChainTask { from: 1, to: 0 },
];

impl ChainTask {
    /// Interval of states visited repeatedly once the agent settles: below a
    /// forward block, or above a backward block.
    pub fn recurrent_states(&self) -> (usize, usize) {
        if self.to > self.from {
            (0, self.from)
        } else {
            (self.from, CHAIN_LAST)
        }
    }

    pub fn n_recurrent(&self) -> usize {
        let (lo, hi) = self.recurrent_states();
        hi - lo + 1
    }

    /// Optimal average reward `(0 + 1 + ... + (N - 1)) / N`.
    pub fn optimal_reward(&self) -> f64 {
        let n = self.n_recurrent();
        (0..n).sum::<usize>() as f64 / n as f64
    }

    /// A policy that reverses on seeing its state repeat pays one idle step
    /// per sweep, scaling reward by `N / (N + 1)`.
    pub fn memory_policy_reward(&self) -> f64 {
        let n = self.n_recurrent() as f64;
        self.optimal_reward() * n / (n + 1.0)
    }

    /// Regret of the memory policy as a fraction of the optimum.
    pub fn memory_policy_regret(&self) -> f64 {
        1.0 - self.memory_policy_reward() / self.optimal_reward()
    }
}

/// Bounds `(lower, upper)` on task capacity for the chain task set. A
/// memory policy covers every task whose regret is within `eps`, and each
/// remaining task needs at least one other policy, so `N_pi >= 2` when any
/// task is left over. One back-and-forth policy per task solves all tasks
/// optimally, so `N_pi <= 6`.
pub fn chain_capacity_bounds(eps: f64) -> (f64, f64) {
    let n_tau = CHAIN_TASKS.len() as f64;
    let uncovered = CHAIN_TASKS.iter().any(|t| t.memory_policy_regret() > eps);
    let min_policies = if uncovered { 2.0 } else { 1.0 };
    (n_tau / n_tau, n_tau / min_policies)
}
