use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::learners::Learner;
use crate::rng::rng_from_seed;

/// Unit in which the time a policy spends on a task is counted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeUnit {
    Steps,
    Episodes,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskStats {
    pub cumulative_reward: f64,
    pub time_used: u64,
    pub blocks_seen: u64,
}

impl TaskStats {
    /// Lifetime average reward; `None` until the task has been tried.
    pub fn lifetime_average(&self) -> Option<f64> {
        (self.time_used > 0).then(|| self.cumulative_reward / self.time_used as f64)
    }
}

/// Per-task lifetime statistics of one policy.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PolicyStats {
    tasks: BTreeMap<usize, TaskStats>,
}

impl PolicyStats {
    pub fn get(&self, task: usize) -> TaskStats {
        self.tasks.get(&task).copied().unwrap_or_default()
    }

    pub fn lifetime_average(&self, task: usize) -> Option<f64> {
        self.tasks.get(&task).and_then(TaskStats::lifetime_average)
    }

    /// Adds one episode's return. `t_ij` grows by `steps` or by one episode.
    pub fn record_outcome(&mut self, task: usize, episode_return: f64, steps: u64, unit: TimeUnit) {
        let s = self.tasks.entry(task).or_default();
        s.cumulative_reward += episode_return;
        s.time_used += match unit {
            TimeUnit::Steps => steps,
            TimeUnit::Episodes => 1,
        };
    }

    pub fn mark_block(&mut self, task: usize) {
        self.tasks.entry(task).or_default().blocks_seen += 1;
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &TaskStats)> {
        self.tasks.iter().map(|(&k, v)| (k, v))
    }
}

/// One library entry.
#[derive(Clone, Debug)]
pub struct PolicyRecord {
    pub id: usize,
    pub learner: Learner,
    pub stats: PolicyStats,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectorMode {
    Adaptive,
    Unadaptive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectorConfig {
    pub mode: SelectorMode,
    pub epsilon: f64,
    /// task index -> policy id; used only in unadaptive mode.
    pub assignment: Vec<usize>,
}

impl SelectorConfig {
    pub fn adaptive(epsilon: f64) -> Self {
        Self {
            mode: SelectorMode::Adaptive,
            epsilon,
            assignment: Vec::new(),
        }
    }

    pub fn unadaptive(assignment: Vec<usize>) -> Self {
        Self {
            mode: SelectorMode::Unadaptive,
            epsilon: 0.0,
            assignment,
        }
    }

    pub fn validate(&self, n_tau: usize, n_pi: usize) -> Result<()> {
        if n_pi == 0 {
            return config("library needs at least one policy");
        }
        match self.mode {
            SelectorMode::Adaptive if !(0.0..=1.0).contains(&self.epsilon) => {
                config("selection epsilon must lie in [0, 1]")
            }
            SelectorMode::Unadaptive if self.assignment.len() != n_tau => config(format!(
                "assignment covers {} tasks, domain has {n_tau}",
                self.assignment.len()
            )),
            SelectorMode::Unadaptive if self.assignment.iter().any(|&p| p >= n_pi) => {
                config("assignment names a policy outside the library")
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Selection {
    pub policy: usize,
    /// Chosen by the exploration branch.
    pub explored: bool,
}

/// Picks the policy for the next episode of `task`.
///
/// Adaptive: with probability `1 - epsilon` the policy with the highest
/// lifetime average on `task` among those that tried it (ties uniform), and
/// otherwise a uniform draw over the whole library. Before any policy has
/// tried the task the choice is uniform.
pub fn select_policy<R: Rng + ?Sized>(
    task: usize,
    stats: &[&PolicyStats],
    cfg: &SelectorConfig,
    rng: &mut R,
) -> Selection {
    let n_pi = stats.len();
    assert!(n_pi > 0, "empty library");
    match cfg.mode {
        SelectorMode::Unadaptive => Selection {
            policy: cfg.assignment[task],
            explored: false,
        },
        SelectorMode::Adaptive => {
            if rng.random::<f64>() < cfg.epsilon {
                return Selection {
                    policy: rng.random_range(0..n_pi),
                    explored: true,
                };
            }
            let averages: Vec<(usize, f64)> = stats
                .iter()
                .enumerate()
                .filter_map(|(i, s)| s.lifetime_average(task).map(|r| (i, r)))
                .collect();
            let best = averages
                .iter()
                .map(|&(_, r)| r)
                .fold(f64::NEG_INFINITY, f64::max);
            let ties: Vec<usize> = averages
                .iter()
                .filter(|&&(_, r)| r == best)
                .map(|&(i, _)| i)
                .collect();
            let policy = match ties.len() {
                0 => rng.random_range(0..n_pi),
                1 => ties[0],
                n => ties[rng.random_range(0..n)],
            };
            Selection {
                policy,
                explored: false,
            }
        }
    }
}

/// Tasks shuffled by `seed` and dealt round-robin to `n_pi` policies.
pub fn unadaptive_assignment(n_tau: usize, n_pi: usize, seed: u64) -> Result<Vec<usize>> {
    if n_pi == 0 || n_pi > n_tau {
        return config(format!("cannot deal {n_tau} tasks to {n_pi} policies"));
    }
    if n_pi == n_tau {
        return Ok((0..n_tau).collect());
    }
    let mut order: Vec<usize> = (0..n_tau).collect();
    order.shuffle(&mut rng_from_seed(seed));
    let mut assignment = vec![0; n_tau];
    for (k, &task) in order.iter().enumerate() {
        assignment[task] = k % n_pi;
    }
    Ok(assignment)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;

    fn stats_with(values: &[Option<f64>], task: usize) -> Vec<PolicyStats> {
        values
            .iter()
            .map(|v| {
                let mut s = PolicyStats::default();
                if let Some(r) = v {
                    s.record_outcome(task, *r * 10.0, 10, TimeUnit::Steps);
                }
                s
            })
            .collect()
    }

    #[test]
    fn greedy_picks_best() {
        let s = stats_with(&[Some(5.0), Some(7.0)], 0);
        let refs: Vec<&PolicyStats> = s.iter().collect();
        let sel = select_policy(0, &refs, &SelectorConfig::adaptive(0.0), &mut rng_from_seed(0));
        assert_eq!(sel.policy, 1);
    }

    #[test]
    fn untried_policy_only_via_exploration() {
        let s = stats_with(&[Some(1.0), Some(2.0), None], 0);
        let refs: Vec<&PolicyStats> = s.iter().collect();
        let cfg = SelectorConfig::adaptive(0.1);
        let mut rng = rng_from_seed(1);
        let n = 100_000;
        let mut untried = 0;
        for _ in 0..n {
            let sel = select_policy(0, &refs, &cfg, &mut rng);
            if sel.policy == 2 {
                assert!(sel.explored);
                untried += 1;
            }
        }
        let p = 0.1 / 3.0;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((untried as f64 - n as f64 * p).abs() < 3.0 * sigma);
    }

    #[test]
    fn first_selection_is_uniform() {
        let s = stats_with(&[None, None, None, None], 0);
        let refs: Vec<&PolicyStats> = s.iter().collect();
        let mut rng = rng_from_seed(2);
        let mut counts = [0usize; 4];
        let n = 40_000;
        for _ in 0..n {
            counts[select_policy(0, &refs, &SelectorConfig::adaptive(0.1), &mut rng).policy] += 1;
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 0.25).abs() < 0.01);
        }
    }

    #[test]
    fn record_outcome_running_average_and_isolation() {
        let mut s = PolicyStats::default();
        s.record_outcome(3, 10.0, 10, TimeUnit::Steps);
        assert_eq!(s.lifetime_average(3), Some(1.0));
        let mut t = PolicyStats::default();
        t.record_outcome(0, 0.0, 5, TimeUnit::Episodes);
        t.record_outcome(0, 10.0, 5, TimeUnit::Episodes);
        assert_eq!(t.lifetime_average(0), Some(5.0));
        assert_eq!(t.get(0).time_used, 2);
        let before = s.get(3);
        s.record_outcome(4, 99.0, 1, TimeUnit::Steps);
        assert_eq!(s.get(3), before);
        assert_eq!(s.lifetime_average(7), None);
    }

    #[test]
    fn assignment_examples() {
        assert_eq!(unadaptive_assignment(27, 1, 3).unwrap(), vec![0; 27]);
        assert_eq!(unadaptive_assignment(27, 27, 3).unwrap(), (0..27).collect::<Vec<_>>());
        let a = unadaptive_assignment(27, 4, 3).unwrap();
        let mut loads = [0usize; 4];
        a.iter().for_each(|&p| loads[p] += 1);
        let mut loads = loads.to_vec();
        loads.sort_unstable();
        assert_eq!(loads, vec![6, 7, 7, 7]);
        assert!(unadaptive_assignment(4, 5, 0).is_err());
        assert!(unadaptive_assignment(4, 0, 0).is_err());
    }

    proptest! {
        #[test]
        fn assignment_is_balanced(n_tau in 1usize..60, frac in 0.0f64..1.0, seed in any::<u64>()) {
            let n_pi = 1 + ((n_tau - 1) as f64 * frac) as usize;
            let a = unadaptive_assignment(n_tau, n_pi, seed).unwrap();
            let mut loads = vec![0usize; n_pi];
            a.iter().for_each(|&p| loads[p] += 1);
            let (lo, hi) = (loads.iter().min().unwrap(), loads.iter().max().unwrap());
            prop_assert!(hi - lo <= 1 && *lo >= 1);
        }

        #[test]
        fn argmax_invariant_under_scaling(values in proptest::collection::vec(0.1f64..10.0, 2..6), k in 0.1f64..100.0, seed in any::<u64>()) {
            let a = stats_with(&values.iter().map(|&v| Some(v)).collect::<Vec<_>>(), 0);
            let b = stats_with(&values.iter().map(|&v| Some(v * k)).collect::<Vec<_>>(), 0);
            let ra: Vec<&PolicyStats> = a.iter().collect();
            let rb: Vec<&PolicyStats> = b.iter().collect();
            let cfg = SelectorConfig::adaptive(0.0);
            let sa = select_policy(0, &ra, &cfg, &mut rng_from_seed(seed));
            let sb = select_policy(0, &rb, &cfg, &mut rng_from_seed(seed));
            prop_assert_eq!(sa, sb);
        }
    }
}
