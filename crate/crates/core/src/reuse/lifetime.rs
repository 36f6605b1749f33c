use std::collections::VecDeque;

use rand::Rng;

use super::runlog::{EpisodeRecord, RunLog};
use super::selector::{select_policy, PolicyRecord, PolicyStats, SelectorConfig, TimeUnit};
use crate::envs::{Observation, TaskEnv, TaskSequence, TaskSpec};
use crate::error::{config, Error, Result};
use crate::learners::{burn_in, Experience, Learner, LearnerConfig};
use crate::rng::{child_rng, derive_seed, SimRng};

/// Random streams derived from a run seed.
const STREAM_INIT: u64 = 1;
const STREAM_ACT: u64 = 2;
const STREAM_SELECT: u64 = 3;
const STREAM_SPREAD: u64 = 4;

/// Fixed-size set of policies, each initialised from its own seed stream.
#[derive(Clone, Debug)]
pub struct Library {
    pub policies: Vec<PolicyRecord>,
}

impl Library {
    pub fn new(
        n_pi: usize,
        learner: &LearnerConfig,
        obs_dim: usize,
        n_actions: usize,
        seed: u64,
    ) -> Result<Self> {
        if n_pi == 0 {
            return config("library needs at least one policy");
        }
        let policies = (0..n_pi)
            .map(|id| {
                let mut rng = policy_init_rng(seed, id);
                Ok(PolicyRecord {
                    id,
                    learner: Learner::new(learner, obs_dim, n_actions, &mut rng)?,
                    stats: PolicyStats::default(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { policies })
    }

    pub fn len(&self) -> usize {
        self.policies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.policies.is_empty()
    }
}

/// Initialisation stream for policy `id` of a run seeded with `seed`.
pub fn policy_init_rng(seed: u64, id: usize) -> SimRng {
    child_rng(derive_seed(seed, STREAM_INIT), id as u64)
}

/// Stream driving environments, action sampling and learning updates.
pub fn acting_rng(seed: u64) -> SimRng {
    child_rng(seed, STREAM_ACT)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LifetimeConfig {
    /// Environment steps per task-block.
    pub block_steps: u64,
    pub time_unit: TimeUnit,
    /// Compute policy spread every this many blocks (0 disables).
    pub spread_interval: usize,
    pub spread_samples: usize,
    pub spread_window: usize,
}

impl LifetimeConfig {
    pub fn new(block_steps: u64, time_unit: TimeUnit) -> Self {
        Self {
            block_steps,
            time_unit,
            spread_interval: 0,
            spread_samples: 1_000,
            spread_window: 100_000,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LifetimeSummary {
    pub selections: u64,
    pub explorations: u64,
    /// (block index, policy spread) at the configured interval.
    pub spread: Vec<(usize, f64)>,
}

/// Mean pairwise total-variation distance between policies' action
/// distributions over `observations`.
pub fn library_spread(policies: &[PolicyRecord], observations: &[Observation]) -> Result<f64> {
    let learners: Vec<&Learner> = policies.iter().map(|p| &p.learner).collect();
    let dists = observations
        .iter()
        .map(|o| {
            learners
                .iter()
                .map(|l| l.action_distribution(o))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(crate::metrics::policy_spread(&dists))
}

/// Runs one lifetime over `sequence`, training whichever policy is selected
/// at each episode boundary. Records are passed to `sink` as they complete.
#[allow(clippy::too_many_arguments)]
pub fn run_lifetime(
    tasks: &[TaskSpec],
    sequence: &TaskSequence,
    library: &mut Library,
    selector: &SelectorConfig,
    cfg: &LifetimeConfig,
    seed: u64,
    sink: &mut dyn FnMut(&EpisodeRecord) -> Result<()>,
) -> Result<(RunLog, LifetimeSummary)> {
    selector.validate(tasks.len(), library.len())?;
    if cfg.block_steps == 0 {
        return config("task-blocks need a positive step budget");
    }
    let mut rng = acting_rng(seed);
    let mut select_rng = child_rng(seed, STREAM_SELECT);
    let mut spread_rng = child_rng(seed, STREAM_SPREAD);
    let mut recent: VecDeque<Observation> = VecDeque::new();
    let mut log = RunLog::default();
    let mut summary = LifetimeSummary::default();

    for (block_idx, &task_idx) in sequence.tasks.iter().enumerate() {
        let task = *tasks.get(task_idx).ok_or_else(|| {
            Error::Config(format!("sequence names task {task_idx} outside the domain"))
        })?;
        let wrap = |e: Error| Error::Block {
            sequence: sequence.id,
            block: block_idx,
            source: Box::new(e),
        };
        let mut used = vec![false; library.len()];
        let mut budget = cfg.block_steps;
        let mut episode_idx = 0;
        while budget > 0 {
            let stats: Vec<&PolicyStats> = library.policies.iter().map(|p| &p.stats).collect();
            let sel = select_policy(task_idx, &stats, selector, &mut select_rng);
            summary.selections += 1;
            summary.explorations += u64::from(sel.explored);
            let policy = &mut library.policies[sel.policy];
            if !used[sel.policy] {
                used[sel.policy] = true;
                policy.stats.mark_block(task_idx);
            }
            let track = (cfg.spread_interval > 0).then_some((&mut recent, cfg.spread_window));
            let (ret, steps) = run_episode(&mut policy.learner, task, &mut budget, &mut rng, track)
                .map_err(wrap)?;
            policy
                .stats
                .record_outcome(task_idx, ret, steps, cfg.time_unit);
            let record = EpisodeRecord {
                seq_id: sequence.id,
                block_idx,
                episode_idx,
                task_idx,
                policy_id: sel.policy,
                episode_return: ret,
                steps,
            };
            sink(&record).map_err(wrap)?;
            log.push(record);
            episode_idx += 1;
        }
        if cfg.spread_interval > 0
            && library.len() > 1
            && (block_idx + 1) % cfg.spread_interval == 0
            && !recent.is_empty()
        {
            let sample: Vec<Observation> = (0..cfg.spread_samples)
                .map(|_| recent[spread_rng.random_range(0..recent.len())].clone())
                .collect();
            let spread = library_spread(&library.policies, &sample).map_err(wrap)?;
            summary.spread.push((block_idx, spread));
        }
    }
    Ok((log, summary))
}

/// Runs one episode within the remaining block budget, cutting it when the
/// budget runs out. Returns (return, steps).
pub fn run_episode(
    learner: &mut Learner,
    task: TaskSpec,
    budget: &mut u64,
    rng: &mut SimRng,
    mut track: Option<(&mut VecDeque<Observation>, usize)>,
) -> Result<(f64, u64)> {
    learner.begin_episode();
    let mut env = TaskEnv::reset(task, rng);
    let warm = (learner.burn_in_steps() as u64).min(*budget) as usize;
    let b = burn_in(learner, &mut env, warm, rng)?;
    *budget -= u64::from(b.steps);
    let mut ret = b.reward;
    let mut steps = u64::from(b.steps);
    if b.finished.is_some() || *budget == 0 {
        return Ok((ret, steps));
    }
    let mut obs = env.observation();
    loop {
        if let Some((recent, window)) = track.as_mut() {
            if recent.len() == *window {
                recent.pop_front();
            }
            recent.push_back(obs.clone());
        }
        let action = learner.act(&obs, rng)?;
        let out = env.step(action, rng)?;
        *budget -= 1;
        steps += 1;
        ret += out.reward;
        let end = out.terminal || *budget == 0;
        learner.observe(
            Experience {
                obs,
                action,
                reward: out.reward,
                next_obs: out.observation.clone(),
                terminal: out.terminal && !out.time_limit,
                episode_end: end,
                task_index: task.index,
            },
            rng,
        )?;
        if end {
            return Ok((ret, steps));
        }
        obs = out.observation;
    }
}

/// A single base-learner trained on the sequence with no policy selection.
pub fn run_single_learner(
    tasks: &[TaskSpec],
    sequence: &TaskSequence,
    learner: &LearnerConfig,
    block_steps: u64,
    seed: u64,
) -> Result<RunLog> {
    let first = tasks
        .first()
        .ok_or_else(|| Error::Config("empty task domain".into()))?;
    let mut learner = Learner::new(
        learner,
        first.obs_dim(),
        first.n_actions(),
        &mut policy_init_rng(seed, 0),
    )?;
    let mut rng = acting_rng(seed);
    let mut log = RunLog::default();
    for (block_idx, &task_idx) in sequence.tasks.iter().enumerate() {
        let mut budget = block_steps;
        let mut episode_idx = 0;
        while budget > 0 {
            let (ret, steps) = run_episode(&mut learner, tasks[task_idx], &mut budget, &mut rng, None)?;
            log.push(EpisodeRecord {
                seq_id: sequence.id,
                block_idx,
                episode_idx,
                task_idx,
                policy_id: 0,
                episode_return: ret,
                steps,
            });
            episode_idx += 1;
        }
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{make_cartpole_domain, make_pocman_domain, make_task_sequences};
    use crate::learners::{DqnConfig, PpoConfig};
    use crate::reuse::unadaptive_assignment;

    fn small_dqn() -> LearnerConfig {
        LearnerConfig::Dqn(DqnConfig {
            hidden: 8,
            replay_start: 100,
            target_sync: 200,
            buffer_capacity: 1_000,
            ..DqnConfig::default()
        })
    }

    fn run(
        n_pi: usize,
        selector: SelectorConfig,
        learner: &LearnerConfig,
        seed: u64,
    ) -> (RunLog, LifetimeSummary, Library) {
        let tasks = make_cartpole_domain(27).unwrap();
        let seq = &make_task_sequences(27, 1, 6, seed)[0];
        let mut lib = Library::new(n_pi, learner, 4, 2, seed).unwrap();
        let (log, summary) = run_lifetime(
            &tasks,
            seq,
            &mut lib,
            &selector,
            &LifetimeConfig::new(500, TimeUnit::Steps),
            seed,
            &mut |_| Ok(()),
        )
        .unwrap();
        (log, summary, lib)
    }

    #[test]
    fn single_policy_matches_bare_learner() {
        for learner in [small_dqn(), LearnerConfig::Ppo(PpoConfig { hidden: 8, ..PpoConfig::default() })] {
            let (log, _, _) = run(1, SelectorConfig::unadaptive(vec![0; 27]), &learner, 5);
            let tasks = make_cartpole_domain(27).unwrap();
            let seq = &make_task_sequences(27, 1, 6, 5)[0];
            let bare = run_single_learner(&tasks, seq, &learner, 500, 5).unwrap();
            assert_eq!(log, bare);
        }
    }

    #[test]
    fn blocks_spend_exact_budget_and_replay_is_deterministic() {
        let (log, _, _) = run(3, SelectorConfig::adaptive(0.1), &small_dqn(), 6);
        for b in 0..6 {
            let steps: u64 = log.records.iter().filter(|r| r.block_idx == b).map(|r| r.steps).sum();
            assert_eq!(steps, 500);
        }
        let (again, _, _) = run(3, SelectorConfig::adaptive(0.1), &small_dqn(), 6);
        assert_eq!(log, again);
        assert!(log.records.iter().all(|r| r.policy_id < 3));
    }

    #[test]
    fn one_to_one_uses_task_index() {
        let a = unadaptive_assignment(27, 27, 0).unwrap();
        let (log, _, _) = run(27, SelectorConfig::unadaptive(a), &LearnerConfig::UniformRandom, 7);
        assert!(log.records.iter().all(|r| r.policy_id == r.task_idx));
    }

    #[test]
    fn stats_match_log() {
        let (log, _, lib) = run(2, SelectorConfig::adaptive(0.1), &small_dqn(), 8);
        for p in &lib.policies {
            for (task, s) in p.stats.iter() {
                let rows: Vec<_> = log
                    .records
                    .iter()
                    .filter(|r| r.policy_id == p.id && r.task_idx == task)
                    .collect();
                let reward: f64 = rows.iter().map(|r| r.episode_return).sum();
                let steps: u64 = rows.iter().map(|r| r.steps).sum();
                assert!((reward - s.cumulative_reward).abs() < 1e-9);
                assert_eq!(steps, s.time_used);
            }
        }
    }

    #[test]
    fn recurrent_pocman_lifetime_runs() {
        let tasks = make_pocman_domain();
        let seq = &make_task_sequences(18, 1, 2, 1)[0];
        let learner = LearnerConfig::Ppo(PpoConfig {
            hidden: 8,
            ..PpoConfig::recurrent()
        });
        let mut lib = Library::new(2, &learner, 11, 5, 1).unwrap();
        let mut cfg = LifetimeConfig::new(2_000, TimeUnit::Episodes);
        cfg.spread_interval = 1;
        cfg.spread_samples = 20;
        let (log, summary) = run_lifetime(
            &tasks,
            seq,
            &mut lib,
            &SelectorConfig::adaptive(0.1),
            &cfg,
            1,
            &mut |_| Ok(()),
        )
        .unwrap();
        assert_eq!(log.len(), 4);
        assert!(log.records.iter().all(|r| r.steps == 1000));
        assert_eq!(summary.spread.len(), 2);
        assert!(summary.spread.iter().all(|&(_, s)| (0.0..=1.0).contains(&s)));
        let used = lib.policies.iter().map(|p| p.stats.iter().count()).sum::<usize>();
        assert!(used >= 1);
    }

    #[test]
    fn errors_carry_block_context() {
        let tasks = make_cartpole_domain(27).unwrap();
        let seq = &make_task_sequences(27, 1, 3, 0)[0];
        let mut lib = Library::new(1, &LearnerConfig::UniformRandom, 4, 2, 0).unwrap();
        let mut calls = 0;
        let err = run_lifetime(
            &tasks,
            seq,
            &mut lib,
            &SelectorConfig::unadaptive(vec![0; 27]),
            &LifetimeConfig::new(300, TimeUnit::Steps),
            0,
            &mut |r| {
                calls += 1;
                if r.block_idx == 1 {
                    Err(Error::Usage("sink full".into()))
                } else {
                    Ok(())
                }
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::Block { sequence: 0, block: 1, .. }));
        assert!(calls > 1);
    }
}
