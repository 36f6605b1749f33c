//! DQN and its recurrent variant DRQN.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::DqnConfig;
use super::replay::{ReplayBuffer, Transition};
use super::Experience;
use crate::error::Result;
use crate::metrics::epsilon_greedy_distribution;
use crate::nn::{clip_gradients, Network, OptimizerState, ParamSet, RecurrentState};

/// Regression target `r + gamma * max_a' Q(s', a'; target)`, cut at true
/// terminals.
pub fn td_target(reward: f64, terminal: bool, max_next_q: f64, gamma: f64) -> f64 {
    if terminal {
        reward
    } else {
        reward + gamma * max_next_q
    }
}

/// Index of the largest value; ties broken uniformly at random.
pub fn argmax_random_tie<R: Rng + ?Sized>(values: &[f64], rng: &mut R) -> usize {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<usize> = (0..values.len()).filter(|&i| values[i] == best).collect();
    match ties.len() {
        0 => 0,
        1 => ties[0],
        n => ties[rng.random_range(0..n)],
    }
}

fn max_value(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DqnCounters {
    /// Experiences observed.
    pub steps: u64,
    pub updates: u64,
    pub target_syncs: u64,
    pub episodes: u64,
}

#[derive(Clone, Debug)]
pub struct DqnLearner {
    pub config: DqnConfig,
    pub online: Network,
    pub target: Network,
    pub optimizer: OptimizerState,
    pub buffer: ReplayBuffer,
    pub counters: DqnCounters,
    n_actions: usize,
    state: Option<RecurrentState>,
    episode_time: u32,
}

impl DqnLearner {
    pub fn new<R: Rng + ?Sized>(
        config: DqnConfig,
        obs_dim: usize,
        n_actions: usize,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let online = Network::new(config.network_spec(obs_dim, n_actions)?, rng)?;
        let target = online.clone();
        let optimizer = OptimizerState::new(config.optimizer, &online.params);
        let buffer = ReplayBuffer::new(config.replay, config.buffer_capacity);
        let state = online.initial_state();
        Ok(Self {
            config,
            online,
            target,
            optimizer,
            buffer,
            counters: DqnCounters::default(),
            n_actions,
            state,
            episode_time: 0,
        })
    }

    pub fn is_recurrent(&self) -> bool {
        self.config.recurrent
    }

    pub fn recurrent_state(&self) -> Option<&RecurrentState> {
        self.state.as_ref()
    }

    pub fn begin_episode(&mut self) {
        self.state = self.online.initial_state();
        self.episode_time = 0;
        self.counters.episodes += 1;
    }

    /// Feeds an observation through the network without acting.
    pub fn warm(&mut self, obs: &[f64]) -> Result<()> {
        self.online.predict(obs, self.state.as_mut())?;
        Ok(())
    }

    pub fn q_values(&mut self, obs: &[f64]) -> Result<Vec<f64>> {
        self.online.predict(obs, self.state.as_mut())
    }

    /// Epsilon-greedy action; the recurrent state advances either way.
    pub fn act<R: Rng + ?Sized>(&mut self, obs: &[f64], rng: &mut R) -> Result<usize> {
        let q = self.q_values(obs)?;
        if rng.random::<f64>() < self.config.exploration {
            Ok(rng.random_range(0..self.n_actions))
        } else {
            Ok(argmax_random_tie(&q, rng))
        }
    }

    /// Epsilon-greedy action distribution from a fresh recurrent state.
    pub fn action_distribution(&self, obs: &[f64]) -> Result<Vec<f64>> {
        let mut state = self.online.initial_state();
        let q = self.online.predict(obs, state.as_mut())?;
        let best = q
            .iter()
            .enumerate()
            .fold(0, |b, (i, &v)| if v > q[b] { i } else { b });
        Ok(epsilon_greedy_distribution(best, q.len(), self.config.exploration))
    }

    /// Stores the experience and runs any update or target sync now due.
    pub fn observe<R: Rng + ?Sized>(&mut self, exp: Experience, rng: &mut R) -> Result<()> {
        let task = exp.task_index;
        self.buffer.insert(
            Transition {
                obs: exp.obs,
                action: exp.action,
                reward: exp.reward,
                next_obs: exp.next_obs,
                terminal: exp.terminal,
                task_index: task,
                time: self.episode_time,
                episode: self.counters.episodes,
            },
            rng,
        );
        self.episode_time += 1;
        self.counters.steps += 1;
        let steps = self.counters.steps;
        if steps >= self.config.replay_start && steps % self.config.update_every == 0 {
            self.update(Some(task), rng)?;
        }
        if steps % self.config.target_sync == 0 {
            self.sync_target();
        }
        Ok(())
    }

    pub fn sync_target(&mut self) {
        self.target.params = self.online.params.clone();
        self.counters.target_syncs += 1;
    }

    /// One gradient step on a sampled batch. `task` routes sampling for
    /// task-matching buffers.
    pub fn update<R: Rng + ?Sized>(&mut self, task: Option<usize>, rng: &mut R) -> Result<()> {
        let grads = if self.config.recurrent {
            let traces = self.buffer.sample_traces(
                self.config.batch_size,
                self.config.trace_length,
                self.config.burn_in,
                task,
                rng,
            );
            if traces.is_empty() {
                return Ok(());
            }
            self.trace_gradients(&traces)?.1
        } else {
            let batch = self.buffer.sample(self.config.batch_size, task, rng);
            if batch.is_empty() {
                return Ok(());
            }
            self.batch_gradients(&batch)?.1
        };
        let mut grads = grads;
        clip_gradients(&mut grads, self.config.clip.mode, self.config.clip.threshold);
        self.optimizer.step(&mut self.online.params, &grads)?;
        self.counters.updates += 1;
        Ok(())
    }

    /// Mean squared TD error over a batch of independent transitions and its
    /// gradient with respect to the online parameters.
    pub fn batch_gradients(&self, batch: &[&Transition]) -> Result<(f64, ParamSet)> {
        let mut acc = ParamSet::zeros(&self.online.spec);
        let n = batch.len() as f64;
        let mut loss = 0.0;
        for t in batch {
            let max_next = max_value(&self.target.predict(&t.next_obs, None)?);
            let y = td_target(t.reward, t.terminal, max_next, self.config.gamma);
            let (q, _, tape) = self.online.forward(&t.obs, None)?;
            let err = q[t.action] - y;
            loss += err * err / n;
            let mut g = vec![0.0; q.len()];
            g[t.action] = 2.0 * err / n;
            self.online.backward_into(&tape, &[g], &mut acc)?;
        }
        Ok((loss, acc))
    }

    /// As [`DqnLearner::batch_gradients`] over traces, each unrolled from a
    /// zero state. The first `warm` steps of a trace only set up the state.
    pub fn trace_gradients(&self, traces: &[(usize, Vec<&Transition>)]) -> Result<(f64, ParamSet)> {
        let mut acc = ParamSet::zeros(&self.online.spec);
        let n: usize = traces.iter().map(|(w, tr)| tr.len() - w).sum();
        let n = n.max(1) as f64;
        let mut loss = 0.0;
        for (warm, trace) in traces {
            let mut inputs: Vec<&[f64]> = trace.iter().map(|t| t.obs.as_slice()).collect();
            let (q, _, tape) = self
                .online
                .forward_sequence(&inputs, self.online.initial_state().as_ref())?;
            inputs.push(&trace.last().expect("non-empty trace").next_obs);
            let mut target_state = self.target.initial_state();
            let mut target_q = Vec::with_capacity(inputs.len());
            for x in &inputs {
                target_q.push(self.target.predict(x, target_state.as_mut())?);
            }
            let mut grads = vec![vec![0.0; self.n_actions]; trace.len()];
            for (k, t) in trace.iter().enumerate().skip(*warm) {
                let y = td_target(t.reward, t.terminal, max_value(&target_q[k + 1]), self.config.gamma);
                let err = q[k][t.action] - y;
                loss += err * err / n;
                grads[k][t.action] = 2.0 * err / n;
            }
            self.online.backward_into(&tape, &grads, &mut acc)?;
        }
        Ok((loss, acc))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn small(config: DqnConfig) -> DqnLearner {
        DqnLearner::new(
            DqnConfig { hidden: 8, ..config },
            4,
            2,
            &mut rng_from_seed(11),
        )
        .unwrap()
    }

    fn exp(obs: Vec<f64>, action: usize, reward: f64, terminal: bool) -> Experience {
        Experience {
            next_obs: obs.iter().map(|x| x + 0.1).collect(),
            obs,
            action,
            reward,
            terminal,
            episode_end: terminal,
            task_index: 0,
        }
    }

    #[test]
    fn td_target_examples() {
        assert!((td_target(1.0, false, 10.0, 0.99) - 10.9).abs() < 1e-12);
        assert_eq!(td_target(1.0, true, 10.0, 0.99), 1.0);
    }

    #[test]
    fn greedy_when_epsilon_zero() {
        let mut l = small(DqnConfig {
            exploration: 0.0,
            ..DqnConfig::default()
        });
        let mut rng = rng_from_seed(1);
        let obs = [0.3, -0.2, 0.1, 0.5];
        let q = l.online.predict(&obs, None).unwrap();
        let best = if q[0] > q[1] { 0 } else { 1 };
        for _ in 0..200 {
            assert_eq!(l.act(&obs, &mut rng).unwrap(), best);
        }
    }

    #[test]
    fn exploration_frequencies() {
        let obs = [0.3, -0.2, 0.1, 0.5];
        let mut rng = rng_from_seed(2);
        let n = 100_000;

        let mut l = small(DqnConfig {
            exploration: 1.0,
            ..DqnConfig::default()
        });
        let ones = (0..n).filter(|_| l.act(&obs, &mut rng).unwrap() == 1).count();
        assert!((ones as f64 / n as f64 - 0.5).abs() < 0.02);

        let mut l = small(DqnConfig::default());
        let q = l.online.predict(&obs, None).unwrap();
        let best = if q[0] > q[1] { 0 } else { 1 };
        let hits = (0..n).filter(|_| l.act(&obs, &mut rng).unwrap() == best).count();
        assert!((hits as f64 / n as f64 - 0.9).abs() < 0.01);
        let dist = l.action_distribution(&obs).unwrap();
        assert!((dist[best] - 0.9).abs() < 1e-12 && (dist[1 - best] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn ties_break_uniformly() {
        let mut rng = rng_from_seed(3);
        let n = 30_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[argmax_random_tie(&[1.0, 1.0, 1.0], &mut rng)] += 1;
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 1.0 / 3.0).abs() < 0.02);
        }
        assert_eq!(argmax_random_tie(&[0.0, 2.0, 1.0], &mut rng), 1);
    }

    #[test]
    fn update_reduces_batch_loss() {
        let l = small(DqnConfig::default());
        let t = Transition {
            obs: vec![0.5, -0.5, 0.2, 0.1],
            action: 1,
            reward: 1.0,
            next_obs: vec![0.4, -0.4, 0.3, 0.0],
            terminal: false,
            task_index: 0,
            time: 0,
            episode: 0,
        };
        let batch = vec![&t; 10];
        let (before, mut grads) = l.batch_gradients(&batch).unwrap();
        let mut l2 = l.clone();
        clip_gradients(&mut grads, l.config.clip.mode, l.config.clip.threshold);
        l2.optimizer.step(&mut l2.online.params, &grads).unwrap();
        let (after, _) = l2.batch_gradients(&batch).unwrap();
        assert!(after < before, "{after} !< {before}");
    }

    #[test]
    fn no_learning_before_replay_start_and_target_fixed_between_syncs() {
        let mut l = small(DqnConfig {
            replay_start: 50,
            target_sync: 30,
            ..DqnConfig::default()
        });
        let mut rng = rng_from_seed(4);
        let initial = l.online.params.clone();
        let initial_target = l.target.params.clone();
        l.begin_episode();
        for i in 0..49 {
            l.observe(exp(vec![i as f64 * 0.01; 4], i % 2, 1.0, false), &mut rng).unwrap();
        }
        assert_eq!(l.online.params, initial);
        assert_eq!(l.counters.updates, 0);
        assert_eq!(l.target.params, initial_target);
        for i in 49..59 {
            l.observe(exp(vec![i as f64 * 0.01; 4], i % 2, 1.0, false), &mut rng).unwrap();
        }
        assert!(l.counters.updates > 0);
        assert_ne!(l.online.params, initial);
        // Synced at step 30 only; the target still holds the pre-learning weights.
        assert_eq!(l.counters.target_syncs, 1);
        assert_eq!(l.target.params, initial);
        for i in 59..60 {
            l.observe(exp(vec![i as f64 * 0.01; 4], i % 2, 1.0, false), &mut rng).unwrap();
        }
        assert_eq!(l.target.params, l.online.params);
    }

    #[test]
    fn recurrent_update_runs_and_reduces_loss() {
        let mut l = small(DqnConfig {
            replay_start: 1_000_000,
            ..DqnConfig::recurrent()
        });
        let mut rng = rng_from_seed(5);
        for ep in 0..3 {
            l.begin_episode();
            for k in 0..40 {
                let x = (k as f64 * 0.3 + ep as f64).sin();
                l.observe(exp(vec![x, -x, 0.5 * x, 1.0], k % 2, x, false), &mut rng).unwrap();
            }
        }
        let traces = l.buffer.sample_traces(10, 15, 15, None, &mut rng);
        assert!(traces.iter().any(|(w, _)| *w > 0));
        let (before, mut g) = l.trace_gradients(&traces).unwrap();
        clip_gradients(&mut g, l.config.clip.mode, l.config.clip.threshold);
        let mut l2 = l.clone();
        l2.optimizer.step(&mut l2.online.params, &g).unwrap();
        let (after, _) = l2.trace_gradients(&traces).unwrap();
        assert!(after < before);
        l.update(None, &mut rng).unwrap();
        assert_eq!(l.counters.updates, 1);
    }
}
