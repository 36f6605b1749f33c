//! Base-learners: DQN/DRQN, PPO (optionally recurrent) and a uniform-random
//! baseline, plus the replay buffers the value-based learner draws from.

mod config;
mod dqn;
mod ppo;
mod replay;

use rand::Rng;

pub use config::{
    trunk_layers, DqnConfig, LearnerConfig, PpoConfig, UpdateCadence, BURN_IN_STEPS, HIDDEN_WIDTH,
};
pub use dqn::{argmax_random_tie, td_target, DqnCounters, DqnLearner};
pub use ppo::{
    clipped_surrogate, gae_advantages, sample_action, PpoCounters, PpoLearner, PpoLoss, PpoParams,
    PpoSample, RolloutStep,
};
pub use replay::{ReplayBuffer, ReplayKind, Transition};

use crate::envs::{Observation, StepOutcome, TaskEnv};
use crate::error::Result;
use crate::nn::RecurrentState;

/// One environment step as seen by a learner.
#[derive(Clone, Debug, PartialEq)]
pub struct Experience {
    pub obs: Observation,
    pub action: usize,
    pub reward: f64,
    pub next_obs: Observation,
    /// True environment termination (no bootstrap).
    pub terminal: bool,
    /// The learner will not act again in this episode, whether by
    /// termination, time limit or the end of a task-block.
    pub episode_end: bool,
    pub task_index: usize,
}

#[derive(Clone, Debug)]
pub struct UniformRandom {
    pub n_actions: usize,
    pub steps: u64,
}

#[derive(Clone, Debug)]
pub enum Learner {
    Dqn(Box<DqnLearner>),
    Ppo(Box<PpoLearner>),
    Random(UniformRandom),
}

impl Learner {
    pub fn new<R: Rng + ?Sized>(
        config: &LearnerConfig,
        obs_dim: usize,
        n_actions: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(match config {
            LearnerConfig::Dqn(c) => {
                Learner::Dqn(Box::new(DqnLearner::new(c.clone(), obs_dim, n_actions, rng)?))
            }
            LearnerConfig::Ppo(c) => {
                Learner::Ppo(Box::new(PpoLearner::new(c.clone(), obs_dim, n_actions, rng)?))
            }
            LearnerConfig::UniformRandom => Learner::Random(UniformRandom { n_actions, steps: 0 }),
        })
    }

    pub fn is_recurrent(&self) -> bool {
        match self {
            Learner::Dqn(l) => l.is_recurrent(),
            Learner::Ppo(l) => l.is_recurrent(),
            Learner::Random(_) => false,
        }
    }

    /// Random actions taken at the start of each episode to warm the
    /// recurrent state; zero for feed-forward learners.
    pub fn burn_in_steps(&self) -> usize {
        match self {
            Learner::Dqn(l) if l.is_recurrent() => l.config.burn_in,
            Learner::Ppo(l) if l.is_recurrent() => l.config.burn_in,
            _ => 0,
        }
    }

    pub fn recurrent_state(&self) -> Option<&RecurrentState> {
        match self {
            Learner::Dqn(l) => l.recurrent_state(),
            Learner::Ppo(l) => l.recurrent_state(),
            Learner::Random(_) => None,
        }
    }

    /// Experiences observed so far.
    pub fn steps(&self) -> u64 {
        match self {
            Learner::Dqn(l) => l.counters.steps,
            Learner::Ppo(l) => l.counters.steps,
            Learner::Random(l) => l.steps,
        }
    }

    pub fn begin_episode(&mut self) {
        match self {
            Learner::Dqn(l) => l.begin_episode(),
            Learner::Ppo(l) => l.begin_episode(),
            Learner::Random(_) => {}
        }
    }

    pub fn warm(&mut self, obs: &[f64]) -> Result<()> {
        match self {
            Learner::Dqn(l) => l.warm(obs),
            Learner::Ppo(l) => l.warm(obs),
            Learner::Random(_) => Ok(()),
        }
    }

    pub fn act<R: Rng + ?Sized>(&mut self, obs: &[f64], rng: &mut R) -> Result<usize> {
        match self {
            Learner::Dqn(l) => l.act(obs, rng),
            Learner::Ppo(l) => Ok(l.act(obs, rng)?.0),
            Learner::Random(l) => Ok(rng.random_range(0..l.n_actions)),
        }
    }

    pub fn observe<R: Rng + ?Sized>(&mut self, exp: Experience, rng: &mut R) -> Result<()> {
        match self {
            Learner::Dqn(l) => l.observe(exp, rng),
            Learner::Ppo(l) => l.observe(exp, rng),
            Learner::Random(l) => {
                l.steps += 1;
                Ok(())
            }
        }
    }

    /// The learner's action distribution for `obs` from a fresh state.
    pub fn action_distribution(&self, obs: &[f64]) -> Result<Vec<f64>> {
        match self {
            Learner::Dqn(l) => l.action_distribution(obs),
            Learner::Ppo(l) => l.action_distribution(obs),
            Learner::Random(l) => Ok(vec![1.0 / l.n_actions as f64; l.n_actions]),
        }
    }
}

/// Result of a burn-in phase.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BurnIn {
    pub steps: u32,
    pub reward: f64,
    /// The episode ended during burn-in.
    pub finished: Option<StepOutcome>,
}

/// Executes `n` uniform-random actions in `env`, feeding each observation
/// through the learner's network. Nothing is stored for learning. A no-op for
/// feed-forward learners.
pub fn burn_in<R: Rng + ?Sized>(
    learner: &mut Learner,
    env: &mut TaskEnv,
    n: usize,
    rng: &mut R,
) -> Result<BurnIn> {
    let mut out = BurnIn::default();
    if !learner.is_recurrent() {
        return Ok(out);
    }
    let n_actions = env.task.n_actions();
    for _ in 0..n {
        learner.warm(&env.observation())?;
        let step = env.step(rng.random_range(0..n_actions), rng)?;
        out.steps += 1;
        out.reward += step.reward;
        if step.terminal {
            out.finished = Some(step);
            break;
        }
    }
    Ok(out)
}
