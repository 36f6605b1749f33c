//! Task families: parametric cart-pole MDPs and POcman POMDPs, plus the
//! task-sequence generator that orders task-blocks within a lifetime.

pub mod cartpole;
mod domain;
pub mod maze;
pub mod pocman;
mod rollout;
mod sequence;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use cartpole::{CartpoleParams, CartpoleState, Termination};
pub use domain::{make_cartpole_domain, make_pocman_domain, DomainKind};
pub use maze::{Cell, Direction, Maze, Topology};
pub use pocman::{Movement, PocmanParams, PocmanState};
pub use rollout::{random_policy_rollout, RolloutStats, TerminationEvent};
pub use sequence::{make_task_sequences, TaskSequence};

pub type Observation = Vec<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "domain", rename_all = "kebab-case")]
pub enum TaskParams {
    Cartpole(CartpoleParams),
    Pocman(PocmanParams),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub index: usize,
    pub params: TaskParams,
}

impl TaskSpec {
    pub fn n_actions(&self) -> usize {
        match self.params {
            TaskParams::Cartpole(_) => cartpole::N_ACTIONS,
            TaskParams::Pocman(_) => pocman::N_ACTIONS,
        }
    }

    pub fn obs_dim(&self) -> usize {
        match self.params {
            TaskParams::Cartpole(_) => cartpole::OBS_DIM,
            TaskParams::Pocman(_) => pocman::OBS_DIM,
        }
    }

    pub fn is_cartpole(&self) -> bool {
        matches!(self.params, TaskParams::Cartpole(_))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    /// Episode is over.
    pub terminal: bool,
    /// The episode ended only because its step budget ran out.
    pub time_limit: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum EnvState {
    Cartpole(CartpoleState),
    Pocman(PocmanState),
}

/// A task together with its live episode state.
#[derive(Clone, Debug)]
pub struct TaskEnv {
    pub task: TaskSpec,
    pub state: EnvState,
}

impl TaskEnv {
    pub fn reset<R: Rng + ?Sized>(task: TaskSpec, rng: &mut R) -> Self {
        let state = match &task.params {
            TaskParams::Cartpole(_) => EnvState::Cartpole(cartpole::reset(rng)),
            TaskParams::Pocman(p) => EnvState::Pocman(pocman::reset(p, rng)),
        };
        Self { task, state }
    }

    pub fn observation(&self) -> Observation {
        match (&self.task.params, &self.state) {
            (_, EnvState::Cartpole(s)) => s.observation(),
            (TaskParams::Pocman(p), EnvState::Pocman(s)) => {
                pocman::observe(p.topology.maze(), s.agent, s.object)
            }
            _ => unreachable!("state matches task domain"),
        }
    }

    pub fn step<R: Rng + ?Sized>(&mut self, action: usize, rng: &mut R) -> crate::Result<StepOutcome> {
        match (&self.task.params, &mut self.state) {
            (TaskParams::Cartpole(p), EnvState::Cartpole(s)) => cartpole::step(p, s, action),
            (TaskParams::Pocman(p), EnvState::Pocman(s)) => pocman::step(p, s, action, rng),
            _ => unreachable!("state matches task domain"),
        }
    }

    pub fn steps(&self) -> u32 {
        match &self.state {
            EnvState::Cartpole(s) => s.steps,
            EnvState::Pocman(s) => s.steps,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn random_policy_episode_length_on_default_task() {
        let task = TaskSpec {
            index: 0,
            params: TaskParams::Cartpole(CartpoleParams::default()),
        };
        let mut rng = rng_from_seed(17);
        let mut total = 0u64;
        for _ in 0..2000 {
            let mut env = TaskEnv::reset(task, &mut rng);
            loop {
                let a = rng.random_range(0..2);
                if env.step(a, &mut rng).unwrap().terminal {
                    break;
                }
            }
            total += u64::from(env.steps());
        }
        let mean = total as f64 / 2000.0;
        assert!((15.0..=45.0).contains(&mean), "mean episode length {mean}");
    }

    #[test]
    fn pocman_observation_matches_brute_force_everywhere() {
        for topology in Topology::ALL {
            let maze = topology.maze();
            let cells: Vec<Cell> = maze.free_cells().collect();
            for &agent in &cells {
                for &object in &cells {
                    let obs = pocman::observe(maze, agent, object);
                    assert_eq!(obs.len(), 11);
                    let expect = |b: bool| if b { 1.0 } else { -1.0 };
                    let neighbours = [(0, -1), (1, 0), (0, 1), (-1, 0)];
                    for (k, (dx, dy)) in neighbours.iter().enumerate() {
                        let n = Cell::new(agent.x + dx, agent.y + dy);
                        assert_eq!(obs[k], expect(maze.is_wall(n)));
                        assert_eq!(obs[4 + k], expect(n == object));
                    }
                    let d = (agent.x - object.x).abs() + (agent.y - object.y).abs();
                    for (k, r) in [2, 3, 4].iter().enumerate() {
                        assert_eq!(obs[8 + k], expect(d <= *r));
                    }
                }
            }
        }
    }

    #[test]
    fn pocman_reset_ignores_previous_state() {
        let task = make_pocman_domain()[0];
        let mut env = TaskEnv::reset(task, &mut rng_from_seed(1));
        for a in 0..40 {
            env.step(a % 5, &mut rng_from_seed(a as u64)).unwrap();
        }
        let fresh_a = TaskEnv::reset(task, &mut rng_from_seed(99)).state;
        let fresh_b = TaskEnv::reset(task, &mut rng_from_seed(99)).state;
        assert_eq!(fresh_a, fresh_b);
    }
}
