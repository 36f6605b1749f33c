//! Single-object partially observable grid worlds.
//!
//! The agent sees 11 bits (as ±1): walls N/E/S/W, object adjacent N/E/S/W,
//! and object within Manhattan distance 2, 3 and 4. The object is never
//! consumed; every step the agent shares its cell the task reward is paid.

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::maze::{Cell, Direction, Maze, Topology};
use super::StepOutcome;
use crate::error::{Error, Result};

pub const EPISODE_STEPS: u32 = 1000;
pub const N_ACTIONS: usize = 5;
pub const OBS_DIM: usize = 11;
/// A randomly wandering object steps once per this many time steps.
pub const RANDOM_MOVE_PERIOD: u32 = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Movement {
    Static,
    Random,
    Reactive,
}

impl Movement {
    pub const ALL: [Movement; 3] = [Movement::Static, Movement::Random, Movement::Reactive];

    pub fn code(self) -> u8 {
        self as u8
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PocmanParams {
    /// +1 (seek the object) or -1 (avoid it).
    pub reward: i8,
    pub movement: Movement,
    pub topology: Topology,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PocmanState {
    pub agent: Cell,
    pub object: Cell,
    pub steps: u32,
}

/// Action index: 0 north, 1 east, 2 south, 3 west, 4 stay.
pub fn action_direction(action: usize) -> Option<Direction> {
    Direction::ALL.get(action).copied()
}

pub fn reset<R: Rng + ?Sized>(params: &PocmanParams, rng: &mut R) -> PocmanState {
    let t = params.topology;
    let object = match params.movement {
        Movement::Static => *t
            .static_object_cells()
            .choose(rng)
            .expect("non-empty coordinate set"),
        Movement::Random | Movement::Reactive => t.dynamic_object_home(),
    };
    PocmanState {
        agent: t.agent_start(),
        object,
        steps: 0,
    }
}

pub fn observe(maze: &Maze, agent: Cell, object: Cell) -> Vec<f64> {
    let bit = |b: bool| if b { 1.0 } else { -1.0 };
    let mut obs = Vec::with_capacity(OBS_DIM);
    obs.extend(Direction::ALL.iter().map(|&d| bit(maze.is_wall(agent.offset(d)))));
    obs.extend(Direction::ALL.iter().map(|&d| bit(agent.offset(d) == object)));
    let dist = agent.manhattan(object);
    obs.extend([2, 3, 4].map(|r| bit(dist <= r)));
    obs
}

fn random_legal<R: Rng + ?Sized>(maze: &Maze, c: Cell, rng: &mut R) -> Cell {
    let moves: Vec<Cell> = maze.legal_moves(c).map(|(_, n)| n).collect();
    moves.choose(rng).copied().unwrap_or(c)
}

/// Uniform choice among legal moves that strictly change the distance to the
/// agent in the requested sense.
fn move_relative<R: Rng + ?Sized>(
    maze: &Maze,
    object: Cell,
    agent: Cell,
    away: bool,
    rng: &mut R,
) -> Option<Cell> {
    let d0 = object.manhattan(agent);
    let moves: Vec<Cell> = maze
        .legal_moves(object)
        .map(|(_, n)| n)
        .filter(|n| {
            let d = n.manhattan(agent);
            if away {
                d > d0
            } else {
                d < d0
            }
        })
        .collect();
    moves.choose(rng).copied()
}

fn move_object<R: Rng + ?Sized>(params: &PocmanParams, maze: &Maze, s: &PocmanState, rng: &mut R) -> Cell {
    match params.movement {
        Movement::Static => s.object,
        Movement::Random => {
            if s.steps % RANDOM_MOVE_PERIOD == 0 {
                let dir = *Direction::ALL.choose(rng).expect("four directions");
                maze.try_move(s.object, dir)
            } else {
                s.object
            }
        }
        Movement::Reactive => {
            let engage = rng.random_bool(0.5);
            if params.reward > 0 {
                // Defensive: flee half the time, otherwise hold position.
                if engage {
                    move_relative(maze, s.object, s.agent, true, rng).unwrap_or(s.object)
                } else {
                    s.object
                }
            } else if engage {
                move_relative(maze, s.object, s.agent, false, rng)
                    .unwrap_or_else(|| random_legal(maze, s.object, rng))
            } else {
                random_legal(maze, s.object, rng)
            }
        }
    }
}

pub fn step<R: Rng + ?Sized>(
    params: &PocmanParams,
    s: &mut PocmanState,
    action: usize,
    rng: &mut R,
) -> Result<StepOutcome> {
    if s.steps >= EPISODE_STEPS {
        return Err(Error::Usage("POcman episode already finished".into()));
    }
    if action >= N_ACTIONS {
        return Err(Error::Usage(format!("POcman action {action} out of range")));
    }
    let maze = params.topology.maze();
    if let Some(dir) = action_direction(action) {
        s.agent = maze.try_move(s.agent, dir);
    }
    s.steps += 1;
    s.object = move_object(params, maze, s, rng);
    let reward = if s.agent == s.object {
        f64::from(params.reward)
    } else {
        0.0
    };
    let terminal = s.steps >= EPISODE_STEPS;
    Ok(StepOutcome {
        observation: observe(maze, s.agent, s.object),
        reward,
        terminal,
        time_limit: terminal,
    })
}
