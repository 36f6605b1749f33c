use rand::Rng;
use serde::{Deserialize, Serialize};

use super::cartpole::{self, Termination};
use super::{TaskParams, TaskSpec};
use crate::error::{Error, Result};

/// One failure of a random-policy episode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TerminationEvent {
    /// |angular velocity| in the state the fatal action was taken from.
    pub theta_dot_abs: f64,
    pub episode_length: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RolloutStats {
    pub steps: u64,
    pub episodes: u64,
    pub angle_events: Vec<TerminationEvent>,
    pub position_events: Vec<TerminationEvent>,
    pub successes: u64,
}

impl RolloutStats {
    /// Smallest |angular velocity| preceding a pole-angle failure.
    pub fn min_angle_theta_dot(&self) -> Option<f64> {
        self.angle_events
            .iter()
            .map(|e| e.theta_dot_abs)
            .min_by(f64::total_cmp)
    }

    /// Mean episode length over pole-angle failures.
    pub fn mean_angle_episode_length(&self) -> Option<f64> {
        if self.angle_events.is_empty() {
            return None;
        }
        let total: f64 = self.angle_events.iter().map(|e| f64::from(e.episode_length)).sum();
        Some(total / self.angle_events.len() as f64)
    }
}

/// Runs a uniform-random policy for `n_steps` environment steps, recording
/// the state preceding each failure. An episode cut off by the step budget
/// is not counted.
pub fn random_policy_rollout<R: Rng + ?Sized>(
    task: &TaskSpec,
    n_steps: u64,
    rng: &mut R,
) -> Result<RolloutStats> {
    let TaskParams::Cartpole(params) = &task.params else {
        return Err(Error::Usage("random rollout statistics need a cart-pole task".into()));
    };
    let mut stats = RolloutStats::default();
    let mut state = cartpole::reset(rng);
    while stats.steps < n_steps {
        let before = state;
        let action = rng.random_range(0..cartpole::N_ACTIONS);
        let out = cartpole::step(params, &mut state, action)?;
        stats.steps += 1;
        if out.terminal {
            stats.episodes += 1;
            let event = TerminationEvent {
                theta_dot_abs: before.theta_dot.abs(),
                episode_length: state.steps,
            };
            match state.termination {
                Some(Termination::Angle) => stats.angle_events.push(event),
                Some(Termination::Position) => stats.position_events.push(event),
                Some(Termination::Success) => stats.successes += 1,
                None => unreachable!("terminal outcome carries a termination"),
            }
            state = cartpole::reset(rng);
        }
    }
    Ok(stats)
}
