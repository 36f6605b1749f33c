//! Cart-pole with parametric masses and pole length.
//!
//! Classic frictionless equations integrated with explicit Euler at 50 Hz.
//! The push force is ±1 N. Each surviving step pays +1; the step that drops
//! the pole or runs the cart off the track pays 0.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::StepOutcome;
use crate::error::{Error, Result};

pub const GRAVITY: f64 = 9.8;
pub const FORCE: f64 = 1.0;
pub const DT: f64 = 0.02;
pub const ANGLE_LIMIT: f64 = 15.0 * std::f64::consts::PI / 180.0;
pub const POSITION_LIMIT: f64 = 2.4;
pub const MAX_STEPS: u32 = 200;
pub const N_ACTIONS: usize = 2;
pub const OBS_DIM: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CartpoleParams {
    /// kg
    pub cart_mass: f64,
    /// kg
    pub pole_mass: f64,
    /// Full pole length in metres.
    pub pole_length: f64,
}

impl Default for CartpoleParams {
    fn default() -> Self {
        Self {
            cart_mass: 1.0,
            pole_mass: 0.1,
            pole_length: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    /// Pole beyond 15 degrees.
    Angle,
    /// Cart beyond 2.4 m.
    Position,
    /// 200 steps survived.
    Success,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CartpoleState {
    pub x: f64,
    pub theta: f64,
    pub x_dot: f64,
    pub theta_dot: f64,
    pub steps: u32,
    pub termination: Option<Termination>,
}

impl CartpoleState {
    pub fn observation(&self) -> Vec<f64> {
        vec![self.x, self.theta, self.x_dot, self.theta_dot]
    }
}

pub fn reset<R: Rng + ?Sized>(rng: &mut R) -> CartpoleState {
    let mut draw = || rng.random_range(-0.05..=0.05);
    CartpoleState {
        x: draw(),
        theta: draw(),
        x_dot: draw(),
        theta_dot: draw(),
        steps: 0,
        termination: None,
    }
}

/// Accelerations `(x_acc, theta_acc)` for a push `force` in newtons.
pub fn accelerations(params: &CartpoleParams, s: &CartpoleState, force: f64) -> (f64, f64) {
    let total_mass = params.cart_mass + params.pole_mass;
    let half_length = params.pole_length / 2.0;
    let pole_mass_length = params.pole_mass * half_length;
    let (sin, cos) = s.theta.sin_cos();
    let temp = (force + pole_mass_length * s.theta_dot * s.theta_dot * sin) / total_mass;
    let theta_acc = (GRAVITY * sin - cos * temp)
        / (half_length * (4.0 / 3.0 - params.pole_mass * cos * cos / total_mass));
    let x_acc = temp - pole_mass_length * theta_acc * cos / total_mass;
    (x_acc, theta_acc)
}

/// Advances one step; action 0 pushes left, 1 pushes right.
pub fn step(params: &CartpoleParams, s: &mut CartpoleState, action: usize) -> Result<StepOutcome> {
    if s.termination.is_some() {
        return Err(Error::Usage("cart-pole episode already terminated".into()));
    }
    if action >= N_ACTIONS {
        return Err(Error::Usage(format!("cart-pole action {action} out of range")));
    }
    let force = if action == 1 { FORCE } else { -FORCE };
    let (x_acc, theta_acc) = accelerations(params, s, force);
    s.x += DT * s.x_dot;
    s.x_dot += DT * x_acc;
    s.theta += DT * s.theta_dot;
    s.theta_dot += DT * theta_acc;
    s.steps += 1;

    let termination = if s.theta.abs() > ANGLE_LIMIT {
        Some(Termination::Angle)
    } else if s.x.abs() > POSITION_LIMIT {
        Some(Termination::Position)
    } else if s.steps >= MAX_STEPS {
        Some(Termination::Success)
    } else {
        None
    };
    s.termination = termination;
    let failed = matches!(termination, Some(Termination::Angle | Termination::Position));
    Ok(StepOutcome {
        observation: s.observation(),
        reward: if failed { 0.0 } else { 1.0 },
        terminal: termination.is_some(),
        time_limit: termination == Some(Termination::Success),
    })
}
