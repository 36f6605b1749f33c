//! Lifetime policy reuse for lifelong reinforcement learning.
//!
//! A fixed-size library of policies is refined online across long random
//! sequences of tasks. Each episode a selector picks one policy for the
//! current task based on its lifetime average reward on that task; the chosen
//! policy acts and learns, and its statistics are updated.

pub mod envs;
pub mod learners;
pub mod error;
pub mod nn;
pub mod memsim;
pub mod metrics;
pub mod reuse;
pub mod rng;

pub use error::{Error, Result};
