use serde::{Deserialize, Serialize};

use super::network::ParamSet;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClipMode {
    /// Clamp each component to `[-threshold, threshold]`.
    ElementwiseAbs,
    /// Rescale so the global L2 norm does not exceed the threshold.
    GlobalNorm,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientClip {
    pub mode: ClipMode,
    pub threshold: f64,
}

pub fn clip_gradients(grads: &mut ParamSet, mode: ClipMode, threshold: f64) {
    debug_assert!(threshold > 0.0);
    match mode {
        ClipMode::ElementwiseAbs => {
            for t in grads.tensors_mut() {
                t.iter_mut()
                    .for_each(|g| *g = g.clamp(-threshold, threshold));
            }
        }
        ClipMode::GlobalNorm => {
            let norm = grads.l2_norm();
            if norm > threshold {
                grads.scale(threshold / norm);
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "kebab-case")]
pub enum OptimizerConfig {
    Adam {
        learning_rate: f64,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    },
    /// AdaDelta with decay `rho`; `learning_rate` multiplies the unit-free
    /// AdaDelta step.
    AdaDelta {
        learning_rate: f64,
        rho: f64,
        epsilon: f64,
    },
}

impl OptimizerConfig {
    pub fn adam(learning_rate: f64) -> Self {
        Self::Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn adadelta(learning_rate: f64) -> Self {
        Self::AdaDelta {
            learning_rate,
            rho: 0.95,
            epsilon: 1e-6,
        }
    }

    pub fn learning_rate(&self) -> f64 {
        match *self {
            Self::Adam { learning_rate, .. } | Self::AdaDelta { learning_rate, .. } => {
                learning_rate
            }
        }
    }
}

/// Optimiser hyperparameters plus per-parameter accumulators.
///
/// Adam keeps first/second moments in `first`/`second`; AdaDelta keeps the
/// running squared gradient in `first` and the running squared update in
/// `second`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub config: OptimizerConfig,
    pub first: ParamSet,
    pub second: ParamSet,
    pub steps: u64,
}

impl OptimizerState {
    pub fn new(config: OptimizerConfig, params: &ParamSet) -> Self {
        let mut first = params.clone();
        first.fill(0.0);
        let second = first.clone();
        Self {
            config,
            first,
            second,
            steps: 0,
        }
    }

    /// Applies one update in place. Parameters are left untouched if the
    /// update would produce a non-finite value.
    pub fn step(&mut self, params: &mut ParamSet, grads: &ParamSet) -> Result<()> {
        if !params.same_shape(grads) || !params.same_shape(&self.first) {
            return Err(Error::Config(
                "optimizer, parameter and gradient shapes disagree".into(),
            ));
        }
        let mut next = params.clone();
        let mut first = self.first.clone();
        let mut second = self.second.clone();
        let steps = self.steps + 1;
        match self.config {
            OptimizerConfig::Adam {
                learning_rate,
                beta1,
                beta2,
                epsilon,
            } => {
                let bc1 = 1.0 - beta1.powi(steps.min(i32::MAX as u64) as i32);
                let bc2 = 1.0 - beta2.powi(steps.min(i32::MAX as u64) as i32);
                for (((p, g), m), v) in next
                    .tensors_mut()
                    .zip(grads.tensors())
                    .zip(first.tensors_mut())
                    .zip(second.tensors_mut())
                {
                    for k in 0..p.len() {
                        m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
                        v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
                        let m_hat = m[k] / bc1;
                        let v_hat = v[k] / bc2;
                        p[k] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
                    }
                }
            }
            OptimizerConfig::AdaDelta {
                learning_rate,
                rho,
                epsilon,
            } => {
                for (((p, g), acc_g), acc_dx) in next
                    .tensors_mut()
                    .zip(grads.tensors())
                    .zip(first.tensors_mut())
                    .zip(second.tensors_mut())
                {
                    for k in 0..p.len() {
                        acc_g[k] = rho * acc_g[k] + (1.0 - rho) * g[k] * g[k];
                        let update = g[k] * (acc_dx[k] + epsilon).sqrt() / (acc_g[k] + epsilon).sqrt();
                        acc_dx[k] = rho * acc_dx[k] + (1.0 - rho) * update * update;
                        p[k] -= learning_rate * update;
                    }
                }
            }
        }
        if let Some(layer) = next.first_non_finite_layer() {
            return Err(Error::Numerical {
                layer,
                context: "optimizer step produced a non-finite parameter",
            });
        }
        *params = next;
        self.first = first;
        self.second = second;
        self.steps = steps;
        Ok(())
    }
}
