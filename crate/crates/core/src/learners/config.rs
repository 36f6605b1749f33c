use serde::{Deserialize, Serialize};

use super::replay::ReplayKind;
use crate::error::{config, Result};
use crate::nn::{ClipMode, GradientClip, LayerKind, LayerSpec, NetworkSpec, OptimizerConfig};

pub const HIDDEN_WIDTH: usize = 80;
pub const BURN_IN_STEPS: usize = 15;

/// Two hidden layers of `width`; the second is an LSTM when `recurrent`.
pub fn trunk_layers(width: usize, recurrent: bool) -> Vec<LayerSpec> {
    let second = if recurrent {
        LayerKind::LstmTanh
    } else {
        LayerKind::DenseRelu
    };
    vec![
        LayerSpec::new(LayerKind::DenseRelu, width),
        LayerSpec::new(second, width),
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DqnConfig {
    pub recurrent: bool,
    pub hidden: usize,
    pub gamma: f64,
    pub batch_size: usize,
    pub update_every: u64,
    pub buffer_capacity: usize,
    pub replay: ReplayKind,
    pub optimizer: OptimizerConfig,
    pub exploration: f64,
    pub clip: GradientClip,
    pub replay_start: u64,
    pub target_sync: u64,
    pub trace_length: usize,
    /// Random actions at episode start (recurrent only) and stored warm-up
    /// prefix prepended to sampled traces.
    pub burn_in: usize,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            recurrent: false,
            hidden: HIDDEN_WIDTH,
            gamma: 0.99,
            batch_size: 10,
            update_every: 4,
            buffer_capacity: 400_000,
            replay: ReplayKind::Fifo,
            optimizer: OptimizerConfig::adadelta(0.1),
            exploration: 0.2,
            clip: GradientClip {
                mode: ClipMode::ElementwiseAbs,
                threshold: 10.0,
            },
            replay_start: 50_000,
            target_sync: 10_000,
            trace_length: BURN_IN_STEPS,
            burn_in: BURN_IN_STEPS,
        }
    }
}

impl DqnConfig {
    /// DRQN defaults for partially observable tasks.
    pub fn recurrent() -> Self {
        Self {
            recurrent: true,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.batch_size == 0 || self.trace_length == 0 {
            return config("dqn widths, batch size and trace length must be positive");
        }
        if self.update_every == 0 || self.target_sync == 0 {
            return config("dqn update and target-sync periods must be positive");
        }
        if !(0.0..=1.0).contains(&self.exploration) {
            return config("dqn exploration rate must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return config("discount must lie in [0, 1]");
        }
        if self.clip.threshold <= 0.0 || self.optimizer.learning_rate() <= 0.0 {
            return config("clip threshold and learning rate must be positive");
        }
        Ok(())
    }

    pub fn network_spec(&self, obs_dim: usize, n_actions: usize) -> Result<NetworkSpec> {
        let mut layers = trunk_layers(self.hidden, self.recurrent);
        layers.push(LayerSpec::new(LayerKind::DenseLinear, n_actions));
        NetworkSpec::new(obs_dim, layers)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateCadence {
    EpisodeEnd,
    /// Every `n` steps, and at episode end.
    Steps(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoConfig {
    pub recurrent: bool,
    pub hidden: usize,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub optimizer: OptimizerConfig,
    pub minibatch: usize,
    pub epochs: usize,
    pub cadence: UpdateCadence,
    pub max_grad_norm: f64,
    pub clip_coef: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub burn_in: usize,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            recurrent: false,
            hidden: HIDDEN_WIDTH,
            gamma: 0.99,
            gae_lambda: 0.95,
            optimizer: OptimizerConfig::adam(0.00025),
            minibatch: 34,
            epochs: 10,
            cadence: UpdateCadence::EpisodeEnd,
            max_grad_norm: 1.0,
            clip_coef: 0.1,
            value_coef: 1.0,
            entropy_coef: 0.01,
            burn_in: BURN_IN_STEPS,
        }
    }
}

impl PpoConfig {
    /// PPO with an LSTM trunk for partially observable tasks.
    pub fn recurrent() -> Self {
        Self {
            recurrent: true,
            epochs: 3,
            cadence: UpdateCadence::Steps(100),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.minibatch == 0 || self.epochs == 0 {
            return config("ppo widths, minibatch and epochs must be positive");
        }
        if self.cadence == UpdateCadence::Steps(0) {
            return config("ppo update period must be positive");
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.gae_lambda) {
            return config("discount and GAE parameter must lie in [0, 1]");
        }
        if self.clip_coef <= 0.0 || self.max_grad_norm <= 0.0 || self.optimizer.learning_rate() <= 0.0 {
            return config("clip coefficient, gradient norm and learning rate must be positive");
        }
        if self.value_coef < 0.0 || self.entropy_coef < 0.0 {
            return config("loss coefficients must be non-negative");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LearnerConfig {
    Dqn(DqnConfig),
    Ppo(PpoConfig),
    UniformRandom,
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            LearnerConfig::Dqn(c) => c.validate(),
            LearnerConfig::Ppo(c) => c.validate(),
            LearnerConfig::UniformRandom => Ok(()),
        }
    }

    pub fn is_recurrent(&self) -> bool {
        match self {
            LearnerConfig::Dqn(c) => c.recurrent,
            LearnerConfig::Ppo(c) => c.recurrent,
            LearnerConfig::UniformRandom => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        for c in [
            LearnerConfig::Dqn(DqnConfig::default()),
            LearnerConfig::Dqn(DqnConfig::recurrent()),
            LearnerConfig::Ppo(PpoConfig::default()),
            LearnerConfig::Ppo(PpoConfig::recurrent()),
            LearnerConfig::UniformRandom,
        ] {
            c.validate().unwrap();
        }
    }

    #[test]
    fn rejects_bad_values() {
        let c = DqnConfig {
            exploration: 1.5,
            ..DqnConfig::default()
        };
        assert!(c.validate().is_err());
        let p = PpoConfig {
            cadence: UpdateCadence::Steps(0),
            ..PpoConfig::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn json_roundtrip_and_partial_override() {
        let c: LearnerConfig =
            serde_json::from_str(r#"{"kind":"dqn","replay_start":5000,"replay":"gdm"}"#).unwrap();
        let LearnerConfig::Dqn(d) = &c else { panic!() };
        assert_eq!(d.replay_start, 5000);
        assert_eq!(d.replay, ReplayKind::Gdm);
        assert_eq!(d.batch_size, 10);
        let back: LearnerConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert!(serde_json::from_str::<LearnerConfig>(r#"{"kind":"dqn","bogus":1}"#).is_err());
    }
}
