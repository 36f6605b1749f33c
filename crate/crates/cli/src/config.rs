use std::path::{Path, PathBuf};

use anyhow::Context;
use polylife::envs::DomainKind;
use polylife::learners::{DqnConfig, LearnerConfig, PpoConfig, ReplayKind};
use polylife::reuse::{SelectorMode, TimeUnit};
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Marks errors caused by bad user input; the binary exits with code 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct InvalidConfig(pub String);

fn invalid<T>(msg: impl Into<String>) -> anyhow::Result<T> {
    Err(InvalidConfig(msg.into()).into())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LearnerKind {
    Dqn,
    Drqn,
    Ppo,
    PpoLstm,
    UniformRandom,
}

impl LearnerKind {
    pub fn is_recurrent(self) -> bool {
        matches!(self, LearnerKind::Drqn | LearnerKind::PpoLstm)
    }

    fn label(self) -> &'static str {
        match self {
            LearnerKind::Dqn => "DQN",
            LearnerKind::Drqn => "DRQN",
            LearnerKind::Ppo => "PPO",
            LearnerKind::PpoLstm => "PPOLSTM",
            LearnerKind::UniformRandom => "Random",
        }
    }

    fn defaults(self) -> LearnerConfig {
        match self {
            LearnerKind::Dqn => LearnerConfig::Dqn(DqnConfig::default()),
            LearnerKind::Drqn => LearnerConfig::Dqn(DqnConfig::recurrent()),
            LearnerKind::Ppo => LearnerConfig::Ppo(PpoConfig::default()),
            LearnerKind::PpoLstm => LearnerConfig::Ppo(PpoConfig::recurrent()),
            LearnerKind::UniformRandom => LearnerConfig::UniformRandom,
        }
    }
}

/// One experimental condition, read from a JSON document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainKind,
    pub learner: LearnerKind,
    pub n_policies: usize,
    pub selector: SelectorMode,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    pub n_sequences: usize,
    pub block_steps: u64,
    pub n_blocks: usize,
    /// Partial learner hyperparameters merged over the defaults.
    #[serde(default)]
    pub overrides: Option<Value>,
    #[serde(default)]
    pub replay: Option<ReplayKind>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Policy spread every this many blocks; 0 disables.
    #[serde(default)]
    pub spread_interval: usize,
}

fn default_epsilon() -> f64 {
    0.1
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| InvalidConfig(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let n_tau = self.domain.n_tasks();
        if self.n_policies == 0 || self.n_policies > n_tau {
            return invalid(format!(
                "n_policies must be in 1..={n_tau} for {:?}, got {}",
                self.domain, self.n_policies
            ));
        }
        if self.domain.is_pomdp()
            && !self.learner.is_recurrent()
            && self.learner != LearnerKind::UniformRandom
        {
            return invalid("partially observable domains need drqn or ppo-lstm");
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return invalid("epsilon must lie in [0, 1]");
        }
        if self.n_sequences == 0 || self.n_blocks == 0 || self.block_steps == 0 {
            return invalid("n_sequences, n_blocks and block_steps must be positive");
        }
        self.learner_config()?;
        Ok(())
    }

    /// Defaults for the learner kind with `overrides` and `replay` applied.
    pub fn learner_config(&self) -> anyhow::Result<LearnerConfig> {
        let mut cfg = self.learner.defaults();
        if let Some(Value::Object(extra)) = &self.overrides {
            let mut value = serde_json::to_value(&cfg)?;
            let Value::Object(map) = &mut value else {
                unreachable!("learner configs serialise to objects")
            };
            for (k, v) in extra {
                if k == "kind" {
                    return invalid("overrides cannot change the learner kind");
                }
                map.insert(k.clone(), v.clone());
            }
            cfg = serde_json::from_value(value)
                .map_err(|e| InvalidConfig(format!("learner overrides: {e}")))?;
        } else if self.overrides.as_ref().is_some_and(|v| !v.is_null()) {
            return invalid("overrides must be a JSON object");
        }
        if let Some(kind) = self.replay {
            match &mut cfg {
                LearnerConfig::Dqn(d) => d.replay = kind,
                _ => return invalid("replay variants apply only to dqn and drqn"),
            }
        }
        cfg.validate().map_err(|e| InvalidConfig(e.to_string()))?;
        Ok(cfg)
    }

    pub fn time_unit(&self) -> TimeUnit {
        if self.domain.is_pomdp() {
            TimeUnit::Episodes
        } else {
            TimeUnit::Steps
        }
    }

    /// Condition name such as `AdaptivePPO14P`.
    pub fn condition(&self) -> String {
        let mode = match self.selector {
            SelectorMode::Adaptive => "Adaptive",
            SelectorMode::Unadaptive => "Unadaptive",
        };
        format!("{mode}{}{}P", self.learner.label(), self.n_policies)
    }
}
