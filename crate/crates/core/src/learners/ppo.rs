//! PPO with a shared trunk feeding a softmax actor head and a linear critic.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;

use super::config::{trunk_layers, PpoConfig, UpdateCadence};
use super::Experience;
use crate::error::{Error, Result};
use crate::nn::{
    LayerKind, LayerSpec, Network, NetworkSpec, OptimizerState, ParamSet, RecurrentState,
};

/// Probabilities are floored here before taking logarithms.
const PROB_FLOOR: f64 = 1e-12;

/// Generalised advantage estimates and value targets.
///
/// `terminal[t]` cuts both the bootstrap and the advantage chain after step
/// `t`; `bootstrap` is the value of the state following the last step.
pub fn gae_advantages(
    rewards: &[f64],
    values: &[f64],
    terminal: &[bool],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    assert!(rewards.len() == values.len() && values.len() == terminal.len());
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    let mut next_value = bootstrap;
    for t in (0..n).rev() {
        let live = if terminal[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        adv[t] = delta + gamma * lambda * live * next_adv;
        next_adv = adv[t];
        next_value = values[t];
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

/// `min(g A, clip(g, 1 - eps, 1 + eps) A)`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, clip: f64) -> f64 {
    (ratio * advantage).min(ratio.clamp(1.0 - clip, 1.0 + clip) * advantage)
}

/// Derivative of [`clipped_surrogate`] with respect to the ratio.
fn surrogate_slope(ratio: f64, advantage: f64, clip: f64) -> f64 {
    let clipped = (advantage > 0.0 && ratio > 1.0 + clip) || (advantage < 0.0 && ratio < 1.0 - clip);
    if clipped {
        0.0
    } else {
        advantage
    }
}

/// One collected step awaiting an update.
#[derive(Clone, Debug)]
pub struct RolloutStep {
    pub obs: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub terminal: bool,
    pub log_prob: f64,
    pub value: f64,
}

/// A minibatch sample with its fixed targets.
#[derive(Clone, Debug)]
pub struct PpoSample<'a> {
    pub obs: &'a [f64],
    pub action: usize,
    pub old_log_prob: f64,
    pub advantage: f64,
    pub value_target: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PpoParams {
    pub trunk: ParamSet,
    pub actor: ParamSet,
    pub critic: ParamSet,
}

impl PpoParams {
    fn l2_norm(&self) -> f64 {
        [&self.trunk, &self.actor, &self.critic]
            .iter()
            .map(|p| p.l2_norm().powi(2))
            .sum::<f64>()
            .sqrt()
    }

    fn scale(&mut self, factor: f64) {
        self.trunk.scale(factor);
        self.actor.scale(factor);
        self.critic.scale(factor);
    }
}

/// Loss terms averaged over a minibatch.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PpoLoss {
    pub surrogate: f64,
    pub value: f64,
    pub entropy: f64,
    pub total: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PpoCounters {
    pub steps: u64,
    pub updates: u64,
    pub episodes: u64,
}

#[derive(Clone, Debug)]
pub struct PpoLearner {
    pub config: PpoConfig,
    pub trunk: Network,
    pub actor: Network,
    pub critic: Network,
    optimizers: [OptimizerState; 3],
    pub counters: PpoCounters,
    rollout: Vec<RolloutStep>,
    /// Trunk state at the first rollout step.
    rollout_state: Option<RecurrentState>,
    state: Option<RecurrentState>,
    pending: Option<(f64, f64)>,
}

impl PpoLearner {
    pub fn new<R: Rng + ?Sized>(
        config: PpoConfig,
        obs_dim: usize,
        n_actions: usize,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let trunk = Network::new(
            NetworkSpec::new(obs_dim, trunk_layers(config.hidden, config.recurrent))?,
            rng,
        )?;
        let actor = Network::new(
            NetworkSpec::new(
                config.hidden,
                vec![LayerSpec::new(LayerKind::SoftmaxHead, n_actions)],
            )?,
            rng,
        )?;
        let critic = Network::new(
            NetworkSpec::new(config.hidden, vec![LayerSpec::new(LayerKind::DenseLinear, 1)])?,
            rng,
        )?;
        let optimizers = [
            OptimizerState::new(config.optimizer, &trunk.params),
            OptimizerState::new(config.optimizer, &actor.params),
            OptimizerState::new(config.optimizer, &critic.params),
        ];
        let state = trunk.initial_state();
        Ok(Self {
            config,
            trunk,
            actor,
            critic,
            optimizers,
            counters: PpoCounters::default(),
            rollout: Vec::new(),
            rollout_state: None,
            state,
            pending: None,
        })
    }

    pub fn is_recurrent(&self) -> bool {
        self.config.recurrent
    }

    pub fn recurrent_state(&self) -> Option<&RecurrentState> {
        self.state.as_ref()
    }

    pub fn rollout_len(&self) -> usize {
        self.rollout.len()
    }

    pub fn params(&self) -> PpoParams {
        PpoParams {
            trunk: self.trunk.params.clone(),
            actor: self.actor.params.clone(),
            critic: self.critic.params.clone(),
        }
    }

    pub fn begin_episode(&mut self) {
        self.state = self.trunk.initial_state();
        self.counters.episodes += 1;
    }

    pub fn warm(&mut self, obs: &[f64]) -> Result<()> {
        self.trunk.predict(obs, self.state.as_mut())?;
        Ok(())
    }

    /// Action probabilities and state value, advancing the recurrent state.
    fn evaluate(&mut self, obs: &[f64]) -> Result<(Vec<f64>, f64)> {
        if self.rollout.is_empty() && self.pending.is_none() {
            self.rollout_state = self.state.clone();
        }
        let h = self.trunk.predict(obs, self.state.as_mut())?;
        Ok((self.actor.predict(&h, None)?, self.critic.predict(&h, None)?[0]))
    }

    /// Samples an action, returning it with its log-probability and the
    /// critic's value.
    pub fn act<R: Rng + ?Sized>(&mut self, obs: &[f64], rng: &mut R) -> Result<(usize, f64, f64)> {
        let (probs, value) = self.evaluate(obs)?;
        let action = sample_action(&probs, rng)?;
        let log_prob = probs[action].max(PROB_FLOOR).ln();
        self.pending = Some((log_prob, value));
        Ok((action, log_prob, value))
    }

    /// Actor distribution from a fresh recurrent state.
    pub fn action_distribution(&self, obs: &[f64]) -> Result<Vec<f64>> {
        let mut state = self.trunk.initial_state();
        let h = self.trunk.predict(obs, state.as_mut())?;
        self.actor.predict(&h, None)
    }

    fn value_after(&self, obs: &[f64]) -> Result<f64> {
        let mut state = self.state.clone();
        let h = self.trunk.predict(obs, state.as_mut())?;
        Ok(self.critic.predict(&h, None)?[0])
    }

    /// Records the outcome of the last action and updates when the cadence
    /// is due.
    pub fn observe<R: Rng + ?Sized>(&mut self, exp: Experience, rng: &mut R) -> Result<()> {
        let Some((log_prob, value)) = self.pending.take() else {
            return Err(Error::Usage("ppo observe without a preceding act".into()));
        };
        self.rollout.push(RolloutStep {
            obs: exp.obs,
            action: exp.action,
            reward: exp.reward,
            terminal: exp.terminal,
            log_prob,
            value,
        });
        self.counters.steps += 1;
        let due = exp.episode_end
            || matches!(self.config.cadence, UpdateCadence::Steps(n) if self.rollout.len() >= n);
        if due {
            let bootstrap = if exp.terminal {
                0.0
            } else {
                self.value_after(&exp.next_obs)?
            };
            self.update(bootstrap, rng)?;
        }
        Ok(())
    }

    /// Runs the configured epochs over the current rollout, then clears it.
    pub fn update<R: Rng + ?Sized>(&mut self, bootstrap: f64, rng: &mut R) -> Result<()> {
        if self.rollout.is_empty() {
            return Ok(());
        }
        let rollout = std::mem::take(&mut self.rollout);
        let start_state = self.rollout_state.take();
        let rewards: Vec<f64> = rollout.iter().map(|s| s.reward).collect();
        let values: Vec<f64> = rollout.iter().map(|s| s.value).collect();
        let terminal: Vec<bool> = rollout.iter().map(|s| s.terminal).collect();
        let (adv, returns) = gae_advantages(
            &rewards,
            &values,
            &terminal,
            bootstrap,
            self.config.gamma,
            self.config.gae_lambda,
        );
        let samples: Vec<PpoSample> = rollout
            .iter()
            .zip(adv.iter().zip(&returns))
            .map(|(s, (&advantage, &value_target))| PpoSample {
                obs: &s.obs,
                action: s.action,
                old_log_prob: s.log_prob,
                advantage,
                value_target,
            })
            .collect();
        let mut order: Vec<usize> = (0..samples.len()).collect();
        for _ in 0..self.config.epochs {
            order.shuffle(rng);
            for chunk in order.chunks(self.config.minibatch) {
                let (_, mut grads) = if self.config.recurrent {
                    self.sequence_loss(&samples, chunk, start_state.as_ref())?
                } else {
                    let batch: Vec<&PpoSample> = chunk.iter().map(|&i| &samples[i]).collect();
                    self.minibatch_loss(&batch)?
                };
                let norm = grads.l2_norm();
                if norm > self.config.max_grad_norm {
                    grads.scale(self.config.max_grad_norm / norm);
                }
                self.apply(&grads)?;
            }
        }
        self.counters.updates += 1;
        Ok(())
    }

    fn apply(&mut self, grads: &PpoParams) -> Result<()> {
        let mut trunk = self.trunk.params.clone();
        let mut actor = self.actor.params.clone();
        let mut critic = self.critic.params.clone();
        let mut opts = self.optimizers.clone();
        opts[0].step(&mut trunk, &grads.trunk)?;
        opts[1].step(&mut actor, &grads.actor)?;
        opts[2].step(&mut critic, &grads.critic)?;
        self.trunk.params = trunk;
        self.actor.params = actor;
        self.critic.params = critic;
        self.optimizers = opts;
        Ok(())
    }

    /// Loss terms for one sample and the gradient with respect to the head
    /// outputs `(d/dprobs, d/dvalue)`, scaled by `weight`.
    fn sample_terms(
        &self,
        probs: &[f64],
        value: f64,
        s: &PpoSample,
        weight: f64,
    ) -> (PpoLoss, Vec<f64>, f64) {
        let c = &self.config;
        let p_a = probs[s.action].max(PROB_FLOOR);
        let ratio = (p_a.ln() - s.old_log_prob).exp();
        let surrogate = clipped_surrogate(ratio, s.advantage, c.clip_coef);
        let entropy: f64 = -probs
            .iter()
            .map(|&p| p * p.max(PROB_FLOOR).ln())
            .sum::<f64>();
        let value_err = value - s.value_target;
        let total = -surrogate + c.value_coef * value_err * value_err - c.entropy_coef * entropy;

        let mut d_probs: Vec<f64> = probs
            .iter()
            .map(|&p| weight * c.entropy_coef * (p.max(PROB_FLOOR).ln() + 1.0))
            .collect();
        d_probs[s.action] -= weight * surrogate_slope(ratio, s.advantage, c.clip_coef) * ratio / p_a;
        let d_value = weight * 2.0 * c.value_coef * value_err;
        let loss = PpoLoss {
            surrogate: weight * surrogate,
            value: weight * value_err * value_err,
            entropy: weight * entropy,
            total: weight * total,
        };
        (loss, d_probs, d_value)
    }

    fn add_loss(acc: &mut PpoLoss, l: PpoLoss) {
        acc.surrogate += l.surrogate;
        acc.value += l.value;
        acc.entropy += l.entropy;
        acc.total += l.total;
    }

    /// Backpropagates head-output gradients for one feature vector,
    /// returning the gradient with respect to that trunk output.
    fn heads_backward(
        &self,
        h: &[f64],
        d_probs: Vec<f64>,
        d_value: f64,
        grads: &mut PpoParams,
    ) -> Result<Vec<f64>> {
        let (_, _, actor_tape) = self.actor.forward(h, None)?;
        let (_, _, critic_tape) = self.critic.forward(h, None)?;
        let mut dh = self
            .actor
            .backward_into(&actor_tape, &[d_probs], &mut grads.actor)?
            .pop()
            .expect("one step");
        let dv = self
            .critic
            .backward_into(&critic_tape, &[vec![d_value]], &mut grads.critic)?
            .pop()
            .expect("one step");
        dh.iter_mut().zip(&dv).for_each(|(a, b)| *a += b);
        Ok(dh)
    }

    fn zero_grads(&self) -> PpoParams {
        PpoParams {
            trunk: ParamSet::zeros(&self.trunk.spec),
            actor: ParamSet::zeros(&self.actor.spec),
            critic: ParamSet::zeros(&self.critic.spec),
        }
    }

    /// Mean loss `-surrogate + c_v * value_mse - c_e * entropy` over
    /// independent samples, with its gradient.
    pub fn minibatch_loss(&self, batch: &[&PpoSample]) -> Result<(PpoLoss, PpoParams)> {
        let mut grads = self.zero_grads();
        let mut loss = PpoLoss::default();
        let weight = 1.0 / batch.len() as f64;
        for s in batch {
            let (h, _, trunk_tape) = self.trunk.forward(s.obs, None)?;
            let probs = self.actor.predict(&h, None)?;
            let value = self.critic.predict(&h, None)?[0];
            let (l, d_probs, d_value) = self.sample_terms(&probs, value, s, weight);
            Self::add_loss(&mut loss, l);
            let dh = self.heads_backward(&h, d_probs, d_value, &mut grads)?;
            self.trunk.backward_into(&trunk_tape, &[dh], &mut grads.trunk)?;
        }
        Ok((loss, grads))
    }

    /// Recurrent minibatch: the trunk is unrolled over the whole rollout from
    /// its recorded start state and only the selected steps carry loss.
    pub fn sequence_loss(
        &self,
        samples: &[PpoSample],
        selected: &[usize],
        start: Option<&RecurrentState>,
    ) -> Result<(PpoLoss, PpoParams)> {
        let mut grads = self.zero_grads();
        let mut loss = PpoLoss::default();
        let inputs: Vec<&[f64]> = samples.iter().map(|s| s.obs).collect();
        let (hs, _, tape) = self.trunk.forward_sequence(&inputs, start)?;
        let width = self.trunk.spec.output_dim();
        let mut dhs = vec![vec![0.0; width]; samples.len()];
        let weight = 1.0 / selected.len() as f64;
        for &i in selected {
            let probs = self.actor.predict(&hs[i], None)?;
            let value = self.critic.predict(&hs[i], None)?[0];
            let (l, d_probs, d_value) = self.sample_terms(&probs, value, &samples[i], weight);
            Self::add_loss(&mut loss, l);
            let dh = self.heads_backward(&hs[i], d_probs, d_value, &mut grads)?;
            dhs[i].iter_mut().zip(&dh).for_each(|(a, b)| *a += b);
        }
        self.trunk.backward_into(&tape, &dhs, &mut grads.trunk)?;
        Ok((loss, grads))
    }
}

pub fn sample_action<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> Result<usize> {
    let dist = WeightedIndex::new(probs)
        .map_err(|e| Error::Numerical {
            layer: 0,
            context: if e == rand::distr::weighted::Error::InvalidWeight {
                "invalid action probability"
            } else {
                "degenerate action distribution"
            },
        })?;
    Ok(dist.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;

    fn small(config: PpoConfig) -> PpoLearner {
        PpoLearner::new(PpoConfig { hidden: 6, ..config }, 3, 3, &mut rng_from_seed(21)).unwrap()
    }

    fn brute_gae(r: &[f64], v: &[f64], term: &[bool], boot: f64, g: f64, l: f64) -> Vec<f64> {
        let n = r.len();
        let next_v = |t: usize| if t + 1 < n { v[t + 1] } else { boot };
        let delta: Vec<f64> = (0..n)
            .map(|t| r[t] + if term[t] { 0.0 } else { g * next_v(t) } - v[t])
            .collect();
        (0..n)
            .map(|t| {
                let mut sum = 0.0;
                let mut w = 1.0;
                for k in t..n {
                    sum += w * delta[k];
                    if term[k] {
                        break;
                    }
                    w *= g * l;
                }
                sum
            })
            .collect()
    }

    #[test]
    fn gae_reductions() {
        let r = [1.0, 0.0, 2.0];
        let v = [0.5, 0.2, 0.1];
        let (a, ret) = gae_advantages(&r, &v, &[false; 3], 0.7, 0.9, 0.0);
        assert!((a[0] - (1.0 + 0.9 * 0.2 - 0.5)).abs() < 1e-15);
        assert!((a[2] - (2.0 + 0.9 * 0.7 - 0.1)).abs() < 1e-15);
        assert!((ret[1] - (a[1] + 0.2)).abs() < 1e-15);
        let (a, _) = gae_advantages(&r, &v, &[false; 3], 0.7, 0.0, 0.95);
        for t in 0..3 {
            assert!((a[t] - (r[t] - v[t])).abs() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn gae_matches_direct_sum(
            data in proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0, proptest::bool::weighted(0.15)), 10),
            boot in -2.0f64..2.0,
            gamma in 0.0f64..=1.0,
            lambda in 0.0f64..=1.0,
        ) {
            let r: Vec<f64> = data.iter().map(|d| d.0).collect();
            let v: Vec<f64> = data.iter().map(|d| d.1).collect();
            let term: Vec<bool> = data.iter().map(|d| d.2).collect();
            let (a, _) = gae_advantages(&r, &v, &term, boot, gamma, lambda);
            let b = brute_gae(&r, &v, &term, boot, gamma, lambda);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-10);
            }
        }

        #[test]
        fn clipping_is_pessimistic(ratio in 0.0f64..3.0, adv in -5.0f64..5.0, clip in 0.01f64..0.5) {
            let s = clipped_surrogate(ratio, adv, clip);
            prop_assert!(s <= ratio * adv + 1e-12);
        }
    }

    #[test]
    fn clip_arithmetic() {
        assert_eq!(clipped_surrogate(1.0, 3.5, 0.1), 3.5);
        assert!((clipped_surrogate(1.2, 2.0, 0.1) - 2.2).abs() < 1e-12);
        assert!((clipped_surrogate(0.5, -1.0, 0.1) - (-0.9)).abs() < 1e-12);
    }

    #[test]
    fn sampling_frequencies() {
        let mut rng = rng_from_seed(7);
        let n = 100_000;
        let mut counts = [0usize; 5];
        for _ in 0..n {
            counts[sample_action(&[0.2; 5], &mut rng).unwrap()] += 1;
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 0.2).abs() < 0.01);
        }
        let mut logits = vec![0.0, 50.0, 0.0];
        let max = 50.0;
        logits.iter_mut().for_each(|x: &mut f64| *x = (*x - max).exp());
        let z: f64 = logits.iter().sum();
        let probs: Vec<f64> = logits.iter().map(|x| x / z).collect();
        let hits = (0..10_000).filter(|_| sample_action(&probs, &mut rng).unwrap() == 1).count();
        assert!(hits as f64 / 10_000.0 > 0.999);
        let a = sample_action(&[0.3, 0.7], &mut rng_from_seed(1)).unwrap();
        assert_eq!(a, sample_action(&[0.3, 0.7], &mut rng_from_seed(1)).unwrap());
    }

    fn collect(l: &mut PpoLearner, n: usize, rng: &mut crate::rng::SimRng) -> Vec<RolloutStep> {
        l.begin_episode();
        for k in 0..n {
            let obs = vec![(k as f64 * 0.7).sin(), (k as f64 * 0.3).cos(), 0.5];
            let (action, _, _) = l.act(&obs, rng).unwrap();
            let (log_prob, value) = l.pending.take().unwrap();
            l.rollout.push(RolloutStep {
                obs,
                action,
                reward: if action == 1 { 1.0 } else { 0.0 },
                terminal: false,
                log_prob,
                value,
            });
        }
        l.rollout.clone()
    }

    fn as_samples(steps: &[RolloutStep]) -> Vec<PpoSample<'_>> {
        steps
            .iter()
            .map(|s| PpoSample {
                obs: &s.obs,
                action: s.action,
                old_log_prob: s.log_prob,
                advantage: s.reward - 0.5,
                value_target: s.reward,
            })
            .collect()
    }

    #[test]
    fn first_epoch_ratio_is_one() {
        for config in [PpoConfig::default(), PpoConfig::recurrent()] {
            let mut l = small(config);
            let mut rng = rng_from_seed(8);
            let steps = collect(&mut l, 12, &mut rng);
            let samples = as_samples(&steps);
            let inputs: Vec<&[f64]> = samples.iter().map(|s| s.obs).collect();
            let (hs, _, _) = l.trunk.forward_sequence(&inputs, l.rollout_state.as_ref()).unwrap();
            for (k, s) in samples.iter().enumerate() {
                let h = if l.config.recurrent {
                    hs[k].clone()
                } else {
                    l.trunk.predict(s.obs, None).unwrap()
                };
                let p = l.actor.predict(&h, None).unwrap();
                assert!((p[s.action].ln() - s.old_log_prob).abs() < 1e-9);
            }
            // Unclipped at ratio 1, the surrogate equals the mean advantage.
            let all: Vec<usize> = (0..samples.len()).collect();
            let (loss, _) = l.sequence_loss(&samples, &all, l.rollout_state.as_ref()).unwrap();
            let mean_adv = samples.iter().map(|s| s.advantage).sum::<f64>() / samples.len() as f64;
            assert!((loss.surrogate - mean_adv).abs() < 1e-9);
        }
    }

    fn perturbed_loss(l: &PpoLearner, which: usize, idx: usize, delta: f64, f: &dyn Fn(&PpoLearner) -> f64) -> f64 {
        let mut m = l.clone();
        let p = match which {
            0 => &mut m.trunk.params,
            1 => &mut m.actor.params,
            _ => &mut m.critic.params,
        };
        let mut k = idx;
        for t in p.tensors_mut() {
            if k < t.len() {
                t[k] += delta;
                break;
            }
            k -= t.len();
        }
        f(&m)
    }

    fn check_grads(l: &PpoLearner, grads: &PpoParams, f: &dyn Fn(&PpoLearner) -> f64) {
        let h = 1e-6;
        for (which, g) in [&grads.trunk, &grads.actor, &grads.critic].into_iter().enumerate() {
            for (idx, analytic) in g.values().enumerate() {
                let numeric = (perturbed_loss(l, which, idx, h, f) - perturbed_loss(l, which, idx, -h, f)) / (2.0 * h);
                let scale = analytic.abs().max(numeric.abs()).max(1e-6);
                assert!(
                    (analytic - numeric).abs() / scale < 1e-4,
                    "group {which} index {idx}: {analytic} vs {numeric}"
                );
            }
        }
    }

    #[test]
    fn loss_gradients_match_finite_differences() {
        let mut l = small(PpoConfig::default());
        let mut rng = rng_from_seed(9);
        let steps = collect(&mut l, 5, &mut rng);
        // Shift old log-probabilities so some ratios are clipped away from the kink.
        let mut samples = as_samples(&steps);
        samples[0].old_log_prob += 0.5;
        samples[1].old_log_prob -= 0.5;
        let batch: Vec<&PpoSample> = samples.iter().collect();
        let (_, grads) = l.minibatch_loss(&batch).unwrap();
        check_grads(&l, &grads, &|m| m.minibatch_loss(&batch).unwrap().0.total);
    }

    #[test]
    fn recurrent_loss_gradients_match_finite_differences() {
        let mut l = small(PpoConfig::recurrent());
        let mut rng = rng_from_seed(10);
        let steps = collect(&mut l, 6, &mut rng);
        let samples = as_samples(&steps);
        let selected = [1usize, 4, 5];
        let start = l.rollout_state.clone();
        let (_, grads) = l.sequence_loss(&samples, &selected, start.as_ref()).unwrap();
        check_grads(&l, &grads, &|m| {
            m.sequence_loss(&samples, &selected, start.as_ref()).unwrap().0.total
        });
    }

    #[test]
    fn update_improves_rewarded_action() {
        let mut l = PpoLearner::new(
            PpoConfig {
                hidden: 8,
                optimizer: crate::nn::OptimizerConfig::adam(0.01),
                ..PpoConfig::default()
            },
            3,
            3,
            &mut rng_from_seed(12),
        )
        .unwrap();
        let obs = [0.2, -0.1, 0.4];
        let before = l.action_distribution(&obs).unwrap()[1];
        let mut rng = rng_from_seed(13);
        for _ in 0..30 {
            l.begin_episode();
            for k in 0..20 {
                let (a, _, _) = l.act(&obs, &mut rng).unwrap();
                let end = k == 19;
                l.observe(
                    Experience {
                        obs: obs.to_vec(),
                        action: a,
                        reward: if a == 1 { 1.0 } else { 0.0 },
                        next_obs: obs.to_vec(),
                        terminal: end,
                        episode_end: end,
                        task_index: 0,
                    },
                    &mut rng,
                )
                .unwrap();
            }
        }
        assert_eq!(l.counters.updates, 30);
        assert_eq!(l.rollout_len(), 0);
        let after = l.action_distribution(&obs).unwrap()[1];
        assert!(after > before + 0.2, "{before} -> {after}");
    }

    #[test]
    fn step_cadence_triggers_updates() {
        let mut l = small(PpoConfig {
            cadence: UpdateCadence::Steps(10),
            ..PpoConfig::recurrent()
        });
        let mut rng = rng_from_seed(14);
        l.begin_episode();
        for k in 0..35 {
            let obs = vec![k as f64 * 0.01, 0.0, 1.0];
            let (a, _, _) = l.act(&obs, &mut rng).unwrap();
            l.observe(
                Experience {
                    next_obs: obs.clone(),
                    obs,
                    action: a,
                    reward: 0.0,
                    terminal: false,
                    episode_end: false,
                    task_index: 0,
                },
                &mut rng,
            )
            .unwrap();
        }
        assert_eq!(l.counters.updates, 3);
        assert_eq!(l.rollout_len(), 5);
        assert!(l
            .observe(
                Experience {
                    obs: vec![0.0; 3],
                    action: 0,
                    reward: 0.0,
                    next_obs: vec![0.0; 3],
                    terminal: false,
                    episode_end: true,
                    task_index: 0,
                },
                &mut rng
            )
            .is_err());
    }
}
