//! Double DQN with proportional prioritized replay and a soft-updated
//! target network.

mod replay;
mod train;

pub use replay::{ReplayBuffer, SampledBatch, Transition};
pub use train::{
    run_training, EpisodeOutcome, EpisodeRecord, FixedOpponent, Opponent, OpponentProvider, Role, TrainingSetup,
    TrainingTrace, UniformOpponents,
};

use crate::nn::{adam_step, AdamParams, AdamState, Mlp, NnError};
use crate::policy::argmax;
use crate::sim::MetaAction;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DqnError {
    #[error("replay buffer holds {have} transitions, training needs {need}")]
    NotReady { have: usize, need: usize },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Sim(#[from] crate::sim::SimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DqnParams {
    pub gamma: f64,
    /// Target smoothing factor.
    pub tau: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of the training budget over which epsilon decays linearly.
    pub epsilon_decay_fraction: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub warmup: usize,
    /// Environment steps per gradient step.
    pub train_interval: usize,
    pub alpha: f64,
    pub beta_start: f64,
    pub beta_end: f64,
    pub priority_eps: f64,
    pub hidden: usize,
    pub adam: AdamParams,
}

impl Default for DqnParams {
    fn default() -> Self {
        DqnParams {
            gamma: 0.95,
            tau: 0.005,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_fraction: 0.2,
            batch_size: 64,
            buffer_capacity: 50_000,
            warmup: 1_000,
            train_interval: 1,
            alpha: 0.6,
            beta_start: 0.4,
            beta_end: 1.0,
            priority_eps: 1e-3,
            hidden: 256,
            adam: AdamParams::default(),
        }
    }
}

impl DqnParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err("dqn.gamma must lie in (0, 1)".into());
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err("dqn.tau must lie in (0, 1]".into());
        }
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !unit(self.epsilon_start) || !unit(self.epsilon_end) || self.epsilon_end > self.epsilon_start {
            return Err("dqn epsilon schedule must satisfy 0 <= end <= start <= 1".into());
        }
        if !(self.epsilon_decay_fraction > 0.0 && self.epsilon_decay_fraction <= 1.0) {
            return Err("dqn.epsilon_decay_fraction must lie in (0, 1]".into());
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 || self.train_interval == 0 || self.hidden == 0 {
            return Err("dqn batch_size, buffer_capacity, train_interval and hidden must be >= 1".into());
        }
        if self.warmup > self.buffer_capacity {
            return Err("dqn.warmup cannot exceed dqn.buffer_capacity".into());
        }
        if self.alpha < 0.0 || self.beta_start < 0.0 || self.beta_end < 0.0 || !(self.priority_eps > 0.0) {
            return Err("dqn alpha/beta must be >= 0 and priority_eps > 0".into());
        }
        if !(self.adam.lr > 0.0) {
            return Err("dqn.adam.lr must be positive".into());
        }
        Ok(())
    }

    /// Linear decay from `epsilon_start` to `epsilon_end` over the first
    /// `epsilon_decay_fraction` of `budget` transitions.
    pub fn epsilon_at(&self, step: u64, budget: u64) -> f64 {
        let horizon = (self.epsilon_decay_fraction * budget as f64).max(1.0);
        let frac = (step as f64 / horizon).min(1.0);
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }

    pub fn beta_at(&self, step: u64, budget: u64) -> f64 {
        let frac = if budget == 0 {
            1.0
        } else {
            (step as f64 / budget as f64).min(1.0)
        };
        self.beta_start + (self.beta_end - self.beta_start) * frac
    }
}

/// With probability `epsilon` a uniform action, otherwise the greedy one.
pub fn select_action<R: Rng + ?Sized>(net: &Mlp, obs: &[f64], epsilon: f64, rng: &mut R) -> Result<MetaAction, NnError> {
    let index = if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        rng.gen_range(0..MetaAction::COUNT)
    } else {
        argmax(&net.forward(obs)?)
    };
    Ok(MetaAction::from_index(index).expect("index below action count"))
}

/// `r` for terminal transitions, otherwise `r + gamma * Q_target(s', a*)`
/// with `a* = argmax_a Q_value(s', a)`.
pub fn double_dqn_target(value: &Mlp, target: &Mlp, t: &Transition, gamma: f64) -> Result<f64, NnError> {
    if t.done {
        return Ok(t.reward);
    }
    let best = argmax(&value.forward(&t.next_obs)?);
    Ok(t.reward + gamma * target.forward(&t.next_obs)?[best])
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossStats {
    /// Importance-weighted mean squared TD error.
    pub loss: f64,
    pub mean_abs_td: f64,
    pub max_abs_td: f64,
}

/// Value/target network pair with optimizer and replay memory.
#[derive(Debug, Clone)]
pub struct DqnAgent {
    pub value: Mlp,
    pub target: Mlp,
    pub adam: AdamState,
    pub params: DqnParams,
    pub buffer: ReplayBuffer,
}

impl DqnAgent {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, params: DqnParams, rng: &mut R) -> Self {
        let value = Mlp::q_network(input_dim, params.hidden, MetaAction::COUNT, rng);
        Self::from_network(value, params)
    }

    /// Starts from existing weights; the target network is a copy.
    pub fn from_network(value: Mlp, params: DqnParams) -> Self {
        DqnAgent {
            target: value.clone(),
            adam: AdamState::new(&value, params.adam),
            buffer: ReplayBuffer::new(params.buffer_capacity, params.alpha),
            value,
            params,
        }
    }

    pub fn remember(&mut self, t: Transition) {
        self.buffer.push(t);
    }

    /// One prioritized gradient step followed by the soft target update.
    pub fn train_step<R: Rng + ?Sized>(&mut self, beta: f64, rng: &mut R) -> Result<LossStats, DqnError> {
        let need = self.params.warmup.max(1);
        if self.buffer.len() < need {
            return Err(DqnError::NotReady {
                have: self.buffer.len(),
                need,
            });
        }
        let batch = self.buffer.sample(self.params.batch_size, beta, rng);
        self.learn(&batch)
    }

    /// Gradient step on an explicit batch of buffer slots.
    pub fn learn(&mut self, batch: &SampledBatch) -> Result<LossStats, DqnError> {
        let n = batch.indices.len();
        let dim = self.value.input_dim();
        let mut obs = Vec::with_capacity(n * dim);
        let mut next = Vec::with_capacity(n * dim);
        for &i in &batch.indices {
            let t = self.buffer.get(i);
            obs.extend_from_slice(&t.obs);
            next.extend_from_slice(&t.next_obs);
        }
        let q_next_value = self.value.forward_batch(&next, n)?;
        let q_next_target = self.target.forward_batch(&next, n)?;
        let k = MetaAction::COUNT;
        let gamma = self.params.gamma;
        let targets: Vec<f64> = batch
            .indices
            .iter()
            .enumerate()
            .map(|(b, &i)| {
                let t = self.buffer.get(i);
                if t.done {
                    t.reward
                } else {
                    let best = argmax(&q_next_value[b * k..(b + 1) * k]);
                    t.reward + gamma * q_next_target[b * k + best]
                }
            })
            .collect();

        let mut td = vec![0.0; n];
        let buffer = &self.buffer;
        let grads = self.value.forward_backward(&obs, n, |q| {
            let mut upstream = vec![0.0; n * k];
            for (b, &i) in batch.indices.iter().enumerate() {
                let a = buffer.get(i).action;
                let delta = targets[b] - q[b * k + a];
                td[b] = delta;
                // d/dq of mean_b w_b (target_b - q_b)^2
                upstream[b * k + a] = -2.0 * batch.weights[b] * delta / n as f64;
            }
            upstream
        })?;
        adam_step(&mut self.value, &grads, &mut self.adam)?;

        for (b, &i) in batch.indices.iter().enumerate() {
            self.buffer.set_priority(i, td[b].abs() + self.params.priority_eps);
        }
        self.target.soft_update_from(&self.value, self.params.tau)?;

        let loss = td.iter().zip(&batch.weights).map(|(d, w)| w * d * d).sum::<f64>() / n as f64;
        Ok(LossStats {
            loss,
            mean_abs_td: td.iter().map(|d| d.abs()).sum::<f64>() / n as f64,
            max_abs_td: td.iter().fold(0.0f64, |m, d| m.max(d.abs())),
        })
    }
}
