use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaMode {
    /// Learned against the target entropy `−d`.
    Tunable,
    /// Held at `alpha_init` for the whole run.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    F32,
    F64,
}

/// Every knob of the training loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentConfig {
    pub gamma: f64,
    pub tau: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub alpha_init: f64,
    pub alpha_lr: f64,
    pub alpha_mode: AlphaMode,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Standard deviation of the clipped Gaussian noise added to actions
    /// (exploration and, when enabled, target smoothing).
    pub noise_std: f64,
    pub noise_clip: f64,
    /// Critic updates per actor / alpha / target update.
    pub policy_delay: usize,
    /// Environment steps per critic update.
    pub agent_update_interval: usize,
    pub grad_clip: f64,
    pub epochs: usize,
    pub target_smoothing: bool,
    pub hidden: Vec<usize>,
    /// Environment steps between evaluation episodes; 0 disables them.
    pub eval_interval: usize,
    pub precision: Precision,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            gamma: 0.99,
            tau: 0.005,
            actor_lr: 1e-4,
            critic_lr: 1e-4,
            alpha_init: 0.5,
            alpha_lr: 1e-4,
            alpha_mode: AlphaMode::Tunable,
            batch_size: 128,
            buffer_capacity: 10_000,
            noise_std: 0.4,
            noise_clip: 1.0,
            policy_delay: 8,
            agent_update_interval: 1,
            grad_clip: 1.0,
            epochs: 1000,
            target_smoothing: true,
            hidden: vec![256, 256],
            eval_interval: 10,
            precision: Precision::F32,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("agent.gamma must lie in (0, 1), got {}", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.tau) || self.tau == 0.0 {
            return bad(format!("agent.tau must lie in (0, 1], got {}", self.tau));
        }
        for (name, v) in [
            ("actor_lr", self.actor_lr),
            ("critic_lr", self.critic_lr),
            ("alpha_init", self.alpha_init),
            ("alpha_lr", self.alpha_lr),
            ("grad_clip", self.grad_clip),
            ("noise_clip", self.noise_clip),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("agent.{name} must be positive, got {v}"));
            }
        }
        if !(self.noise_std >= 0.0) {
            return bad(format!("agent.noise_std must be non-negative, got {}", self.noise_std));
        }
        for (name, v) in [
            ("batch_size", self.batch_size),
            ("buffer_capacity", self.buffer_capacity),
            ("policy_delay", self.policy_delay),
            ("agent_update_interval", self.agent_update_interval),
        ] {
            if v == 0 {
                return bad(format!("agent.{name} must be at least 1"));
            }
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad(format!("agent.hidden must list positive widths, got {:?}", self.hidden));
        }
        Ok(())
    }

    /// `d → hidden… → d` for the policy mean.
    pub fn actor_dims(&self, d: usize) -> Vec<usize> {
        std::iter::once(d)
            .chain(self.hidden.iter().copied())
            .chain(std::iter::once(d))
            .collect()
    }

    /// `2d → hidden… → 1` for each critic.
    pub fn critic_dims(&self, d: usize) -> Vec<usize> {
        std::iter::once(2 * d)
            .chain(self.hidden.iter().copied())
            .chain(std::iter::once(1))
            .collect()
    }
}
