//! Versioned JSON snapshot of a trained agent.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{AgentConfig, Precision};
use super::sac::{Sac, UpdateCounters};
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::nets::{AdamState, GaussianPolicy, MlpRecord, Scalar};

pub const CHECKPOINT_FORMAT: &str = "saddle-rl-checkpoint/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub precision: Precision,
    pub seed: u64,
    pub env: EnvConfig,
    pub agent: AgentConfig,
    pub actor: MlpRecord,
    pub log_std: Vec<f64>,
    pub actor_opt: AdamState,
    pub log_std_opt: AdamState,
    pub critics: [MlpRecord; 2],
    pub critic_opts: [AdamState; 2],
    pub target_critics: [MlpRecord; 2],
    pub log_alpha: f64,
    pub alpha_opt: AdamState,
    pub counters: UpdateCounters,
}

impl Checkpoint {
    pub fn from_agent<T: Scalar>(sac: &Sac<T>, precision: Precision, env: &EnvConfig, seed: u64) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            precision,
            seed,
            env: env.clone(),
            agent: sac.cfg.clone(),
            actor: (&sac.actor.mean).into(),
            log_std: sac.actor.log_std.clone(),
            actor_opt: sac.actor_opt.clone(),
            log_std_opt: sac.log_std_opt.clone(),
            critics: [(&sac.critics[0]).into(), (&sac.critics[1]).into()],
            critic_opts: sac.critic_opts.clone(),
            target_critics: [(&sac.target_critics[0]).into(), (&sac.target_critics[1]).into()],
            log_alpha: sac.log_alpha,
            alpha_opt: sac.alpha_opt.clone(),
            counters: sac.counters,
        }
    }

    pub fn policy<T: Scalar>(&self) -> Result<GaussianPolicy<T>> {
        let mean = self.actor.to_params()?;
        if self.log_std.len() != mean.output_dim() {
            return Err(Error::ShapeMismatch(format!(
                "checkpoint log_std has {} entries, actor outputs {}",
                self.log_std.len(),
                mean.output_dim()
            )));
        }
        Ok(GaussianPolicy {
            mean,
            log_std: self.log_std.clone(),
        })
    }

    pub fn to_agent<T: Scalar>(&self) -> Result<Sac<T>> {
        let actor = self.policy()?;
        Ok(Sac {
            cfg: self.agent.clone(),
            dim: actor.action_dim(),
            actor,
            actor_opt: self.actor_opt.clone(),
            log_std_opt: self.log_std_opt.clone(),
            critics: [self.critics[0].to_params()?, self.critics[1].to_params()?],
            critic_opts: self.critic_opts.clone(),
            target_critics: [self.target_critics[0].to_params()?, self.target_critics[1].to_params()?],
            log_alpha: self.log_alpha,
            alpha_opt: self.alpha_opt.clone(),
            counters: self.counters,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Parses a checkpoint, checking the format tag before anything else.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let found = value.get("format").and_then(|f| f.as_str()).unwrap_or("<missing>");
        if found != CHECKPOINT_FORMAT {
            return Err(Error::CheckpointVersion {
                found: found.to_string(),
                expected: CHECKPOINT_FORMAT.to_string(),
            });
        }
        Ok(serde_json::from_value(value)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::rng_stream;

    fn agent<T: Scalar>() -> Sac<T> {
        let cfg = AgentConfig {
            hidden: vec![8, 8],
            ..AgentConfig::default()
        };
        let mut sac = Sac::<T>::new(2, &cfg, &mut rng_stream(0, 0)).unwrap();
        sac.log_alpha = -1.25;
        sac.actor.log_std = vec![-0.3, 0.1];
        sac.counters.critic_updates = 17;
        sac
    }

    #[test]
    fn round_trip_is_exact_in_both_precisions() {
        let a = agent::<f32>();
        let ck = Checkpoint::from_agent(&a, Precision::F32, &EnvConfig::default(), 4);
        let back = Checkpoint::from_json(&ck.to_json().unwrap()).unwrap();
        assert_eq!(back, ck);
        let b: Sac<f32> = back.to_agent().unwrap();
        assert_eq!(b.actor, a.actor);
        assert_eq!(b.critics, a.critics);
        assert_eq!(b.target_critics, a.target_critics);
        assert_eq!(b.log_alpha, a.log_alpha);
        assert_eq!(b.counters, a.counters);

        let a = agent::<f64>();
        let ck = Checkpoint::from_agent(&a, Precision::F64, &EnvConfig::default(), 4);
        let b: Sac<f64> = Checkpoint::from_json(&ck.to_json().unwrap()).unwrap().to_agent().unwrap();
        assert_eq!(b.actor, a.actor);
    }

    #[test]
    fn wrong_format_tag_is_rejected() {
        let ck = Checkpoint::from_agent(&agent::<f32>(), Precision::F32, &EnvConfig::default(), 0);
        let text = ck.to_json().unwrap().replace(CHECKPOINT_FORMAT, "saddle-rl-checkpoint/v0");
        match Checkpoint::from_json(&text) {
            Err(Error::CheckpointVersion { found, .. }) => assert_eq!(found, "saddle-rl-checkpoint/v0"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            Checkpoint::from_json("{}"),
            Err(Error::CheckpointVersion { .. })
        ));
    }
}
