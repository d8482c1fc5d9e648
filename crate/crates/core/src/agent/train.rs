//! The training loop: act with exploration noise, store transitions, update
//! on schedule and run periodic evaluation episodes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::buffer::{ReplayBuffer, Transition};
use super::config::AgentConfig;
use super::eval::run_episode;
use super::sac::{perturb_action, ActionMode, Sac, UpdateCounters};
use crate::env::Environment;
use crate::error::Result;
use crate::nets::Scalar;

// Independent random streams of one run.
const STREAM_INIT: u64 = 1;
const STREAM_ACT: u64 = 2;
const STREAM_UPDATE: u64 = 3;
const STREAM_RESET: u64 = 4;
const STREAM_EVAL: u64 = 5;

/// Mean losses over the updates that happened during one episode.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossSummary {
    pub critic: Option<f64>,
    pub actor: Option<f64>,
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub steps: usize,
    /// Environment steps taken so far in the run, this episode included.
    pub training_step: u64,
    #[serde(rename = "return")]
    pub ret: f64,
    pub alpha: f64,
    pub max_energy: f64,
    pub final_distance: f64,
    pub terminal: bool,
    pub losses: LossSummary,
    pub counters: UpdateCounters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub index: usize,
    pub training_step: u64,
    /// Training episode during which the evaluation ran.
    pub episode: usize,
    pub steps: usize,
    #[serde(rename = "return")]
    pub ret: f64,
    pub alpha: f64,
    pub max_energy: f64,
    pub final_distance: f64,
    pub terminal: bool,
}

/// One line of the metrics stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MetricRecord {
    Episode(EpisodeRecord),
    Eval(EvalRecord),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainMetrics {
    /// Episode and evaluation records in the order they were produced.
    pub records: Vec<MetricRecord>,
    /// Per critic update, both critics.
    pub critic_losses: Vec<[f64; 2]>,
    /// Per delayed update.
    pub actor_losses: Vec<f64>,
    pub alpha_losses: Vec<f64>,
    /// α after every delayed update.
    pub alpha_trace: Vec<f64>,
    pub counters: UpdateCounters,
}

impl TrainMetrics {
    pub fn episodes(&self) -> impl Iterator<Item = &EpisodeRecord> {
        self.records.iter().filter_map(|r| match r {
            MetricRecord::Episode(e) => Some(e),
            MetricRecord::Eval(_) => None,
        })
    }

    pub fn evaluations(&self) -> impl Iterator<Item = &EvalRecord> {
        self.records.iter().filter_map(|r| match r {
            MetricRecord::Eval(e) => Some(e),
            MetricRecord::Episode(_) => None,
        })
    }

    pub fn episode_returns(&self) -> Vec<f64> {
        self.episodes().map(|e| e.ret).collect()
    }

    pub fn eval_returns(&self) -> Vec<f64> {
        self.evaluations().map(|e| e.ret).collect()
    }

    /// The metrics stream as JSON lines.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Trains a fresh agent for `cfg.epochs` episodes. Everything random is
/// derived from `seed`, so equal inputs give bit-identical outputs.
pub fn train<T: Scalar>(env: &mut Environment, cfg: &AgentConfig, seed: u64) -> Result<(Sac<T>, TrainMetrics)> {
    train_with_progress(env, cfg, seed, |_| {})
}

/// [`train`] with a callback after each episode record.
pub fn train_with_progress<T: Scalar, F: FnMut(&EpisodeRecord)>(
    env: &mut Environment,
    cfg: &AgentConfig,
    seed: u64,
    mut progress: F,
) -> Result<(Sac<T>, TrainMetrics)> {
    cfg.validate()?;
    let dim = env.dim();
    let mut sac = Sac::<T>::new(dim, cfg, &mut super::rng_stream(seed, STREAM_INIT))?;
    let mut act_rng = super::rng_stream(seed, STREAM_ACT);
    let mut update_rng = super::rng_stream(seed, STREAM_UPDATE);
    let mut reset_rng = super::rng_stream(seed, STREAM_RESET);
    let mut eval_rng = super::rng_stream(seed, STREAM_EVAL);
    let mut eval_env = env.clone();

    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity);
    let mut metrics = TrainMetrics::default();
    let mut training_step: u64 = 0;
    let mut eval_index = 0;

    for episode in 0..cfg.epochs {
        let mut state = env.reset(reset_rng.next_u64());
        let mut ret = 0.0;
        let mut max_energy = env.surface().energy_unchecked(&state);
        let (mut critic_l, mut actor_l, mut alpha_l) = (Vec::new(), Vec::new(), Vec::new());
        let (steps, terminal) = loop {
            let (a, _) = sac.sample_action(&state, ActionMode::Stochastic, &mut act_rng);
            let a = perturb_action(&a, cfg.noise_std, cfg.noise_clip, &mut act_rng);
            let out = env.step(&a)?;
            ret += out.reward;
            max_energy = max_energy.max(-out.reward);
            buffer.push(Transition {
                state: std::mem::replace(&mut state, out.next_state.clone()),
                action: a,
                reward: out.reward,
                next_state: out.next_state,
                terminal: out.terminal,
            });
            training_step += 1;

            if buffer.len() >= cfg.batch_size && training_step.is_multiple_of(cfg.agent_update_interval as u64) {
                let report = sac.update(&buffer, &mut update_rng)?;
                critic_l.push(0.5 * (report.critic_losses[0] + report.critic_losses[1]));
                metrics.critic_losses.push(report.critic_losses);
                if let Some(l) = report.actor_loss {
                    actor_l.push(l);
                    metrics.actor_losses.push(l);
                    metrics.alpha_trace.push(sac.alpha());
                }
                if let Some(l) = report.alpha_loss {
                    alpha_l.push(l);
                    metrics.alpha_losses.push(l);
                }
            }

            if cfg.eval_interval > 0 && training_step.is_multiple_of(cfg.eval_interval as u64) {
                let traj = run_episode(&sac.actor, &mut eval_env, eval_rng.next_u64())?;
                metrics.records.push(MetricRecord::Eval(EvalRecord {
                    index: eval_index,
                    training_step,
                    episode,
                    steps: traj.len(),
                    ret: traj.total_return(),
                    alpha: sac.alpha(),
                    max_energy: traj.max_energy(),
                    final_distance: eval_env.distance_to_goal(traj.final_state()),
                    terminal: traj.terminal,
                }));
                eval_index += 1;
            }

            if out.terminal || out.truncated {
                break (env.steps(), out.terminal);
            }
        };
        let record = EpisodeRecord {
            episode,
            steps,
            training_step,
            ret,
            alpha: sac.alpha(),
            max_energy,
            final_distance: env.distance_to_goal(&state),
            terminal,
            losses: LossSummary {
                critic: mean(&critic_l),
                actor: mean(&actor_l),
                alpha: mean(&alpha_l),
            },
            counters: sac.counters,
        };
        progress(&record);
        metrics.records.push(MetricRecord::Episode(record));
    }
    metrics.counters = sac.counters;
    Ok((sac, metrics))
}
