//! Episodic environment on a potential surface.
//!
//! The state is a point on the surface. An action in `[-1, 1]^d` moves the
//! state by `lambda * action`, the result is clipped to the bounding box and
//! the reward is the negated energy of the new state. An episode ends when
//! the state comes within `delta` (Euclidean) of the goal, or is truncated
//! after `max_steps` steps.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potentials::{surface_by_id, PotentialSurface, MUELLER_BROWN};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub surface: String,
    pub start: Vec<f64>,
    pub goal: Vec<f64>,
    /// Action scaling factor.
    pub lambda: f64,
    /// Termination tolerance on the distance to the goal.
    pub delta: f64,
    pub reset_noise_std: f64,
    pub max_steps: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            surface: MUELLER_BROWN.to_string(),
            start: vec![0.623, 0.028],
            goal: vec![-0.558, 1.442],
            lambda: 0.01,
            delta: 1e-4,
            reset_noise_std: 0.1,
            max_steps: 500,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self, surface: &PotentialSurface) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.lambda > 0.0) {
            return bad(format!("env.lambda must be positive, got {}", self.lambda));
        }
        if !(self.delta > 0.0) {
            return bad(format!("env.delta must be positive, got {}", self.delta));
        }
        if !(self.reset_noise_std >= 0.0) {
            return bad(format!(
                "env.reset_noise_std must be non-negative, got {}",
                self.reset_noise_std
            ));
        }
        if self.max_steps == 0 {
            return bad("env.max_steps must be at least 1".into());
        }
        for (name, p) in [("start", &self.start), ("goal", &self.goal)] {
            if p.len() != surface.dim() {
                return bad(format!(
                    "env.{name} has {} coordinates, surface `{}` has {}",
                    p.len(),
                    surface.id(),
                    surface.dim()
                ));
            }
            if !surface.contains(p) {
                return bad(format!("env.{name} {p:?} lies outside the surface bounds"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub next_state: Vec<f64>,
    pub reward: f64,
    /// Goal reached.
    pub terminal: bool,
    /// Step budget exhausted without reaching the goal.
    pub truncated: bool,
}

#[derive(Debug, Clone)]
pub struct Environment {
    surface: PotentialSurface,
    cfg: EnvConfig,
    state: Vec<f64>,
    steps: usize,
    finished: bool,
}

impl Environment {
    pub fn new(cfg: EnvConfig) -> Result<Self> {
        let surface = surface_by_id(&cfg.surface)?;
        Self::with_surface(surface, cfg)
    }

    /// Environment on an explicit surface; `cfg.surface` is ignored.
    pub fn with_surface(surface: PotentialSurface, cfg: EnvConfig) -> Result<Self> {
        cfg.validate(&surface)?;
        let state = cfg.start.clone();
        Ok(Environment {
            surface,
            cfg,
            state,
            steps: 0,
            finished: false,
        })
    }

    pub fn surface(&self) -> &PotentialSurface {
        &self.surface
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn dim(&self) -> usize {
        self.surface.dim()
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn goal(&self) -> &[f64] {
        &self.cfg.goal
    }

    pub fn distance_to_goal(&self, p: &[f64]) -> f64 {
        p.iter()
            .zip(&self.cfg.goal)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Starts a new episode at `start + N(0, reset_noise_std² I)`, clipped to
    /// the bounds. The same seed always gives the same initial state.
    pub fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let std = self.cfg.reset_noise_std;
        self.state = self
            .cfg
            .start
            .iter()
            .map(|&s| {
                let g: f64 = StandardNormal.sample(&mut rng);
                s + std * g
            })
            .collect();
        self.surface.clip_in_place(&mut self.state);
        self.steps = 0;
        self.finished = false;
        self.state.clone()
    }

    /// Places the walker at `p` and starts a fresh step count.
    pub fn set_state(&mut self, p: &[f64]) -> Result<()> {
        if !self.surface.contains(p) {
            return Err(Error::OutOfBounds { point: p.to_vec() });
        }
        self.state.copy_from_slice(p);
        self.steps = 0;
        self.finished = false;
        Ok(())
    }

    pub fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        if self.finished {
            return Err(Error::EpisodeFinished);
        }
        if action.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: action.len(),
            });
        }
        if let Some((index, &value)) = action
            .iter()
            .enumerate()
            .find(|(_, a)| !(a.abs() <= 1.0))
        {
            return Err(Error::ActionOutOfRange { index, value });
        }

        for (s, a) in self.state.iter_mut().zip(action) {
            *s += self.cfg.lambda * a;
        }
        self.surface.clip_in_place(&mut self.state);
        let reward = -self.surface.energy_unchecked(&self.state);
        self.steps += 1;
        let terminal = self.distance_to_goal(&self.state) < self.cfg.delta;
        let truncated = !terminal && self.steps >= self.cfg.max_steps;
        self.finished = terminal || truncated;
        Ok(StepOutcome {
            next_state: self.state.clone(),
            reward,
            terminal,
            truncated,
        })
    }
}
