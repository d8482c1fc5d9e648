//! Deterministic rollouts and barrier statistics over an ensemble of them.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::Environment;
use crate::error::Result;
use crate::nets::{ForwardCache, GaussianPolicy, Scalar};
use crate::par;

/// Anything that maps a state to an action in `[-1, 1]^d`.
pub trait Policy: Sync {
    fn act(&self, state: &[f64]) -> Vec<f64>;
}

/// Squashed mean of the Gaussian policy.
impl<T: Scalar> Policy for GaussianPolicy<T> {
    fn act(&self, state: &[f64]) -> Vec<f64> {
        let s: Vec<T> = state.iter().map(|&v| T::of(v)).collect();
        let mut cache = ForwardCache::default();
        self.deterministic(&s, 1, &mut cache).actions
    }
}

/// Scripted controller from a closure.
pub struct FnPolicy<F>(pub F);

impl<F: Fn(&[f64]) -> Vec<f64> + Sync> Policy for FnPolicy<F> {
    fn act(&self, state: &[f64]) -> Vec<f64> {
        (self.0)(state)
    }
}

/// One episode. `states` and `energies` include the initial state, so they
/// are one longer than `actions` and `rewards`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub energies: Vec<f64>,
    pub actions: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub terminal: bool,
    pub truncated: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn total_return(&self) -> f64 {
        self.rewards.iter().sum()
    }

    pub fn max_energy(&self) -> f64 {
        self.energies.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory holds its initial state")
    }
}

/// Runs one episode from `env.reset(reset_seed)` until it terminates or is
/// truncated.
pub fn run_episode<P: Policy + ?Sized>(policy: &P, env: &mut Environment, reset_seed: u64) -> Result<Trajectory> {
    let s0 = env.reset(reset_seed);
    let mut traj = Trajectory {
        energies: vec![env.surface().energy_unchecked(&s0)],
        states: vec![s0],
        actions: Vec::new(),
        rewards: Vec::new(),
        terminal: false,
        truncated: false,
    };
    loop {
        let a = policy.act(env.state());
        let out = env.step(&a)?;
        traj.energies.push(-out.reward);
        traj.states.push(out.next_state);
        traj.actions.push(a);
        traj.rewards.push(out.reward);
        if out.terminal || out.truncated {
            traj.terminal = out.terminal;
            traj.truncated = out.truncated;
            return Ok(traj);
        }
    }
}

/// `n` episodes from independently perturbed starts. Episode `k` uses the
/// `k`-th draw of a generator seeded with `seed`, so the result does not
/// depend on how the episodes are scheduled.
pub fn evaluate<P: Policy + ?Sized>(policy: &P, env: &Environment, n: usize, seed: u64) -> Result<Vec<Trajectory>> {
    let mut rng = super::rng_stream(seed, 0);
    let seeds: Vec<u64> = (0..n).map(|_| rng.next_u64()).collect();
    par::map(seeds, |s| run_episode(policy, &mut env.clone(), s))
        .into_iter()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub n: usize,
}

impl Stats {
    pub fn of(values: &[f64]) -> Option<Stats> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Stats {
            mean,
            std: var.sqrt(),
            n: values.len(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum BarrierSummary {
    Estimate { mean: f64, std: f64, n_success: usize },
    NoSuccess,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierEstimate {
    /// Highest energy along each trajectory.
    pub maxima: Vec<f64>,
    /// Whether each trajectory ended within the success radius.
    pub success: Vec<bool>,
    pub success_radius: f64,
    /// Over successful trajectories only.
    pub summary: BarrierSummary,
    /// Over every trajectory, successful or not.
    pub all: Option<Stats>,
}

pub fn barrier_estimate(trajectories: &[Trajectory], goal: &[f64], success_radius: f64) -> BarrierEstimate {
    let maxima: Vec<f64> = trajectories.iter().map(Trajectory::max_energy).collect();
    let success: Vec<bool> = trajectories
        .iter()
        .map(|t| {
            let d2: f64 = t.final_state().iter().zip(goal).map(|(a, b)| (a - b).powi(2)).sum();
            d2.sqrt() < success_radius
        })
        .collect();
    let hits: Vec<f64> = maxima
        .iter()
        .zip(&success)
        .filter(|(_, &ok)| ok)
        .map(|(m, _)| *m)
        .collect();
    let summary = match Stats::of(&hits) {
        Some(s) => BarrierSummary::Estimate {
            mean: s.mean,
            std: s.std,
            n_success: s.n,
        },
        None => BarrierSummary::NoSuccess,
    };
    BarrierEstimate {
        all: Stats::of(&maxima),
        maxima,
        success,
        success_radius,
        summary,
    }
}

/// Energy profiles padded so that their maxima share one index. Entry `k`
/// of the result is `(offset, profile)`: profile index `i` sits at aligned
/// index `offset + i`.
pub fn align_at_maxima(profiles: &[Vec<f64>]) -> Vec<(usize, Vec<f64>)> {
    let peaks: Vec<usize> = profiles
        .iter()
        .map(|p| {
            p.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &e)| if e > best.1 { (i, e) } else { best })
                .0
        })
        .collect();
    let anchor = peaks.iter().copied().max().unwrap_or(0);
    profiles
        .iter()
        .zip(peaks)
        .map(|(p, k)| (anchor - k, p.clone()))
        .collect()
}
