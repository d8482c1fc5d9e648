use std::f64::consts::{LN_2, PI};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{ForwardCache, MlpGrads, MlpParams, Scalar};
use crate::error::Result;

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;
/// `ln 0.5`
pub const LOG_STD_INIT: f64 = -std::f64::consts::LN_2;

/// `ln(1 − tanh²u)`, stable for large `|u|`.
fn log_one_minus_tanh_sq(u: f64) -> f64 {
    let z = -2.0 * u;
    let softplus = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
    2.0 * (LN_2 - u - softplus)
}

/// Tanh-squashed diagonal Gaussian policy.
///
/// The network maps a state to the Gaussian mean; the log standard
/// deviation is a separate learned vector shared by all states.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy<T> {
    pub mean: MlpParams<T>,
    pub log_std: Vec<f64>,
}

/// Reparameterized draws for a batch of states, row-major `batch × d`.
#[derive(Debug, Clone, Default)]
pub struct PolicySample {
    pub actions: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub pre_tanh: Vec<f64>,
    /// Standard-normal draws (all zero in deterministic mode).
    pub noise: Vec<f64>,
}

impl<T: Scalar> GaussianPolicy<T> {
    pub fn new<R: Rng + ?Sized>(layer_dims: &[usize], rng: &mut R) -> Result<Self> {
        let mean = MlpParams::init_uniform(layer_dims, rng)?;
        let d = mean.output_dim();
        Ok(GaussianPolicy {
            mean,
            log_std: vec![LOG_STD_INIT; d],
        })
    }

    pub fn action_dim(&self) -> usize {
        self.mean.output_dim()
    }

    pub fn state_dim(&self) -> usize {
        self.mean.input_dim()
    }

    pub fn clamped_log_std(&self) -> Vec<f64> {
        self.log_std
            .iter()
            .map(|v| v.clamp(LOG_STD_MIN, LOG_STD_MAX))
            .collect()
    }

    pub fn std(&self) -> Vec<f64> {
        self.clamped_log_std().iter().map(|v| v.exp()).collect()
    }

    /// Draws standard-normal noise for `batch` rows.
    pub fn draw_noise<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Vec<f64> {
        (0..batch * self.action_dim())
            .map(|_| StandardNormal.sample(rng))
            .collect()
    }

    /// Actions and log-densities for `states` (`batch × state_dim`, network
    /// precision) given the standard-normal `noise`. Zero noise yields the
    /// deterministic squashed mean.
    pub fn sample_with_noise(
        &self,
        states: &[T],
        batch: usize,
        noise: Vec<f64>,
        cache: &mut ForwardCache<T>,
    ) -> PolicySample {
        let d = self.action_dim();
        assert_eq!(noise.len(), batch * d, "noise shape");
        let mean = self.mean.forward_batch(states, batch, cache);
        let ls = self.clamped_log_std();
        let norm_const: f64 = ls.iter().map(|l| l + 0.5 * (2.0 * PI).ln()).sum();
        let mut out = PolicySample {
            actions: vec![0.0; batch * d],
            log_probs: vec![0.0; batch],
            pre_tanh: vec![0.0; batch * d],
            noise,
        };
        for b in 0..batch {
            let mut lp = -norm_const;
            for i in 0..d {
                let k = b * d + i;
                let xi = out.noise[k];
                let u = mean[k].f64() + ls[i].exp() * xi;
                out.pre_tanh[k] = u;
                out.actions[k] = u.tanh();
                lp += -0.5 * xi * xi - log_one_minus_tanh_sq(u);
            }
            out.log_probs[b] = lp;
        }
        out
    }

    pub fn sample<R: Rng + ?Sized>(
        &self,
        states: &[T],
        batch: usize,
        rng: &mut R,
        cache: &mut ForwardCache<T>,
    ) -> PolicySample {
        let noise = self.draw_noise(batch, rng);
        self.sample_with_noise(states, batch, noise, cache)
    }

    pub fn deterministic(&self, states: &[T], batch: usize, cache: &mut ForwardCache<T>) -> PolicySample {
        self.sample_with_noise(states, batch, vec![0.0; batch * self.action_dim()], cache)
    }

    /// Log-density of a squashed action `a ∈ (−1, 1)^d` at one state.
    pub fn log_prob(&self, state: &[T], action: &[f64]) -> Result<f64> {
        let mean = self.mean.forward(state)?;
        let ls = self.clamped_log_std();
        let mut lp = 0.0;
        for i in 0..self.action_dim() {
            let u = action[i].atanh();
            let xi = (u - mean[i].f64()) / ls[i].exp();
            lp += -0.5 * xi * xi - ls[i] - 0.5 * (2.0 * PI).ln() - log_one_minus_tanh_sq(u);
        }
        Ok(lp)
    }

    /// Backpropagates a loss `L(a, log π)` through a reparameterized sample.
    ///
    /// `d_action` is `∂L/∂a` (`batch × d`), `d_log_prob` is `∂L/∂log π`
    /// (`batch`). Writes the mean-network gradient into `grads` and returns
    /// the gradient with respect to the raw log-std vector.
    pub fn backward(
        &self,
        sample: &PolicySample,
        cache: &ForwardCache<T>,
        d_action: &[f64],
        d_log_prob: &[f64],
        grads: &mut MlpGrads<T>,
    ) -> Vec<f64> {
        let d = self.action_dim();
        let batch = sample.log_probs.len();
        let ls = self.clamped_log_std();
        let mut d_mean = vec![T::zero(); batch * d];
        let mut d_ls = vec![0.0; d];
        for b in 0..batch {
            for i in 0..d {
                let k = b * d + i;
                let a = sample.actions[k];
                let du = d_action[k] * (1.0 - a * a) + d_log_prob[b] * 2.0 * sample.pre_tanh[k].tanh();
                d_mean[k] = T::of(du);
                d_ls[i] += du * ls[i].exp() * sample.noise[k] - d_log_prob[b];
            }
        }
        for (g, raw) in d_ls.iter_mut().zip(&self.log_std) {
            if !(LOG_STD_MIN..=LOG_STD_MAX).contains(raw) {
                *g = 0.0;
            }
        }
        self.mean.backward(cache, &d_mean, grads, None);
        d_ls
    }
}
