//! Soft actor-critic with twin critics, target-policy smoothing and delayed
//! actor / temperature / target updates.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::buffer::{Batch, ReplayBuffer};
use super::config::{AgentConfig, AlphaMode};
use crate::error::{Error, Result};
use crate::nets::{
    clip_global_norm, polyak_update, AdamState, ForwardCache, GaussianPolicy, MlpGrads, MlpParams, Scalar,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionMode {
    Stochastic,
    Deterministic,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdateCounters {
    pub critic_updates: u64,
    pub actor_updates: u64,
    pub alpha_updates: u64,
    pub target_updates: u64,
}

/// Losses of one call to [`Sac::update`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateReport {
    pub critic_losses: [f64; 2],
    /// Present on delayed steps only.
    pub actor_loss: Option<f64>,
    pub alpha_loss: Option<f64>,
}

/// Raw (unclipped) exploration noise, `N(0, σ²)` per component.
pub fn action_noise<R: Rng + ?Sized>(dim: usize, sigma: f64, rng: &mut R) -> Vec<f64> {
    if sigma == 0.0 {
        return vec![0.0; dim];
    }
    let normal = Normal::new(0.0, sigma).expect("sigma is finite and non-negative");
    (0..dim).map(|_| normal.sample(rng)).collect()
}

/// Adds `clip(ε, −ε_lim, ε_lim)` to every component and clips the result to
/// `[-1, 1]`.
pub fn apply_noise(action: &[f64], noise: &[f64], noise_clip: f64) -> Vec<f64> {
    action
        .iter()
        .zip(noise)
        .map(|(a, e)| (a + e.clamp(-noise_clip, noise_clip)).clamp(-1.0, 1.0))
        .collect()
}

pub fn perturb_action<R: Rng + ?Sized>(action: &[f64], sigma: f64, noise_clip: f64, rng: &mut R) -> Vec<f64> {
    let noise = action_noise(action.len(), sigma, rng);
    apply_noise(action, &noise, noise_clip)
}

fn stack_state_actions<T: Scalar>(states: &[T], actions: &[f64], dim: usize) -> Vec<T> {
    let batch = actions.len() / dim;
    let mut out = Vec::with_capacity(batch * 2 * dim);
    for b in 0..batch {
        out.extend_from_slice(&states[b * dim..(b + 1) * dim]);
        out.extend(actions[b * dim..(b + 1) * dim].iter().map(|&a| T::of(a)));
    }
    out
}

fn check_loss(name: &str, loss: f64) -> Result<f64> {
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(Error::NonFinite {
            tensor: format!("{name} loss"),
        })
    }
}

/// Agent state: actor, twin critics with targets, temperature and the
/// optimizer moments of all of them.
#[derive(Debug, Clone)]
pub struct Sac<T> {
    pub cfg: AgentConfig,
    pub dim: usize,
    pub actor: GaussianPolicy<T>,
    pub actor_opt: AdamState,
    pub log_std_opt: AdamState,
    pub critics: [MlpParams<T>; 2],
    pub critic_opts: [AdamState; 2],
    pub target_critics: [MlpParams<T>; 2],
    pub log_alpha: f64,
    pub alpha_opt: AdamState,
    pub counters: UpdateCounters,
}

impl<T: Scalar> Sac<T> {
    /// Fresh agent; targets start as exact copies of the critics.
    pub fn new<R: Rng + ?Sized>(dim: usize, cfg: &AgentConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let actor = GaussianPolicy::new(&cfg.actor_dims(dim), rng)?;
        let c0 = MlpParams::init_uniform(&cfg.critic_dims(dim), rng)?;
        let c1 = MlpParams::init_uniform(&cfg.critic_dims(dim), rng)?;
        Ok(Sac {
            actor_opt: AdamState::for_params(&actor.mean),
            log_std_opt: AdamState::new(dim),
            critic_opts: [AdamState::for_params(&c0), AdamState::for_params(&c1)],
            target_critics: [c0.clone(), c1.clone()],
            critics: [c0, c1],
            actor,
            log_alpha: cfg.alpha_init.ln(),
            alpha_opt: AdamState::new(1),
            counters: UpdateCounters::default(),
            cfg: cfg.clone(),
            dim,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    pub fn target_entropy(&self) -> f64 {
        -(self.dim as f64)
    }

    /// Action in `(-1, 1)^d` and its log-density under the current policy.
    pub fn sample_action<R: Rng + ?Sized>(&self, state: &[f64], mode: ActionMode, rng: &mut R) -> (Vec<f64>, f64) {
        let s: Vec<T> = state.iter().map(|&v| T::of(v)).collect();
        let mut cache = ForwardCache::default();
        let sample = match mode {
            ActionMode::Stochastic => self.actor.sample(&s, 1, rng, &mut cache),
            ActionMode::Deterministic => self.actor.deterministic(&s, 1, &mut cache),
        };
        (sample.actions, sample.log_probs[0])
    }

    fn critic_values(net: &MlpParams<T>, inputs: &[T], batch: usize) -> Vec<f64> {
        let mut cache = ForwardCache::default();
        net.forward_batch(inputs, batch, &mut cache)
            .iter()
            .map(|v| v.f64())
            .collect()
    }

    /// Bellman targets `r + γ(1 − done)(min_i Q'_i(s', a') − α log π(a'|s'))`
    /// with `a'` drawn from the current policy; when target smoothing is on,
    /// clipped noise is added to `a'` before it is scored by the critics.
    pub fn compute_targets<R: Rng + ?Sized>(&self, batch: &Batch<T>, rng: &mut R) -> Vec<f64> {
        let policy_noise = self.actor.draw_noise(batch.size, rng);
        let smoothing = self.cfg.target_smoothing.then(|| {
            let mut eps = action_noise(batch.size * self.dim, self.cfg.noise_std, rng);
            eps.iter_mut()
                .for_each(|e| *e = e.clamp(-self.cfg.noise_clip, self.cfg.noise_clip));
            eps
        });
        self.targets_with_noise(batch, policy_noise, smoothing.as_deref())
    }

    /// [`Sac::compute_targets`] with explicit noise draws. `smoothing` holds
    /// already-clipped perturbations, one per action component.
    pub fn targets_with_noise(&self, batch: &Batch<T>, policy_noise: Vec<f64>, smoothing: Option<&[f64]>) -> Vec<f64> {
        let mut cache = ForwardCache::default();
        let sample = self
            .actor
            .sample_with_noise(&batch.next_states, batch.size, policy_noise, &mut cache);
        let mut next_actions = sample.actions;
        if let Some(eps) = smoothing {
            for (a, e) in next_actions.iter_mut().zip(eps) {
                *a = (*a + e).clamp(-1.0, 1.0);
            }
        }
        let inputs = stack_state_actions(&batch.next_states, &next_actions, self.dim);
        let q0 = Self::critic_values(&self.target_critics[0], &inputs, batch.size);
        let q1 = Self::critic_values(&self.target_critics[1], &inputs, batch.size);
        let alpha = self.alpha();
        (0..batch.size)
            .map(|b| {
                let soft_value = q0[b].min(q1[b]) - alpha * sample.log_probs[b];
                batch.rewards[b] + self.cfg.gamma * (1.0 - batch.done[b]) * soft_value
            })
            .collect()
    }

    /// One clipped Adam step per critic on the mean squared Bellman error.
    pub fn update_critics(&mut self, batch: &Batch<T>, targets: &[f64]) -> Result<[f64; 2]> {
        let mut losses = [0.0; 2];
        for i in 0..2 {
            let net = &self.critics[i];
            let mut cache = ForwardCache::default();
            let q = net.forward_batch(&batch.state_actions, batch.size, &mut cache);
            let n = batch.size as f64;
            let mut loss = 0.0;
            let upstream: Vec<T> = q
                .iter()
                .zip(targets)
                .map(|(q, y)| {
                    let diff = q.f64() - y;
                    loss += diff * diff;
                    T::of(2.0 * diff / n)
                })
                .collect();
            losses[i] = check_loss(&format!("critic {i}"), loss / n)?;
            let mut grads = MlpGrads::zeros(net.layer_dims())?;
            net.backward(&cache, &upstream, &mut grads, None);
            clip_global_norm(&mut [grads.as_mut_slice()], self.cfg.grad_clip);
            crate::nets::adam_step(&mut self.critics[i], &grads, &mut self.critic_opts[i], self.cfg.critic_lr)?;
        }
        self.counters.critic_updates += 1;
        Ok(losses)
    }

    /// Mean of `α log π(a_θ|s) − min_i Q_i(s, a_θ)` for the given noise, with
    /// its gradients (mean network, raw log-std).
    pub fn actor_objective(&self, batch: &Batch<T>, noise: Vec<f64>) -> Result<(f64, MlpGrads<T>, Vec<f64>)> {
        let n = batch.size as f64;
        let alpha = self.alpha();
        let mut cache = ForwardCache::default();
        let sample = self.actor.sample_with_noise(&batch.states, batch.size, noise, &mut cache);
        let inputs = stack_state_actions(&batch.states, &sample.actions, self.dim);

        let mut caches = [ForwardCache::default(), ForwardCache::default()];
        let q0: Vec<f64> = self.critics[0]
            .forward_batch(&inputs, batch.size, &mut caches[0])
            .iter()
            .map(|v| v.f64())
            .collect();
        let q1: Vec<f64> = self.critics[1]
            .forward_batch(&inputs, batch.size, &mut caches[1])
            .iter()
            .map(|v| v.f64())
            .collect();

        // Route dL/dQ = −1/n to whichever critic attains the minimum.
        let mut up = [vec![T::zero(); batch.size], vec![T::zero(); batch.size]];
        let mut loss = 0.0;
        for b in 0..batch.size {
            let (qmin, which) = if q0[b] <= q1[b] { (q0[b], 0) } else { (q1[b], 1) };
            up[which][b] = T::of(-1.0 / n);
            loss += alpha * sample.log_probs[b] - qmin;
        }
        let loss = check_loss("actor", loss / n)?;

        let d = self.dim;
        let mut d_action = vec![0.0; batch.size * d];
        for i in 0..2 {
            let gx = self.critics[i].input_gradient(&caches[i], &up[i]);
            for b in 0..batch.size {
                for k in 0..d {
                    d_action[b * d + k] += gx[b * 2 * d + d + k].f64();
                }
            }
        }
        let d_log_prob = vec![alpha / n; batch.size];
        let mut grads = MlpGrads::zeros(self.actor.mean.layer_dims())?;
        let d_ls = self.actor.backward(&sample, &cache, &d_action, &d_log_prob, &mut grads);
        Ok((loss, grads, d_ls))
    }

    /// One clipped Adam step on the actor (mean network and log-std jointly).
    pub fn update_actor<R: Rng + ?Sized>(&mut self, batch: &Batch<T>, rng: &mut R) -> Result<f64> {
        let noise = self.actor.draw_noise(batch.size, rng);
        self.update_actor_with_noise(batch, noise)
    }

    pub fn update_actor_with_noise(&mut self, batch: &Batch<T>, noise: Vec<f64>) -> Result<f64> {
        let (loss, mut grads, mut d_ls) = self.actor_objective(batch, noise)?;
        // Joint clip over the mean network and the log-std vector.
        let sq: f64 = grads.as_slice().iter().map(|g| g.f64() * g.f64()).sum::<f64>()
            + d_ls.iter().map(|g| g * g).sum::<f64>();
        let norm = sq.sqrt();
        if norm > self.cfg.grad_clip {
            let scale = self.cfg.grad_clip / norm;
            grads.as_mut_slice().iter_mut().for_each(|g| *g *= T::of(scale));
            d_ls.iter_mut().for_each(|g| *g *= scale);
        }
        if d_ls.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                tensor: "actor log_std".into(),
            });
        }
        crate::nets::adam_step(&mut self.actor.mean, &grads, &mut self.actor_opt, self.cfg.actor_lr)?;
        self.log_std_opt
            .step(&mut self.actor.log_std, &d_ls, self.cfg.actor_lr);
        self.counters.actor_updates += 1;
        Ok(loss)
    }

    /// Temperature loss `mean(−α (log π + H̄))` and its derivative with
    /// respect to `log α`.
    pub fn alpha_loss_and_grad(&self, log_probs: &[f64]) -> (f64, f64) {
        let alpha = self.alpha();
        let h = self.target_entropy();
        let mean = log_probs.iter().map(|lp| lp + h).sum::<f64>() / log_probs.len() as f64;
        (-alpha * mean, -alpha * mean)
    }

    /// One Adam step on `log α`; a no-op returning `None` in fixed mode.
    pub fn update_alpha<R: Rng + ?Sized>(&mut self, batch: &Batch<T>, rng: &mut R) -> Option<f64> {
        if self.cfg.alpha_mode == AlphaMode::Fixed {
            return None;
        }
        let mut cache = ForwardCache::default();
        let sample = self.actor.sample(&batch.states, batch.size, rng, &mut cache);
        Some(self.update_alpha_from(&sample.log_probs))
    }

    pub fn update_alpha_from(&mut self, log_probs: &[f64]) -> f64 {
        let (loss, grad) = self.alpha_loss_and_grad(log_probs);
        let mut la = [self.log_alpha];
        self.alpha_opt.step(&mut la, &[grad], self.cfg.alpha_lr);
        self.log_alpha = la[0];
        self.counters.alpha_updates += 1;
        loss
    }

    pub fn soft_update_targets(&mut self) -> Result<()> {
        for i in 0..2 {
            polyak_update(&mut self.target_critics[i], &self.critics[i], self.cfg.tau)?;
        }
        self.counters.target_updates += 1;
        Ok(())
    }

    /// Critic step on a fresh minibatch; every `policy_delay` critic steps
    /// also the actor, the temperature and the target critics, in that order.
    pub fn update<R: Rng + ?Sized>(&mut self, buffer: &ReplayBuffer, rng: &mut R) -> Result<UpdateReport> {
        let batch: Batch<T> = buffer.sample(self.cfg.batch_size, rng);
        let targets = self.compute_targets(&batch, rng);
        let critic_losses = self.update_critics(&batch, &targets)?;
        let mut report = UpdateReport {
            critic_losses,
            actor_loss: None,
            alpha_loss: None,
        };
        if self.counters.critic_updates.is_multiple_of(self.cfg.policy_delay as u64) {
            report.actor_loss = Some(self.update_actor(&batch, rng)?);
            report.alpha_loss = self.update_alpha(&batch, rng);
            self.soft_update_targets()?;
        }
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::buffer::Transition;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn small_cfg() -> AgentConfig {
        AgentConfig {
            hidden: vec![8, 8],
            batch_size: 4,
            ..AgentConfig::default()
        }
    }

    fn batch(rng: &mut ChaCha8Rng, n: usize, done: bool) -> Batch<f64> {
        use rand::RngExt;
        let ts: Vec<Transition> = (0..n)
            .map(|_| Transition {
                state: vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
                action: vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
                reward: rng.random_range(-5.0..5.0),
                next_state: vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
                terminal: done,
            })
            .collect();
        let refs: Vec<&Transition> = ts.iter().collect();
        Batch::from_transitions(&refs)
    }

    #[test]
    fn targets_start_as_copies() {
        let sac = Sac::<f64>::new(2, &small_cfg(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(sac.critics, sac.target_critics);
        assert_ne!(sac.critics[0], sac.critics[1]);
    }

    #[test]
    fn perturbation_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(perturb_action(&[0.3, -0.2], 0.0, 1.0, &mut rng), vec![0.3, -0.2]);
        for _ in 0..1000 {
            let a = perturb_action(&[0.9, -0.9], 0.4, 1.0, &mut rng);
            assert!(a.iter().all(|v| v.abs() <= 1.0));
        }
    }

    #[test]
    fn squashed_actions_stay_inside_the_box() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let sac = Sac::<f64>::new(2, &small_cfg(), &mut rng).unwrap();
        for _ in 0..100_000 {
            let (a, lp) = sac.sample_action(&[0.2, 0.9], ActionMode::Stochastic, &mut rng);
            assert!(a.iter().all(|v| v.abs() < 1.0) && lp.is_finite());
        }
    }

    #[test]
    fn zero_actor_deterministic_action_is_origin() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut sac = Sac::<f64>::new(2, &small_cfg(), &mut rng).unwrap();
        sac.actor.mean.fill_zero();
        let (a, lp) = sac.sample_action(&[0.5, 0.5], ActionMode::Deterministic, &mut rng);
        assert_eq!(a, vec![0.0, 0.0]);
        // Density of the squashed mean: the Gaussian peak, no Jacobian at 0.
        let want = -2.0 * (0.5f64.ln() + 0.5 * (2.0 * PI).ln());
        assert!((lp - want).abs() < 1e-12);
    }

    #[test]
    fn density_integrates_and_matches_sample_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let sac = Sac::<f64>::new(2, &small_cfg(), &mut rng).unwrap();
        let n = 400;
        let h = 2.0 / n as f64;
        for _ in 0..5 {
            use rand::RngExt;
            let s = [rng.random_range(-1.5..1.5), rng.random_range(-0.5..2.0)];
            let mut total = 0.0;
            let mut box_mass = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let a = [-1.0 + (i as f64 + 0.5) * h, -1.0 + (j as f64 + 0.5) * h];
                    let p = sac.actor.log_prob(&s, &a).unwrap().exp() * h * h;
                    total += p;
                    if a[0] < 0.0 && a[1] < 0.0 {
                        box_mass += p;
                    }
                }
            }
            assert!((total - 1.0).abs() < 0.02, "total mass {total}");
            let draws = 20_000;
            let hits = (0..draws)
                .filter(|_| {
                    let (a, _) = sac.sample_action(&s, ActionMode::Stochastic, &mut rng);
                    a[0] < 0.0 && a[1] < 0.0
                })
                .count();
            let freq = hits as f64 / draws as f64;
            assert!((freq - box_mass).abs() < 0.02, "{freq} vs {box_mass}");
        }
    }

    #[test]
    fn exploration_noise_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..100_000 {
            let raw = action_noise(2, 0.4, &mut rng);
            let a = apply_noise(&[0.0, 0.0], &raw, 1.0);
            assert!(a.iter().all(|v| v.abs() <= 1.0));
        }
        let n = 1_000_000;
        let raw = action_noise(n, 0.4, &mut rng);
        let mean = raw.iter().sum::<f64>() / n as f64;
        let std = (raw.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        assert!((std - 0.4).abs() < 0.004, "{std}");
    }

    #[test]
    fn hand_built_targets() {
        // Actor: mean(s) = relu(s) through identity layers; critics:
        // Q(s, a) = w·relu(s ⊕ a) + c with a single hidden unit.
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let cfg = AgentConfig {
            target_smoothing: false,
            ..small_cfg()
        };
        let mut sac = Sac::<f64>::new(2, &cfg, &mut rng).unwrap();
        sac.actor.mean = MlpParams::from_layers(
            &[2, 2, 2],
            &[vec![1.0, 0.0, 0.0, 1.0], vec![0.5, 0.0, 0.0, 0.5]],
            &[vec![0.0, 0.0], vec![0.0, 0.0]],
        )
        .unwrap();
        sac.actor.log_std = vec![-1.0, -2.0];
        sac.target_critics = [
            MlpParams::from_layers(&[4, 1, 1], &[vec![1.0, 1.0, 1.0, 1.0], vec![2.0]], &[vec![0.0], vec![-1.0]])
                .unwrap(),
            MlpParams::from_layers(&[4, 1, 1], &[vec![1.0, -1.0, 0.5, 0.0], vec![1.0]], &[vec![0.5], vec![0.0]])
                .unwrap(),
        ];
        let ts = [
            Transition {
                state: vec![0.0, 0.0],
                action: vec![0.1, 0.2],
                reward: 3.0,
                next_state: vec![0.4, 0.2],
                terminal: false,
            },
            Transition {
                state: vec![0.0, 0.0],
                action: vec![0.1, 0.2],
                reward: -1.0,
                next_state: vec![0.6, -0.3],
                terminal: true,
            },
        ];
        let b: Batch<f64> = Batch::from_transitions(&[&ts[0], &ts[1]]);
        let noise = vec![0.3, -0.7, 1.1, 0.2];
        let y = sac.targets_with_noise(&b, noise.clone(), None);

        let relu = |v: f64| v.max(0.0);
        let sp = [0.4, 0.2];
        let sd = [(-1.0f64).exp(), (-2.0f64).exp()];
        let u = [0.5 * relu(sp[0]) + sd[0] * noise[0], 0.5 * relu(sp[1]) + sd[1] * noise[1]];
        let a = [u[0].tanh(), u[1].tanh()];
        let lp: f64 = (0..2)
            .map(|i| {
                -0.5 * noise[i] * noise[i] - sd[i].ln() - 0.5 * (2.0 * PI).ln() - (1.0 - a[i] * a[i]).ln()
            })
            .sum();
        let q0 = 2.0 * relu(sp[0] + sp[1] + a[0] + a[1]) - 1.0;
        let q1 = relu(sp[0] - sp[1] + 0.5 * a[0] + 0.5);
        let want0 = 3.0 + 0.99 * (q0.min(q1) - 0.5 * lp);
        assert!((y[0] - want0).abs() < 1e-12, "{} vs {want0}", y[0]);
        assert_eq!(y[1], -1.0);
    }

    #[test]
    fn terminal_or_zero_discount_targets_equal_reward() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sac = Sac::<f64>::new(2, &small_cfg(), &mut rng).unwrap();
        let b = batch(&mut rng, 6, true);
        assert_eq!(sac.compute_targets(&b, &mut rng), b.rewards);

        let mut cfg = small_cfg();
        cfg.gamma = 1e-300;
        let mut sac = Sac::<f64>::new(2, &cfg, &mut rng).unwrap();
        sac.cfg.gamma = 0.0;
        let b = batch(&mut rng, 6, false);
        assert_eq!(sac.compute_targets(&b, &mut rng), b.rewards);
    }

    #[test]
    fn targets_use_the_smaller_critic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut sac = Sac::<f64>::new(2, &small_cfg(), &mut rng).unwrap();
        let b = batch(&mut rng, 8, false);
        let noise = sac.actor.draw_noise(8, &mut rng);
        let eps: Vec<f64> = (0..16).map(|k| 0.05 * (k as f64 - 8.0)).collect();
        let y = sac.targets_with_noise(&b, noise.clone(), Some(&eps));
        sac.target_critics.swap(0, 1);
        assert_eq!(y, sac.targets_with_noise(&b, noise, Some(&eps)));
    }

    #[test]
    fn smoothing_off_matches_plain_soft_targets() {
        // Independent plain-SAC target: no smoothing branch at all.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut cfg = small_cfg();
        cfg.target_smoothing = false;
        cfg.noise_std = 0.0;
        let sac = Sac::<f64>::new(2, &cfg, &mut rng).unwrap();
        let b = batch(&mut rng, 5, false);
        let noise = sac.actor.draw_noise(5, &mut rng);
        let got = sac.targets_with_noise(&b, noise.clone(), None);
        for k in 0..5 {
            let s = &b.next_states[2 * k..2 * k + 2];
            let mean = sac.actor.mean.forward(s).unwrap();
            let std = sac.actor.std();
            let u: Vec<f64> = (0..2).map(|i| mean[i] + std[i] * noise[2 * k + i]).collect();
            let a: Vec<f64> = u.iter().map(|v| v.tanh()).collect();
            let lp = sac.actor.log_prob(s, &a).unwrap();
            let inp = [s[0], s[1], a[0], a[1]];
            let q0 = sac.target_critics[0].forward(&inp).unwrap()[0];
            let q1 = sac.target_critics[1].forward(&inp).unwrap()[0];
            let want = b.rewards[k] + cfg.gamma * (q0.min(q1) - sac.alpha() * lp);
            assert!((got[k] - want).abs() < 1e-9, "{} vs {want}", got[k]);
        }
    }

    #[test]
    fn critic_loss_is_squared_error_on_single_transition() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut sac = Sac::<f64>::new(2, &small_cfg(), &mut rng).unwrap();
        let b = batch(&mut rng, 1, false);
        let q0 = sac.critics[0].forward(&b.state_actions).unwrap()[0];
        let q1 = sac.critics[1].forward(&b.state_actions).unwrap()[0];
        let y = [1.5];
        let losses = sac.update_critics(&b, &y).unwrap();
        assert!((losses[0] - (q0 - 1.5).powi(2)).abs() < 1e-12);
        assert!((losses[1] - (q1 - 1.5).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn critic_at_target_has_zero_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut sac = Sac::<f64>::new(2, &small_cfg(), &mut rng).unwrap();
        let b = batch(&mut rng, 4, false);
        let y: Vec<f64> = (0..4)
            .map(|k| sac.critics[0].forward(&b.state_actions[4 * k..4 * k + 4]).unwrap()[0])
            .collect();
        // Make critic 1 identical so both sit at their target.
        sac.critics[1] = sac.critics[0].clone();
        let before = sac.critics.clone();
        let losses = sac.update_critics(&b, &y).unwrap();
        assert!(losses[0] < 1e-24 && losses[1] < 1e-24);
        for i in 0..2 {
            for (a, c) in sac.critics[i].as_slice().iter().zip(before[i].as_slice()) {
                assert!((a - c).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn actor_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cfg = AgentConfig {
            hidden: vec![4, 4],
            ..small_cfg()
        };
        let sac = Sac::<f64>::new(2, &cfg, &mut rng).unwrap();
        let b = batch(&mut rng, 5, false);
        let noise = sac.actor.draw_noise(5, &mut rng);
        let (_, grads, d_ls) = sac.actor_objective(&b, noise.clone()).unwrap();
        let h = 1e-6;
        let f = |s: &Sac<f64>| s.actor_objective(&b, noise.clone()).unwrap().0;
        for j in 0..sac.actor.mean.num_params() {
            let mut p = sac.clone();
            let mut m = sac.clone();
            p.actor.mean.as_mut_slice()[j] += h;
            m.actor.mean.as_mut_slice()[j] -= h;
            let fd = (f(&p) - f(&m)) / (2.0 * h);
            let g = grads.as_slice()[j];
            assert!((g - fd).abs() <= 1e-3 * g.abs().max(fd.abs()).max(1e-5), "param {j}: {g} vs {fd}");
        }
        for i in 0..2 {
            let mut p = sac.clone();
            let mut m = sac.clone();
            p.actor.log_std[i] += h;
            m.actor.log_std[i] -= h;
            let fd = (f(&p) - f(&m)) / (2.0 * h);
            assert!((d_ls[i] - fd).abs() <= 1e-3 * fd.abs().max(1e-5));
        }
    }

    #[test]
    fn constant_critics_and_zero_alpha_leave_actor() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut cfg = small_cfg();
        cfg.alpha_mode = AlphaMode::Fixed;
        let mut sac = Sac::<f64>::new(2, &cfg, &mut rng).unwrap();
        sac.log_alpha = f64::NEG_INFINITY;
        for c in &mut sac.critics {
            c.fill_zero();
            c.bias_mut(2)[0] = 3.0;
        }
        let before = sac.actor.clone();
        let b = batch(&mut rng, 4, false);
        sac.update_actor(&b, &mut rng).unwrap();
        assert_eq!(sac.actor, before);
    }

    #[test]
    fn alpha_stationary_and_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut sac = Sac::<f64>::new(2, &small_cfg(), &mut rng).unwrap();
        let h = sac.target_entropy();
        let (_, g) = sac.alpha_loss_and_grad(&[-h, -h, -h]);
        assert_eq!(g, 0.0);
        let a0 = sac.alpha();
        sac.update_alpha_from(&[-h, -h]);
        assert_eq!(sac.alpha(), a0);

        // log π + H̄ > 0: the policy is too narrow, α must grow.
        let a0 = sac.alpha();
        sac.update_alpha_from(&[5.0, 6.0]);
        assert!(sac.alpha() > a0);
        // log π + H̄ < 0: too broad, α must shrink.
        let a1 = sac.alpha();
        sac.update_alpha_from(&[-9.0, -8.0]);
        assert!(sac.alpha() < a1);
    }

    #[test]
    fn fixed_alpha_never_moves() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut cfg = small_cfg();
        cfg.alpha_mode = AlphaMode::Fixed;
        cfg.alpha_init = 0.1;
        let mut sac = Sac::<f64>::new(2, &cfg, &mut rng).unwrap();
        let b = batch(&mut rng, 4, false);
        for _ in 0..1000 {
            assert!(sac.update_alpha(&b, &mut rng).is_none());
        }
        assert!((sac.alpha() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn critic_loss_decreases_on_fixed_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut cfg = small_cfg();
        cfg.critic_lr = 1e-2;
        cfg.hidden = vec![32, 32];
        let mut sac = Sac::<f64>::new(2, &cfg, &mut rng).unwrap();
        let b = batch(&mut rng, 16, false);
        let y: Vec<f64> = b.rewards.clone();
        let first = sac.update_critics(&b, &y).unwrap();
        let mut last = first;
        for _ in 0..100 {
            last = sac.update_critics(&b, &y).unwrap();
        }
        assert!(last[0] < first[0] && last[1] < first[1], "{first:?} -> {last:?}");
    }

    #[test]
    fn actor_objective_decreases_with_frozen_critics() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut cfg = small_cfg();
        cfg.actor_lr = 1e-3;
        cfg.hidden = vec![32, 32];
        let mut sac = Sac::<f64>::new(2, &cfg, &mut rng).unwrap();
        let b = batch(&mut rng, 32, false);
        let noise = sac.actor.draw_noise(32, &mut rng);
        let first = sac.actor_objective(&b, noise.clone()).unwrap().0;
        for _ in 0..200 {
            sac.update_actor_with_noise(&b, noise.clone()).unwrap();
        }
        let last = sac.actor_objective(&b, noise).unwrap().0;
        assert!(last < first, "{first} -> {last}");
    }

    #[test]
    fn delayed_updates_counted() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut cfg = small_cfg();
        cfg.policy_delay = 3;
        let mut sac = Sac::<f64>::new(2, &cfg, &mut rng).unwrap();
        let mut buf = ReplayBuffer::new(64);
        let b = batch(&mut rng, 1, false);
        for k in 0..10 {
            buf.push(Transition {
                state: vec![0.1 * k as f64, 0.0],
                action: vec![0.0, 0.5],
                reward: b.rewards[0],
                next_state: vec![0.0, 0.1],
                terminal: false,
            });
        }
        for _ in 0..10 {
            sac.update(&buf, &mut rng).unwrap();
        }
        assert_eq!(sac.counters.critic_updates, 10);
        assert_eq!(sac.counters.actor_updates, 3);
        assert_eq!(sac.counters.target_updates, 3);
        assert_eq!(sac.counters.alpha_updates, 3);
    }
}
