use serde::{Deserialize, Serialize};

use super::{MlpGrads, MlpParams, Scalar};
use crate::error::{Error, Result};

/// Adam moments for a flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub timestep: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            timestep: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn for_params<T: Scalar>(p: &MlpParams<T>) -> Self {
        Self::new(p.num_params())
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn step<T: Scalar>(&mut self, params: &mut [T], grads: &[T], lr: f64) {
        assert_eq!(params.len(), self.m.len(), "adam state shape");
        assert_eq!(grads.len(), self.m.len(), "gradient shape");
        self.timestep += 1;
        let t = self.timestep as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        // lr·(m/c1)/(√(v/c2) + ε) = step·m/(√v + ε√c2)
        let step = lr * c2.sqrt() / c1;
        let eps = self.eps * c2.sqrt();
        let (b1, b2) = (self.beta1, self.beta2);
        let n = params.len();
        let (m, v) = (&mut self.m[..n], &mut self.v[..n]);
        for i in 0..n {
            let g = grads[i].f64();
            m[i] = b1 * m[i] + (1.0 - b1) * g;
            v[i] = b2 * v[i] + (1.0 - b2) * g * g;
            params[i] = T::of(params[i].f64() - step * m[i] / (v[i].sqrt() + eps));
        }
    }
}

fn check_finite<T: Scalar>(name: &str, values: &[T]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite {
            tensor: name.to_string(),
        })
    }
}

/// Adam step on a whole network. Fails without touching anything if any
/// gradient tensor holds a non-finite value.
pub fn adam_step<T: Scalar>(
    params: &mut MlpParams<T>,
    grads: &MlpGrads<T>,
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    if !params.same_shape(grads) || state.m.len() != params.num_params() {
        return Err(Error::ShapeMismatch(format!(
            "adam: params {:?}, grads {:?}, state of {} entries",
            params.layer_dims(),
            grads.layer_dims(),
            state.m.len()
        )));
    }
    for (name, t) in grads.tensors() {
        check_finite(&name, t)?;
    }
    state.step(params.as_mut_slice(), grads.as_slice(), lr);
    Ok(())
}

/// Scales all parts jointly so that their global L2 norm is at most
/// `max_norm`. Returns the norm before clipping.
pub fn clip_global_norm<T: Scalar>(parts: &mut [&mut [T]], max_norm: f64) -> f64 {
    let norm = parts
        .iter()
        .flat_map(|p| p.iter())
        .map(|v| v.f64() * v.f64())
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let scale = T::of(max_norm / norm);
        for p in parts.iter_mut() {
            for v in p.iter_mut() {
                *v *= scale;
            }
        }
    }
    norm
}

pub fn clip_gradient_norm<T: Scalar>(grads: &mut MlpGrads<T>, max_norm: f64) -> f64 {
    clip_global_norm(&mut [grads.as_mut_slice()], max_norm)
}

/// `target ← tau·online + (1 − tau)·target`, entry by entry.
pub fn polyak_update<T: Scalar>(target: &mut MlpParams<T>, online: &MlpParams<T>, tau: f64) -> Result<()> {
    if !target.same_shape(online) {
        return Err(Error::ShapeMismatch(format!(
            "polyak: target {:?} vs online {:?}",
            target.layer_dims(),
            online.layer_dims()
        )));
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidConfig(format!("tau must lie in [0, 1], got {tau}")));
    }
    let tau = T::of(tau);
    let keep = T::one() - tau;
    for (t, o) in target.as_mut_slice().iter_mut().zip(online.as_slice()) {
        *t = tau * *o + keep * *t;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn net(seed: u64) -> MlpParams<f64> {
        MlpParams::init_uniform(&[2, 4, 3], &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = net(1);
        let before = p.clone();
        let g = MlpParams::zeros(p.layer_dims()).unwrap();
        let mut s = AdamState::for_params(&p);
        adam_step(&mut p, &g, &mut s, 1e-3).unwrap();
        assert_eq!(p, before);
        assert_eq!(s.timestep, 1);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut p = net(2);
        let before = p.clone();
        let mut g = net(3);
        g.as_mut_slice()[0] = 0.0;
        let mut s = AdamState::for_params(&p);
        let lr = 1e-4;
        adam_step(&mut p, &g, &mut s, lr).unwrap();
        for ((a, b), gi) in p.as_slice().iter().zip(before.as_slice()).zip(g.as_slice()) {
            let want = if *gi == 0.0 { 0.0 } else { -lr * gi.signum() };
            assert!((a - b - want).abs() < 1e-6);
        }
    }

    #[test]
    fn matches_scalar_trace() {
        // Hand-rolled scalar Adam: p0 = 1, g = 0.5 for three steps, lr = 0.1.
        let (b1, b2, eps, lr, g) = (0.9f64, 0.999f64, 1e-8, 0.1, 0.5);
        let (mut m, mut v, mut p) = (0.0, 0.0, 1.0);
        for t in 1..=3 {
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t));
            let vh = v / (1.0 - b2.powi(t));
            p -= lr * mh / (vh.sqrt() + eps);
        }
        let mut params = [1.0f64];
        let mut s = AdamState::new(1);
        for _ in 0..3 {
            s.step(&mut params, &[g], lr);
        }
        assert!((params[0] - p).abs() < 1e-15, "{} vs {p}", params[0]);
    }

    #[test]
    fn non_finite_gradient_names_tensor() {
        let mut p = net(4);
        let mut g = MlpParams::zeros(p.layer_dims()).unwrap();
        g.bias_mut(1)[2] = f64::NAN;
        let mut s = AdamState::for_params(&p);
        match adam_step(&mut p, &g, &mut s, 1e-3) {
            Err(Error::NonFinite { tensor }) => assert_eq!(tensor, "layer 1 bias"),
            other => panic!("{other:?}"),
        }
        assert_eq!(s.timestep, 0);
    }

    #[test]
    fn adam_is_deterministic() {
        let g = net(5);
        let run = || {
            let mut p = net(6);
            let mut s = AdamState::for_params(&p);
            for _ in 0..5 {
                adam_step(&mut p, &g, &mut s, 1e-3).unwrap();
            }
            (p, s)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn clipping() {
        let mut g = net(7);
        let before = g.clone();
        let n = clip_gradient_norm(&mut g, 1e6);
        assert_eq!(g, before);
        assert!(n > 0.0);

        let n = clip_gradient_norm(&mut g, 0.1);
        let after = g.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((after - 0.1).abs() < 1e-12);
        let dot: f64 = g.as_slice().iter().zip(before.as_slice()).map(|(a, b)| a * b).sum();
        assert!((dot / (after * n) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn polyak_identities() {
        let online = net(8);
        let mut t = net(9);
        let before = t.clone();
        polyak_update(&mut t, &online, 0.0).unwrap();
        assert_eq!(t, before);
        polyak_update(&mut t, &online, 1.0).unwrap();
        assert_eq!(t, online);

        let mut ones = MlpParams::<f64>::zeros(&[2, 2]).unwrap();
        ones.as_mut_slice().iter_mut().for_each(|v| *v = 1.0);
        let mut zeros = MlpParams::<f64>::zeros(&[2, 2]).unwrap();
        polyak_update(&mut zeros, &ones, 0.005).unwrap();
        assert!(zeros.as_slice().iter().all(|&v| v == 0.005));

        assert!(polyak_update(&mut zeros, &net(1), 0.5).is_err());
        assert!(polyak_update(&mut zeros, &ones, 1.5).is_err());
    }

    #[test]
    fn polyak_converges_geometrically() {
        let online = net(10);
        let mut t = net(11);
        let dist = |a: &MlpParams<f64>| {
            a.as_slice()
                .iter()
                .zip(online.as_slice())
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt()
        };
        let d0 = dist(&t);
        let tau = 0.005;
        for n in 1..=400 {
            polyak_update(&mut t, &online, tau).unwrap();
            let want = (1.0 - tau).powi(n) * d0;
            assert!((dist(&t) - want).abs() < 1e-9, "step {n}");
        }
    }
}
