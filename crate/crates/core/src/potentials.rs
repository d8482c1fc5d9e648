//! Analytic potential energy surfaces.
//!
//! A [`PotentialSurface`] couples an energy function with its analytic
//! gradient and a rectangular bounding box. Surfaces are immutable and cheap
//! to clone, so they can be shared freely between trials running on
//! different threads.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Energy function with an analytic gradient.
pub trait Potential: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    /// Energy at `p`. Callers guarantee `p.len() == self.dim()`.
    fn energy(&self, p: &[f64]) -> f64;

    /// Writes the gradient at `p` into `out`.
    fn gradient(&self, p: &[f64], out: &mut [f64]);
}

/// Closed interval `[lo, hi]` along one coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }
}

/// Constants of the four-Gaussian Müller-Brown surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuellerBrownParams {
    pub w: [f64; 4],
    pub a: [f64; 4],
    pub b: [f64; 4],
    pub c: [f64; 4],
    pub x0: [f64; 4],
    pub y0: [f64; 4],
}

impl Default for MuellerBrownParams {
    fn default() -> Self {
        MuellerBrownParams {
            w: [-200.0, -100.0, -170.0, 15.0],
            a: [-1.0, -1.0, -6.5, 0.7],
            b: [0.0, 0.0, 11.0, 0.6],
            c: [-10.0, -10.0, -6.5, 0.7],
            x0: [1.0, 0.0, -0.5, -1.0],
            y0: [0.0, 0.5, 1.5, 1.0],
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct MuellerBrown {
    pub params: MuellerBrownParams,
}

impl MuellerBrown {
    /// Exponent, energy and gradient of Gaussian term `i` at `(x, y)`.
    pub fn term(&self, i: usize, x: f64, y: f64) -> (f64, f64, [f64; 2]) {
        let k = &self.params;
        let dx = x - k.x0[i];
        let dy = y - k.y0[i];
        let q = k.a[i] * dx * dx + k.b[i] * dx * dy + k.c[i] * dy * dy;
        let e = k.w[i] * q.exp();
        (
            q,
            e,
            [
                e * (2.0 * k.a[i] * dx + k.b[i] * dy),
                e * (k.b[i] * dx + 2.0 * k.c[i] * dy),
            ],
        )
    }
}

impl Potential for MuellerBrown {
    fn dim(&self) -> usize {
        2
    }

    fn energy(&self, p: &[f64]) -> f64 {
        (0..4).map(|i| self.term(i, p[0], p[1]).1).sum()
    }

    fn gradient(&self, p: &[f64], out: &mut [f64]) {
        let (mut gx, mut gy) = (0.0, 0.0);
        for i in 0..4 {
            let g = self.term(i, p[0], p[1]).2;
            gx += g[0];
            gy += g[1];
        }
        out[0] = gx;
        out[1] = gy;
    }
}

/// `V(x, y) = (x² − 1)² + y²`: minima at `(±1, 0)`, saddle at the origin.
#[derive(Debug, Clone, Copy, Default)]
pub struct DoubleWell;

impl Potential for DoubleWell {
    fn dim(&self) -> usize {
        2
    }

    fn energy(&self, p: &[f64]) -> f64 {
        let u = p[0] * p[0] - 1.0;
        u * u + p[1] * p[1]
    }

    fn gradient(&self, p: &[f64], out: &mut [f64]) {
        out[0] = 4.0 * p[0] * (p[0] * p[0] - 1.0);
        out[1] = 2.0 * p[1];
    }
}

/// Isotropic bowl `k · |p − center|²` in any dimension.
#[derive(Debug, Clone)]
pub struct QuadraticBowl {
    pub center: Vec<f64>,
    pub stiffness: f64,
}

impl Potential for QuadraticBowl {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn energy(&self, p: &[f64]) -> f64 {
        self.stiffness
            * p.iter()
                .zip(&self.center)
                .map(|(x, c)| (x - c) * (x - c))
                .sum::<f64>()
    }

    fn gradient(&self, p: &[f64], out: &mut [f64]) {
        for ((o, x), c) in out.iter_mut().zip(p).zip(&self.center) {
            *o = 2.0 * self.stiffness * (x - c);
        }
    }
}

/// Another potential shifted by a constant energy offset.
#[derive(Debug, Clone)]
pub struct Offset {
    pub inner: Arc<dyn Potential>,
    pub shift: f64,
}

impl Potential for Offset {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn energy(&self, p: &[f64]) -> f64 {
        self.inner.energy(p) + self.shift
    }

    fn gradient(&self, p: &[f64], out: &mut [f64]) {
        self.inner.gradient(p, out)
    }
}

/// A potential restricted to a bounding box, addressable by id.
#[derive(Clone)]
pub struct PotentialSurface {
    id: String,
    bounds: Vec<Interval>,
    potential: Arc<dyn Potential>,
}

impl fmt::Debug for PotentialSurface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PotentialSurface")
            .field("id", &self.id)
            .field("bounds", &self.bounds)
            .finish()
    }
}

pub const MUELLER_BROWN: &str = "mueller_brown";
pub const DOUBLE_WELL: &str = "double_well";

/// Ids accepted by [`surface_by_id`].
pub fn known_surfaces() -> Vec<String> {
    vec![MUELLER_BROWN.to_string(), DOUBLE_WELL.to_string()]
}

impl PotentialSurface {
    pub fn new(
        id: impl Into<String>,
        bounds: Vec<Interval>,
        potential: Arc<dyn Potential>,
    ) -> Result<Self> {
        if bounds.len() != potential.dim() {
            return Err(Error::DimensionMismatch {
                expected: potential.dim(),
                got: bounds.len(),
            });
        }
        if let Some(b) = bounds.iter().find(|b| !(b.lo < b.hi)) {
            return Err(Error::InvalidConfig(format!(
                "empty bounds interval [{}, {}]",
                b.lo, b.hi
            )));
        }
        Ok(PotentialSurface {
            id: id.into(),
            bounds,
            potential,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[Interval] {
        &self.bounds
    }

    fn check_dim(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: p.len(),
            });
        }
        Ok(())
    }

    pub fn energy(&self, p: &[f64]) -> Result<f64> {
        self.check_dim(p)?;
        Ok(self.potential.energy(p))
    }

    pub fn gradient(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(p)?;
        let mut g = vec![0.0; self.dim()];
        self.potential.gradient(p, &mut g);
        Ok(g)
    }

    /// Energy without the dimension check, for hot loops that already
    /// validated their inputs.
    #[inline]
    pub fn energy_unchecked(&self, p: &[f64]) -> f64 {
        self.potential.energy(p)
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim() && self.bounds.iter().zip(p).all(|(b, &v)| b.contains(v))
    }

    /// Component-wise projection onto the bounding box.
    pub fn clip_in_place(&self, p: &mut [f64]) {
        for (v, b) in p.iter_mut().zip(&self.bounds) {
            *v = b.clamp(*v);
        }
    }

    /// Same surface with every energy shifted by `shift`.
    pub fn with_offset(&self, shift: f64) -> Self {
        PotentialSurface {
            id: format!("{}+{}", self.id, shift),
            bounds: self.bounds.clone(),
            potential: Arc::new(Offset {
                inner: Arc::clone(&self.potential),
                shift,
            }),
        }
    }
}

pub fn eval_potential(surface: &PotentialSurface, p: &[f64]) -> Result<f64> {
    surface.energy(p)
}

pub fn eval_gradient(surface: &PotentialSurface, p: &[f64]) -> Result<Vec<f64>> {
    surface.gradient(p)
}

pub fn make_mueller_brown() -> PotentialSurface {
    PotentialSurface {
        id: MUELLER_BROWN.to_string(),
        bounds: vec![Interval::new(-1.70, 1.30), Interval::new(-0.40, 2.10)],
        potential: Arc::new(MuellerBrown::default()),
    }
}

pub fn make_double_well() -> PotentialSurface {
    PotentialSurface {
        id: DOUBLE_WELL.to_string(),
        bounds: vec![Interval::new(-2.0, 2.0), Interval::new(-2.0, 2.0)],
        potential: Arc::new(DoubleWell),
    }
}

/// Quadratic bowl on `[-1, 1]^d` with its minimum at `center`.
pub fn make_quadratic_bowl(center: Vec<f64>, stiffness: f64) -> PotentialSurface {
    let d = center.len();
    PotentialSurface {
        id: "quadratic_bowl".to_string(),
        bounds: vec![Interval::new(-1.0, 1.0); d],
        potential: Arc::new(QuadraticBowl { center, stiffness }),
    }
}

pub fn surface_by_id(id: &str) -> Result<PotentialSurface> {
    match id {
        MUELLER_BROWN => Ok(make_mueller_brown()),
        DOUBLE_WELL => Ok(make_double_well()),
        _ => Err(Error::UnknownSurface {
            id: id.to_string(),
            known: known_surfaces(),
        }),
    }
}
