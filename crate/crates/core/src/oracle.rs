//! Ground truth that does not involve any learning.
//!
//! * [`find_minima`]: gradient descent with step halving from a set of seeds.
//! * [`grid_minimax_barrier`]: the lowest achievable maximum energy over
//!   8-connected cell paths between two points, computed exactly on a grid
//!   with a bottleneck variant of Dijkstra's algorithm.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Cell, CellGrid};
use crate::potentials::PotentialSurface;

pub const GRADIENT_TOLERANCE: f64 = 1e-6;
pub const MERGE_RADIUS: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Minimum {
    pub location: Vec<f64>,
    pub energy: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierResult {
    pub saddle_energy: f64,
    pub saddle_cell: Cell,
    /// Center of `saddle_cell`.
    pub saddle_point: [f64; 2],
    pub resolution: usize,
    /// Cells of one optimal path, start to goal.
    pub path: Vec<Cell>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Descends from `seed` until the gradient norm drops to [`GRADIENT_TOLERANCE`].
///
/// A stationary point with a lower point among its axis and diagonal
/// neighbours at distance [`PROBE`] is a saddle or maximum; descent restarts
/// from that neighbour.
pub fn descend(surface: &PotentialSurface, seed: &[f64], step: f64, max_iters: usize) -> Minimum {
    let mut m = descend_to_stationary(surface, seed, step, max_iters);
    for _ in 0..8 {
        if !m.converged {
            break;
        }
        match lower_neighbour(surface, &m.location, m.energy) {
            Some(p) => m = descend_to_stationary(surface, &p, step, max_iters),
            None => break,
        }
    }
    m
}

const PROBE: f64 = 1e-3;

fn lower_neighbour(surface: &PotentialSurface, x: &[f64], energy: f64) -> Option<Vec<f64>> {
    let d = x.len();
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for i in 0..d {
        for s in [-1.0, 1.0] {
            let mut v = vec![0.0; d];
            v[i] = s;
            dirs.push(v);
        }
        for j in i + 1..d {
            for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                let mut v = vec![0.0; d];
                v[i] = si * std::f64::consts::FRAC_1_SQRT_2;
                v[j] = sj * std::f64::consts::FRAC_1_SQRT_2;
                dirs.push(v);
            }
        }
    }
    dirs.into_iter()
        .map(|v| {
            let mut p: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + PROBE * b).collect();
            surface.clip_in_place(&mut p);
            let e = surface.energy_unchecked(&p);
            (e, p)
        })
        .filter(|(e, _)| *e < energy - 1e-12 * energy.abs().max(1.0))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, p)| p)
}

fn descend_to_stationary(surface: &PotentialSurface, seed: &[f64], step: f64, max_iters: usize) -> Minimum {
    let mut x = seed.to_vec();
    let mut energy = surface.energy_unchecked(&x);
    let mut grad = surface.gradient(&x).expect("dimension checked by caller");
    let mut trial = vec![0.0; x.len()];
    let mut t = step;

    for _ in 0..max_iters {
        let gnorm = norm(&grad);
        if gnorm <= GRADIENT_TOLERANCE {
            return Minimum {
                location: x,
                energy,
                converged: true,
            };
        }
        let mut accepted = false;
        while t > step * 1e-30 {
            for ((tr, xi), gi) in trial.iter_mut().zip(&x).zip(&grad) {
                *tr = xi - t * gi;
            }
            let e = surface.energy_unchecked(&trial);
            let g = surface.gradient(&trial).expect("dimension checked by caller");
            // Close to a minimum the energy decrease falls below one ulp of
            // |E|; there a shrinking gradient is the only usable signal.
            let flat = (e - energy).abs() <= 1e-13 * energy.abs().max(1.0);
            if e < energy || (flat && norm(&g) < gnorm) {
                x.copy_from_slice(&trial);
                energy = e;
                grad = g;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        t = (t * 2.0).min(step);
    }

    let converged = norm(&grad) <= GRADIENT_TOLERANCE;
    Minimum {
        location: x,
        energy,
        converged,
    }
}

/// Gradient descent from every seed, merging minima closer than
/// [`MERGE_RADIUS`]. Non-converged runs are reported with `converged = false`.
pub fn find_minima(
    surface: &PotentialSurface,
    seeds: &[Vec<f64>],
    step: f64,
    max_iters: usize,
) -> Result<Vec<Minimum>> {
    if !(step > 0.0) {
        return Err(Error::InvalidConfig(format!("descent step must be positive, got {step}")));
    }
    for s in seeds {
        if s.len() != surface.dim() {
            return Err(Error::DimensionMismatch {
                expected: surface.dim(),
                got: s.len(),
            });
        }
        if !surface.contains(s) {
            return Err(Error::OutOfBounds { point: s.clone() });
        }
    }
    let runs = crate::par::map(seeds.to_vec(), |s| descend(surface, &s, step, max_iters));

    let mut merged: Vec<Minimum> = Vec::new();
    for m in runs {
        let dup = merged.iter_mut().find(|k| {
            k.location
                .iter()
                .zip(&m.location)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
                < MERGE_RADIUS
        });
        match dup {
            Some(k) if !k.converged && m.converged => *k = m,
            Some(_) => {}
            None => merged.push(m),
        }
    }
    Ok(merged)
}

/// `k × k` seeds at the cell centers of a uniform lattice over the bounds.
pub fn lattice_seeds(surface: &PotentialSurface, k: usize) -> Vec<Vec<f64>> {
    let b = surface.bounds();
    let mut seeds = Vec::new();
    let mut idx = vec![0usize; b.len()];
    loop {
        seeds.push(
            idx.iter()
                .zip(b)
                .map(|(&i, iv)| iv.lo + (i as f64 + 0.5) * iv.width() / k as f64)
                .collect(),
        );
        let mut d = 0;
        loop {
            if d == idx.len() {
                return seeds;
            }
            idx[d] += 1;
            if idx[d] < k {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Key(pub(crate) f64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Minimax path over a row-major `n × n` value grid.
///
/// Returns the bottleneck value (the smallest achievable maximum over all
/// paths, endpoints included) and one path attaining it.
pub fn bottleneck_path(
    values: &[f64],
    grid: &CellGrid,
    start: Cell,
    goal: Cell,
    diagonal: bool,
) -> (f64, Vec<Cell>) {
    let mut best = vec![f64::INFINITY; grid.len()];
    let mut prev = vec![usize::MAX; grid.len()];
    let mut done = vec![false; grid.len()];
    let s = grid.index(start);
    let g = grid.index(goal);
    best[s] = values[s];
    let mut heap = BinaryHeap::new();
    heap.push(Reverse((Key(best[s]), s)));

    while let Some(Reverse((Key(level), u))) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        if u == g {
            break;
        }
        for nb in grid.neighbours(grid.cell(u), diagonal) {
            let v = grid.index(nb);
            if done[v] {
                continue;
            }
            let cand = level.max(values[v]);
            if cand < best[v] {
                best[v] = cand;
                prev[v] = u;
                heap.push(Reverse((Key(cand), v)));
            }
        }
    }

    let mut path = vec![goal];
    let mut u = g;
    while u != s {
        u = prev[u];
        path.push(grid.cell(u));
    }
    path.reverse();
    (best[g], path)
}

pub fn grid_minimax_barrier(
    surface: &PotentialSurface,
    start: &[f64],
    goal: &[f64],
    resolution: usize,
) -> Result<BarrierResult> {
    let grid = CellGrid::over(surface, resolution)?;
    let s = grid.locate(start)?;
    let g = grid.locate(goal)?;
    let values = grid.sample(surface);
    let (saddle_energy, path) = bottleneck_path(&values, &grid, s, g, true);
    let saddle_cell = path
        .iter()
        .copied()
        .find(|&c| values[grid.index(c)] == saddle_energy)
        .expect("bottleneck value is attained on the path");
    Ok(BarrierResult {
        saddle_energy,
        saddle_cell,
        saddle_point: grid.center(saddle_cell),
        resolution,
        path,
    })
}
