//! Uniform cell grids over a 2-D bounding box.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::potentials::{Interval, PotentialSurface};

/// Row index `i` runs along the first coordinate, column `j` along the second.
pub type Cell = (usize, usize);

/// `n × n` cells tiling a 2-D box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellGrid {
    pub n: usize,
    pub bounds: [Interval; 2],
}

impl CellGrid {
    pub fn over(surface: &PotentialSurface, n: usize) -> Result<Self> {
        if surface.dim() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                got: surface.dim(),
            });
        }
        if n < 2 {
            return Err(Error::InvalidConfig(format!(
                "grid resolution must be at least 2, got {n}"
            )));
        }
        let b = surface.bounds();
        Ok(CellGrid {
            n,
            bounds: [b[0], b[1]],
        })
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn index(&self, (i, j): Cell) -> usize {
        i * self.n + j
    }

    pub fn cell(&self, idx: usize) -> Cell {
        (idx / self.n, idx % self.n)
    }

    pub fn spacing(&self) -> [f64; 2] {
        [
            self.bounds[0].width() / self.n as f64,
            self.bounds[1].width() / self.n as f64,
        ]
    }

    pub fn center(&self, (i, j): Cell) -> [f64; 2] {
        let h = self.spacing();
        [
            self.bounds[0].lo + (i as f64 + 0.5) * h[0],
            self.bounds[1].lo + (j as f64 + 0.5) * h[1],
        ]
    }

    /// Cell containing `p`; points on the upper boundary go to the last cell.
    pub fn locate(&self, p: &[f64]) -> Result<Cell> {
        if p.len() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                got: p.len(),
            });
        }
        if !(self.bounds[0].contains(p[0]) && self.bounds[1].contains(p[1])) {
            return Err(Error::OutOfBounds { point: p.to_vec() });
        }
        let h = self.spacing();
        let i = (((p[0] - self.bounds[0].lo) / h[0]) as usize).min(self.n - 1);
        let j = (((p[1] - self.bounds[1].lo) / h[1]) as usize).min(self.n - 1);
        Ok((i, j))
    }

    /// Potential at every cell center, row-major.
    pub fn sample(&self, surface: &PotentialSurface) -> Vec<f64> {
        let mut values = vec![0.0; self.len()];
        let n = self.n;
        par::fill_chunks(&mut values, n, |row, off| {
            let i = off / n;
            for (j, v) in row.iter_mut().enumerate() {
                *v = surface.energy_unchecked(&self.center((i, j)));
            }
        });
        values
    }

    /// 4- or 8-connected neighbours of `c`.
    pub fn neighbours(&self, (i, j): Cell, diagonal: bool) -> impl Iterator<Item = Cell> + '_ {
        const STEPS: [(isize, isize); 8] = [
            (-1, 0),
            (1, 0),
            (0, -1),
            (0, 1),
            (-1, -1),
            (-1, 1),
            (1, -1),
            (1, 1),
        ];
        let take = if diagonal { 8 } else { 4 };
        let n = self.n as isize;
        STEPS[..take].iter().filter_map(move |&(di, dj)| {
            let (a, b) = (i as isize + di, j as isize + dj);
            (a >= 0 && a < n && b >= 0 && b < n).then_some((a as usize, b as usize))
        })
    }
}
