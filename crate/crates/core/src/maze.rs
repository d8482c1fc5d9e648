//! Coarse-grained grid maze over a potential surface, solved exactly.
//!
//! The path cost is the sum of `E(cell) − E_min` over the cells entered
//! (the start cell is free), found with Dijkstra on a 4-connected grid.
//! The shift by the grid minimum keeps every step cost non-negative.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Cell, CellGrid};
use crate::oracle::Key;
use crate::potentials::PotentialSurface;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMaze {
    pub grid: CellGrid,
    /// Potential at each cell center, row-major.
    pub cell_energy: Vec<f64>,
    pub wall: Vec<bool>,
    pub wall_cutoff: Option<f64>,
    pub start_cell: Cell,
    pub goal_cell: Cell,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPath {
    pub cells: Vec<Cell>,
    /// Sum of shifted energies of every cell after the first.
    pub cost: f64,
    pub max_energy: f64,
}

pub fn coarse_grain(
    surface: &PotentialSurface,
    n: usize,
    wall_cutoff: Option<f64>,
    start: &[f64],
    goal: &[f64],
) -> Result<GridMaze> {
    let grid = CellGrid::over(surface, n)?;
    let cell_energy = grid.sample(surface);
    let start_cell = grid.locate(start)?;
    let goal_cell = grid.locate(goal)?;
    GridMaze::from_energies(grid, cell_energy, wall_cutoff, start_cell, goal_cell)
}

impl GridMaze {
    pub fn from_energies(
        grid: CellGrid,
        cell_energy: Vec<f64>,
        wall_cutoff: Option<f64>,
        start_cell: Cell,
        goal_cell: Cell,
    ) -> Result<Self> {
        if cell_energy.len() != grid.len() {
            return Err(Error::Maze(format!(
                "{} energies for a {n}×{n} grid",
                cell_energy.len(),
                n = grid.n
            )));
        }
        if let Some(bad) = cell_energy.iter().position(|e| !e.is_finite()) {
            return Err(Error::Maze(format!("non-finite energy at cell {:?}", grid.cell(bad))));
        }
        let wall: Vec<bool> = match wall_cutoff {
            Some(c) => cell_energy.iter().map(|&e| e > c).collect(),
            None => vec![false; cell_energy.len()],
        };
        for (name, c) in [("start", start_cell), ("goal", goal_cell)] {
            if c.0 >= grid.n || c.1 >= grid.n {
                return Err(Error::Maze(format!("{name} cell {c:?} outside the grid")));
            }
            if wall[grid.index(c)] {
                return Err(Error::Maze(format!(
                    "{name} cell {c:?} is a wall (energy {} above cutoff)",
                    cell_energy[grid.index(c)]
                )));
            }
        }
        Ok(GridMaze {
            grid,
            cell_energy,
            wall,
            wall_cutoff,
            start_cell,
            goal_cell,
        })
    }

    pub fn n(&self) -> usize {
        self.grid.n
    }

    pub fn energy(&self, c: Cell) -> f64 {
        self.cell_energy[self.grid.index(c)]
    }

    pub fn is_wall(&self, c: Cell) -> bool {
        self.wall[self.grid.index(c)]
    }

    pub fn wall_count(&self) -> usize {
        self.wall.iter().filter(|&&w| w).count()
    }

    pub fn min_energy(&self) -> f64 {
        self.cell_energy.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn solve_min_sum(maze: &GridMaze) -> Result<GridPath> {
    let grid = &maze.grid;
    let floor = maze.min_energy();
    let mut dist = vec![f64::INFINITY; grid.len()];
    let mut prev = vec![usize::MAX; grid.len()];
    let s = grid.index(maze.start_cell);
    let g = grid.index(maze.goal_cell);
    dist[s] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(Reverse((Key(0.0), s)));
    while let Some(Reverse((Key(d), u))) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        if u == g {
            break;
        }
        for nb in grid.neighbours(grid.cell(u), false) {
            let v = grid.index(nb);
            if maze.wall[v] {
                continue;
            }
            let cand = d + (maze.cell_energy[v] - floor);
            if cand < dist[v] {
                dist[v] = cand;
                prev[v] = u;
                heap.push(Reverse((Key(cand), v)));
            }
        }
    }
    if !dist[g].is_finite() {
        return Err(Error::NoPath);
    }
    let mut cells = vec![maze.goal_cell];
    let mut u = g;
    while u != s {
        u = prev[u];
        cells.push(grid.cell(u));
    }
    cells.reverse();
    let max_energy = cells.iter().map(|&c| maze.energy(c)).fold(f64::NEG_INFINITY, f64::max);
    Ok(GridPath {
        cells,
        cost: dist[g],
        max_energy,
    })
}

/// Cell energies along `path`.
pub fn grid_profile(maze: &GridMaze, path: &GridPath) -> Vec<f64> {
    path.cells.iter().map(|&c| maze.energy(c)).collect()
}
