//! Command implementations behind the CLI: training runs, evaluation
//! ensembles, ablation sweeps, the exact oracle and the grid maze.

pub mod ablate;
pub mod config;
pub mod output;

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::agent::{
    barrier_estimate, evaluate, train_with_progress, BarrierSummary, Checkpoint, EpisodeRecord,
    Precision, Stats, TrainMetrics, Trajectory,
};
use crate::env::{EnvConfig, Environment};
use crate::error::{Error, Result};
use crate::grid::Cell;
use crate::maze::{coarse_grain, grid_profile, solve_min_sum, GridPath};
use crate::oracle::{find_minima, grid_minimax_barrier, lattice_seeds, Minimum};
use crate::potentials::{surface_by_id, PotentialSurface, MUELLER_BROWN};

pub use ablate::{cmd_ablate, AblationAxis, AblationSpec, AblationValue, CellSummary};
pub use config::RunConfig;
use output::{
    ensure_dir, write_aligned_profiles_csv, write_json, write_profiles_csv, write_text, write_trajectory_csv,
};

pub const DEFAULT_SUCCESS_RADIUS: f64 = 0.05;
pub const DEFAULT_EVAL_EPISODES: usize = 11;

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Everything needed to repeat a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: RunConfig,
    pub surface: String,
    pub seeds: Vec<u64>,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub elapsed_seconds: f64,
    /// File names relative to the output directory.
    pub artifacts: Vec<String>,
}

impl RunManifest {
    fn new(command: &str, config: &RunConfig, seeds: Vec<u64>) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config: config.clone(),
            surface: config.env.surface.clone(),
            seeds,
            started_unix: unix_now(),
            finished_unix: 0,
            elapsed_seconds: 0.0,
            artifacts: Vec::new(),
        }
    }

    fn finish(&mut self, started: Instant) {
        self.finished_unix = unix_now();
        self.elapsed_seconds = started.elapsed().as_secs_f64();
    }
}

/// Trains in the precision named by the configuration and returns a
/// checkpoint of the result.
pub fn train_run<F: FnMut(&EpisodeRecord)>(
    config: &RunConfig,
    seed: u64,
    progress: F,
) -> Result<(Checkpoint, TrainMetrics)> {
    let surface = config.validate()?;
    let mut env = Environment::with_surface(surface, config.env.clone())?;
    let precision = config.agent.precision;
    Ok(match precision {
        Precision::F32 => {
            let (sac, m) = train_with_progress::<f32, _>(&mut env, &config.agent, seed, progress)?;
            (Checkpoint::from_agent(&sac, precision, &config.env, seed), m)
        }
        Precision::F64 => {
            let (sac, m) = train_with_progress::<f64, _>(&mut env, &config.agent, seed, progress)?;
            (Checkpoint::from_agent(&sac, precision, &config.env, seed), m)
        }
    })
}

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub config: Option<PathBuf>,
    pub seed: u64,
    pub out: PathBuf,
    pub epochs: Option<usize>,
    /// Print a progress line to stderr every this many episodes (0: never).
    pub log_every: usize,
}

pub fn cmd_train(opts: &TrainOptions) -> Result<RunManifest> {
    let mut config = RunConfig::load_or_default(opts.config.as_deref())?;
    if let Some(e) = opts.epochs {
        config.agent.epochs = e;
    }
    config.validate()?;
    ensure_dir(&opts.out)?;
    let started = Instant::now();
    let mut manifest = RunManifest::new("train", &config, vec![opts.seed]);
    let log_every = opts.log_every;
    let (checkpoint, metrics) = train_run(&config, opts.seed, |r| {
        if log_every > 0 && (r.episode + 1) % log_every == 0 {
            eprintln!(
                "episode {:>5}  steps {:>3}  return {:>12.2}  max energy {:>8.2}  alpha {:.4}",
                r.episode + 1,
                r.steps,
                r.ret,
                r.max_energy,
                r.alpha
            );
        }
    })?;
    write_text(&opts.out.join("metrics.jsonl"), &metrics.to_jsonl()?)?;
    checkpoint.save(&opts.out.join("checkpoint.json"))?;
    write_text(&opts.out.join("config.toml"), &config.to_toml())?;
    manifest.artifacts = vec![
        "metrics.jsonl".into(),
        "checkpoint.json".into(),
        "config.toml".into(),
        "manifest.json".into(),
    ];
    manifest.finish(started);
    write_json(&opts.out.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub checkpoint: PathBuf,
    pub episodes: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub success_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierReport {
    #[serde(flatten)]
    pub summary: BarrierSummary,
    pub success_radius: f64,
    pub episodes: usize,
    pub seed: u64,
    /// Statistics over every trajectory, successful or not.
    pub all: Option<Stats>,
    pub maxima: Vec<f64>,
    pub success: Vec<bool>,
    pub final_distances: Vec<f64>,
}

/// Deterministic rollouts of a checkpointed actor in its own environment.
pub fn rollouts(checkpoint: &Checkpoint, episodes: usize, seed: u64) -> Result<(Environment, Vec<Trajectory>)> {
    let env = Environment::new(checkpoint.env.clone())?;
    let ts = match checkpoint.precision {
        Precision::F32 => evaluate(&checkpoint.policy::<f32>()?, &env, episodes, seed)?,
        Precision::F64 => evaluate(&checkpoint.policy::<f64>()?, &env, episodes, seed)?,
    };
    Ok((env, ts))
}

pub fn barrier_report(env: &Environment, ts: &[Trajectory], seed: u64, success_radius: f64) -> BarrierReport {
    let est = barrier_estimate(ts, env.goal(), success_radius);
    BarrierReport {
        summary: est.summary,
        success_radius,
        episodes: ts.len(),
        seed,
        all: est.all,
        maxima: est.maxima,
        success: est.success,
        final_distances: ts.iter().map(|t| env.distance_to_goal(t.final_state())).collect(),
    }
}

pub fn cmd_eval(opts: &EvalOptions) -> Result<BarrierReport> {
    if !(opts.success_radius > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "success radius must be positive, got {}",
            opts.success_radius
        )));
    }
    let checkpoint = Checkpoint::load(&opts.checkpoint)?;
    let (env, ts) = rollouts(&checkpoint, opts.episodes, opts.seed)?;
    let tdir = opts.out.join("trajectories");
    ensure_dir(&tdir)?;
    for (k, t) in ts.iter().enumerate() {
        write_trajectory_csv(&tdir.join(format!("trajectory_{k:03}.csv")), t)?;
    }
    write_profiles_csv(&opts.out.join("profiles.csv"), &ts)?;
    write_aligned_profiles_csv(&opts.out.join("profiles_aligned.csv"), &ts)?;
    let report = barrier_report(&env, &ts, opts.seed, opts.success_radius);
    write_json(&opts.out.join("barrier.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleBarrier {
    pub start: Vec<f64>,
    pub goal: Vec<f64>,
    pub resolution: usize,
    pub saddle_energy: f64,
    pub saddle_point: [f64; 2],
    pub saddle_cell: Cell,
    pub path_cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub surface: String,
    pub bounds: Vec<[f64; 2]>,
    pub minima: Vec<Minimum>,
    pub barrier: OracleBarrier,
}

#[derive(Debug, Clone)]
pub struct OracleOptions {
    pub surface: String,
    pub resolution: usize,
    /// Endpoints for the barrier; see [`oracle_endpoints`].
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

/// Barrier endpoints: the configured start and goal when a configuration
/// is given for this surface, the default endpoints on Müller-Brown, and
/// otherwise the two deepest minima.
fn oracle_endpoints(
    surface: &PotentialSurface,
    config: Option<&RunConfig>,
    minima: &[Minimum],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if let Some(c) = config.filter(|c| c.env.surface == surface.id()) {
        return Ok((c.env.start.clone(), c.env.goal.clone()));
    }
    if surface.id() == MUELLER_BROWN {
        let d = EnvConfig::default();
        return Ok((d.start, d.goal));
    }
    let mut sorted: Vec<&Minimum> = minima.iter().collect();
    sorted.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    match sorted.as_slice() {
        [a, b, ..] => Ok((a.location.clone(), b.location.clone())),
        _ => Err(Error::InvalidConfig(format!(
            "surface `{}` has fewer than two minima; give endpoints through --config",
            surface.id()
        ))),
    }
}

pub fn cmd_oracle(opts: &OracleOptions) -> Result<OracleReport> {
    let surface = surface_by_id(&opts.surface)?;
    let config = opts.config.as_deref().map(RunConfig::load).transpose()?;
    let minima = find_minima(&surface, &lattice_seeds(&surface, 5), 1e-4, 200_000)?;
    let (start, goal) = oracle_endpoints(&surface, config.as_ref(), &minima)?;
    let b = grid_minimax_barrier(&surface, &start, &goal, opts.resolution)?;
    let report = OracleReport {
        surface: surface.id().to_string(),
        bounds: surface.bounds().iter().map(|i| [i.lo, i.hi]).collect(),
        minima,
        barrier: OracleBarrier {
            start,
            goal,
            resolution: b.resolution,
            saddle_energy: b.saddle_energy,
            saddle_point: b.saddle_point,
            saddle_cell: b.saddle_cell,
            path_cells: b.path.len(),
        },
    };
    if let Some(out) = &opts.out {
        ensure_dir(out)?;
        write_json(&out.join("oracle.json"), &report)?;
    }
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct MazeOptions {
    pub surface: String,
    pub n: usize,
    pub cutoff: Option<f64>,
    pub config: Option<PathBuf>,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MazeReport {
    pub surface: String,
    pub n: usize,
    pub bounds: Vec<[f64; 2]>,
    pub wall_cutoff: Option<f64>,
    pub start_cell: Cell,
    pub goal_cell: Cell,
    /// `cell_energy[i][j]`, `i` along the first coordinate.
    pub cell_energy: Vec<Vec<f64>>,
    pub wall: Vec<Vec<bool>>,
    pub path: Option<GridPath>,
}

/// Writes `maze.json` and, when the goal is reachable, `path.csv`.
pub fn cmd_maze(opts: &MazeOptions) -> Result<MazeReport> {
    let surface = surface_by_id(&opts.surface)?;
    let config = RunConfig::load_or_default(opts.config.as_deref())?;
    let (start, goal) = if config.env.surface == surface.id() {
        (config.env.start.clone(), config.env.goal.clone())
    } else {
        let minima = find_minima(&surface, &lattice_seeds(&surface, 5), 1e-4, 200_000)?;
        oracle_endpoints(&surface, None, &minima)?
    };
    let maze = coarse_grain(&surface, opts.n, opts.cutoff, &start, &goal)?;
    let solved = solve_min_sum(&maze);
    let n = maze.n();
    let report = MazeReport {
        surface: surface.id().to_string(),
        n,
        bounds: maze.grid.bounds.iter().map(|i| [i.lo, i.hi]).collect(),
        wall_cutoff: maze.wall_cutoff,
        start_cell: maze.start_cell,
        goal_cell: maze.goal_cell,
        cell_energy: (0..n).map(|i| (0..n).map(|j| maze.energy((i, j))).collect()).collect(),
        wall: (0..n).map(|i| (0..n).map(|j| maze.is_wall((i, j))).collect()).collect(),
        path: solved.as_ref().ok().cloned(),
    };
    ensure_dir(&opts.out)?;
    write_json(&opts.out.join("maze.json"), &report)?;
    let path = solved?;
    let csv_path = opts.out.join("path.csv");
    let mut w = output::csv_writer(&csv_path)?;
    w.write_record(["index", "i", "j", "x", "y", "energy"])?;
    for (k, (&c, e)) in path.cells.iter().zip(grid_profile(&maze, &path)).enumerate() {
        let p = maze.grid.center(c);
        w.write_record([
            k.to_string(),
            c.0.to_string(),
            c.1.to_string(),
            p[0].to_string(),
            p[1].to_string(),
            e.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;
    Ok(report)
}

/// Reads a metrics stream back.
pub fn read_metrics(path: &Path) -> Result<Vec<crate::agent::MetricRecord>> {
    config::read_text(path)?
        .lines()
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config(dir: &Path) -> PathBuf {
        let p = dir.join("run.toml");
        write_text(
            &p,
            "[env]\nmax_steps = 30\n\n[agent]\nhidden = [16, 16]\nbatch_size = 16\nepochs = 3\n",
        )
        .unwrap();
        p
    }

    #[test]
    fn train_then_eval_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(dir.path());
        let out = dir.path().join("run");
        let m = cmd_train(&TrainOptions {
            config: Some(cfg),
            seed: 2,
            out: out.clone(),
            epochs: None,
            log_every: 0,
        })
        .unwrap();
        assert_eq!(m.config.agent.epochs, 3);
        assert_eq!(m.seeds, vec![2]);
        let records = read_metrics(&out.join("metrics.jsonl")).unwrap();
        assert!(!records.is_empty());

        let eval_out = dir.path().join("eval");
        let report = cmd_eval(&EvalOptions {
            checkpoint: out.join("checkpoint.json"),
            episodes: 11,
            seed: 0,
            out: eval_out.clone(),
            success_radius: 0.05,
        })
        .unwrap();
        assert_eq!(report.episodes, 11);
        assert_eq!(std::fs::read_dir(eval_out.join("trajectories")).unwrap().count(), 11);

        // Widening the radius can only add successes.
        let ck = Checkpoint::load(&out.join("checkpoint.json")).unwrap();
        let (env, ts) = rollouts(&ck, 11, 0).unwrap();
        let mut prev = 0;
        for r in [0.01, 0.1, 0.5, 1.0, 5.0] {
            let n = barrier_report(&env, &ts, 0, r).success.iter().filter(|&&s| s).count();
            assert!(n >= prev);
            prev = n;
        }
        assert_eq!(prev, 11);
    }

    #[test]
    fn missing_config_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let r = cmd_train(&TrainOptions {
            config: Some(dir.path().join("absent.toml")),
            seed: 0,
            out: dir.path().join("x"),
            epochs: None,
            log_every: 0,
        });
        assert!(matches!(r, Err(Error::Io { .. })));
    }

    #[test]
    fn oracle_reports() {
        let r = cmd_oracle(&OracleOptions {
            surface: "double_well".into(),
            resolution: 201,
            config: None,
            out: None,
        })
        .unwrap();
        assert!((r.barrier.saddle_energy - 1.0).abs() < 1e-3);

        let r = cmd_oracle(&OracleOptions {
            surface: MUELLER_BROWN.into(),
            resolution: 2,
            config: None,
            out: None,
        })
        .unwrap();
        for m in &r.minima {
            assert!(r.barrier.saddle_energy >= m.energy);
        }

        let e = cmd_oracle(&OracleOptions {
            surface: "bogus".into(),
            resolution: 10,
            config: None,
            out: None,
        })
        .unwrap_err();
        assert!(e.to_string().contains("mueller_brown"));
    }

    #[test]
    fn maze_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let r = cmd_maze(&MazeOptions {
            surface: MUELLER_BROWN.into(),
            n: 8,
            cutoff: Some(0.0),
            config: None,
            out: dir.path().to_path_buf(),
        })
        .unwrap();
        assert_eq!(r.cell_energy.len(), 8);
        let path = r.path.unwrap();
        let text = std::fs::read_to_string(dir.path().join("path.csv")).unwrap();
        assert_eq!(text.lines().count(), path.cells.len() + 1);
    }
}
