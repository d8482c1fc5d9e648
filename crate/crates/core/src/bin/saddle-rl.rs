use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use saddle_rl::harness::{
    self, AblationAxis, AblationSpec, EvalOptions, MazeOptions, OracleOptions, RunConfig, TrainOptions,
};
use saddle_rl::potentials::MUELLER_BROWN;
use saddle_rl::Result;

/// Minimum energy pathways on potential surfaces with soft actor-critic.
#[derive(Parser)]
#[command(name = "saddle-rl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent; writes metrics.jsonl, checkpoint.json and manifest.json.
    Train {
        /// TOML file with [env] and [agent] tables; defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "runs/train")]
        out: PathBuf,
        /// Override agent.epochs.
        #[arg(long)]
        epochs: Option<usize>,
        /// Progress line every N episodes on stderr (0 for none).
        #[arg(long, default_value_t = 10)]
        log_every: usize,
    },
    /// Roll out a trained actor and estimate the barrier.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = harness::DEFAULT_EVAL_EPISODES)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "runs/eval")]
        out: PathBuf,
        #[arg(long, default_value_t = harness::DEFAULT_SUCCESS_RADIUS)]
        success_radius: f64,
    },
    /// Sweep one hyperparameter.
    Ablate {
        /// TOML ablation spec (axis, values, trials, seed, [base]).
        #[arg(long, conflicts_with = "axis")]
        config: Option<PathBuf>,
        /// Sweep this axis over its default values instead of reading a spec.
        #[arg(long, value_parser = parse_axis)]
        axis: Option<AblationAxis>,
        #[arg(long, default_value_t = 3)]
        trials: usize,
        /// First trial seed (with --axis).
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Override base epochs.
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long, default_value = "runs/ablate")]
        out: PathBuf,
    },
    /// Exact minima and grid minimax barrier.
    Oracle {
        #[arg(long, default_value = MUELLER_BROWN)]
        surface: String,
        #[arg(long, default_value_t = 1000)]
        resolution: usize,
        /// Take barrier endpoints from this run configuration.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Coarse-grained maze solved for the minimum energy sum.
    Maze {
        #[arg(long, default_value = MUELLER_BROWN)]
        surface: String,
        #[arg(long, default_value_t = 8)]
        resolution: usize,
        /// Cells above this energy become walls.
        #[arg(long)]
        cutoff: Option<f64>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "runs/maze")]
        out: PathBuf,
    },
}

fn parse_axis(s: &str) -> std::result::Result<AblationAxis, String> {
    match s {
        "target_smoothing" => Ok(AblationAxis::TargetSmoothing),
        "policy_delay" => Ok(AblationAxis::PolicyDelay),
        "alpha" => Ok(AblationAxis::Alpha),
        _ => Err(format!("unknown axis `{s}` (known: target_smoothing, policy_delay, alpha)")),
    }
}

fn print<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train {
            config,
            seed,
            out,
            epochs,
            log_every,
        } => print(&harness::cmd_train(&TrainOptions {
            config,
            seed,
            out,
            epochs,
            log_every,
        })?),
        Command::Eval {
            checkpoint,
            episodes,
            seed,
            out,
            success_radius,
        } => {
            let report = harness::cmd_eval(&EvalOptions {
                checkpoint,
                episodes,
                seed,
                out,
                success_radius,
            })?;
            print(&serde_json::json!({
                "summary": report.summary,
                "all": report.all,
                "episodes": report.episodes,
                "success_radius": report.success_radius,
            }))
        }
        Command::Ablate {
            config,
            axis,
            trials,
            seed,
            epochs,
            out,
        } => {
            let mut spec = match (config, axis) {
                (Some(path), _) => AblationSpec::load(&path)?,
                (None, Some(axis)) => AblationSpec {
                    trials,
                    seed,
                    base: RunConfig::default(),
                    ..AblationSpec::new(axis)
                },
                (None, None) => {
                    return Err(saddle_rl::Error::InvalidConfig(
                        "ablate needs --config <spec.toml> or --axis <name>".into(),
                    ))
                }
            };
            if let Some(e) = epochs {
                spec.base.agent.epochs = e;
            }
            print(&harness::cmd_ablate(&spec, &out)?.cells)
        }
        Command::Oracle {
            surface,
            resolution,
            config,
            out,
        } => print(&harness::cmd_oracle(&OracleOptions {
            surface,
            resolution,
            config,
            out,
        })?),
        Command::Maze {
            surface,
            resolution,
            cutoff,
            config,
            out,
        } => {
            let r = harness::cmd_maze(&MazeOptions {
                surface,
                n: resolution,
                cutoff,
                config,
                out,
            })?;
            print(&serde_json::json!({
                "n": r.n,
                "start_cell": r.start_cell,
                "goal_cell": r.goal_cell,
                "path": r.path,
            }))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
