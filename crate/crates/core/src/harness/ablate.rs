//! One-axis hyperparameter sweeps: every cell runs several independently
//! seeded trials and is summarized by its returns over the last episodes.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{parse_toml, read_text, RunConfig};
use super::output::{csv_writer, ensure_dir, write_json, write_text};
use super::{train_run, RunManifest};
use crate::agent::{AlphaMode, Stats, TrainMetrics};
use crate::error::{Error, Result};
use crate::par;

/// Episodes at the end of each trial that enter the summary.
pub const LAST_EPISODES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationAxis {
    TargetSmoothing,
    PolicyDelay,
    Alpha,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AblationValue {
    Flag(bool),
    Number(f64),
    Label(String),
}

impl fmt::Display for AblationValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AblationValue::Flag(b) => write!(f, "{}", if *b { "present" } else { "absent" }),
            AblationValue::Number(x) => write!(f, "{x}"),
            AblationValue::Label(s) => write!(f, "{s}"),
        }
    }
}

impl AblationAxis {
    pub fn name(self) -> &'static str {
        match self {
            AblationAxis::TargetSmoothing => "target_smoothing",
            AblationAxis::PolicyDelay => "policy_delay",
            AblationAxis::Alpha => "alpha",
        }
    }

    pub fn default_values(self) -> Vec<AblationValue> {
        use AblationValue::*;
        match self {
            AblationAxis::TargetSmoothing => vec![Flag(false), Flag(true)],
            AblationAxis::PolicyDelay => [0.0, 2.0, 4.0, 8.0, 16.0, 32.0].map(Number).to_vec(),
            AblationAxis::Alpha => {
                let mut v: Vec<AblationValue> = [1e-3, 1e-2, 1e-1, 2e-1, 5e-1].map(Number).to_vec();
                v.push(Label("tunable".into()));
                v
            }
        }
    }

    /// `base` with this axis set to `value`. A policy delay of 0 means an
    /// actor update after every critic update, the same as 1.
    pub fn apply(self, base: &RunConfig, value: &AblationValue) -> Result<RunConfig> {
        let mut c = base.clone();
        let bad = || {
            Err(Error::InvalidConfig(format!(
                "value `{value}` does not fit ablation axis `{}`",
                self.name()
            )))
        };
        match (self, value) {
            (AblationAxis::TargetSmoothing, AblationValue::Flag(b)) => c.agent.target_smoothing = *b,
            (AblationAxis::TargetSmoothing, AblationValue::Label(s)) if s == "present" || s == "absent" => {
                c.agent.target_smoothing = s == "present"
            }
            (AblationAxis::PolicyDelay, AblationValue::Number(k)) if *k >= 0.0 && k.fract() == 0.0 => {
                c.agent.policy_delay = (*k as usize).max(1)
            }
            (AblationAxis::Alpha, AblationValue::Number(a)) if *a > 0.0 => {
                c.agent.alpha_mode = AlphaMode::Fixed;
                c.agent.alpha_init = *a;
            }
            (AblationAxis::Alpha, AblationValue::Label(s)) if s == "tunable" => {
                c.agent.alpha_mode = AlphaMode::Tunable;
            }
            _ => return bad(),
        }
        Ok(c)
    }
}

fn default_trials() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationSpec {
    pub axis: AblationAxis,
    /// Defaults to the axis' standard value set.
    #[serde(default)]
    pub values: Option<Vec<AblationValue>>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Trial `k` of every cell uses seed `seed + k`.
    #[serde(default)]
    pub seed: u64,
    /// Configuration shared by all cells.
    #[serde(default)]
    pub base: RunConfig,
}

impl AblationSpec {
    pub fn new(axis: AblationAxis) -> Self {
        AblationSpec {
            axis,
            values: None,
            trials: default_trials(),
            seed: 0,
            base: RunConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        parse_toml(text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read_text(path)?)
    }

    pub fn values(&self) -> Vec<AblationValue> {
        self.values.clone().unwrap_or_else(|| self.axis.default_values())
    }

    /// Configurations of all cells, checked up front.
    pub fn cells(&self) -> Result<Vec<(AblationValue, RunConfig)>> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig("ablation needs at least one trial".into()));
        }
        self.values()
            .into_iter()
            .map(|v| {
                let c = self.axis.apply(&self.base, &v)?;
                c.validate()?;
                Ok((v, c))
            })
            .collect()
    }
}

/// One row of the summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub axis: String,
    pub value: String,
    pub trials: usize,
    pub completed: usize,
    /// Over the last episodes of all completed trials pooled.
    pub mean: Option<f64>,
    pub std: Option<f64>,
    /// Spread of the per-trial means.
    pub trial_std: Option<f64>,
    /// Mean over trials of the summed last-episode returns.
    pub mean_sum: Option<f64>,
    pub errors: Vec<String>,
}

fn summarize(axis: AblationAxis, value: &AblationValue, runs: &[Result<TrainMetrics>]) -> CellSummary {
    let mut pooled = Vec::new();
    let mut trial_means = Vec::new();
    let mut sums = Vec::new();
    let mut errors = Vec::new();
    for r in runs {
        match r {
            Ok(m) => {
                let ret = m.episode_returns();
                let tail = &ret[ret.len().saturating_sub(LAST_EPISODES)..];
                if tail.is_empty() {
                    continue;
                }
                pooled.extend_from_slice(tail);
                sums.push(tail.iter().sum::<f64>());
                trial_means.push(sums.last().unwrap() / tail.len() as f64);
            }
            Err(e) => errors.push(e.to_string()),
        }
    }
    let p = Stats::of(&pooled);
    CellSummary {
        axis: axis.name().to_string(),
        value: value.to_string(),
        trials: runs.len(),
        completed: runs.len() - errors.len(),
        mean: p.map(|s| s.mean),
        std: p.map(|s| s.std),
        trial_std: Stats::of(&trial_means).map(|s| s.std),
        mean_sum: Stats::of(&sums).map(|s| s.mean),
        errors,
    }
}

/// Learning curves of a cell: mean and standard deviation across trials at
/// each evaluation index and at each episode.
fn write_curves(dir: &Path, runs: &[Result<TrainMetrics>]) -> Result<()> {
    let ok: Vec<&TrainMetrics> = runs.iter().filter_map(|r| r.as_ref().ok()).collect();
    for (file, series) in [
        ("eval_curve.csv", ok.iter().map(|m| m.eval_returns()).collect::<Vec<_>>()),
        ("episode_curve.csv", ok.iter().map(|m| m.episode_returns()).collect()),
    ] {
        let path = dir.join(file);
        let mut w = csv_writer(&path)?;
        w.write_record(["index", "mean", "std", "n"])?;
        let len = series.iter().map(Vec::len).max().unwrap_or(0);
        for i in 0..len {
            let at: Vec<f64> = series.iter().filter_map(|s| s.get(i).copied()).collect();
            let s = Stats::of(&at).expect("at least one series reaches index i");
            w.write_record([i.to_string(), s.mean.to_string(), s.std.to_string(), s.n.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

fn cell_dir(out: &Path, axis: AblationAxis, value: &AblationValue) -> PathBuf {
    out.join("cells").join(format!("{}={}", axis.name(), value))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationResult {
    pub spec: AblationSpec,
    pub cells: Vec<CellSummary>,
    pub manifest: RunManifest,
}

/// Runs every cell × trial, each as an independent task, then writes
/// `summary.csv`, `summary.json`, per-cell curves and per-trial metrics.
/// A failing trial is recorded in its cell's row; the sweep goes on.
pub fn cmd_ablate(spec: &AblationSpec, out: &Path) -> Result<AblationResult> {
    let cells = spec.cells()?;
    ensure_dir(out)?;
    let started = Instant::now();
    let seeds: Vec<u64> = (0..spec.trials as u64).map(|k| spec.seed + k).collect();
    let tasks: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| seeds.iter().map(move |&s| (c, s)))
        .collect();
    let results = par::map(tasks, |(c, seed)| train_run(&cells[c].1, seed, |_| {}).map(|(_, m)| m));

    let mut summaries = Vec::new();
    let mut results = results.into_iter();
    for (value, _) in &cells {
        let runs: Vec<Result<TrainMetrics>> = results.by_ref().take(spec.trials).collect();
        let dir = cell_dir(out, spec.axis, value);
        ensure_dir(&dir)?;
        for (k, r) in runs.iter().enumerate() {
            if let Ok(m) = r {
                write_text(&dir.join(format!("trial_{k}_metrics.jsonl")), &m.to_jsonl()?)?;
            }
        }
        write_curves(&dir, &runs)?;
        summaries.push(summarize(spec.axis, value, &runs));
    }

    let path = out.join("summary.csv");
    let mut w = csv_writer(&path)?;
    w.write_record([
        "axis", "value", "trials", "completed", "mean", "std", "trial_std", "mean_sum", "errors",
    ])?;
    let f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for s in &summaries {
        w.write_record([
            s.axis.clone(),
            s.value.clone(),
            s.trials.to_string(),
            s.completed.to_string(),
            f(s.mean),
            f(s.std),
            f(s.trial_std),
            f(s.mean_sum),
            s.errors.join("; "),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let mut manifest = RunManifest::new("ablate", &spec.base, seeds);
    manifest.artifacts = vec!["summary.csv".into(), "summary.json".into(), "cells/".into()];
    manifest.finish(started);
    let result = AblationResult {
        spec: spec.clone(),
        cells: summaries,
        manifest,
    };
    write_json(&out.join("summary.json"), &result)?;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_base() -> RunConfig {
        let mut c = RunConfig::default();
        c.env.max_steps = 20;
        c.agent.hidden = vec![8, 8];
        c.agent.batch_size = 8;
        c.agent.epochs = 3;
        c
    }

    #[test]
    fn default_value_sets() {
        assert_eq!(AblationAxis::PolicyDelay.default_values().len(), 6);
        let alpha = AblationAxis::Alpha.default_values();
        assert_eq!(alpha.len(), 6);
        assert_eq!(alpha.last().unwrap().to_string(), "tunable");
        assert_eq!(AblationAxis::TargetSmoothing.default_values().len(), 2);
    }

    #[test]
    fn spec_parses_mixed_values() {
        let s = AblationSpec::from_toml("axis = \"alpha\"\nvalues = [0.001, \"tunable\"]\ntrials = 2\n").unwrap();
        let cells = s.cells().unwrap();
        assert_eq!(cells[0].1.agent.alpha_mode, AlphaMode::Fixed);
        assert_eq!(cells[0].1.agent.alpha_init, 0.001);
        assert_eq!(cells[1].1.agent.alpha_mode, AlphaMode::Tunable);
        let s = AblationSpec::from_toml("axis = \"policy_delay\"\nvalues = [0, 8]\n").unwrap();
        let cells = s.cells().unwrap();
        assert_eq!(cells[0].1.agent.policy_delay, 1);
        assert_eq!(cells[1].1.agent.policy_delay, 8);
        assert!(AblationSpec::from_toml("axis = \"policy_delay\"\nvalues = [\"tunable\"]\n")
            .unwrap()
            .cells()
            .is_err());
        assert!(matches!(
            AblationSpec::from_toml("axis = \"gamma\"\n"),
            Err(Error::Schema { .. })
        ));
    }

    #[test]
    fn one_value_one_trial_gives_one_row() {
        let dir = tempfile::tempdir().unwrap();
        let spec = AblationSpec {
            values: Some(vec![AblationValue::Number(2.0)]),
            trials: 1,
            base: tiny_base(),
            ..AblationSpec::new(AblationAxis::PolicyDelay)
        };
        let r = cmd_ablate(&spec, dir.path()).unwrap();
        assert_eq!(r.cells.len(), 1);
        assert_eq!(r.cells[0].completed, 1);
        let text = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(dir.path().join("cells/policy_delay=2/eval_curve.csv").exists());
    }

    #[test]
    fn failing_trial_is_recorded_not_fatal() {
        let mut bad = Ok(TrainMetrics::default());
        if let Ok(m) = &mut bad {
            m.records.clear();
        }
        let runs = vec![bad, Err(Error::NonFinite { tensor: "critic 0 loss".into() })];
        let s = summarize(AblationAxis::Alpha, &AblationValue::Number(0.1), &runs);
        assert_eq!(s.completed, 1);
        assert_eq!(s.errors.len(), 1);
        assert!(s.mean.is_none());
    }
}
