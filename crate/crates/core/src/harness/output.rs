//! File writers for reports, metrics, trajectories and tables.

use std::path::Path;

use serde::Serialize;

use crate::agent::{align_at_maxima, Trajectory};
use crate::error::{Error, Result};

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per visited state: `step, x1..xd, energy, a1..ad, reward,
/// terminal, truncated`. The action and reward columns describe the move
/// taken from that state and are empty on the final row; the flags are set
/// on the final row only.
pub fn write_trajectory_csv(path: &Path, t: &Trajectory) -> Result<()> {
    let d = t.states[0].len();
    let mut w = csv_writer(path)?;
    let mut header = vec!["step".to_string()];
    header.extend((1..=d).map(|i| format!("x{i}")));
    header.push("energy".into());
    header.extend((1..=d).map(|i| format!("a{i}")));
    header.extend(["reward".into(), "terminal".into(), "truncated".into()]);
    w.write_record(&header)?;
    for (k, s) in t.states.iter().enumerate() {
        let last = k == t.len();
        let mut row = vec![k.to_string()];
        row.extend(s.iter().map(|v| v.to_string()));
        row.push(t.energies[k].to_string());
        match t.actions.get(k) {
            Some(a) => row.extend(a.iter().map(|v| v.to_string())),
            None => row.extend((0..d).map(|_| String::new())),
        }
        row.push(opt(t.rewards.get(k).copied()));
        row.push((last && t.terminal).to_string());
        row.push((last && t.truncated).to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Energy profiles in long format, `trajectory, step, energy`.
pub fn write_profiles_csv(path: &Path, ts: &[Trajectory]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["trajectory", "step", "energy"])?;
    for (k, t) in ts.iter().enumerate() {
        for (i, e) in t.energies.iter().enumerate() {
            w.write_record([k.to_string(), i.to_string(), e.to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Profiles shifted so that their maxima share `aligned_index`; columns
/// `trajectory, aligned_index, step, energy`.
pub fn write_aligned_profiles_csv(path: &Path, ts: &[Trajectory]) -> Result<()> {
    let profiles: Vec<Vec<f64>> = ts.iter().map(|t| t.energies.clone()).collect();
    let mut w = csv_writer(path)?;
    w.write_record(["trajectory", "aligned_index", "step", "energy"])?;
    for (k, (offset, p)) in align_at_maxima(&profiles).into_iter().enumerate() {
        for (i, e) in p.iter().enumerate() {
            w.write_record([k.to_string(), (offset + i).to_string(), i.to_string(), e.to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Trajectory {
        Trajectory {
            states: vec![vec![0.0, 0.0], vec![0.01, 0.0], vec![0.02, 0.01]],
            energies: vec![-1.0, -0.5, -0.7],
            actions: vec![vec![1.0, 0.0], vec![1.0, 1.0]],
            rewards: vec![0.5, 0.7],
            terminal: false,
            truncated: true,
        }
    }

    #[test]
    fn trajectory_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        write_trajectory_csv(&p, &sample()).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "step,x1,x2,energy,a1,a2,reward,terminal,truncated");
        assert_eq!(lines.len(), 4);
        assert!(lines.iter().all(|l| l.split(',').count() == 9));
        assert_eq!(lines[3], "2,0.02,0.01,-0.7,,,,false,true");
    }

    #[test]
    fn aligned_profiles_share_peak_index() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        let mut b = sample();
        b.energies = vec![-2.0, -1.5, -0.1];
        write_aligned_profiles_csv(&p, &[sample(), b]).unwrap();
        let mut r = csv::Reader::from_path(&p).unwrap();
        let rows: Vec<(usize, usize, f64)> = r
            .records()
            .map(|x| {
                let x = x.unwrap();
                (x[0].parse().unwrap(), x[1].parse().unwrap(), x[3].parse().unwrap())
            })
            .collect();
        let peak = |k: usize| {
            rows.iter()
                .filter(|r| r.0 == k)
                .max_by(|a, b| a.2.total_cmp(&b.2))
                .unwrap()
                .1
        };
        assert_eq!(peak(0), peak(1));
    }
}
