use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{io_err, write_csv, HarnessError};

/// One line of a per-seed curves file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub algo: String,
    pub task: u32,
    pub seed: u64,
    pub irl_step: usize,
    pub env_interactions: u64,
    pub avg_ground_truth_return: f64,
}

/// Mean and sample standard deviation across seeds at one IRL step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatePoint {
    pub algo: String,
    pub task: u32,
    pub irl_step: usize,
    pub seeds: usize,
    pub mean_return: f64,
    pub std_return: f64,
    pub mean_env_interactions: f64,
}

/// Groups rows by (algo, task) and averages per IRL step. A seed whose curve
/// stopped early contributes its last point to the later steps, so every
/// step averages over all seeds.
pub fn aggregate(rows: &[CurveRow]) -> Vec<AggregatePoint> {
    let mut groups: BTreeMap<(String, u32), BTreeMap<u64, Vec<&CurveRow>>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((r.algo.clone(), r.task))
            .or_default()
            .entry(r.seed)
            .or_default()
            .push(r);
    }
    let mut out = Vec::new();
    for ((algo, task), mut seeds) in groups {
        for curve in seeds.values_mut() {
            curve.sort_by_key(|r| r.irl_step);
        }
        let last = seeds
            .values()
            .filter_map(|c| c.last().map(|r| r.irl_step))
            .max()
            .unwrap_or(0);
        for step in 1..=last {
            let pts: Vec<&CurveRow> = seeds
                .values()
                .filter_map(|c| c.iter().rev().find(|r| r.irl_step <= step).or(c.first()).copied())
                .collect();
            let n = pts.len() as f64;
            let mean = pts.iter().map(|r| r.avg_ground_truth_return).sum::<f64>() / n;
            let var = if pts.len() > 1 {
                pts.iter().map(|r| (r.avg_ground_truth_return - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            out.push(AggregatePoint {
                algo: algo.clone(),
                task,
                irl_step: step,
                seeds: pts.len(),
                mean_return: mean,
                std_return: var.sqrt(),
                mean_env_interactions: pts.iter().map(|r| r.env_interactions as f64).sum::<f64>() / n,
            });
        }
    }
    out
}

pub fn write_aggregate(path: &Path, agg: &[AggregatePoint]) -> Result<(), HarnessError> {
    write_csv(path, agg)
}

pub fn read_curves(path: &Path) -> Result<Vec<CurveRow>, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| HarnessError::Curves {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    r.deserialize()
        .collect::<Result<Vec<CurveRow>, _>>()
        .map_err(|e| HarnessError::Curves {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
}

/// Every per-seed `curves.csv` (inside a `seed-*` directory) below `root`,
/// in path order.
pub fn collect_curves(root: &Path) -> Result<Vec<CurveRow>, HarnessError> {
    fn walk(dir: &Path, found: &mut Vec<PathBuf>) -> Result<(), HarnessError> {
        for entry in std::fs::read_dir(dir).map_err(io_err(dir))? {
            let p = entry.map_err(io_err(dir))?.path();
            if p.is_dir() {
                walk(&p, found)?;
            } else if p.file_name().is_some_and(|n| n == "curves.csv")
                && dir
                    .file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("seed-"))
            {
                found.push(p);
            }
        }
        Ok(())
    }
    let mut files = Vec::new();
    walk(root, &mut files)?;
    files.sort();
    let mut rows = Vec::new();
    for f in files {
        rows.extend(read_curves(&f)?);
    }
    Ok(rows)
}
