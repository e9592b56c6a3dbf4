//! Config-driven experiment runs: one directory per (task, algorithm) with a
//! sub-directory per seed, plus mean/std curves across seeds.
//!
//! ```text
//! <output_dir>/task<k>-<algo>/
//!     curves.csv  aggregate.csv
//!     seed-<s>/config.toml demos.jsonl manifest.json learned_rm.txt
//!              curves.csv search_log.csv meta.json run.log
//! ```
//!
//! A seed's `config.toml` is fully resolved: rerunning it with the same seed
//! reproduces every artifact except wall-clock fields.

mod config;
mod report;

use std::fs::File;
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expert::{generate_demos, qrm_train, Dataset, DemoManifest};
use crate::gridworld::{load_map, GridError, TaskSpec};
use crate::irl::{
    apprenticeship_train, evaluate_policy, maxent_baseline_train, smirl_train, CurvePoint, LearnedPolicy,
    TrainOutcome,
};
use crate::model::TabularModel;
use crate::motif::LogEntry;
use crate::rng::stream;

pub use config::{apply_override, Algorithm, EvalConfig, ExperimentConfig};
pub use report::{aggregate, collect_curves, read_curves, write_aggregate, AggregatePoint, CurveRow};

type BoxError = Box<dyn std::error::Error + Send + Sync>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot access {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("bad config {origin}: {message}")]
    Config { origin: String, message: String },
    #[error("{what} file not found: {}", path.display())]
    MissingFile { what: &'static str, path: PathBuf },
    #[error("seed {seed}: stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        seed: u64,
        source: BoxError,
    },
    #[error("task: {0}")]
    Task(#[from] GridError),
    #[error("bad curve file {}: {message}", path.display())]
    Curves { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Wall-clock and summary numbers for one seed. Not covered by the
/// determinism guarantee (timings vary).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMeta {
    pub algorithm: Algorithm,
    pub task: u32,
    pub seed: u64,
    pub stage_seconds: Vec<(String, f64)>,
    pub total_seconds: f64,
    pub final_return: f64,
    pub env_interactions: u64,
    pub motif_cost: Option<f64>,
    pub motif_states: Option<usize>,
}

/// Files written for one seed.
#[derive(Debug, Clone)]
pub struct RunArtifact {
    pub dir: PathBuf,
    /// Resolved config that reproduces this run (`seeds = [seed]`).
    pub snapshot: ExperimentConfig,
    pub demos: PathBuf,
    pub learned_rm: PathBuf,
    pub curves: PathBuf,
    pub search_log: Option<PathBuf>,
    pub meta: RunMeta,
    pub curve: Vec<CurvePoint>,
}

#[derive(Debug, Clone)]
pub struct ExperimentArtifact {
    pub dir: PathBuf,
    pub runs: Vec<RunArtifact>,
    pub aggregate: Vec<AggregatePoint>,
}

/// Line-oriented run log, flushed after every line so a failed run leaves a
/// readable partial log behind.
struct RunLog {
    file: BufWriter<File>,
    start: Instant,
    seed: u64,
}

impl RunLog {
    fn open(path: &Path, seed: u64) -> Result<Self, HarnessError> {
        let f = File::create(path).map_err(io_err(path))?;
        Ok(RunLog {
            file: BufWriter::new(f),
            start: Instant::now(),
            seed,
        })
    }

    fn line(&mut self, msg: &str) {
        log::info!("seed {}: {msg}", self.seed);
        let _ = writeln!(self.file, "[{:>9.3}s] {msg}", self.start.elapsed().as_secs_f64());
        let _ = self.file.flush();
    }
}

/// Loaded task with its environment model.
pub struct Environment {
    pub task: TaskSpec,
    pub model: TabularModel,
}

pub fn load_environment(cfg: &ExperimentConfig) -> Result<Environment, HarnessError> {
    let mut task = match &cfg.task_file {
        Some(p) => TaskSpec::load(p),
        None => TaskSpec::builtin(cfg.task),
    }?;
    if let Some(p) = &cfg.map {
        let map = load_map(p)?;
        task = task.with_map(map);
    }
    let model = task.map.export_model();
    Ok(Environment { task, model })
}

fn stage_err(stage: &'static str, seed: u64, e: impl Into<BoxError>) -> HarnessError {
    HarnessError::Stage {
        stage,
        seed,
        source: e.into(),
    }
}

/// Generated demonstrations with their provenance record.
pub fn generate_demo_set(
    cfg: &ExperimentConfig,
    env: &Environment,
    seed: u64,
) -> Result<(Dataset, DemoManifest), HarnessError> {
    let expert = qrm_train(&env.model, &env.task.rm, &cfg.expert, &mut stream(seed, "qrm", 0))
        .map_err(|e| stage_err("expert", seed, e))?;
    let set = generate_demos(&expert, &env.model, &env.task.rm, &cfg.protocol, seed)
        .map_err(|e| stage_err("demos", seed, e))?;
    let manifest = DemoManifest {
        task_id: env.task.task_id,
        seed,
        protocol: cfg.protocol.clone(),
        qrm: cfg.expert.clone(),
        accepted: set.dataset.len(),
        attempts: set.attempts,
        attempt_ids: set.attempt_ids,
    };
    Ok((set.dataset, manifest))
}

/// Directory of a (task, algorithm) experiment under `output_dir`.
pub fn experiment_dir(cfg: &ExperimentConfig, task_id: u32) -> PathBuf {
    cfg.output_dir.join(format!("task{task_id}-{}", cfg.algorithm.name()))
}

/// Runs every seed (in parallel), then writes the concatenated and the
/// aggregated curves. The first failing seed aborts the experiment; its
/// `run.log` names the failed stage.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentArtifact, HarnessError> {
    cfg.validate()?;
    let env = load_environment(cfg)?;
    let dir = experiment_dir(cfg, env.task.task_id);
    std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let runs = cfg
        .seeds
        .par_iter()
        .map(|&seed| run_seed(cfg, &env, seed, &dir.join(format!("seed-{seed}"))))
        .collect::<Result<Vec<_>, _>>()?;

    let rows: Vec<CurveRow> = runs
        .iter()
        .flat_map(|r| curve_rows(cfg.algorithm, env.task.task_id, r.meta.seed, &r.curve))
        .collect();
    write_csv(&dir.join("curves.csv"), &rows)?;
    let agg = aggregate(&rows);
    write_aggregate(&dir.join("aggregate.csv"), &agg)?;
    Ok(ExperimentArtifact {
        dir,
        runs,
        aggregate: agg,
    })
}

pub fn curve_rows(algo: Algorithm, task: u32, seed: u64, curve: &[CurvePoint]) -> Vec<CurveRow> {
    curve
        .iter()
        .map(|p| CurveRow {
            algo: algo.name().to_string(),
            task,
            seed,
            irl_step: p.irl_step,
            env_interactions: p.env_interactions,
            avg_ground_truth_return: p.avg_return,
        })
        .collect()
}

pub(crate) fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

fn csv_err(path: &Path, e: csv::Error) -> HarnessError {
    HarnessError::Curves {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), HarnessError> {
    std::fs::write(path, text).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<(), HarnessError> {
    let text = serde_json::to_string_pretty(v).expect("artifact serializes");
    write_text(path, &(text + "\n"))
}

#[derive(Serialize)]
struct Manifest<'a> {
    task: u32,
    algorithm: Algorithm,
    seed: u64,
    config: &'a str,
    /// Dataset file used for training.
    demos: &'a Path,
    demos_generated: bool,
    demo_provenance: Option<&'a DemoManifest>,
    num_demos: usize,
    learned_rm: &'a str,
    curves: &'a str,
    search_log: Option<&'a str>,
}

/// Snapshot of `cfg` pinned to one seed, with every run-time default resolved.
pub fn snapshot(cfg: &ExperimentConfig, env: &Environment, seed: u64) -> ExperimentConfig {
    let mut snap = cfg.clone();
    snap.seeds = vec![seed];
    snap.search.seed = seed;
    snap.eval.horizon = Some(cfg.eval.horizon.unwrap_or(env.task.horizon));
    snap
}

/// One seed: demos, training with per-step evaluation, artifacts.
pub fn run_seed(
    cfg: &ExperimentConfig,
    env: &Environment,
    seed: u64,
    dir: &Path,
) -> Result<RunArtifact, HarnessError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut log = RunLog::open(&dir.join("run.log"), seed)?;
    let result = run_seed_inner(cfg, env, seed, dir, &mut log);
    if let Err(e) = &result {
        log.line(&format!("error: {e}"));
    }
    result
}

fn run_seed_inner(
    cfg: &ExperimentConfig,
    env: &Environment,
    seed: u64,
    dir: &Path,
    log: &mut RunLog,
) -> Result<RunArtifact, HarnessError> {
    let snap = snapshot(cfg, env, seed);
    write_text(&dir.join("config.toml"), &snap.to_toml())?;
    log.line(&format!(
        "task {} ({}), algorithm {}",
        env.task.task_id,
        env.task.description,
        cfg.algorithm.name()
    ));
    let mut stages = Vec::new();
    let mut timed = |name: &str, t: Instant, log: &mut RunLog| {
        let secs = t.elapsed().as_secs_f64();
        log.line(&format!("stage {name} done in {secs:.3}s"));
        stages.push((name.to_string(), secs));
    };

    let t = Instant::now();
    let (demos, provenance, demos_path) = match &cfg.demos {
        Some(p) => {
            log.line(&format!("loading demos from {}", p.display()));
            let d = Dataset::load(p, env.model.vocab()).map_err(|e| stage_err("demos", seed, e))?;
            (d, None, p.clone())
        }
        None => {
            log.line("training expert and generating demos");
            let (d, m) = generate_demo_set(&snap, env, seed)?;
            let p = dir.join("demos.jsonl");
            d.save(&p).map_err(|e| stage_err("demos", seed, e))?;
            (d, Some(m), p)
        }
    };
    log.line(&format!("{} demos, {} observations", demos.len(), demos.num_observations()));
    timed("demos", t, log);

    let horizon = snap.eval.horizon.expect("resolved");
    let mut eval = |p: &LearnedPolicy| {
        evaluate_policy(p, &env.model, &env.task.rm, snap.eval.episodes, horizon, snap.eval.selection, seed)
    };
    let t = Instant::now();
    log.line("training");
    let out: TrainOutcome = match cfg.algorithm {
        Algorithm::Smirl => smirl_train(&demos, &env.model, &snap.search, &snap.irl, seed, &mut eval),
        Algorithm::Maxent => maxent_baseline_train(&demos, &env.model, &snap.irl, seed, &mut eval),
        Algorithm::Apprenticeship => {
            apprenticeship_train(&demos, &env.model, &snap.apprenticeship, seed, &mut eval)
        }
    }
    .map_err(|e| stage_err("train", seed, e))?;
    if let Some(m) = &out.motif {
        log.line(&format!("motif: {} states, cost {}", m.rm.num_states(), m.cost));
    }
    for p in &out.curve {
        log.line(&format!(
            "irl step {:>3}: return {:.3}, interactions {}",
            p.irl_step, p.avg_return, p.env_interactions
        ));
    }
    timed("train", t, log);

    let learned_rm = dir.join("learned_rm.txt");
    write_text(&learned_rm, &out.rm.to_text())?;
    let curves = dir.join("curves.csv");
    write_csv(&curves, &curve_rows(cfg.algorithm, env.task.task_id, seed, &out.curve))?;
    let search_log = match &out.motif {
        Some(m) => {
            let p = dir.join("search_log.csv");
            write_csv::<LogEntry>(&p, &m.log)?;
            Some(p)
        }
        None => None,
    };
    let manifest = Manifest {
        task: env.task.task_id,
        algorithm: cfg.algorithm,
        seed,
        config: "config.toml",
        demos: &demos_path,
        demos_generated: provenance.is_some(),
        demo_provenance: provenance.as_ref(),
        num_demos: demos.len(),
        learned_rm: "learned_rm.txt",
        curves: "curves.csv",
        search_log: search_log.as_ref().map(|_| "search_log.csv"),
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    let meta = RunMeta {
        algorithm: cfg.algorithm,
        task: env.task.task_id,
        seed,
        total_seconds: stages.iter().map(|(_, s)| s).sum(),
        stage_seconds: stages,
        final_return: out.final_return(),
        env_interactions: out.interactions,
        motif_cost: out.motif.as_ref().map(|m| m.cost),
        motif_states: out.motif.as_ref().map(|m| m.rm.num_states()),
    };
    write_json(&dir.join("meta.json"), &meta)?;
    log.line(&format!("final return {:.3}", meta.final_return));
    Ok(RunArtifact {
        dir: dir.to_path_buf(),
        snapshot: snap,
        demos: demos_path,
        learned_rm,
        curves,
        search_log,
        meta,
        curve: out.curve,
    })
}
