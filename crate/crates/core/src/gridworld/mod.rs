//! Deterministic office gridworld: ASCII maps, the labelling function, task
//! definitions with their ground-truth reward machines, and model export.

mod map;

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::expert::Trajectory;
use crate::rm::{RewardMachine, RmError};

pub use map::{Cell, GridMap, Step, DOWN, LEFT, NUM_ACTIONS, RIGHT, UP};

pub(crate) const OFFICE_MAP: &str = include_str!("../../data/office.map");

const BUILTIN: [(&str, &str); 5] = [
    (
        include_str!("../../data/tasks/task0.toml"),
        include_str!("../../data/tasks/task0.rm"),
    ),
    (
        include_str!("../../data/tasks/task1.toml"),
        include_str!("../../data/tasks/task1.rm"),
    ),
    (
        include_str!("../../data/tasks/task2.toml"),
        include_str!("../../data/tasks/task2.rm"),
    ),
    (
        include_str!("../../data/tasks/task3.toml"),
        include_str!("../../data/tasks/task3.rm"),
    ),
    (
        include_str!("../../data/tasks/task4.toml"),
        include_str!("../../data/tasks/task4.rm"),
    ),
];

#[derive(Debug, Error)]
pub enum GridError {
    #[error("map line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("bad task file {}: {source}", path.display())]
    Toml {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("reward machine: {0}")]
    Rm(#[from] RmError),
    #[error("unknown built-in task {0}")]
    UnknownTask(u32),
    #[error("reward machine vocabulary does not match the map vocabulary")]
    VocabularyMismatch,
}

fn read(path: &Path) -> Result<String, GridError> {
    std::fs::read_to_string(path).map_err(|source| GridError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_map(path: &Path) -> Result<GridMap, GridError> {
    GridMap::parse(&read(path)?)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskFile {
    task_id: u32,
    #[serde(default)]
    description: String,
    horizon: usize,
    rm_file: PathBuf,
    map_file: PathBuf,
}

/// A task: map, ground-truth machine and episode horizon. Stepping on `*`
/// ends an episode.
#[derive(Debug, Clone)]
pub struct TaskSpec {
    pub task_id: u32,
    pub description: String,
    pub horizon: usize,
    pub rm: RewardMachine,
    pub map: GridMap,
}

impl TaskSpec {
    /// One of the bundled office tasks 0-4.
    pub fn builtin(task_id: u32) -> Result<TaskSpec, GridError> {
        let (toml_text, rm_text) = BUILTIN
            .get(task_id as usize)
            .ok_or(GridError::UnknownTask(task_id))?;
        let file: TaskFile = toml::from_str(toml_text).map_err(|source| GridError::Toml {
            path: PathBuf::from(format!("<builtin task{task_id}>")),
            source,
        })?;
        let map = GridMap::office();
        let rm = RewardMachine::from_text(rm_text, map.vocab())?;
        Self::assemble(file, rm, map)
    }

    /// Loads a task file; `rm_file` and `map_file` are relative to it.
    pub fn load(path: &Path) -> Result<TaskSpec, GridError> {
        let file: TaskFile = toml::from_str(&read(path)?).map_err(|source| GridError::Toml {
            path: path.to_path_buf(),
            source,
        })?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let map = load_map(&dir.join(&file.map_file))?;
        let rm = RewardMachine::from_text(&read(&dir.join(&file.rm_file))?, map.vocab())?;
        Self::assemble(file, rm, map)
    }

    /// Replaces the map, keeping the machine and horizon.
    pub fn with_map(mut self, map: GridMap) -> TaskSpec {
        self.map = map;
        self
    }

    fn assemble(file: TaskFile, rm: RewardMachine, map: GridMap) -> Result<TaskSpec, GridError> {
        if rm.vocab() != map.vocab() {
            return Err(GridError::VocabularyMismatch);
        }
        Ok(TaskSpec {
            task_id: file.task_id,
            description: file.description,
            horizon: file.horizon,
            rm,
            map,
        })
    }
}

/// Number of reward events when the trajectory's labels are replayed through
/// the task machine. The label of the initial observation is not consumed:
/// the machine only reacts to tiles the agent moves onto.
pub fn ground_truth_return(traj: &Trajectory, task: &TaskSpec) -> f64 {
    let labels = traj.labels.get(1..).unwrap_or(&[]);
    task.rm.count_goals(labels) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rm::LabelSet;

    fn traj_through(task: &TaskSpec, symbols: &[&str]) -> Trajectory {
        // label-only trajectory: one step per symbol, unlabelled start
        let v = task.map.vocab();
        let mut labels = vec![LabelSet::EMPTY];
        for s in symbols {
            labels.push(if s.is_empty() {
                LabelSet::EMPTY
            } else {
                v.label_set(&[*s]).unwrap()
            });
        }
        Trajectory {
            obs: vec![0; labels.len()],
            acts: vec![0; labels.len() - 1],
            labels,
        }
    }

    #[test]
    fn builtin_tasks_load() {
        for id in 0..5 {
            let t = TaskSpec::builtin(id).unwrap();
            assert_eq!(t.task_id, id);
            assert_eq!(t.map.num_cells(), 108);
            assert_eq!(t.horizon, 1000);
        }
        assert!(TaskSpec::builtin(5).is_err());
    }

    #[test]
    fn ground_truth_returns() {
        let t1 = TaskSpec::builtin(1).unwrap();
        assert_eq!(ground_truth_return(&traj_through(&t1, &["", "m", "", "A"]), &t1), 0.0);
        assert_eq!(ground_truth_return(&traj_through(&t1, &["o", "", "c", "", "o"]), &t1), 1.0);
        let t4 = TaskSpec::builtin(4).unwrap();
        let twice = ["A", "B", "C", "D", "A", "", "B", "C", "D"];
        assert_eq!(ground_truth_return(&traj_through(&t4, &twice), &t4), 2.0);
        let t3 = TaskSpec::builtin(3).unwrap();
        assert_eq!(ground_truth_return(&traj_through(&t3, &["m", "c", "o"]), &t3), 1.0);
        assert_eq!(ground_truth_return(&traj_through(&t3, &["c", "o"]), &t3), 0.0);
    }

    #[test]
    fn load_from_directory() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("m.map"), "S.D\n").unwrap();
        std::fs::write(
            dir.path().join("t.rm"),
            "states 2\nterminal u1\nu0 {D} u1\n",
        )
        .unwrap();
        let cfg = dir.path().join("t.toml");
        std::fs::write(
            &cfg,
            "task_id = 0\nhorizon = 10\nrm_file = \"t.rm\"\nmap_file = \"m.map\"\n",
        )
        .unwrap();
        let t = TaskSpec::load(&cfg).unwrap();
        assert_eq!(t.map.num_cells(), 3);

        std::fs::remove_file(dir.path().join("m.map")).unwrap();
        let err = TaskSpec::load(&cfg).unwrap_err();
        assert!(err.to_string().contains("m.map"));
    }
}
