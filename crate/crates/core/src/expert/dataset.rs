use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::rm::{LabelSet, Vocabulary};

use super::ExpertError;

/// `(o_0, a_0, o_1, ..., a_{T-1}, o_T)` with the label of every observation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    pub obs: Vec<usize>,
    pub acts: Vec<usize>,
    pub labels: Vec<LabelSet>,
}

impl Trajectory {
    /// Number of actions taken.
    pub fn len(&self) -> usize {
        self.acts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.acts.is_empty()
    }

    pub fn validate(&self) -> Result<(), ExpertError> {
        if self.obs.is_empty() {
            return Err(ExpertError::Invalid("trajectory has no observations".into()));
        }
        if self.obs.len() != self.acts.len() + 1 {
            return Err(ExpertError::Invalid(format!(
                "{} observations for {} actions",
                self.obs.len(),
                self.acts.len()
            )));
        }
        if self.labels.len() != self.obs.len() {
            return Err(ExpertError::Invalid(format!(
                "{} labels for {} observations",
                self.labels.len(),
                self.obs.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub vocab: Vocabulary,
    pub trajectories: Vec<Trajectory>,
}

#[derive(Serialize, Deserialize)]
struct Record {
    obs: Vec<usize>,
    acts: Vec<usize>,
    labels: Vec<Vec<String>>,
}

impl Dataset {
    pub fn new(vocab: Vocabulary, trajectories: Vec<Trajectory>) -> Self {
        Dataset {
            vocab,
            trajectories,
        }
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    /// Total number of observations: `sum (len + 1)`.
    pub fn num_observations(&self) -> usize {
        self.trajectories.iter().map(|t| t.obs.len()).sum()
    }

    pub fn max_len(&self) -> usize {
        self.trajectories.iter().map(Trajectory::len).max().unwrap_or(0)
    }

    /// Reads JSON lines. Symbols missing from `base` are appended to the
    /// returned dataset's vocabulary in order of first appearance.
    pub fn read_jsonl<R: BufRead>(reader: R, base: &Vocabulary) -> Result<Dataset, ExpertError> {
        let mut vocab = base.clone();
        let mut trajectories = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| ExpertError::Invalid(format!("line {}: {e}", i + 1)))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record = serde_json::from_str(&line).map_err(|source| ExpertError::Json {
                line: i + 1,
                source,
            })?;
            let mut labels = Vec::with_capacity(rec.labels.len());
            for names in &rec.labels {
                let mut l = LabelSet::EMPTY;
                for s in names {
                    let idx = match vocab.index_of(s) {
                        Some(k) => k,
                        None => vocab.push(s)?,
                    };
                    l = l.with(idx);
                }
                labels.push(l);
            }
            let t = Trajectory {
                obs: rec.obs,
                acts: rec.acts,
                labels,
            };
            t.validate()
                .map_err(|e| ExpertError::Invalid(format!("line {}: {e}", i + 1)))?;
            trajectories.push(t);
        }
        Ok(Dataset {
            vocab,
            trajectories,
        })
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), ExpertError> {
        for t in &self.trajectories {
            let rec = Record {
                obs: t.obs.clone(),
                acts: t.acts.clone(),
                labels: t
                    .labels
                    .iter()
                    .map(|&l| self.vocab.names(l).into_iter().map(String::from).collect())
                    .collect(),
            };
            serde_json::to_writer(&mut w, &rec).map_err(|source| ExpertError::Json { line: 0, source })?;
            w.write_all(b"\n").map_err(|e| ExpertError::Invalid(e.to_string()))?;
        }
        Ok(())
    }

    pub fn load(path: &Path, base: &Vocabulary) -> Result<Dataset, ExpertError> {
        let f = std::fs::File::open(path).map_err(|source| ExpertError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Dataset::read_jsonl(std::io::BufReader::new(f), base)
    }

    pub fn save(&self, path: &Path) -> Result<(), ExpertError> {
        let f = std::fs::File::create(path).map_err(|source| ExpertError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut w = std::io::BufWriter::new(f);
        self.write_jsonl(&mut w)?;
        w.flush().map_err(|source| ExpertError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}
