use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::expert::{DemoProtocol, QrmConfig};
use crate::irl::{ActionSelection, ApprenticeshipConfig, IrlConfig};
use crate::motif::SearchConfig;

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    #[default]
    Smirl,
    Maxent,
    Apprenticeship,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Smirl, Algorithm::Maxent, Algorithm::Apprenticeship];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Smirl => "smirl",
            Algorithm::Maxent => "maxent",
            Algorithm::Apprenticeship => "apprenticeship",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown algorithm `{s}` (expected smirl, maxent or apprenticeship)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub episodes: usize,
    /// Episode cap; `None` uses the task horizon.
    pub horizon: Option<usize>,
    pub selection: ActionSelection,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            episodes: 100,
            horizon: None,
            selection: ActionSelection::Greedy,
        }
    }
}

/// Everything a run needs. Relative paths are resolved against the directory
/// of the file the config was read from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Bundled office task id; ignored when `task_file` is set.
    pub task: u32,
    pub task_file: Option<PathBuf>,
    pub algorithm: Algorithm,
    /// Replaces the task's map.
    pub map: Option<PathBuf>,
    /// Pre-recorded demonstrations; when absent the expert is trained and
    /// demos are generated per seed.
    pub demos: Option<PathBuf>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub expert: QrmConfig,
    pub protocol: DemoProtocol,
    /// `search.seed` is replaced by the run seed.
    pub search: SearchConfig,
    pub irl: IrlConfig,
    pub apprenticeship: ApprenticeshipConfig,
    pub eval: EvalConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            task: 0,
            task_file: None,
            algorithm: Algorithm::Smirl,
            map: None,
            demos: None,
            seeds: vec![1, 2, 3],
            output_dir: PathBuf::from("runs"),
            expert: QrmConfig::default(),
            protocol: DemoProtocol::default(),
            search: SearchConfig::default(),
            irl: IrlConfig::default(),
            apprenticeship: ApprenticeshipConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Reads a TOML config, applies `key=value` overrides (dotted keys,
    /// values in TOML syntax with bare strings accepted) and resolves paths.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base, overrides).map_err(|e| match e {
            HarnessError::Config { message, .. } => HarnessError::Config {
                origin: path.display().to_string(),
                message,
            },
            other => other,
        })
    }

    pub fn parse(text: &str, base: &Path, overrides: &[String]) -> Result<Self, HarnessError> {
        let bad = |message: String| HarnessError::Config {
            origin: "<config>".into(),
            message,
        };
        let mut table: toml::Table = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        for kv in overrides {
            apply_override(&mut table, kv).map_err(bad)?;
        }
        let mut cfg: ExperimentConfig = table.try_into().map_err(|e: toml::de::Error| bad(e.to_string()))?;
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.task_file.as_mut().map(join);
        self.map.as_mut().map(join);
        self.demos.as_mut().map(join);
        join(&mut self.output_dir);
    }

    /// Schema checks beyond what deserialization enforces, including that
    /// every referenced file exists.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |message: String| HarnessError::Config {
            origin: "<config>".into(),
            message,
        };
        for (what, p) in [("task", &self.task_file), ("map", &self.map), ("demos", &self.demos)] {
            if let Some(p) = p {
                if !p.is_file() {
                    return Err(HarnessError::MissingFile {
                        what,
                        path: p.clone(),
                    });
                }
            }
        }
        if self.seeds.is_empty() {
            return Err(bad("seeds must not be empty".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(bad("seeds must be distinct".into()));
        }
        if self.eval.episodes == 0 || self.eval.horizon == Some(0) {
            return Err(bad("eval episodes and horizon must be positive".into()));
        }
        self.protocol.validate().map_err(|e| bad(e.to_string()))?;
        self.search.validate().map_err(|e| bad(e.to_string()))?;
        self.irl.validate().map_err(|e| bad(e.to_string()))?;
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Sets a dotted key in a TOML table. The value is parsed as a TOML literal,
/// falling back to a plain string.
pub fn apply_override(table: &mut toml::Table, kv: &str) -> Result<(), String> {
    let (key, raw) = kv
        .split_once('=')
        .ok_or_else(|| format!("override `{kv}` is not key=value"))?;
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(format!("bad override key `{key}`"));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| format!("override key `{key}`: `{p}` is not a table"))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = ExperimentConfig {
            output_dir: PathBuf::from("/runs"),
            ..ExperimentConfig::default()
        };
        let back = ExperimentConfig::parse(&cfg.to_toml(), Path::new("/"), &[]).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn overrides_and_paths() {
        let text = "task = 2\nalgorithm = \"maxent\"\nmap = \"m.map\"\n[search]\nu_max = 3\n";
        let sets = vec![
            "search.u_max=5".to_string(),
            "irl.optimizer=adam".to_string(),
            "seeds=[7]".to_string(),
        ];
        let cfg = ExperimentConfig::parse(text, Path::new("/cfg"), &sets).unwrap();
        assert_eq!(cfg.task, 2);
        assert_eq!(cfg.algorithm, Algorithm::Maxent);
        assert_eq!(cfg.search.u_max, 5);
        assert_eq!(cfg.irl.optimizer, crate::irl::Optimizer::Adam);
        assert_eq!(cfg.seeds, vec![7]);
        assert_eq!(cfg.map, Some(PathBuf::from("/cfg/m.map")));
        assert_eq!(cfg.output_dir, PathBuf::from("/cfg/runs"));
    }

    #[test]
    fn rejects_unknown_keys_and_missing_files() {
        assert!(ExperimentConfig::parse("tsak = 1\n", Path::new("."), &[]).is_err());
        assert!(ExperimentConfig::parse("", Path::new("."), &["search.bogus=1".into()]).is_err());
        assert!(ExperimentConfig::parse("", Path::new("."), &["noequals".into()]).is_err());
        let cfg = ExperimentConfig::parse("map = \"nowhere.map\"\n", Path::new("/nonexistent"), &[]).unwrap();
        match cfg.validate() {
            Err(HarnessError::MissingFile { path, .. }) => assert!(path.ends_with("nowhere.map")),
            other => panic!("unexpected {other:?}"),
        }
    }
}
