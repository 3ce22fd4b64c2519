//! Experiment configuration files (TOML).

use std::path::{Path, PathBuf};

use romance_core::trainers::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::eval::Protocol;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: field `{field}`: {message}")]
    Invalid { path: PathBuf, field: String, message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalBlock {
    pub protocols: Vec<Protocol>,
    /// Episodes per seed, and per attacker under the held-out protocol.
    pub episodes: usize,
    /// Archive directories holding held-out attackers.
    pub ega_dirs: Vec<PathBuf>,
    pub sweep_budgets: Vec<usize>,
}

impl Default for EvalBlock {
    fn default() -> Self {
        Self {
            protocols: vec![Protocol::Natural, Protocol::Random],
            episodes: 32,
            ega_dirs: Vec::new(),
            sweep_budgets: vec![0, 2, 4, 6, 8],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub output_dir: PathBuf,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub eval: EvalBlock,
}

fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}

impl ExperimentConfig {
    /// Parses and validates; relative paths resolve against the file's
    /// directory. Nothing is written.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        let mut cfg = Self::parse(&text).map_err(|message| ConfigError::Parse { path: path.into(), message })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.output_dir = base.join(&cfg.output_dir);
        for d in &mut cfg.eval.ega_dirs {
            *d = base.join(&*d);
        }
        cfg.validate().map_err(|(field, message)| ConfigError::Invalid { path: path.into(), field, message })?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn validate(&self) -> Result<(), (String, String)> {
        let fail = |f: &str, m: String| Err((f.to_string(), m));
        if self.seeds.is_empty() {
            return fail("seeds", "at least one seed is required".into());
        }
        if let Err(e) = self.train.validate() {
            return fail("train", e.to_string());
        }
        if self.eval.episodes == 0 {
            return fail("eval.episodes", "must be at least 1".into());
        }
        for d in &self.eval.ega_dirs {
            if !d.is_dir() {
                return fail("eval.ega_dirs", format!("{} does not exist", d.display()));
            }
        }
        if self.eval.protocols.contains(&Protocol::Ega) && self.eval.ega_dirs.is_empty() {
            return fail("eval.ega_dirs", "the ega protocol needs at least one attacker directory".into());
        }
        Ok(())
    }
}
