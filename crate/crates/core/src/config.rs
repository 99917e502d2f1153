//! Training configuration, stored as TOML (`key = value` lines).

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cells::CellKind;
use crate::error::{Error, Result};
use crate::synth::SynthConfig;

/// What happens to the external memory between sentences.
/// The hidden vector (and LSTM cell) is zeroed at every sentence start either way.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemoryPolicy {
    /// Carried over in corpus order; reset at the start of each epoch and of each evaluation.
    #[default]
    Persistent,
    ResetPerSentence,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    #[default]
    Adadelta,
    Sgd,
}

impl FromStr for MemoryPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "persistent" => Ok(MemoryPolicy::Persistent),
            "reset_per_sentence" => Ok(MemoryPolicy::ResetPerSentence),
            _ => Err(Error::Config(format!(
                "unknown memory policy '{s}' (expected persistent or reset_per_sentence)"
            ))),
        }
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adadelta" => Ok(OptimizerKind::Adadelta),
            "sgd" => Ok(OptimizerKind::Sgd),
            _ => Err(Error::Config(format!("unknown optimizer '{s}' (expected adadelta or sgd)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub cell: CellKind,
    pub embed_dim: usize,
    pub hidden: usize,
    pub slot_dim: usize,
    pub slot_count: usize,
    /// Odd window width; 3 means the word and one neighbour each side.
    pub window_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub memory_policy: MemoryPolicy,
    /// Value every memory entry starts from.
    pub memory_init: f64,
    pub optimizer: OptimizerKind,
    pub rho: f64,
    pub eps: f64,
    pub learning_rate: f64,
    pub clip: bool,
    pub clip_norm: f64,
    /// Probability of replacing a singleton training word with the unknown token.
    pub unk_prob: f64,
    pub train_path: Option<PathBuf>,
    pub test_path: Option<PathBuf>,
    /// Held-out set used to pick the best epoch.
    pub dev_path: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Used when no training file is given.
    pub synth: SynthConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            cell: CellKind::RnnEm,
            embed_dim: 100,
            hidden: 100,
            slot_dim: 40,
            slot_count: 8,
            window_size: 3,
            epochs: 50,
            seed: 1,
            memory_policy: MemoryPolicy::Persistent,
            memory_init: 0.1,
            optimizer: OptimizerKind::Adadelta,
            rho: crate::optim::DEFAULT_RHO,
            eps: crate::optim::DEFAULT_EPS,
            learning_rate: 0.05,
            clip: false,
            clip_norm: 5.0,
            unk_prob: 0.5,
            train_path: None,
            test_path: None,
            dev_path: None,
            out_dir: PathBuf::from("runs/default"),
            synth: SynthConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.embed_dim == 0 || self.hidden == 0 {
            return bad("embed_dim and hidden must be positive".into());
        }
        if self.cell.uses_memory() && (self.slot_dim == 0 || self.slot_count == 0) {
            return bad("slot_dim and slot_count must be positive for the memory cell".into());
        }
        if self.window_size.is_multiple_of(2) {
            return bad(format!("window_size must be odd, got {}", self.window_size));
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.unk_prob) {
            return bad(format!("unk_prob must lie in [0, 1], got {}", self.unk_prob));
        }
        if !self.memory_init.is_finite() {
            return bad("memory_init must be finite".into());
        }
        if self.clip && !(self.clip_norm > 0.0) {
            return bad(format!("clip_norm must be positive, got {}", self.clip_norm));
        }
        if self.optimizer == OptimizerKind::Sgd && !(self.learning_rate > 0.0) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.seed > i64::MAX as u64 || self.synth.seed > i64::MAX as u64 {
            return bad("seeds must fit in a signed 64-bit integer".into());
        }
        if self.test_path.is_some() && self.train_path.is_none() {
            return bad("test_path given without train_path".into());
        }
        if self.train_path.is_none() {
            self.synth.validate()?;
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: TrainConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_toml(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }
}
