//! TOML run configuration.
//!
//! ```toml
//! output_dir = "runs/sst2"
//!
//! [data]
//! train = "data/train.jsonl"
//! test = "data/test.jsonl"
//! lm_corpus = "data/reference.txt"   # or lm_model = "lm/model.bin"
//!
//! [lm]
//! order = 5
//! min_count = 1
//!
//! [prune]            # keep_fraction, quality_share, m, beta, mode, ...
//! [sim]              # strategy, iterations, label_fraction, feature_dim, [sim.train]
//!
//! [run]
//! modes = ["active_prune", "random"]
//! seeds = [1, 2, 3]
//!
//! [scorer]
//! kind = "mock"      # or "http" with url = "http://host:port/score"
//! task = "sentiment"
//! ```
//!
//! Relative paths resolve against the directory holding the config file.
//! `ACTIVEPRUNE_SCORER_URL` replaces `scorer.url` when set.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::al_sim::SimConfig;
use crate::prune::{PruneConfig, PruneMode};
use crate::quality::{PromptTemplate, RetryPolicy, ScoringOptions, TaskType};

pub const SCORER_URL_ENV: &str = "ACTIVEPRUNE_SCORER_URL";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {source}")]
    Parse {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("{what} path does not exist: {path}")]
    MissingPath { what: &'static str, path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataPaths {
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    /// Reference corpus for training the language model, one sentence per line.
    pub lm_corpus: Option<PathBuf>,
    /// Pre-trained binary model; takes precedence over `lm_corpus`.
    pub lm_model: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LmSettings {
    pub order: usize,
    pub min_count: u32,
}

impl Default for LmSettings {
    fn default() -> Self {
        LmSettings { order: 5, min_count: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSettings {
    pub modes: Vec<PruneMode>,
    pub seeds: Vec<u64>,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            modes: vec![PruneMode::ActivePrune, PruneMode::Random],
            seeds: vec![1, 2, 3],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorerKind {
    #[default]
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScorerSettings {
    pub kind: ScorerKind,
    pub url: Option<String>,
    pub task: TaskType,
    pub timeout_ms: u64,
    pub parallelism: usize,
    pub retry_attempts: u32,
    pub retry_backoff_ms: u64,
    /// Prompt template file with `{TEXT}` and `{TASK}` placeholders.
    pub template: Option<PathBuf>,
}

impl Default for ScorerSettings {
    fn default() -> Self {
        ScorerSettings {
            kind: ScorerKind::Mock,
            url: None,
            task: TaskType::Sentiment,
            timeout_ms: 30_000,
            parallelism: 4,
            retry_attempts: 3,
            retry_backoff_ms: 250,
            template: None,
        }
    }
}

impl ScorerSettings {
    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }

    pub fn scoring_options(&self) -> Result<ScoringOptions, ConfigError> {
        let template = match &self.template {
            Some(p) => PromptTemplate::from_file(p).map_err(|e| ConfigError::Invalid(e.to_string()))?,
            None => PromptTemplate::default(),
        };
        Ok(ScoringOptions {
            parallelism: self.parallelism,
            retry: RetryPolicy {
                attempts: self.retry_attempts,
                initial_backoff: Duration::from_millis(self.retry_backoff_ms),
            },
            template,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub data: DataPaths,
    pub lm: LmSettings,
    pub prune: PruneConfig,
    pub sim: SimConfig,
    pub run: RunSettings,
    pub scorer: ScorerSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            output_dir: PathBuf::from("runs"),
            data: DataPaths::default(),
            lm: LmSettings::default(),
            prune: PruneConfig::default(),
            sim: SimConfig::default(),
            run: RunSettings::default(),
            scorer: ScorerSettings::default(),
        }
    }
}

fn resolve(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Read `path`, resolve relative paths against its directory and apply
    /// the scorer URL override from the environment.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml(&text, path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.data.train,
            &mut cfg.data.test,
            &mut cfg.data.lm_corpus,
            &mut cfg.data.lm_model,
            &mut cfg.scorer.template,
        ] {
            resolve(base, p);
        }
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        cfg.apply_env();
        Ok(cfg)
    }

    pub fn apply_env(&mut self) {
        if let Ok(url) = std::env::var(SCORER_URL_ENV) {
            if !url.is_empty() {
                self.scorer.url = Some(url);
            }
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Checks everything that can be checked without loading data.
    /// `needs_sim_data` additionally requires the train/test sets and an LM
    /// source to exist.
    pub fn validate(&self, needs_sim_data: bool) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.run.seeds.is_empty() {
            return invalid("run.seeds must not be empty".into());
        }
        if self.run.modes.is_empty() {
            return invalid("run.modes must not be empty".into());
        }
        if self.sim.iterations == 0 {
            return invalid("sim.iterations must be >= 1".into());
        }
        if !(self.sim.label_fraction > 0.0 && self.sim.label_fraction <= 1.0) {
            return invalid(format!("sim.label_fraction must be in (0, 1], got {}", self.sim.label_fraction));
        }
        if !(1..=crate::ngram::MAX_ORDER).contains(&self.lm.order) {
            return invalid(format!("order must be 1..5, got {}", self.lm.order));
        }
        if self.lm.min_count == 0 {
            return invalid("lm.min_count must be >= 1".into());
        }
        self.prune.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        crate::al_sim::FeatureHasher::new(self.sim.feature_dim).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.scorer.kind == ScorerKind::Http && self.scorer.url.is_none() {
            return invalid(format!("scorer.kind = \"http\" needs scorer.url or {SCORER_URL_ENV}"));
        }
        if let Some(t) = &self.scorer.template {
            must_exist("scorer.template", t)?;
        }
        if needs_sim_data {
            let train = self.data.train.as_ref().ok_or(ConfigError::Invalid("data.train is required".into()))?;
            let test = self.data.test.as_ref().ok_or(ConfigError::Invalid("data.test is required".into()))?;
            must_exist("data.train", train)?;
            must_exist("data.test", test)?;
            match (&self.data.lm_model, &self.data.lm_corpus) {
                (Some(m), _) => must_exist("data.lm_model", m)?,
                (None, Some(c)) => must_exist("data.lm_corpus", c)?,
                (None, None) => return invalid("one of data.lm_model or data.lm_corpus is required".into()),
            }
        }
        Ok(())
    }
}

fn must_exist(what: &'static str, path: &Path) -> Result<(), ConfigError> {
    if path.exists() {
        Ok(())
    } else {
        Err(ConfigError::MissingPath {
            what,
            path: path.to_path_buf(),
        })
    }
}
