//! Run configuration: a flat key = value text format covering every knob of
//! the pipeline, with CLI overrides applied on top of file values.

use crate::attack::phase1::RatioBase;
use crate::attack::phase2::AdvNetConfig;
use crate::model::ModelConfig;
use crate::pipeline::dataset::LabelScheme;
use crate::text::UposTag;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config file missing: {0}")]
    MissingFile(String),
    #[error("malformed config line {0}: {1}")]
    MalformedLine(usize, String),
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("bad value for {key}: {value:?}")]
    BadValue { key: String, value: String },
}

/// Everything one experiment run needs. Defaults are desk scale: a small
/// model that trains in seconds on one core.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: String,
    /// Empty string means "generate the synthetic corpus".
    pub train_csv: String,
    pub test_csv: String,
    pub label_scheme: LabelScheme,
    pub train_size: usize,
    pub test_size: usize,
    pub out_dir: PathBuf,
    pub seed: u64,

    pub max_len: usize,
    pub embedding_dim: usize,
    pub filters: usize,
    pub kernel_size: usize,
    pub dropout_rate: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub threshold: f64,
    pub freeze_embeddings: bool,
    pub val_split: f64,
    /// Empty string means "seeded random embeddings".
    pub embedding_file: String,
    pub min_count: usize,

    pub fusion_width: usize,
    pub adv_val_split: f64,

    pub pos: Vec<UposTag>,
    pub ratio: u32,
    pub ratio_base: RatioBase,
    pub phase1_reviews: usize,
    pub phase1_replications: usize,
    pub n_source: usize,
    pub attack_replications: usize,
    pub top_k: usize,
    pub best_per_source: bool,

    pub study_reviews: usize,
    pub study_replications: usize,
    pub study_k_words: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: "custom".into(),
            train_csv: String::new(),
            test_csv: String::new(),
            label_scheme: LabelScheme::ZeroOne,
            train_size: 2000,
            test_size: 1000,
            out_dir: PathBuf::from("out"),
            seed: 0,

            max_len: 100,
            embedding_dim: 50,
            filters: 64,
            kernel_size: 5,
            dropout_rate: 0.5,
            lr: 1e-3,
            batch_size: 32,
            max_epochs: 20,
            patience: 3,
            threshold: 0.5,
            freeze_embeddings: false,
            val_split: 0.2,
            embedding_file: String::new(),
            min_count: 1,

            fusion_width: 32,
            adv_val_split: 0.15,

            pos: vec![UposTag::Verb, UposTag::Adj, UposTag::Noun],
            ratio: 10,
            ratio_base: RatioBase::Candidates,
            phase1_reviews: 200,
            phase1_replications: 25,
            n_source: 100,
            attack_replications: 100,
            top_k: 100,
            best_per_source: false,

            study_reviews: 100,
            study_replications: 100,
            study_k_words: 10,
        }
    }
}

pub fn parse_pos_set(value: &str) -> Option<Vec<UposTag>> {
    let tags: Result<Vec<UposTag>, _> =
        value.split('_').map(|t| t.parse::<UposTag>()).collect();
    tags.ok().filter(|t| !t.is_empty())
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|_| ConfigError::MissingFile(path.display().to_string()))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut config = RunConfig::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ConfigError::MalformedLine(i + 1, "expected key = value".into())
            })?;
            config.set(key.trim(), value.trim())?;
        }
        Ok(config)
    }

    /// Set one key from its text form; CLI overrides funnel through here.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = || ConfigError::BadValue { key: key.into(), value: value.into() };
        macro_rules! num {
            () => {
                value.parse().map_err(|_| bad())?
            };
        }
        match key {
            "dataset" => self.dataset = value.to_string(),
            "train_csv" => self.train_csv = value.to_string(),
            "test_csv" => self.test_csv = value.to_string(),
            "label_scheme" => {
                self.label_scheme = LabelScheme::parse(value).ok_or_else(bad)?
            }
            "train_size" => self.train_size = num!(),
            "test_size" => self.test_size = num!(),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "seed" => self.seed = num!(),
            "max_len" => self.max_len = num!(),
            "embedding_dim" => self.embedding_dim = num!(),
            "filters" => self.filters = num!(),
            "kernel_size" => self.kernel_size = num!(),
            "dropout_rate" => self.dropout_rate = num!(),
            "lr" => self.lr = num!(),
            "batch_size" => self.batch_size = num!(),
            "max_epochs" => self.max_epochs = num!(),
            "patience" => self.patience = num!(),
            "threshold" => self.threshold = num!(),
            "freeze_embeddings" => self.freeze_embeddings = num!(),
            "val_split" => self.val_split = num!(),
            "embedding_file" => self.embedding_file = value.to_string(),
            "min_count" => self.min_count = num!(),
            "fusion_width" => self.fusion_width = num!(),
            "adv_val_split" => self.adv_val_split = num!(),
            "pos" => self.pos = parse_pos_set(value).ok_or_else(bad)?,
            "ratio" => self.ratio = num!(),
            "ratio_base" => {
                self.ratio_base = match value {
                    "candidates" => RatioBase::Candidates,
                    "review-length" => RatioBase::ReviewLength,
                    _ => return Err(bad()),
                }
            }
            "phase1_reviews" => self.phase1_reviews = num!(),
            "phase1_replications" => self.phase1_replications = num!(),
            "n_source" => self.n_source = num!(),
            "attack_replications" => self.attack_replications = num!(),
            "top_k" => self.top_k = num!(),
            "best_per_source" => self.best_per_source = num!(),
            "study_reviews" => self.study_reviews = num!(),
            "study_replications" => self.study_replications = num!(),
            "study_k_words" => self.study_k_words = num!(),
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            max_len: self.max_len,
            embedding_dim: self.embedding_dim,
            filters: self.filters,
            kernel_size: self.kernel_size,
            dropout_rate: self.dropout_rate,
            lr: self.lr,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            patience: self.patience,
            threshold: self.threshold,
            seed: self.seed,
            freeze_embeddings: self.freeze_embeddings,
            val_split: self.val_split,
        }
    }

    pub fn adv_net_config(&self) -> AdvNetConfig {
        AdvNetConfig { model: self.model_config(), fusion_width: self.fusion_width }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_and_comments() {
        let cfg = RunConfig::parse(
            "# experiment\nseed = 42\npos = VERB_NOUN\nratio = 5\nlabel_scheme = one-two\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.pos, vec![UposTag::Verb, UposTag::Noun]);
        assert_eq!(cfg.ratio, 5);
        assert_eq!(cfg.label_scheme, LabelScheme::OneTwo);
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(matches!(
            RunConfig::parse("bogus = 1\n"),
            Err(ConfigError::UnknownKey(k)) if k == "bogus"
        ));
    }

    #[test]
    fn malformed_line_rejected() {
        assert!(matches!(
            RunConfig::parse("seed\n"),
            Err(ConfigError::MalformedLine(1, _))
        ));
    }

    #[test]
    fn bad_value_rejected() {
        assert!(matches!(
            RunConfig::parse("ratio = lots\n"),
            Err(ConfigError::BadValue { .. })
        ));
        assert!(RunConfig::parse("pos = NOPE\n").is_err());
    }

    #[test]
    fn overrides_apply_on_top() {
        let mut cfg = RunConfig::parse("seed = 1\n").unwrap();
        cfg.set("seed", "9").unwrap();
        cfg.set("out_dir", "/tmp/run").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.out_dir, PathBuf::from("/tmp/run"));
    }
}
