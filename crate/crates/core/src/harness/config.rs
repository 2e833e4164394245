use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::model::{EmbeddingMode, Features, ModelConfig, Variant};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {msg}")]
    Read { path: String, msg: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    pub topics: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

/// Everything that defines one cross-validated run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub variant: Variant,
    pub features: Features,
    pub folds: usize,
    pub seed: u64,
    pub epochs: usize,
    pub lambda: f64,
    /// Topics attached per tweet.
    pub m: usize,
    /// Words taken from each topic.
    pub p: usize,
    pub d: usize,
    pub d_l: usize,
    pub d_a: usize,
    pub d_s: usize,
    pub learning_rate: f64,
    pub shared_loss: bool,
    /// Examples per optimizer step; gradients are averaged over the window.
    pub accumulation: usize,
    pub validation_fraction: f64,
    pub max_tokens: usize,
    pub embedding: EmbeddingMode,
    pub paths: Paths,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let model = ModelConfig::default();
        Self {
            variant: model.variant,
            features: model.features,
            folds: 5,
            seed: 13,
            epochs: 20,
            lambda: model.lambda,
            m: 5,
            p: 10,
            d: model.d,
            d_l: model.d_l,
            d_a: model.d_a,
            d_s: model.d_s,
            learning_rate: 1e-4,
            shared_loss: true,
            accumulation: 16,
            validation_fraction: 0.1,
            max_tokens: crate::text::DEFAULT_MAX_TOKENS,
            embedding: EmbeddingMode::Trainable,
            paths: Paths::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Read { path: path.display().to_string(), msg: e.to_string() })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.folds < 2 {
            return bad("folds must be at least 2");
        }
        if [self.d, self.d_l, self.d_a, self.d_s, self.m, self.p, self.max_tokens, self.accumulation].contains(&0) {
            return bad("dimensions, m, p, max_tokens and accumulation must be positive");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad("learning_rate must be a nonnegative number");
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return bad("lambda must be a nonnegative number");
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad("validation_fraction must lie in [0, 1)");
        }
        if self.embedding == EmbeddingMode::File && self.paths.embeddings.is_none() {
            return bad("embedding = \"file\" needs paths.embeddings");
        }
        Ok(())
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            variant: self.variant,
            features: self.features,
            d: self.d,
            d_l: self.d_l,
            d_a: self.d_a,
            d_s: self.d_s,
            lambda: self.lambda,
            shared_loss: self.shared_loss,
            embedding: self.embedding,
        }
    }
}
