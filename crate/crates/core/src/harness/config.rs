use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifier::{MatchMode, Regularizer};
use crate::dga::{Modulation, PositionPool};
use crate::encoder::TokenizeOptions;
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::numeric::{AdamConfig, Real};

/// Every knob of a run. Config files use the same kebab-case keys as the
/// command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct RunConfig {
    /// Gaussian window size `D`.
    pub window: usize,
    /// Number of attention steps `T`.
    pub steps: usize,
    pub attention: usize,
    pub hidden: usize,
    pub layers: usize,
    /// Defaults to `hidden`.
    pub mlp_hidden: Option<usize>,
    pub max_len: usize,

    pub vocab: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub train: Option<PathBuf>,
    pub valid: Option<PathBuf>,
    pub test: Option<PathBuf>,
    /// Precomputed token vectors. A `{split}` placeholder is replaced by the
    /// split name (`train`, `valid`, `test`).
    pub embeddings_file: Option<String>,

    pub learning_rate: Real,
    pub beta1: Real,
    pub beta2: Real,
    pub adam_epsilon: Real,
    pub weight_decay: Real,
    pub l2_norm_exact: bool,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,

    pub no_global: bool,
    pub no_detail: bool,
    pub no_gaussian: bool,
    pub mean_pool_position: bool,
    pub log_mask: bool,
    pub single_cls: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            window: 4,
            steps: 4,
            attention: 200,
            hidden: 64,
            layers: 2,
            mlp_hidden: None,
            max_len: 128,
            vocab: None,
            labels: None,
            train: None,
            valid: None,
            test: None,
            embeddings_file: None,
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            weight_decay: 0.0,
            l2_norm_exact: false,
            batch_size: 32,
            max_epochs: 30,
            patience: 3,
            seed: 0,
            no_global: false,
            no_detail: false,
            no_gaussian: false,
            mean_pool_position: false,
            log_mask: false,
            single_cls: false,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> std::result::Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|m| Error::format(path, m))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("window", self.window),
            ("steps", self.steps),
            ("attention", self.attention),
            ("hidden", self.hidden),
            ("layers", self.layers),
            ("batch-size", self.batch_size),
            ("max-epochs", self.max_epochs),
            ("mlp-hidden", self.mlp_hidden.unwrap_or(1)),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Input(format!("{name} must be at least 1")));
            }
        }
        if self.no_global && self.no_detail {
            return Err(Error::Input("no-global and no-detail cannot both be set".into()));
        }
        if self.max_len < crate::encoder::tokenize::MIN_MAX_LEN {
            return Err(Error::Input(format!("max-len must be at least {}", crate::encoder::tokenize::MIN_MAX_LEN)));
        }
        if !(self.learning_rate > 0.0) || !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Input("learning rate must be positive and betas in [0, 1)".into()));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Input("weight-decay must be non-negative".into()));
        }
        Ok(())
    }

    pub fn modulation(&self) -> Modulation {
        if self.no_gaussian {
            Modulation::Disabled
        } else if self.log_mask {
            Modulation::LogDomain
        } else {
            Modulation::Multiplicative
        }
    }

    pub fn match_mode(&self) -> MatchMode {
        if self.no_global {
            MatchMode::NoGlobal
        } else if self.no_detail {
            MatchMode::NoDetail
        } else {
            MatchMode::Full
        }
    }

    pub fn regularizer(&self) -> Regularizer {
        if self.l2_norm_exact {
            Regularizer::ExactL2
        } else {
            Regularizer::SquaredL2
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.adam_epsilon,
        }
    }

    pub fn tokenize_options(&self) -> TokenizeOptions {
        TokenizeOptions { max_len: self.max_len, single_cls: self.single_cls }
    }

    pub fn model_config(&self, vocab_size: usize, classes: usize, external_dim: Option<usize>) -> ModelConfig {
        ModelConfig {
            vocab_size,
            hidden: self.hidden,
            layers: self.layers,
            attention: self.attention,
            window: self.window,
            steps: self.steps,
            classes,
            mlp_hidden: self.mlp_hidden.unwrap_or(self.hidden),
            modulation: self.modulation(),
            position_pool: if self.mean_pool_position { PositionPool::Mean } else { PositionPool::Sum },
            match_mode: self.match_mode(),
            external_dim,
        }
    }

    /// Embedding file path for `split`, if external embeddings are enabled.
    pub fn embeddings_for(&self, split: &str) -> Option<PathBuf> {
        self.embeddings_file.as_ref().map(|t| PathBuf::from(t.replace("{split}", split)))
    }
}
