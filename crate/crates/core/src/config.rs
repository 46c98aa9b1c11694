//! Training configuration and method variants.
//!
//! Configs are read from and written to TOML: top-level `key = value` pairs
//! plus an `[augment]` section. Missing keys take the defaults below, and
//! `confid train --print-config` prints the complete set.

use serde::{Deserialize, Serialize};

use crate::data::AugmentConfig;
use crate::error::{Error, Result};
use crate::model::LrSchedule;
use crate::pseudo_label::{check_tau, MappingKind};

/// The methods and ablations a trainer can run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MethodVariant {
    /// Labeled data only.
    #[serde(rename = "supervised")]
    Supervised,
    /// Fixed-threshold pseudo-labeling, student sees a second weak view.
    #[serde(rename = "pl")]
    PseudoLabel,
    /// Fixed threshold, student sees a strong view.
    #[serde(rename = "fixmatch")]
    FixMatch,
    /// Pseudo-labeling with dynamic thresholds and re-sampling.
    #[serde(rename = "confidpl")]
    ConfidPl,
    /// FixMatch with dynamic thresholds and re-sampling.
    #[default]
    #[serde(rename = "confidmatch")]
    ConfidMatch,
    /// FixMatch with dynamic thresholds only.
    #[serde(rename = "threshold-only")]
    ConfidThresholdOnly,
    /// FixMatch with re-sampling only.
    #[serde(rename = "resample-only")]
    ConfidResampleOnly,
}

impl MethodVariant {
    pub const ALL: [MethodVariant; 7] = [
        MethodVariant::Supervised,
        MethodVariant::PseudoLabel,
        MethodVariant::FixMatch,
        MethodVariant::ConfidPl,
        MethodVariant::ConfidMatch,
        MethodVariant::ConfidThresholdOnly,
        MethodVariant::ConfidResampleOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MethodVariant::Supervised => "supervised",
            MethodVariant::PseudoLabel => "pl",
            MethodVariant::FixMatch => "fixmatch",
            MethodVariant::ConfidPl => "confidpl",
            MethodVariant::ConfidMatch => "confidmatch",
            MethodVariant::ConfidThresholdOnly => "threshold-only",
            MethodVariant::ConfidResampleOnly => "resample-only",
        }
    }

    pub fn uses_unlabeled(self) -> bool {
        self != MethodVariant::Supervised
    }

    /// Student branch sees a strong view (otherwise a second weak view).
    pub fn strong_student(self) -> bool {
        !matches!(
            self,
            MethodVariant::Supervised | MethodVariant::PseudoLabel | MethodVariant::ConfidPl
        )
    }

    pub fn dynamic_threshold(self) -> bool {
        matches!(
            self,
            MethodVariant::ConfidPl | MethodVariant::ConfidMatch | MethodVariant::ConfidThresholdOnly
        )
    }

    pub fn resampling(self) -> bool {
        matches!(
            self,
            MethodVariant::ConfidPl | MethodVariant::ConfidMatch | MethodVariant::ConfidResampleOnly
        )
    }
}

impl std::fmt::Display for MethodVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for MethodVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace(['_', ' '], "-");
        MethodVariant::ALL
            .into_iter()
            .find(|m| m.name() == key || m.name().replace('-', "") == key.replace('-', ""))
            .ok_or_else(|| {
                let names: Vec<_> = MethodVariant::ALL.iter().map(|m| m.name()).collect();
                Error::config(format!("unknown method `{s}` (expected one of {})", names.join(", ")))
            })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub method: MethodVariant,
    pub seed: u64,
    pub epochs: usize,
    /// Labeled instances per step.
    pub batch_size: usize,
    /// Unlabeled-to-labeled ratio per step.
    pub mu: usize,
    pub hidden: usize,
    pub lr_max: f64,
    pub lr_min: f64,
    pub momentum: f64,
    pub lambda_s: f64,
    pub lambda_u: f64,
    /// Upper-limit threshold; also the status cutoff for re-sampling.
    pub tau: f64,
    pub mapping: MappingKind,
    /// Epochs between re-sampling table rebuilds.
    pub resample_period: usize,
    pub resample_labeled: bool,
    pub resample_unlabeled: bool,
    pub augment: AugmentConfig,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            method: MethodVariant::ConfidMatch,
            seed: 0,
            epochs: 150,
            batch_size: 24,
            mu: 4,
            hidden: 32,
            lr_max: 0.05,
            lr_min: 0.0005,
            momentum: 0.0,
            lambda_s: 1.0,
            lambda_u: 1.0,
            tau: 0.8,
            mapping: MappingKind::Concave,
            resample_period: 15,
            resample_labeled: true,
            resample_unlabeled: true,
            augment: AugmentConfig::default(),
        }
    }
}

impl TrainerConfig {
    /// Batch sizes and schedule used for the full-size classification runs:
    /// 48 labeled of 240 per batch, 500 epochs, re-sampling every 50.
    pub fn full_scale() -> Self {
        TrainerConfig {
            epochs: 500,
            batch_size: 48,
            mu: 4,
            lr_max: 0.01,
            lr_min: 0.0001,
            resample_period: 50,
            ..Self::default()
        }
    }

    pub fn with_method(mut self, method: MethodVariant) -> Self {
        self.method = method;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_tau(self.tau)?;
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        if self.mu == 0 {
            return Err(Error::config("mu must be at least 1"));
        }
        if self.hidden == 0 {
            return Err(Error::config("hidden must be at least 1"));
        }
        if self.resample_period == 0 {
            return Err(Error::config("resample_period must be at least 1"));
        }
        if !(self.lambda_s >= 0.0 && self.lambda_u >= 0.0) {
            return Err(Error::config("lambda_s and lambda_u must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config("momentum must be in [0, 1)"));
        }
        LrSchedule::new(self.lr_max, self.lr_min, self.epochs.max(1))?;
        self.augment.validate()
    }

    pub fn schedule(&self) -> Result<LrSchedule> {
        LrSchedule::new(self.lr_max, self.lr_min, self.epochs.max(1))
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: TrainerConfig = toml::from_str(s).map_err(|e| Error::config(format!("trainer config: {}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("trainer config serializes")
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Self::from_toml_str(&text)
    }
}
