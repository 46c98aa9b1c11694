//! Class-level confidence based semi-supervised classification.
//!
//! The crate estimates the learning status of every class from the mean
//! confidence of unlabeled predictions assigned to it, turns that estimate
//! into per-class pseudo-label thresholds, and re-samples training data
//! toward classes with low learning status. A small softmax MLP trained on
//! synthetic long-tailed Gaussian mixtures exercises the full pipeline.
//!
//! Module map:
//!
//! - [`model`]: classifier, losses, backpropagation, cosine-annealed SGD
//! - [`pseudo_label`]: class confidence, mapping functions, thresholds, masks
//! - [`resample`]: warm-up factor, instance weights, weighted index draws
//! - [`data`]: dataset generation, stratified splits, augmentation, CSV
//! - [`trainer`]: method variants, epoch loop, metrics, checkpoints
//! - [`experiment`]: multi-seed comparisons and ablation sweeps
//! - [`cli`]: the `generate`, `train` and `sweep` commands

pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod experiment;
pub mod model;
pub mod pseudo_label;
pub mod resample;
pub mod trainer;

pub use config::{MethodVariant, TrainerConfig};
pub use data::{AugmentConfig, Dataset, DatasetSpec, Instance};
pub use error::{Error, Result};
pub use model::{LossValue, LrSchedule, ModelParams, ProbVector};
pub use pseudo_label::{ClassConfidence, ClassConfidenceStats, MappingKind, ThresholdVector};
pub use resample::{SampleWeightTable, WarmFactor};
pub use trainer::{Checkpoint, MetricsRecord, Trainer};
