//! Implementations behind the `confid` binary.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 internal
//! invariant violation (see [`Error::exit_code`]).

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::{MethodVariant, TrainerConfig};
use crate::data::{Dataset, DatasetSpec};
use crate::error::{Error, Result};
use crate::experiment::{aggregate_csv, prepare_dataset, run_sweep, summary_csv, RunSummary, SweepGrid, DEFAULT_LABELED_FRACTION};
use crate::pseudo_label::MappingKind;
use crate::trainer::{metrics_jsonl, Checkpoint, Trainer};

pub const METRICS_FILE: &str = "metrics.jsonl";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const RUNS_FILE: &str = "runs.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

#[derive(Clone, Debug, Default)]
pub struct GenerateArgs {
    /// Dataset spec file; the shipped benchmark when absent.
    pub spec: Option<PathBuf>,
    pub seed: u64,
    /// Overrides the spec file's `labeled_fraction`.
    pub labeled_fraction: Option<f64>,
    pub out: PathBuf,
}

/// Writes the split dataset CSV and returns the number of rows.
pub fn cmd_generate(args: &GenerateArgs) -> Result<usize> {
    let (spec, file_fraction) = match &args.spec {
        Some(path) => DatasetSpec::load(path)?,
        None => (DatasetSpec::desk_default(), None),
    };
    let fraction = args.labeled_fraction.or(file_fraction).unwrap_or(DEFAULT_LABELED_FRACTION);
    let data = prepare_dataset(&spec, fraction, args.seed)?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    data.save(&args.out)?;
    Ok(data.len())
}

/// Command-line overrides applied on top of the config file.
#[derive(Clone, Debug, Default)]
pub struct TrainOverrides {
    pub seed: Option<u64>,
    pub method: Option<MethodVariant>,
    pub tau: Option<f64>,
    pub mapping: Option<MappingKind>,
    pub resample_period: Option<usize>,
    pub resample_labeled: Option<bool>,
    pub resample_unlabeled: Option<bool>,
    pub epochs: Option<usize>,
}

impl TrainOverrides {
    pub fn apply(&self, cfg: &mut TrainerConfig) {
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.method {
            cfg.method = v;
        }
        if let Some(v) = self.tau {
            cfg.tau = v;
        }
        if let Some(v) = self.mapping {
            cfg.mapping = v;
        }
        if let Some(v) = self.resample_period {
            cfg.resample_period = v;
        }
        if let Some(v) = self.resample_labeled {
            cfg.resample_labeled = v;
        }
        if let Some(v) = self.resample_unlabeled {
            cfg.resample_unlabeled = v;
        }
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
    }

    fn is_empty(&self) -> bool {
        self.seed.is_none()
            && self.method.is_none()
            && self.tau.is_none()
            && self.mapping.is_none()
            && self.resample_period.is_none()
            && self.resample_labeled.is_none()
            && self.resample_unlabeled.is_none()
            && self.epochs.is_none()
    }
}

#[derive(Clone, Debug, Default)]
pub struct TrainArgs {
    pub config: Option<PathBuf>,
    pub dataset: PathBuf,
    pub out: PathBuf,
    pub overrides: TrainOverrides,
    /// Continue from this checkpoint; its config wins over file and flags.
    pub resume: Option<PathBuf>,
    /// Stop (and checkpoint) once this many epochs have finished.
    pub halt_after: Option<usize>,
}

/// Config file plus overrides, validated.
pub fn resolve_config(config: Option<&Path>, overrides: &TrainOverrides) -> Result<TrainerConfig> {
    let mut cfg = match config {
        Some(path) => TrainerConfig::load(path)?,
        None => TrainerConfig::default(),
    };
    overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

/// Everything needed to reproduce a run, written before training starts.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config: TrainerConfig,
    pub dataset: PathBuf,
    pub out_dir: PathBuf,
    pub resumed_from: Option<PathBuf>,
    pub started_unix: u64,
    pub finished_unix: Option<u64>,
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl RunManifest {
    fn write(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Invariant(format!("manifest encode: {e}")))?;
        write_file(&dir.join(MANIFEST_FILE), &text)
    }
}

pub fn cmd_train(args: &TrainArgs) -> Result<RunSummary> {
    let data = Dataset::load(&args.dataset)?;
    let mut trainer = match &args.resume {
        Some(path) => {
            if !args.overrides.is_empty() || args.config.is_some() {
                return Err(Error::config("--resume takes its configuration from the checkpoint; drop other config flags"));
            }
            Trainer::resume(Checkpoint::load(path)?, &data)?
        }
        None => Trainer::new(resolve_config(args.config.as_deref(), &args.overrides)?, &data)?,
    };
    create_dir(&args.out)?;
    let mut manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: trainer.config().clone(),
        dataset: args.dataset.clone(),
        out_dir: args.out.clone(),
        resumed_from: args.resume.clone(),
        started_unix: unix_now(),
        finished_unix: None,
    };
    manifest.write(&args.out)?;

    let stop = args.halt_after.unwrap_or(usize::MAX);
    while !trainer.is_finished() && trainer.epoch() < stop {
        trainer.run_epoch()?;
    }
    trainer.checkpoint().save(args.out.join(CHECKPOINT_FILE))?;
    write_file(&args.out.join(METRICS_FILE), &metrics_jsonl(trainer.history()))?;

    let cfg = trainer.config();
    let last = trainer.history().last();
    let summary = RunSummary {
        method: cfg.method,
        seed: cfg.seed,
        tau: cfg.tau,
        mapping: cfg.mapping,
        overall_acc: last.map_or(f64::NAN, |r| r.overall_acc),
        mean_acc: last.map_or(f64::NAN, |r| r.mean_class_acc),
    };
    write_file(&args.out.join(SUMMARY_FILE), &summary_csv(std::slice::from_ref(&summary)))?;
    manifest.finished_unix = Some(unix_now());
    manifest.write(&args.out)?;
    Ok(summary)
}

#[derive(Clone, Debug)]
pub struct SweepArgs {
    pub grid: PathBuf,
    pub out: PathBuf,
    pub jobs: usize,
}

/// Runs the grid and writes `runs.csv` and `aggregate.csv`; returns the aggregated row count.
pub fn cmd_sweep(args: &SweepArgs) -> Result<usize> {
    let mut grid = SweepGrid::load(&args.grid)?;
    if let (Some(spec), Some(dir)) = (&grid.spec, args.grid.parent()) {
        if spec.is_relative() {
            grid.spec = Some(dir.join(spec));
        }
    }
    let (runs, rows) = run_sweep(&grid, args.jobs)?;
    create_dir(&args.out)?;
    write_file(&args.out.join(RUNS_FILE), &summary_csv(&runs))?;
    write_file(&args.out.join(AGGREGATE_FILE), &aggregate_csv(&rows))?;
    Ok(rows.len())
}
