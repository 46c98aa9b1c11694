//! Multi-seed runs and ablation sweeps.
//!
//! A seed fixes both the generated population/split and the training
//! generator, so every `(config, seed)` pair is reproducible on its own and
//! independent runs can execute on a worker pool.

use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{MethodVariant, TrainerConfig};
use crate::data::{generate, split, Dataset, DatasetSpec};
use crate::error::{Error, Result};
use crate::pseudo_label::MappingKind;
use crate::trainer::{train, MetricsRecord};

pub const DEFAULT_LABELED_FRACTION: f64 = 0.1;

/// Population and split drawn from the same seed.
pub fn prepare_dataset(spec: &DatasetSpec, labeled_fraction: f64, seed: u64) -> Result<Dataset> {
    split(&generate(spec, seed)?, labeled_fraction, seed)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub method: MethodVariant,
    pub seed: u64,
    pub tau: f64,
    pub mapping: MappingKind,
    pub overall_acc: f64,
    pub mean_acc: f64,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub summary: RunSummary,
    pub history: Vec<MetricsRecord>,
}

pub fn run_one(config: &TrainerConfig, data: &Dataset) -> Result<RunResult> {
    let out = train(config, data)?;
    let (overall_acc, mean_acc) = out
        .history
        .last()
        .map(|r| (r.overall_acc, r.mean_class_acc))
        .unwrap_or((f64::NAN, f64::NAN));
    Ok(RunResult {
        summary: RunSummary {
            method: config.method,
            seed: config.seed,
            tau: config.tau,
            mapping: config.mapping,
            overall_acc,
            mean_acc,
        },
        history: out.history,
    })
}

/// Runs each config on the dataset of its own seed, on `jobs` worker threads.
/// Results come back in input order.
pub fn run_many(
    configs: &[TrainerConfig],
    spec: &DatasetSpec,
    labeled_fraction: f64,
    jobs: usize,
) -> Result<Vec<RunResult>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::config(format!("worker pool: {e}")))?;
    pool.install(|| {
        configs
            .par_iter()
            .map(|cfg| {
                let data = prepare_dataset(spec, labeled_fraction, cfg.seed)?;
                run_one(cfg, &data)
            })
            .collect()
    })
}

/// `method,seed,overall_acc,mean_acc`
pub fn summary_csv(rows: &[RunSummary]) -> String {
    let mut out = String::from("method,seed,overall_acc,mean_acc\n");
    for r in rows {
        writeln!(out, "{},{},{},{}", r.method, r.seed, r.overall_acc, r.mean_acc).unwrap();
    }
    out
}

/// Grid file: every list is crossed with every other.
///
/// ```toml
/// seeds = [0, 1, 2, 3, 4]
/// methods = ["confidmatch"]
/// tau = [0.75, 0.8, 0.85]
/// mapping = ["concave", "linear", "exponential"]
/// labeled_fraction = 0.1
/// # spec = "bench.toml"   # dataset spec, defaults to the shipped benchmark
///
/// [base]                  # trainer config applied to every cell
/// epochs = 150
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub seeds: Vec<u64>,
    #[serde(default = "default_methods")]
    pub methods: Vec<MethodVariant>,
    #[serde(default = "default_taus")]
    pub tau: Vec<f64>,
    #[serde(default = "default_mappings")]
    pub mapping: Vec<MappingKind>,
    #[serde(default = "default_fraction")]
    pub labeled_fraction: f64,
    #[serde(default)]
    pub spec: Option<PathBuf>,
    #[serde(default)]
    pub base: TrainerConfig,
}

fn default_methods() -> Vec<MethodVariant> {
    vec![MethodVariant::ConfidMatch]
}

fn default_taus() -> Vec<f64> {
    vec![0.8]
}

fn default_mappings() -> Vec<MappingKind> {
    vec![MappingKind::Concave]
}

fn default_fraction() -> f64 {
    DEFAULT_LABELED_FRACTION
}

/// One grid cell, i.e. one aggregated row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub method: MethodVariant,
    pub tau: f64,
    pub mapping: MappingKind,
}

impl SweepGrid {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let grid: SweepGrid = toml::from_str(s).map_err(|e| Error::config(format!("sweep grid: {}", e.message())))?;
        grid.validate()?;
        Ok(grid)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, empty) in [
            ("seeds", self.seeds.is_empty()),
            ("methods", self.methods.is_empty()),
            ("tau", self.tau.is_empty()),
            ("mapping", self.mapping.is_empty()),
        ] {
            if empty {
                return Err(Error::config(format!("sweep grid: `{name}` is empty")));
            }
        }
        self.base.validate()?;
        for cfg in self.configs() {
            cfg.validate()?;
        }
        Ok(())
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for &method in &self.methods {
            for &tau in &self.tau {
                for &mapping in &self.mapping {
                    cells.push(Cell { method, tau, mapping });
                }
            }
        }
        cells
    }

    /// Cell-major, seed-minor.
    pub fn configs(&self) -> Vec<TrainerConfig> {
        self.cells()
            .into_iter()
            .flat_map(|cell| {
                self.seeds.iter().map(move |&seed| TrainerConfig {
                    method: cell.method,
                    tau: cell.tau,
                    mapping: cell.mapping,
                    seed,
                    ..self.base.clone()
                })
            })
            .collect()
    }

    pub fn dataset_spec(&self) -> Result<DatasetSpec> {
        match &self.spec {
            Some(path) => DatasetSpec::load(path).map(|(s, _)| s),
            None => Ok(DatasetSpec::desk_default()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggregateRow {
    pub cell: Cell,
    pub runs: usize,
    pub overall: MeanStd,
    pub mean_acc: MeanStd,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation, 0 for a single run.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        MeanStd { mean, std }
    }
}

/// Groups runs by cell, preserving first-appearance order.
pub fn aggregate(runs: &[RunSummary]) -> Vec<AggregateRow> {
    let mut cells: Vec<(Cell, Vec<&RunSummary>)> = Vec::new();
    for r in runs {
        let cell = Cell {
            method: r.method,
            tau: r.tau,
            mapping: r.mapping,
        };
        match cells.iter_mut().find(|(c, _)| *c == cell) {
            Some((_, v)) => v.push(r),
            None => cells.push((cell, vec![r])),
        }
    }
    cells
        .into_iter()
        .map(|(cell, rs)| AggregateRow {
            cell,
            runs: rs.len(),
            overall: MeanStd::of(&rs.iter().map(|r| r.overall_acc).collect::<Vec<_>>()),
            mean_acc: MeanStd::of(&rs.iter().map(|r| r.mean_acc).collect::<Vec<_>>()),
        })
        .collect()
}

pub fn aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::from("method,tau,mapping,runs,overall_mean,overall_std,mean_acc_mean,mean_acc_std\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.cell.method, r.cell.tau, r.cell.mapping, r.runs, r.overall.mean, r.overall.std, r.mean_acc.mean, r.mean_acc.std
        )
        .unwrap();
    }
    out
}

pub fn run_sweep(grid: &SweepGrid, jobs: usize) -> Result<(Vec<RunSummary>, Vec<AggregateRow>)> {
    grid.validate()?;
    let spec = grid.dataset_spec()?;
    let results = run_many(&grid.configs(), &spec, grid.labeled_fraction, jobs)?;
    let runs: Vec<RunSummary> = results.into_iter().map(|r| r.summary).collect();
    let rows = aggregate(&runs);
    Ok((runs, rows))
}
