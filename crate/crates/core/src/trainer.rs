//! Training loop, evaluation and per-epoch diagnostics.
//!
//! One epoch runs `⌈N_L / B⌉` steps. Each step takes the next labeled chunk
//! of the shuffled labeled pool, draws `μ` times as many unlabeled indices
//! with replacement from the unlabeled pool, and takes one SGD step on the
//! joint objective. Weak-view predictions of the unlabeled draws feed the
//! class confidence accumulators; at epoch end those yield the thresholds for
//! the next epoch. Every `resample_period` epochs the pools are redrawn from
//! the learning-status weights.
//!
//! The unlabeled true labels are read only for the pseudo-label precision
//! diagnostic.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::TrainerConfig;
use crate::data::{strong_augment, weak_augment, Dataset, Instance};
use crate::error::{Error, Result};
use crate::model::{forward, objective, LrSchedule, ModelParams, ProbVector, Sgd};
use crate::pseudo_label::{
    class_confidence, dynamic_threshold, pseudo_label_mask, ClassConfidence, ClassConfidenceStats, ThresholdVector,
};
use crate::resample::{compute_weights, resample_indices};

/// Diagnostics of one finished epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub epoch: usize,
    pub overall_acc: f64,
    pub mean_class_acc: f64,
    pub per_class_acc: Vec<f64>,
    /// Class-level confidence measured during this epoch; `null` when unobserved.
    pub per_class_p: Vec<Option<f64>>,
    /// Thresholds applied during this epoch.
    pub thresholds: Vec<f64>,
    pub pseudo_label_ratio: f64,
    pub pseudo_label_precision: Option<f64>,
    pub supervised_loss: f64,
    pub unsupervised_loss: f64,
    pub lr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub overall_acc: f64,
    pub mean_class_acc: f64,
    pub per_class_acc: Vec<f64>,
}

/// Overall accuracy and the unweighted mean of per-class accuracies.
pub fn evaluate(params: &ModelParams, test: &[Instance]) -> Result<Evaluation> {
    evaluate_with(params.classes(), test, |x| forward(params, x).map(|p| p.argmax()))
}

/// [`evaluate`] for any predictor.
pub fn evaluate_with<F>(classes: usize, test: &[Instance], mut predict: F) -> Result<Evaluation>
where
    F: FnMut(&[f64]) -> Result<usize>,
{
    if test.is_empty() {
        return Err(Error::config("cannot evaluate on an empty test set"));
    }
    let mut correct = vec![0usize; classes];
    let mut count = vec![0usize; classes];
    for inst in test {
        if inst.label >= classes {
            return Err(Error::config(format!("test label {} out of range", inst.label)));
        }
        count[inst.label] += 1;
        if predict(&inst.features)? == inst.label {
            correct[inst.label] += 1;
        }
    }
    if let Some(c) = count.iter().position(|&n| n == 0) {
        return Err(Error::config(format!("class {c} has no test instances")));
    }
    let per_class_acc: Vec<f64> = correct.iter().zip(&count).map(|(&k, &n)| k as f64 / n as f64).collect();
    Ok(Evaluation {
        overall_acc: correct.iter().sum::<usize>() as f64 / test.len() as f64,
        mean_class_acc: per_class_acc.iter().sum::<f64>() / classes as f64,
        per_class_acc,
    })
}

/// Sample Pearson correlation; `None` when either input has zero variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Correlation between per-class confidence and per-class test accuracy.
///
/// Classes without a confidence estimate are left out; at least three
/// classes must remain.
pub fn confidence_accuracy_correlation(record: &MetricsRecord) -> Result<f64> {
    let (p, acc): (Vec<f64>, Vec<f64>) = record
        .per_class_p
        .iter()
        .zip(&record.per_class_acc)
        .filter_map(|(p, a)| p.map(|p| (p, *a)))
        .unzip();
    if p.len() < 3 {
        return Err(Error::invalid(format!("correlation needs at least 3 observed classes, got {}", p.len())));
    }
    pearson(&p, &acc).ok_or_else(|| Error::invalid("correlation undefined: zero variance"))
}

/// Fraction of `features` whose prediction under `params` passes `thresholds`.
pub fn utilization_ratio(params: &ModelParams, features: &[Vec<f64>], thresholds: &ThresholdVector) -> Result<f64> {
    if features.is_empty() {
        return Ok(0.0);
    }
    let probs = features.iter().map(|x| forward(params, x)).collect::<Result<Vec<_>>>()?;
    let kept = pseudo_label_mask(&probs, thresholds).iter().filter(|m| m.keep).count();
    Ok(kept as f64 / features.len() as f64)
}

const CHECKPOINT_FORMAT: &str = "confid-checkpoint-v1";

/// Everything needed to continue a run bit-identically.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub config: TrainerConfig,
    /// Next epoch to run.
    pub epoch: usize,
    pub params: ModelParams,
    pub optimizer: Sgd,
    pub thresholds: ThresholdVector,
    /// Accumulators of the last finished epoch.
    pub last_stats: ClassConfidenceStats,
    pub labeled_pool: Vec<usize>,
    pub unlabeled_pool: Vec<usize>,
    pub rng: ChaCha8Rng,
    pub history: Vec<MetricsRecord>,
}

impl Checkpoint {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string(self).map_err(|e| Error::Invariant(format!("checkpoint encode: {e}")))?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| Error::data(format!("checkpoint: {e}")))?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::data(format!("unsupported checkpoint format `{}`", ck.format)));
        }
        Ok(ck)
    }
}

pub struct Trainer<'a> {
    config: TrainerConfig,
    data: &'a Dataset,
    schedule: LrSchedule,
    params: ModelParams,
    optimizer: Sgd,
    rng: ChaCha8Rng,
    epoch: usize,
    thresholds: ThresholdVector,
    last_stats: ClassConfidenceStats,
    labeled_pool: Vec<usize>,
    unlabeled_pool: Vec<usize>,
    history: Vec<MetricsRecord>,
}

impl<'a> Trainer<'a> {
    pub fn new(config: TrainerConfig, data: &'a Dataset) -> Result<Self> {
        config.validate()?;
        data.validate()?;
        if data.labeled.is_empty() {
            return Err(Error::data("labeled split is empty"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let params = ModelParams::init(data.d_in, config.hidden, data.classes, &mut rng)?;
        Ok(Trainer {
            schedule: config.schedule()?,
            optimizer: Sgd::new(config.momentum)?,
            thresholds: ThresholdVector::constant(config.tau, data.classes),
            last_stats: ClassConfidenceStats::new(data.classes),
            labeled_pool: (0..data.labeled.len()).collect(),
            unlabeled_pool: (0..data.unlabeled.len()).collect(),
            history: Vec::new(),
            epoch: 0,
            params,
            rng,
            config,
            data,
        })
    }

    pub fn resume(checkpoint: Checkpoint, data: &'a Dataset) -> Result<Self> {
        let Checkpoint {
            config,
            epoch,
            params,
            optimizer,
            thresholds,
            last_stats,
            labeled_pool,
            unlabeled_pool,
            rng,
            history,
            ..
        } = checkpoint;
        config.validate()?;
        data.validate()?;
        if params.d_in() != data.d_in || params.classes() != data.classes {
            return Err(Error::data("checkpoint model does not match dataset dimensions"));
        }
        if labeled_pool.iter().any(|&i| i >= data.labeled.len())
            || unlabeled_pool.iter().any(|&i| i >= data.unlabeled.len())
        {
            return Err(Error::data("checkpoint sampling pools do not match dataset"));
        }
        Ok(Trainer {
            schedule: config.schedule()?,
            config,
            data,
            params,
            optimizer,
            rng,
            epoch,
            thresholds,
            last_stats,
            labeled_pool,
            unlabeled_pool,
            history,
        })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            config: self.config.clone(),
            epoch: self.epoch,
            params: self.params.clone(),
            optimizer: self.optimizer.clone(),
            thresholds: self.thresholds.clone(),
            last_stats: self.last_stats.clone(),
            labeled_pool: self.labeled_pool.clone(),
            unlabeled_pool: self.unlabeled_pool.clone(),
            rng: self.rng.clone(),
            history: self.history.clone(),
        }
    }

    pub fn config(&self) -> &TrainerConfig {
        &self.config
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn is_finished(&self) -> bool {
        self.epoch >= self.config.epochs
    }

    pub fn thresholds(&self) -> &ThresholdVector {
        &self.thresholds
    }

    pub fn history(&self) -> &[MetricsRecord] {
        &self.history
    }

    /// Current labeled and unlabeled sampling pools (indices into the splits).
    pub fn pools(&self) -> (&[usize], &[usize]) {
        (&self.labeled_pool, &self.unlabeled_pool)
    }

    pub fn into_outcome(self) -> TrainOutcome {
        TrainOutcome {
            history: self.history,
            params: self.params,
        }
    }

    /// Runs every remaining epoch.
    pub fn run(&mut self) -> Result<()> {
        while !self.is_finished() {
            self.run_epoch()?;
        }
        Ok(())
    }

    pub fn run_epoch(&mut self) -> Result<&MetricsRecord> {
        if self.is_finished() {
            return Err(Error::invalid("training already finished"));
        }
        let cfg = &self.config;
        let method = cfg.method;
        let data = self.data;
        let lr = self.schedule.lr(self.epoch);

        let mut order = self.labeled_pool.clone();
        order.shuffle(&mut self.rng);

        let mut stats = ClassConfidenceStats::new(data.classes);
        let (mut sup_sum, mut unsup_sum, mut steps) = (0.0, 0.0, 0usize);
        let (mut drawn, mut used, mut correct) = (0usize, 0usize, 0usize);

        for chunk in order.chunks(cfg.batch_size) {
            let labeled: Vec<(Vec<f64>, usize)> = chunk
                .iter()
                .map(|&i| {
                    let inst = &data.labeled[i];
                    (weak_augment(&inst.features, &cfg.augment, &mut self.rng), inst.label)
                })
                .collect();

            let mut weak_probs = Vec::new();
            let mut student = Vec::new();
            if method.uses_unlabeled() && !self.unlabeled_pool.is_empty() {
                let n_u = cfg.mu * chunk.len();
                let picks: Vec<usize> = (0..n_u)
                    .map(|_| self.unlabeled_pool[self.rng.random_range(0..self.unlabeled_pool.len())])
                    .collect();
                for &i in &picks {
                    let x = &data.unlabeled[i].features;
                    let weak = weak_augment(x, &cfg.augment, &mut self.rng);
                    weak_probs.push(forward(&self.params, &weak)?);
                    student.push(if method.strong_student() {
                        strong_augment(x, &cfg.augment, &mut self.rng)
                    } else {
                        weak_augment(x, &cfg.augment, &mut self.rng)
                    });
                }
                stats.update(&weak_probs);
                for (m, &i) in pseudo_label_mask(&weak_probs, &self.thresholds).iter().zip(&picks) {
                    if m.keep {
                        used += 1;
                        if m.label == data.unlabeled[i].label {
                            correct += 1;
                        }
                    }
                }
                drawn += n_u;
            }

            let lambda_u = if method.uses_unlabeled() { cfg.lambda_u } else { 0.0 };
            let obj = objective(
                &self.params,
                &labeled,
                &weak_probs,
                &student,
                &self.thresholds,
                cfg.lambda_s,
                lambda_u,
            )?;
            self.optimizer.step(&mut self.params, &obj.grad, lr);
            sup_sum += obj.supervised.value();
            unsup_sum += obj.unsupervised.value();
            steps += 1;
        }
        if !self.params.is_finite() {
            return Err(Error::Invariant(format!("non-finite parameters after epoch {}", self.epoch)));
        }

        let conf = class_confidence(&stats);
        let next_thresholds = if method.dynamic_threshold() {
            dynamic_threshold(&conf, cfg.tau, cfg.mapping)?
        } else {
            ThresholdVector::constant(cfg.tau, data.classes)
        };

        let finished = self.epoch + 1;
        if method.resampling() && finished.is_multiple_of(cfg.resample_period) && finished < cfg.epochs {
            self.resample(&conf, finished)?;
        }

        let eval = evaluate(&self.params, &data.test)?;
        let record = MetricsRecord {
            epoch: self.epoch,
            overall_acc: eval.overall_acc,
            mean_class_acc: eval.mean_class_acc,
            per_class_acc: eval.per_class_acc,
            per_class_p: conf.0,
            thresholds: self.thresholds.as_slice().to_vec(),
            pseudo_label_ratio: if drawn > 0 { used as f64 / drawn as f64 } else { 0.0 },
            pseudo_label_precision: (used > 0).then(|| correct as f64 / used as f64),
            supervised_loss: sup_sum / steps as f64,
            unsupervised_loss: unsup_sum / steps as f64,
            lr,
        };

        self.thresholds = next_thresholds;
        self.last_stats = stats;
        self.epoch = finished;
        self.history.push(record);
        Ok(self.history.last().expect("just pushed"))
    }

    /// Rebuilds the sampling pools from a fresh weak-view snapshot.
    ///
    /// Labeled instances look up `P_c` by their true class, unlabeled ones by
    /// their predicted class; both use their predicted max-probability.
    fn resample(&mut self, conf: &ClassConfidence, epoch: usize) -> Result<()> {
        let cfg = self.config.clone();
        let data = self.data;
        if cfg.resample_labeled {
            let preds = data
                .labeled
                .iter()
                .map(|inst| {
                    let p = self.weak_prediction(&inst.features)?;
                    Ok((inst.label, p.max()))
                })
                .collect::<Result<Vec<_>>>()?;
            let table = compute_weights(&preds, conf, epoch, cfg.epochs, cfg.tau)?;
            self.labeled_pool = resample_indices(&table, preds.len(), &mut self.rng)?;
        }
        if cfg.resample_unlabeled && !data.unlabeled.is_empty() {
            let preds = data
                .unlabeled
                .iter()
                .map(|inst| {
                    let p = self.weak_prediction(&inst.features)?;
                    Ok((p.argmax(), p.max()))
                })
                .collect::<Result<Vec<_>>>()?;
            let table = compute_weights(&preds, conf, epoch, cfg.epochs, cfg.tau)?;
            self.unlabeled_pool = resample_indices(&table, preds.len(), &mut self.rng)?;
        }
        Ok(())
    }

    fn weak_prediction(&mut self, x: &[f64]) -> Result<ProbVector> {
        let view = weak_augment(x, &self.config.augment, &mut self.rng);
        forward(&self.params, &view)
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub history: Vec<MetricsRecord>,
    pub params: ModelParams,
}

/// Trains from scratch for `config.epochs` epochs.
pub fn train(config: &TrainerConfig, data: &Dataset) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(config.clone(), data)?;
    trainer.run()?;
    Ok(trainer.into_outcome())
}

/// One JSON object per line.
pub fn metrics_jsonl(history: &[MetricsRecord]) -> String {
    let mut out = String::new();
    for rec in history {
        out.push_str(&serde_json::to_string(rec).expect("metrics serialize"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::MethodVariant;
    use crate::data::{generate, split, DatasetSpec};
    use approx::assert_relative_eq;

    fn inst(label: usize) -> Instance {
        Instance {
            id: 0,
            label,
            features: vec![label as f64],
        }
    }

    fn small_data(seed: u64) -> Dataset {
        let spec = DatasetSpec {
            d_in: 4,
            class_counts: vec![60, 40, 25],
            class_scales: vec![0.8, 1.2, 0.8],
            class_means: vec![
                vec![2.0, 0.0, 0.0, 0.0],
                vec![0.0, 2.0, 0.0, 0.0],
                vec![0.0, 0.0, 2.0, 0.0],
            ],
        };
        split(&generate(&spec, seed).unwrap(), 0.2, seed).unwrap()
    }

    fn quick(method: MethodVariant) -> TrainerConfig {
        TrainerConfig {
            epochs: 12,
            batch_size: 8,
            hidden: 8,
            resample_period: 4,
            ..TrainerConfig::default()
        }
        .with_method(method)
    }

    #[test]
    fn evaluate_examples() {
        let test: Vec<Instance> = [0, 0, 0, 0, 0, 0, 0, 0, 1, 1].into_iter().map(inst).collect();
        let e = evaluate_with(2, &test, |x| Ok(x[0] as usize)).unwrap();
        assert_eq!((e.overall_acc, e.mean_class_acc), (1.0, 1.0));
        let e = evaluate_with(2, &test, |_| Ok(0)).unwrap();
        assert_relative_eq!(e.overall_acc, 0.8);
        assert_relative_eq!(e.mean_class_acc, 0.5);
        assert_eq!(e.per_class_acc, vec![1.0, 0.0]);
        assert!(matches!(evaluate_with(3, &test, |_| Ok(0)), Err(Error::Config(_))));
    }

    #[test]
    fn random_predictor_hits_chance() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let test: Vec<Instance> = (0..10_000).map(|i| inst(i % 4)).collect();
        let e = evaluate_with(4, &test, |_| Ok(rng.random_range(0..4))).unwrap();
        assert!((e.overall_acc - 0.25).abs() < 0.02);
    }

    #[test]
    fn pearson_extremes() {
        let a = [0.2, 0.5, 0.9, 0.4];
        assert_relative_eq!(pearson(&a, &a).unwrap(), 1.0, epsilon = 1e-12);
        let b: Vec<f64> = a.iter().map(|v| 3.0 - 2.0 * v).collect();
        assert_relative_eq!(pearson(&a, &b).unwrap(), -1.0, epsilon = 1e-12);
        assert!(pearson(&a, &[1.0; 4]).is_none());
    }

    #[test]
    fn correlation_skips_unobserved_and_needs_three() {
        let mut rec = MetricsRecord {
            epoch: 0,
            overall_acc: 0.0,
            mean_class_acc: 0.0,
            per_class_acc: vec![0.1, 0.5, 0.9, 0.3],
            per_class_p: vec![Some(0.1), Some(0.5), Some(0.9), None],
            thresholds: vec![],
            pseudo_label_ratio: 0.0,
            pseudo_label_precision: None,
            supervised_loss: 0.0,
            unsupervised_loss: 0.0,
            lr: 0.0,
        };
        assert_relative_eq!(confidence_accuracy_correlation(&rec).unwrap(), 1.0, epsilon = 1e-12);
        rec.per_class_p[2] = None;
        assert!(confidence_accuracy_correlation(&rec).is_err());
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let data = small_data(1);
        let cfg = TrainerConfig { epochs: 0, ..quick(MethodVariant::ConfidMatch) };
        let init = Trainer::new(cfg.clone(), &data).unwrap().params().clone();
        let out = train(&cfg, &data).unwrap();
        assert!(out.history.is_empty());
        assert_eq!(out.params, init);
    }

    #[test]
    fn fixmatch_thresholds_stay_constant() {
        let data = small_data(2);
        let out = train(&quick(MethodVariant::FixMatch), &data).unwrap();
        for rec in &out.history {
            assert!(rec.thresholds.iter().all(|&t| t == 0.8));
        }
    }

    #[test]
    fn dynamic_thresholds_start_at_tau_and_stay_in_range() {
        let data = small_data(3);
        let out = train(&quick(MethodVariant::ConfidMatch), &data).unwrap();
        assert!(out.history[0].thresholds.iter().all(|&t| t == 0.8));
        for rec in &out.history {
            assert!(rec.thresholds.iter().all(|&t| (0.2 - 1e-12..=0.8).contains(&t)));
            assert!((0.0..=1.0).contains(&rec.pseudo_label_ratio));
            let mean = rec.per_class_acc.iter().sum::<f64>() / rec.per_class_acc.len() as f64;
            assert!((mean - rec.mean_class_acc).abs() < 1e-12);
        }
    }

    #[test]
    fn supervised_ignores_unlabeled_permutation() {
        let data = small_data(4);
        let mut shuffled = data.clone();
        shuffled.unlabeled.reverse();
        let cfg = quick(MethodVariant::Supervised);
        let a = train(&cfg, &data).unwrap();
        let b = train(&cfg, &shuffled).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.history, b.history);
        assert!(a.history.iter().all(|r| r.pseudo_label_ratio == 0.0));
    }

    #[test]
    fn resampling_rebuilds_pools() {
        let data = small_data(5);
        let mut t = Trainer::new(quick(MethodVariant::ConfidResampleOnly), &data).unwrap();
        let identity: Vec<usize> = (0..data.labeled.len()).collect();
        for _ in 0..3 {
            t.run_epoch().unwrap();
        }
        assert_eq!(t.pools().0, identity.as_slice());
        t.run_epoch().unwrap();
        assert_eq!(t.pools().0.len(), data.labeled.len());
        assert_ne!(t.pools().0, identity.as_slice());
    }

    #[test]
    fn every_variant_trains() {
        let data = small_data(6);
        for m in MethodVariant::ALL {
            let out = train(&quick(m), &data).unwrap();
            assert_eq!(out.history.len(), 12);
            assert!(out.params.is_finite());
        }
    }

    #[test]
    fn resume_matches_uninterrupted() {
        let data = small_data(7);
        let cfg = quick(MethodVariant::ConfidMatch);
        let full = train(&cfg, &data).unwrap();

        let mut t = Trainer::new(cfg, &data).unwrap();
        for _ in 0..5 {
            t.run_epoch().unwrap();
        }
        let json = serde_json::to_string(&t.checkpoint()).unwrap();
        let ck: Checkpoint = serde_json::from_str(&json).unwrap();
        let mut resumed = Trainer::resume(ck, &data).unwrap();
        resumed.run().unwrap();
        let out = resumed.into_outcome();
        assert_eq!(out.params, full.params);
        assert_eq!(metrics_jsonl(&out.history), metrics_jsonl(&full.history));
    }
}
