//! One-hidden-layer softmax classifier with hand-written backpropagation.
//!
//! The network computes `softmax(W2 · relu(W1 · x + b1) + b2)`. Cross-entropy
//! terms are always evaluated from logits through a max-shifted log-sum-exp,
//! never by re-logging a probability vector.
//!
//! The training objective is `λ_s · ℓ_s + λ_u · ℓ_u` where `ℓ_s` is the mean
//! cross-entropy over the labeled batch and `ℓ_u` sums the pseudo-label
//! cross-entropy of every unlabeled instance that passes its class threshold,
//! divided by the full unlabeled batch size.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pseudo_label::{pseudo_label_mask, ThresholdVector};

/// A predictive distribution over the classes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbVector(Vec<f64>);

const PROB_SUM_TOL: f64 = 1e-9;

impl ProbVector {
    /// Validates entries in `[0, 1]` summing to one.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::invalid("probability vector is empty"));
        }
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::invalid(format!("probability outside [0, 1]: {probs:?}")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::invalid(format!("probabilities sum to {sum}")));
        }
        Ok(ProbVector(probs))
    }

    /// Numerically stable softmax.
    pub fn from_logits(logits: &[f64]) -> Self {
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        ProbVector(exps.into_iter().map(|e| e / total).collect())
    }

    pub fn uniform(classes: usize) -> Self {
        ProbVector(vec![1.0 / classes as f64; classes])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the largest entry, ties going to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate().skip(1) {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }

    /// Largest entry, the instance-level confidence.
    pub fn max(&self) -> f64 {
        self.0[self.argmax()]
    }
}

/// A non-negative loss in nats.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct LossValue(f64);

impl LossValue {
    pub const ZERO: LossValue = LossValue(0.0);

    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::Invariant(format!("loss must be finite and >= 0, got {value}")));
        }
        Ok(LossValue(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Parameters of the classifier. Matrices are stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    d_in: usize,
    hidden: usize,
    classes: usize,
    /// `[hidden × d_in]`
    pub w1: Vec<f64>,
    /// `[hidden]`
    pub b1: Vec<f64>,
    /// `[classes × hidden]`
    pub w2: Vec<f64>,
    /// `[classes]`
    pub b2: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(d_in: usize, hidden: usize, classes: usize) -> Self {
        ModelParams {
            d_in,
            hidden,
            classes,
            w1: vec![0.0; hidden * d_in],
            b1: vec![0.0; hidden],
            w2: vec![0.0; classes * hidden],
            b2: vec![0.0; classes],
        }
    }

    /// Centered uniform initialization with half-width `1/sqrt(fan_in)` per layer.
    pub fn init<R: Rng + ?Sized>(d_in: usize, hidden: usize, classes: usize, rng: &mut R) -> Result<Self> {
        if d_in == 0 || hidden == 0 || classes < 2 {
            return Err(Error::config(format!(
                "model dimensions must be d_in >= 1, hidden >= 1, classes >= 2 (got {d_in}, {hidden}, {classes})"
            )));
        }
        let mut p = Self::zeros(d_in, hidden, classes);
        let a1 = 1.0 / (d_in as f64).sqrt();
        let a2 = 1.0 / (hidden as f64).sqrt();
        p.w1.iter_mut().for_each(|w| *w = rng.random_range(-a1..a1));
        p.b1.iter_mut().for_each(|w| *w = rng.random_range(-a1..a1));
        p.w2.iter_mut().for_each(|w| *w = rng.random_range(-a2..a2));
        p.b2.iter_mut().for_each(|w| *w = rng.random_range(-a2..a2));
        Ok(p)
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn num_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// All parameters in the order `w1, b1, w2, b2`.
    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.w1.iter().chain(&self.b1).chain(&self.w2).chain(&self.b2)
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w1
            .iter_mut()
            .chain(self.b1.iter_mut())
            .chain(self.w2.iter_mut())
            .chain(self.b2.iter_mut())
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }

    fn same_shape(&self, other: &ModelParams) -> bool {
        self.d_in == other.d_in && self.hidden == other.hidden && self.classes == other.classes
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d_in {
            return Err(Error::config(format!(
                "feature vector has {} entries, model expects {}",
                x.len(),
                self.d_in
            )));
        }
        Ok(())
    }

    /// Hidden pre-activations `W1 · x + b1`.
    pub fn hidden_preactivation(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.layer1(x))
    }

    fn layer1(&self, x: &[f64]) -> Vec<f64> {
        self.w1
            .chunks_exact(self.d_in)
            .zip(&self.b1)
            .map(|(row, b)| row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + b)
            .collect()
    }

    fn activations(&self, x: &[f64]) -> Activations {
        let pre = self.layer1(x);
        let hidden: Vec<f64> = pre.iter().map(|&a| a.max(0.0)).collect();
        let logits = self
            .w2
            .chunks_exact(self.hidden)
            .zip(&self.b2)
            .map(|(row, b)| row.iter().zip(&hidden).map(|(w, h)| w * h).sum::<f64>() + b)
            .collect();
        Activations { pre, hidden, logits }
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.activations(x).logits)
    }

    /// Accumulates `weight · ∂CE(target, softmax(z(x)))/∂θ` into `grad` and
    /// returns the unweighted cross-entropy.
    fn backprop_into(&self, x: &[f64], target: usize, weight: f64, grad: &mut ModelParams) -> f64 {
        let act = self.activations(x);
        let probs = ProbVector::from_logits(&act.logits);
        let ce = cross_entropy_from_logits(&act.logits, target);

        let dz: Vec<f64> = probs
            .as_slice()
            .iter()
            .enumerate()
            .map(|(k, p)| weight * (p - if k == target { 1.0 } else { 0.0 }))
            .collect();

        let mut dh = vec![0.0; self.hidden];
        for (k, &dzk) in dz.iter().enumerate() {
            grad.b2[k] += dzk;
            let row = k * self.hidden;
            for j in 0..self.hidden {
                grad.w2[row + j] += dzk * act.hidden[j];
                dh[j] += self.w2[row + j] * dzk;
            }
        }
        for j in 0..self.hidden {
            if act.pre[j] <= 0.0 {
                continue;
            }
            let da = dh[j];
            grad.b1[j] += da;
            let row = j * self.d_in;
            for (i, xi) in x.iter().enumerate() {
                grad.w1[row + i] += da * xi;
            }
        }
        ce
    }
}

struct Activations {
    pre: Vec<f64>,
    hidden: Vec<f64>,
    logits: Vec<f64>,
}

/// `-log softmax(z)[target]` via log-sum-exp.
pub fn cross_entropy_from_logits(logits: &[f64], target: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    (lse - logits[target]).max(0.0)
}

pub fn forward(params: &ModelParams, x: &[f64]) -> Result<ProbVector> {
    Ok(ProbVector::from_logits(&params.logits(x)?))
}

fn check_label(params: &ModelParams, label: usize) -> Result<()> {
    if label >= params.classes {
        return Err(Error::invalid(format!(
            "label {label} out of range for {} classes",
            params.classes
        )));
    }
    Ok(())
}

/// Mean cross-entropy of the labeled batch. Augmentation is the caller's job.
pub fn supervised_loss(params: &ModelParams, batch: &[(Vec<f64>, usize)]) -> Result<LossValue> {
    if batch.is_empty() {
        return Err(Error::invalid("supervised loss of an empty batch"));
    }
    let mut total = 0.0;
    for (x, y) in batch {
        check_label(params, *y)?;
        total += cross_entropy_from_logits(&params.logits(x)?, *y);
    }
    LossValue::new(total / batch.len() as f64)
}

fn check_unlabeled(weak_probs: &[ProbVector], strong: &[Vec<f64>], thresholds: &ThresholdVector, classes: usize) -> Result<()> {
    if weak_probs.len() != strong.len() {
        return Err(Error::invalid(format!(
            "{} weak predictions but {} strong views",
            weak_probs.len(),
            strong.len()
        )));
    }
    if thresholds.len() != classes {
        return Err(Error::invalid(format!(
            "{} thresholds for {classes} classes",
            thresholds.len()
        )));
    }
    if let Some(p) = weak_probs.iter().find(|p| p.len() != classes) {
        return Err(Error::invalid(format!("weak prediction has {} classes, expected {classes}", p.len())));
    }
    Ok(())
}

/// Thresholded pseudo-label cross-entropy.
///
/// Returns the loss (sum over kept instances divided by the full batch
/// length) and the number of kept instances. `weak_probs` act as constants.
pub fn unsupervised_loss(
    params: &ModelParams,
    weak_probs: &[ProbVector],
    strong_features: &[Vec<f64>],
    thresholds: &ThresholdVector,
) -> Result<(LossValue, usize)> {
    check_unlabeled(weak_probs, strong_features, thresholds, params.classes)?;
    if weak_probs.is_empty() {
        return Ok((LossValue::ZERO, 0));
    }
    let mask = pseudo_label_mask(weak_probs, thresholds);
    let mut total = 0.0;
    let mut used = 0;
    for (m, x) in mask.iter().zip(strong_features) {
        if m.keep {
            total += cross_entropy_from_logits(&params.logits(x)?, m.label);
            used += 1;
        }
    }
    Ok((LossValue::new(total / weak_probs.len() as f64)?, used))
}

pub fn total_loss(supervised: LossValue, unsupervised: LossValue, lambda_s: f64, lambda_u: f64) -> LossValue {
    LossValue(lambda_s * supervised.0 + lambda_u * unsupervised.0)
}

/// Loss terms and gradient of one optimization step.
#[derive(Clone, Debug)]
pub struct Objective {
    pub supervised: LossValue,
    pub unsupervised: LossValue,
    pub total: LossValue,
    /// Unlabeled instances that passed their threshold.
    pub used: usize,
    pub grad: ModelParams,
}

/// Evaluates the joint objective and its exact gradient in one pass.
///
/// Masked-out unlabeled instances never touch the gradient. An empty
/// unlabeled batch contributes a zero loss.
#[allow(clippy::too_many_arguments)]
pub fn objective(
    params: &ModelParams,
    labeled: &[(Vec<f64>, usize)],
    weak_probs: &[ProbVector],
    strong_features: &[Vec<f64>],
    thresholds: &ThresholdVector,
    lambda_s: f64,
    lambda_u: f64,
) -> Result<Objective> {
    if labeled.is_empty() {
        return Err(Error::invalid("supervised loss of an empty batch"));
    }
    if lambda_s < 0.0 || lambda_u < 0.0 {
        return Err(Error::invalid("loss weights must be non-negative"));
    }
    check_unlabeled(weak_probs, strong_features, thresholds, params.classes)?;

    let mut grad = ModelParams::zeros(params.d_in, params.hidden, params.classes);
    let ws = lambda_s / labeled.len() as f64;
    let mut sup = 0.0;
    for (x, y) in labeled {
        check_label(params, *y)?;
        params.check_input(x)?;
        sup += params.backprop_into(x, *y, ws, &mut grad);
    }
    let supervised = LossValue::new(sup / labeled.len() as f64)?;

    let mut unsup = 0.0;
    let mut used = 0;
    if !weak_probs.is_empty() {
        let wu = lambda_u / weak_probs.len() as f64;
        let mask = pseudo_label_mask(weak_probs, thresholds);
        for (m, x) in mask.iter().zip(strong_features) {
            if !m.keep {
                continue;
            }
            params.check_input(x)?;
            used += 1;
            unsup += if lambda_u == 0.0 {
                cross_entropy_from_logits(&params.logits(x)?, m.label)
            } else {
                params.backprop_into(x, m.label, wu, &mut grad)
            };
        }
        unsup /= weak_probs.len() as f64;
    }
    let unsupervised = LossValue::new(unsup)?;

    Ok(Objective {
        supervised,
        unsupervised,
        total: total_loss(supervised, unsupervised, lambda_s, lambda_u),
        used,
        grad,
    })
}

/// Gradient of `λ_s · ℓ_s + λ_u · ℓ_u` with respect to every parameter.
pub fn gradient(
    params: &ModelParams,
    labeled: &[(Vec<f64>, usize)],
    weak_probs: &[ProbVector],
    strong_features: &[Vec<f64>],
    thresholds: &ThresholdVector,
    lambda_s: f64,
    lambda_u: f64,
) -> Result<ModelParams> {
    objective(params, labeled, weak_probs, strong_features, thresholds, lambda_s, lambda_u).map(|o| o.grad)
}

/// Cosine-annealed learning rate, stepped once per epoch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub lr_max: f64,
    pub lr_min: f64,
    pub total_epochs: usize,
}

impl LrSchedule {
    pub fn new(lr_max: f64, lr_min: f64, total_epochs: usize) -> Result<Self> {
        if !(lr_min > 0.0 && lr_min <= lr_max) {
            return Err(Error::config(format!(
                "learning rates must satisfy 0 < lr_min <= lr_max (got {lr_min}, {lr_max})"
            )));
        }
        if total_epochs == 0 {
            return Err(Error::config("schedule needs at least one epoch"));
        }
        Ok(LrSchedule { lr_max, lr_min, total_epochs })
    }

    /// `lr_min + ½(lr_max − lr_min)(1 + cos(π·epoch/total))`, saturating at `lr_min`.
    pub fn lr(&self, epoch: usize) -> f64 {
        let t = epoch.min(self.total_epochs) as f64 / self.total_epochs as f64;
        self.lr_min + 0.5 * (self.lr_max - self.lr_min) * (1.0 + (std::f64::consts::PI * t).cos())
    }
}

/// Plain gradient step `params − lr(epoch) · grad`.
pub fn sgd_step(params: &ModelParams, grad: &ModelParams, epoch: usize, schedule: &LrSchedule) -> ModelParams {
    let mut next = params.clone();
    apply_update(&mut next, grad, schedule.lr(epoch));
    next
}

/// `params -= lr · grad`, coordinate-wise.
pub fn apply_update(params: &mut ModelParams, grad: &ModelParams, lr: f64) {
    debug_assert!(params.same_shape(grad));
    for (p, g) in params.values_mut().zip(grad.values()) {
        *p -= lr * g;
    }
}

/// SGD with optional heavy-ball momentum. With zero momentum this is exactly [`apply_update`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sgd {
    pub momentum: f64,
    velocity: Option<ModelParams>,
}

impl Sgd {
    pub fn new(momentum: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::config(format!("momentum must be in [0, 1), got {momentum}")));
        }
        Ok(Sgd { momentum, velocity: None })
    }

    pub fn step(&mut self, params: &mut ModelParams, grad: &ModelParams, lr: f64) {
        if self.momentum == 0.0 {
            apply_update(params, grad, lr);
            return;
        }
        let v = self.velocity.get_or_insert_with(|| ModelParams::zeros(grad.d_in, grad.hidden, grad.classes));
        for (vi, g) in v.values_mut().zip(grad.values()) {
            *vi = self.momentum * *vi + g;
        }
        apply_update(params, v, lr);
    }
}
