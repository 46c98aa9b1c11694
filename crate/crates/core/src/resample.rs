//! Learning-status based re-sampling.
//!
//! Instance `i` with predicted confidence `p_i` in a class of confidence `P_c`
//! receives the raw weight
//!
//! ```text
//! 1 − W(e)·P_c·p_i   if P_c > τ
//! 2 − W(e)·P_c·p_i   if P_c ≤ τ
//! ```
//!
//! with the warm-up factor `W(e) = exp(−5 (1 − e/E_max)²)`. Raw weights are
//! floored at [`WEIGHT_FLOOR`] and normalized globally into a categorical
//! distribution from which index lists are drawn with replacement.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pseudo_label::ClassConfidence;

/// Lower bound on raw weights; no instance is ever excluded from sampling.
pub const WEIGHT_FLOOR: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct WarmFactor(f64);

impl WarmFactor {
    pub fn value(self) -> f64 {
        self.0
    }

    /// Bypasses the epoch formula, for tests and callers that hold `W` directly.
    pub fn from_value(w: f64) -> Result<Self> {
        if !(w > 0.0 && w <= 1.0) {
            return Err(Error::invalid(format!("warm factor must be in (0, 1], got {w}")));
        }
        Ok(WarmFactor(w))
    }
}

pub fn warm_factor(epoch: usize, max_epochs: usize) -> Result<WarmFactor> {
    if max_epochs == 0 {
        return Err(Error::invalid("max epoch must be at least 1"));
    }
    if epoch > max_epochs {
        return Err(Error::invalid(format!("epoch {epoch} beyond max epoch {max_epochs}")));
    }
    let r = 1.0 - epoch as f64 / max_epochs as f64;
    Ok(WarmFactor((-5.0 * r * r).exp()))
}

/// Raw re-sampling weight of one instance, floored at [`WEIGHT_FLOOR`].
pub fn instance_weight(class_conf: f64, confidence: f64, warm: WarmFactor, tau: f64) -> f64 {
    let penalty = warm.0 * class_conf * confidence;
    let raw = if class_conf > tau { 1.0 - penalty } else { 2.0 - penalty };
    raw.max(WEIGHT_FLOOR)
}

/// Raw weights and their normalization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleWeightTable {
    pub raw: Vec<f64>,
    pub dist: Vec<f64>,
}

impl SampleWeightTable {
    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }
}

pub fn build_distribution(weights: Vec<f64>) -> Result<SampleWeightTable> {
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::invalid("weights must be finite and non-negative"));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::invalid("at least one weight must be positive"));
    }
    let dist = weights.iter().map(|w| w / total).collect();
    Ok(SampleWeightTable { raw: weights, dist })
}

/// `n` independent draws with replacement from `table.dist`.
pub fn resample_indices<R: Rng + ?Sized>(table: &SampleWeightTable, n: usize, rng: &mut R) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::invalid("must draw at least one index"));
    }
    let sampler = WeightedIndex::new(&table.dist).map_err(|e| Error::invalid(format!("bad distribution: {e}")))?;
    Ok((0..n).map(|_| sampler.sample(rng)).collect())
}

/// Applies the per-instance rule to `(class, confidence)` pairs.
///
/// An instance whose class has no confidence estimate is treated as low
/// status with `P_c = 0`, i.e. raw weight 2.
pub fn compute_weights(
    predictions: &[(usize, f64)],
    conf: &ClassConfidence,
    epoch: usize,
    max_epochs: usize,
    tau: f64,
) -> Result<SampleWeightTable> {
    if predictions.is_empty() {
        return Err(Error::invalid("cannot re-sample an empty dataset"));
    }
    let warm = warm_factor(epoch, max_epochs)?;
    let raw = predictions
        .iter()
        .map(|&(c, p)| {
            if c >= conf.len() {
                return Err(Error::invalid(format!("class {c} out of range")));
            }
            Ok(instance_weight(conf.get(c).unwrap_or(0.0), p, warm, tau))
        })
        .collect::<Result<Vec<_>>>()?;
    build_distribution(raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn warm_factor_examples() {
        assert_eq!(warm_factor(100, 100).unwrap().value(), 1.0);
        assert_relative_eq!(warm_factor(0, 100).unwrap().value(), 0.006737946999085467, epsilon = 1e-15);
        assert_relative_eq!(warm_factor(50, 100).unwrap().value(), (-1.25f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(warm_factor(50, 100).unwrap().value(), 0.2865048, epsilon = 1e-7);
        assert!(warm_factor(101, 100).is_err());
        assert!(warm_factor(0, 0).is_err());
    }

    #[test]
    fn instance_weight_examples() {
        let w1 = WarmFactor::from_value(1.0).unwrap();
        assert_relative_eq!(instance_weight(0.9, 0.95, w1, 0.8), 0.145, epsilon = 1e-15);
        assert_relative_eq!(instance_weight(0.5, 0.6, w1, 0.8), 1.7, epsilon = 1e-15);
        assert_eq!(instance_weight(1.0, 1.0, w1, 0.8), WEIGHT_FLOOR);
        // P_c == τ falls in the low-status branch.
        assert_relative_eq!(instance_weight(0.8, 0.5, w1, 0.8), 1.6, epsilon = 1e-15);
    }

    #[test]
    fn build_distribution_examples() {
        assert_eq!(build_distribution(vec![1.0, 1.0, 2.0]).unwrap().dist, vec![0.25, 0.25, 0.5]);
        assert_eq!(build_distribution(vec![5.0]).unwrap().dist, vec![1.0]);
        assert!(build_distribution(vec![0.0, 0.0]).is_err());
        assert!(build_distribution(vec![]).is_err());
    }

    #[test]
    fn resample_degenerate_and_deterministic() {
        let t = build_distribution(vec![3.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(resample_indices(&t, 5, &mut rng).unwrap(), vec![0; 5]);

        let t = build_distribution(vec![1.0, 2.0, 3.0, 0.5]).unwrap();
        let a = resample_indices(&t, 50, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = resample_indices(&t, 50, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a, b);
        assert!(resample_indices(&t, 0, &mut rng).is_err());
    }

    #[test]
    fn resample_frequency_balanced() {
        let t = build_distribution(vec![1.0, 1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 1_000_000;
        let ones = resample_indices(&t, n, &mut rng).unwrap().into_iter().filter(|&i| i == 1).count();
        assert!((ones as f64 / n as f64 - 0.5).abs() < 0.002);
    }

    #[test]
    fn compute_weights_examples() {
        let conf = ClassConfidence(vec![Some(0.9), Some(0.7)]);
        let t = compute_weights(&[(0, 0.9), (1, 0.9)], &conf, 10, 10, 0.8).unwrap();
        assert_relative_eq!(t.raw[0], 0.19, epsilon = 1e-15);
        assert_relative_eq!(t.raw[1], 1.37, epsilon = 1e-15);
        assert_relative_eq!(t.dist[1] / t.dist[0], 1.37 / 0.19, epsilon = 1e-12);

        let conf = ClassConfidence(vec![Some(0.95), Some(0.9)]);
        let t = compute_weights(&[(0, 0.7), (0, 0.7)], &conf, 5, 10, 0.8).unwrap();
        assert_eq!(t.dist, vec![0.5, 0.5]);

        let conf = ClassConfidence(vec![Some(0.95), None]);
        let t = compute_weights(&[(1, 0.7)], &conf, 5, 10, 0.8).unwrap();
        assert_eq!(t.raw, vec![2.0]);

        assert!(compute_weights(&[], &conf, 5, 10, 0.8).is_err());
    }
}
