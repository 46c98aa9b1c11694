//! Learning-status estimation and dynamic per-class thresholds.
//!
//! Every unlabeled instance is assigned to the class of its weak-view argmax.
//! The mean max-probability of each such group is the class-level confidence
//! `P_c`, which is mapped through a monotone function `M` and clamped to
//! `[1 − τ, τ]` to give the acceptance threshold of that class for the next
//! epoch.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ProbVector;

/// Argmax class of a prediction, ties to the lowest index.
pub fn assign_class(p: &ProbVector) -> usize {
    p.argmax()
}

/// Per-class accumulators of max-probability sums and counts.
///
/// Accumulators over disjoint shards can be combined with [`merge`](Self::merge).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassConfidenceStats {
    sum_conf: Vec<f64>,
    count: Vec<u64>,
}

impl ClassConfidenceStats {
    pub fn new(classes: usize) -> Self {
        ClassConfidenceStats {
            sum_conf: vec![0.0; classes],
            count: vec![0; classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.count.len()
    }

    pub fn sum_conf(&self) -> &[f64] {
        &self.sum_conf
    }

    pub fn count(&self) -> &[u64] {
        &self.count
    }

    pub fn observe(&mut self, p: &ProbVector) {
        let c = assign_class(p);
        self.count[c] += 1;
        self.sum_conf[c] += p.max();
    }

    pub fn update<'a>(&mut self, batch: impl IntoIterator<Item = &'a ProbVector>) {
        for p in batch {
            self.observe(p);
        }
    }

    pub fn merge(&mut self, other: &ClassConfidenceStats) {
        for (a, b) in self.sum_conf.iter_mut().zip(&other.sum_conf) {
            *a += b;
        }
        for (a, b) in self.count.iter_mut().zip(&other.count) {
            *a += b;
        }
    }

    pub fn reset(&mut self) {
        self.sum_conf.iter_mut().for_each(|s| *s = 0.0);
        self.count.iter_mut().for_each(|n| *n = 0);
    }

    pub fn total(&self) -> u64 {
        self.count.iter().sum()
    }
}

/// Functional form of [`ClassConfidenceStats::update`].
pub fn update_stats(mut stats: ClassConfidenceStats, batch: &[ProbVector]) -> ClassConfidenceStats {
    stats.update(batch);
    stats
}

/// Class-level confidence `P_c`; `None` marks a class no instance was assigned to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassConfidence(pub Vec<Option<f64>>);

impl ClassConfidence {
    pub fn unobserved(classes: usize) -> Self {
        ClassConfidence(vec![None; classes])
    }

    pub fn get(&self, class: usize) -> Option<f64> {
        self.0[class]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn class_confidence(stats: &ClassConfidenceStats) -> ClassConfidence {
    ClassConfidence(
        stats
            .sum_conf
            .iter()
            .zip(&stats.count)
            .map(|(&s, &n)| (n > 0).then(|| s / n as f64))
            .collect(),
    )
}

/// Maps class-level confidence to learning status.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MappingKind {
    /// `x / (2 − x)`
    #[default]
    Concave,
    /// `x`
    Linear,
    /// `exp(−5 (1 − x)²)`
    Exponential,
}

impl MappingKind {
    pub const ALL: [MappingKind; 3] = [MappingKind::Concave, MappingKind::Linear, MappingKind::Exponential];

    pub fn name(self) -> &'static str {
        match self {
            MappingKind::Concave => "concave",
            MappingKind::Linear => "linear",
            MappingKind::Exponential => "exponential",
        }
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            MappingKind::Concave => x / (2.0 - x),
            MappingKind::Linear => x,
            MappingKind::Exponential => (-5.0 * (1.0 - x).powi(2)).exp(),
        }
    }
}

impl std::fmt::Display for MappingKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for MappingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "concave" => Ok(MappingKind::Concave),
            "linear" => Ok(MappingKind::Linear),
            "exponential" | "exp" => Ok(MappingKind::Exponential),
            other => Err(Error::config(format!(
                "unknown mapping `{other}` (expected concave, linear or exponential)"
            ))),
        }
    }
}

pub fn map_learning_status(x: f64, kind: MappingKind) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::invalid(format!("learning status input {x} outside [0, 1]")));
    }
    Ok(kind.apply(x))
}

/// One acceptance threshold per class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdVector(Vec<f64>);

impl ThresholdVector {
    /// The fixed-threshold baseline: every class gets `tau`.
    pub fn constant(tau: f64, classes: usize) -> Self {
        ThresholdVector(vec![tau; classes])
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        ThresholdVector(values)
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
}

impl std::ops::Index<usize> for ThresholdVector {
    type Output = f64;

    fn index(&self, c: usize) -> &f64 {
        &self.0[c]
    }
}

/// Upper limit must lie in (0.5, 1) so that `[1 − τ, τ]` is a proper interval.
pub fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.5 && tau < 1.0) {
        return Err(Error::config(format!("upper-limit threshold tau must be in (0.5, 1), got {tau}")));
    }
    Ok(())
}

/// `clamp(M(P_c), 1 − τ, τ)` per class; unobserved classes get `τ`.
pub fn dynamic_threshold(conf: &ClassConfidence, tau: f64, kind: MappingKind) -> Result<ThresholdVector> {
    check_tau(tau)?;
    conf.0
        .iter()
        .map(|p| match p {
            None => Ok(tau),
            Some(p) => map_learning_status(*p, kind).map(|m| m.clamp(1.0 - tau, tau)),
        })
        .collect::<Result<Vec<_>>>()
        .map(ThresholdVector)
}

/// Outcome of the threshold test for one unlabeled instance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaskEntry {
    pub keep: bool,
    pub label: usize,
    pub confidence: f64,
}

/// Keeps instance `i` iff `max(p_i) ≥ τ(argmax(p_i))`.
pub fn pseudo_label_mask(weak_probs: &[ProbVector], thresholds: &ThresholdVector) -> Vec<MaskEntry> {
    weak_probs
        .iter()
        .map(|p| {
            let label = assign_class(p);
            let confidence = p.max();
            MaskEntry {
                keep: confidence >= thresholds[label],
                label,
                confidence,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pv(v: &[f64]) -> ProbVector {
        ProbVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn assign_class_tie_breaks_low() {
        assert_eq!(assign_class(&pv(&[0.2, 0.5, 0.3])), 1);
        assert_eq!(assign_class(&pv(&[0.4, 0.4, 0.2])), 0);
        assert_eq!(assign_class(&ProbVector::uniform(5)), 0);
    }

    #[test]
    fn update_stats_accumulates() {
        let fresh = ClassConfidenceStats::new(2);
        assert_eq!(update_stats(fresh.clone(), &[]), fresh);
        let s = update_stats(fresh, &[pv(&[0.9, 0.1]), pv(&[0.8, 0.2]), pv(&[0.3, 0.7])]);
        assert_eq!(s.count(), &[2, 1]);
        assert_relative_eq!(s.sum_conf()[0], 1.7, epsilon = 1e-15);
        assert_relative_eq!(s.sum_conf()[1], 0.7, epsilon = 1e-15);

        let conf = class_confidence(&s);
        assert_relative_eq!(conf.get(0).unwrap(), 0.85, epsilon = 1e-15);
        assert_relative_eq!(conf.get(1).unwrap(), 0.7, epsilon = 1e-15);
    }

    #[test]
    fn fresh_stats_are_unobserved() {
        assert_eq!(class_confidence(&ClassConfidenceStats::new(4)), ClassConfidence::unobserved(4));
    }

    #[test]
    fn mapping_examples() {
        assert_eq!(map_learning_status(1.0, MappingKind::Concave).unwrap(), 1.0);
        assert_relative_eq!(map_learning_status(0.8, MappingKind::Concave).unwrap(), 0.8 / 1.2);
        assert_relative_eq!(
            map_learning_status(0.0, MappingKind::Exponential).unwrap(),
            0.006737946999085467,
            epsilon = 1e-15
        );
        assert_eq!(map_learning_status(0.37, MappingKind::Linear).unwrap(), 0.37);
        assert!(map_learning_status(1.01, MappingKind::Linear).is_err());
        assert!(map_learning_status(-0.01, MappingKind::Concave).is_err());
    }

    #[test]
    fn threshold_clamp_examples() {
        let conf = ClassConfidence(vec![Some(0.3), Some(0.95), Some(0.6), None]);
        let th = dynamic_threshold(&conf, 0.8, MappingKind::Concave).unwrap();
        assert_relative_eq!(th[0], 0.2, epsilon = 1e-12);
        assert_eq!(th[1], 0.8);
        assert_relative_eq!(th[2], 0.6 / 1.4, epsilon = 1e-12);
        assert_eq!(th[3], 0.8);
        assert!(dynamic_threshold(&conf, 0.5, MappingKind::Concave).is_err());
    }

    #[test]
    fn mask_is_inclusive() {
        let th = ThresholdVector::constant(0.8, 2);
        let m = pseudo_label_mask(&[pv(&[0.85, 0.15]), pv(&[0.2, 0.8]), pv(&[0.79, 0.21])], &th);
        assert!(m[0].keep && m[1].keep && !m[2].keep);
        assert_eq!(m[1].label, 1);
        assert_eq!(m[2].confidence, 0.79);
    }

    #[test]
    fn parse_mapping() {
        assert_eq!("EXP".parse::<MappingKind>().unwrap(), MappingKind::Exponential);
        assert!("cubic".parse::<MappingKind>().is_err());
    }
}
