//! Class confidence, per-class thresholds and the resulting pseudo-label
//! mask for a hand-made batch of teacher predictions.
//!
//! ```text
//! cargo run --example dynamic_thresholds
//! ```

use confid::pseudo_label::{class_confidence, dynamic_threshold, pseudo_label_mask, update_stats};
use confid::{ClassConfidenceStats, MappingKind, ProbVector};

fn main() -> confid::Result<()> {
    let tau = 0.8;
    let batch: Vec<ProbVector> = [
        [0.95, 0.03, 0.02],
        [0.90, 0.05, 0.05],
        [0.85, 0.10, 0.05],
        [0.30, 0.55, 0.15],
        [0.25, 0.45, 0.30],
        [0.20, 0.20, 0.60],
    ]
    .iter()
    .map(|p| ProbVector::new(p.to_vec()))
    .collect::<confid::Result<_>>()?;

    let stats = update_stats(ClassConfidenceStats::new(3), &batch);
    let conf = class_confidence(&stats);
    println!("class confidence {:?}", conf.0);

    for kind in MappingKind::ALL {
        let th = dynamic_threshold(&conf, tau, kind)?;
        let kept: Vec<usize> = pseudo_label_mask(&batch, &th)
            .iter()
            .enumerate()
            .filter(|(_, m)| m.keep)
            .map(|(i, _)| i)
            .collect();
        println!("{:<12} thresholds {:.3?} keep {kept:?}", kind.name(), th.as_slice());
    }

    let fixed = confid::ThresholdVector::constant(tau, 3);
    let kept = pseudo_label_mask(&batch, &fixed).iter().filter(|m| m.keep).count();
    println!("fixed {tau}: keeps {kept} of {}", batch.len());
    Ok(())
}
