//! Instance weights across training and how often each instance is drawn.
//!
//! ```text
//! cargo run --example resampling
//! ```

use confid::pseudo_label::ClassConfidence;
use confid::resample::{compute_weights, resample_indices, warm_factor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> confid::Result<()> {
    let tau = 0.8;
    let emax = 100;
    // class 0 well learned, class 1 lagging, class 2 never predicted
    let conf = ClassConfidence(vec![Some(0.9), Some(0.6), None]);
    let preds = [(0, 0.95), (0, 0.6), (1, 0.7), (1, 0.4), (2, 0.5)];

    for e in [0, 25, 50, 75, 100] {
        let table = compute_weights(&preds, &conf, e, emax, tau)?;
        println!(
            "epoch {e:>3}  W {:.3}  raw {:.3?}",
            warm_factor(e, emax)?.value(),
            table.raw
        );
    }

    let table = compute_weights(&preds, &conf, emax, emax, tau)?;
    let n = 100_000;
    let mut counts = [0usize; 5];
    for i in resample_indices(&table, n, &mut ChaCha8Rng::seed_from_u64(0))? {
        counts[i] += 1;
    }
    for (i, (&c, d)) in counts.iter().zip(&table.dist).enumerate() {
        println!("instance {i}: drawn {:.4}  expected {:.4}", c as f64 / n as f64, d);
    }
    Ok(())
}
