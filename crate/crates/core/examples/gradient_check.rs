//! Compares the analytic gradient of the joint objective with central
//! finite differences on a small random network.
//!
//! ```text
//! cargo run --example gradient_check
//! ```

use confid::model::objective;
use confid::{ModelParams, ProbVector, ThresholdVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> confid::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (d, h, c) = (3, 5, 4);
    let mut params = ModelParams::init(d, h, c, &mut rng)?;
    let mut point = || (0..d).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<f64>>();

    let labeled: Vec<(Vec<f64>, usize)> = (0..4).map(|i| (point(), i % c)).collect();
    let strong: Vec<Vec<f64>> = (0..8).map(|_| point()).collect();
    let weak: Vec<ProbVector> = (0..8)
        .map(|_| ProbVector::from_logits(&(0..c).map(|_| rng.random_range(-3.0..3.0)).collect::<Vec<f64>>()))
        .collect();
    let thresholds = ThresholdVector::constant(0.3, c);
    let (ls, lu) = (1.0, 0.7);

    let obj = objective(&params, &labeled, &weak, &strong, &thresholds, ls, lu)?;
    println!("loss {:.6}, {} of {} unlabeled above threshold", obj.total.value(), obj.used, weak.len());

    let eps = 1e-5;
    let analytic: Vec<f64> = obj.grad.values().copied().collect();
    let mut worst: f64 = 0.0;
    for i in 0..params.num_params() {
        let orig = *params.values().nth(i).unwrap();
        let eval = |v: f64, p: &mut ModelParams| {
            *p.values_mut().nth(i).unwrap() = v;
            objective(p, &labeled, &weak, &strong, &thresholds, ls, lu).map(|o| o.total.value())
        };
        let numeric = (eval(orig + eps, &mut params)? - eval(orig - eps, &mut params)?) / (2.0 * eps);
        eval(orig, &mut params)?;
        let rel = (analytic[i] - numeric).abs() / analytic[i].abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    println!("{} parameters, max relative error {worst:.2e}", params.num_params());
    Ok(())
}
