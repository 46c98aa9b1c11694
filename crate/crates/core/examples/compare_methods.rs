//! FixMatch against the confidence-based variants on the shipped benchmark.
//!
//! ```text
//! cargo run --release --example compare_methods -- [seeds] [jobs]
//! ```
//!
//! Prints the final mean-class accuracy of every (method, seed) run, the
//! per-method averages, the confidence/accuracy correlation of the FixMatch
//! runs and the pseudo-label utilization ratio at one tenth of training.

use confid::experiment::run_many;
use confid::trainer::confidence_accuracy_correlation;
use confid::{DatasetSpec, MethodVariant, TrainerConfig};

fn main() -> confid::Result<()> {
    let mut args = std::env::args().skip(1);
    let seeds: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(5);
    let jobs: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(4);

    let methods = [
        MethodVariant::FixMatch,
        MethodVariant::ConfidThresholdOnly,
        MethodVariant::ConfidResampleOnly,
        MethodVariant::ConfidMatch,
    ];
    let base = TrainerConfig::default();
    let configs: Vec<TrainerConfig> = methods
        .iter()
        .flat_map(|&m| {
            let base = &base;
            (0..seeds).map(move |s| base.clone().with_method(m).with_seed(s))
        })
        .collect();

    let start = std::time::Instant::now();
    let results = run_many(&configs, &DatasetSpec::desk_default(), 0.1, jobs)?;
    println!("{} runs in {:.1}s", results.len(), start.elapsed().as_secs_f64());

    let probe = base.epochs / 10;
    for (i, &m) in methods.iter().enumerate() {
        let runs = &results[i * seeds as usize..(i + 1) * seeds as usize];
        let accs: Vec<String> = runs.iter().map(|r| format!("{:.3}", r.summary.mean_acc)).collect();
        let mean = runs.iter().map(|r| r.summary.mean_acc).sum::<f64>() / seeds as f64;
        let overall = runs.iter().map(|r| r.summary.overall_acc).sum::<f64>() / seeds as f64;
        let ratio = runs.iter().map(|r| r.history[probe].pseudo_label_ratio).sum::<f64>() / seeds as f64;
        let corr: Vec<String> = runs
            .iter()
            .map(|r| {
                confidence_accuracy_correlation(r.history.last().unwrap())
                    .map(|c| format!("{c:.2}"))
                    .unwrap_or_else(|_| "n/a".into())
            })
            .collect();
        println!(
            "{:<15} mean_acc {:.4} overall {:.4} ratio@{probe} {:.3}  per-seed [{}]  corr [{}]",
            m.name(),
            mean,
            overall,
            ratio,
            accs.join(" "),
            corr.join(" ")
        );
    }
    Ok(())
}
