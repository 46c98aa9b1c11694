//! Trains one model epoch by epoch, checkpoints halfway and shows that the
//! resumed run reproduces the uninterrupted one.
//!
//! ```text
//! cargo run --release --example train_and_resume -- [method] [epochs]
//! ```

use confid::experiment::prepare_dataset;
use confid::trainer::confidence_accuracy_correlation;
use confid::{Checkpoint, DatasetSpec, MethodVariant, Trainer, TrainerConfig};

fn main() -> confid::Result<()> {
    let mut args = std::env::args().skip(1);
    let method: MethodVariant = args.next().as_deref().unwrap_or("confidmatch").parse()?;
    let epochs: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(60);
    let config = TrainerConfig { epochs, resample_period: 10, ..TrainerConfig::default() }.with_method(method);

    let data = prepare_dataset(&DatasetSpec::desk_default(), 0.1, 0)?;
    let mut trainer = Trainer::new(config, &data)?;
    let ckpt_path = std::env::temp_dir().join("confid-example-checkpoint.json");
    while !trainer.is_finished() {
        let r = trainer.run_epoch()?;
        if r.epoch % 10 == 9 {
            println!(
                "epoch {:>3}  acc {:.3}  mean {:.3}  ratio {:.2}  lr {:.4}",
                r.epoch, r.overall_acc, r.mean_class_acc, r.pseudo_label_ratio, r.lr
            );
        }
        if trainer.epoch() == epochs / 2 {
            trainer.checkpoint().save(&ckpt_path)?;
        }
    }
    let last = trainer.history().last().unwrap();
    println!("thresholds {:.3?}", last.thresholds);
    if let Ok(r) = confidence_accuracy_correlation(last) {
        println!("confidence/accuracy correlation {r:.3}");
    }

    let mut resumed = Trainer::resume(Checkpoint::load(&ckpt_path)?, &data)?;
    resumed.run()?;
    println!("resumed from epoch {} matches: {}", epochs / 2, resumed.history() == trainer.history());
    std::fs::remove_file(&ckpt_path).ok();
    Ok(())
}
