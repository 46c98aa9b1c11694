//! Generates the imbalanced Gaussian benchmark, splits it and writes CSV.
//!
//! ```text
//! cargo run --example generate_dataset -- [spec.toml] [out.csv]
//! ```

use confid::data::{generate, split};
use confid::experiment::DEFAULT_LABELED_FRACTION;
use confid::DatasetSpec;

fn main() -> confid::Result<()> {
    let mut args = std::env::args().skip(1);
    let (spec, fraction) = match args.next() {
        Some(path) => DatasetSpec::load(path)?,
        None => (DatasetSpec::desk_default(), None),
    };
    let out = args.next().unwrap_or_else(|| "dataset.csv".into());

    let population = generate(&spec, 0)?;
    let data = split(&population, fraction.unwrap_or(DEFAULT_LABELED_FRACTION), 0)?;
    println!("{} classes, {} features", data.classes, data.d_in);
    for c in 0..data.classes {
        let n = |set: &[confid::Instance]| set.iter().filter(|i| i.label == c).count();
        println!(
            "class {c}: labeled {:>3}  unlabeled {:>3}  test {:>3}",
            n(&data.labeled),
            n(&data.unlabeled),
            n(&data.test)
        );
    }
    data.save(&out)?;
    println!("wrote {} rows to {out}", data.len());
    Ok(())
}
