//! Runs a grid of (tau, mapping) cells over several seeds and prints the
//! aggregated table.
//!
//! ```text
//! cargo run --release --example sweep -- [grid.toml] [jobs]
//! ```

use confid::experiment::{aggregate_csv, run_sweep, SweepGrid};

fn main() -> confid::Result<()> {
    let mut args = std::env::args().skip(1);
    let grid = match args.next() {
        Some(path) => SweepGrid::load(path)?,
        None => SweepGrid::from_toml_str(include_str!("../data/grid.toml"))?,
    };
    let jobs: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(2);

    println!("{} cells x {} seeds", grid.cells().len(), grid.seeds.len());
    let (_, rows) = run_sweep(&grid, jobs)?;
    print!("{}", aggregate_csv(&rows));
    Ok(())
}
