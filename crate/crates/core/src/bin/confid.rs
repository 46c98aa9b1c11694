use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};
use confid::cli::{cmd_generate, cmd_sweep, cmd_train, resolve_config, GenerateArgs, SweepArgs, TrainArgs, TrainOverrides};
use confid::{MappingKind, MethodVariant};

#[derive(Parser)]
#[command(name = "confid", version, about = "Class-level confidence based semi-supervised learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate and split a synthetic dataset into one CSV.
    Generate {
        /// Dataset spec (TOML); the shipped 8-class benchmark when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        labeled_fraction: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model and write metrics, summary and checkpoint.
    Train {
        /// Trainer config (TOML).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, required_unless_present = "print_config")]
        dataset: Option<PathBuf>,
        #[arg(long, required_unless_present = "print_config")]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        method: Option<MethodVariant>,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        mapping: Option<MappingKind>,
        #[arg(long)]
        resample_period: Option<usize>,
        #[arg(long, action = ArgAction::Set)]
        resample_labeled: Option<bool>,
        #[arg(long, action = ArgAction::Set)]
        resample_unlabeled: Option<bool>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Stop after this many finished epochs, leaving a checkpoint to resume from.
        #[arg(long)]
        halt_after: Option<usize>,
        /// Print the effective config and exit.
        #[arg(long)]
        print_config: bool,
    },
    /// Run an ablation grid over seeds and aggregate mean ± std per cell.
    Sweep {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

fn run(cli: Cli) -> confid::Result<()> {
    match cli.command {
        Command::Generate { spec, seed, labeled_fraction, out } => {
            let rows = cmd_generate(&GenerateArgs { spec, seed, labeled_fraction, out: out.clone() })?;
            eprintln!("wrote {rows} rows to {}", out.display());
        }
        Command::Train {
            config,
            dataset,
            out,
            seed,
            method,
            tau,
            mapping,
            resample_period,
            resample_labeled,
            resample_unlabeled,
            epochs,
            resume,
            halt_after,
            print_config,
        } => {
            let overrides = TrainOverrides {
                seed,
                method,
                tau,
                mapping,
                resample_period,
                resample_labeled,
                resample_unlabeled,
                epochs,
            };
            if print_config {
                print!("{}", resolve_config(config.as_deref(), &overrides)?.to_toml_string());
                return Ok(());
            }
            let args = TrainArgs {
                config,
                dataset: dataset.expect("required by clap"),
                out: out.expect("required by clap"),
                overrides,
                resume,
                halt_after,
            };
            let s = cmd_train(&args)?;
            println!("{},{},{},{}", s.method, s.seed, s.overall_acc, s.mean_acc);
        }
        Command::Sweep { grid, out, jobs } => {
            let rows = cmd_sweep(&SweepArgs { grid, out: out.clone(), jobs })?;
            eprintln!("aggregated {rows} cells into {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
