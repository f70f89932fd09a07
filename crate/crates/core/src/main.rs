use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qkmeans::experiment::{Overrides, cmd_compare, cmd_kernel, cmd_plot, cmd_run, render_report};

#[derive(Parser)]
#[command(
    name = "qkmeans",
    about = "Quantum-kernel k-means: feature-map encodings, fidelity kernels, clustering, evaluation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Default)]
struct CommonFlags {
    /// Use a single init seed instead of the config's sweep list
    #[arg(long)]
    seed: Option<u64>,
    /// Estimate fidelities from this many shots instead of exact overlaps
    #[arg(long)]
    shots: Option<u64>,
    /// Redirect all outputs into this directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Kernel cache file path
    #[arg(long)]
    kernel_cache: Option<PathBuf>,
}

impl CommonFlags {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            shots: self.shots,
            out: self.out.clone(),
            kernel_cache: self.kernel_cache.clone(),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config end to end
    Run {
        config: PathBuf,
        #[command(flatten)]
        flags: CommonFlags,
    },
    /// Run several configs over the same dataset and rank them
    Compare {
        configs: Vec<PathBuf>,
        #[command(flatten)]
        flags: CommonFlags,
    },
    /// Compute (or reload) the full kernel matrix and print summary stats
    Kernel {
        config: PathBuf,
        #[command(flatten)]
        flags: CommonFlags,
    },
    /// Render plots from a saved run record
    Plot {
        record: PathBuf,
        #[command(flatten)]
        flags: CommonFlags,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run { config, flags } => cmd_run(config, &flags.overrides()).map(|record| {
            print!("{}", render_report(&record));
        }),
        Command::Compare { configs, flags } => {
            cmd_compare(configs, &flags.overrides()).map(|table| {
                print!("{table}");
            })
        }
        Command::Kernel { config, flags } => {
            cmd_kernel(config, &flags.overrides()).map(|summary| {
                print!("{summary}");
            })
        }
        Command::Plot { record, flags } => cmd_plot(record, &flags.overrides()).map(|outputs| {
            for file in outputs.files {
                println!("wrote {}", file.display());
            }
        }),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
