use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// Simulation experiments for M/G/1 queues under symmetric service
/// disciplines: stationary laws, heavy-traffic rescalings, and a reflected
/// Brownian motion reference model. All outputs are seeded and
/// reproducible.
#[derive(Parser)]
#[command(name = "symq", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config file.
    Run {
        /// Path to the experiment config.
        config: PathBuf,
        /// Seed override (required here if the config has none).
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory override.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker thread count (falls back to SYMQ_THREADS, then all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Validate a config file without running it.
    Validate {
        /// Path to the experiment config.
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            seed,
            out,
            threads,
        } => symq_cli::cmd_run(&config, seed, out, threads).map(|report| {
            println!("{}", report.out_dir.display());
        }),
        Command::Validate { config } => symq_cli::cmd_validate(&config).map(|()| {
            println!("ok");
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("symq: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
