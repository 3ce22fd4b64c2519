use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "romance", about = "Train and evaluate attack-robust cooperative learners")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one run per configured seed and evaluate the results.
    Train { config: PathBuf },
    /// Evaluate a saved ego checkpoint.
    Eval {
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Held-out-attacker win rates over the configured budgets.
    Sweep {
        config: PathBuf,
        /// Defaults to each seed's `run/<seed>/ego.ckpt`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Produce held-out attacker archives from extra seeded runs.
    GenAttackers {
        config: PathBuf,
        /// Evolve against this frozen ego instead of co-training.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train { config } => romance_harness::cmd_train(config),
        Command::Eval { config, checkpoint } => romance_harness::cmd_eval(config, checkpoint),
        Command::Sweep { config, checkpoint } => romance_harness::cmd_sweep(config, checkpoint.as_deref()),
        Command::GenAttackers { config, checkpoint } => romance_harness::cmd_gen_attackers(config, checkpoint.as_deref()),
    };
    match result {
        Ok(dir) => {
            println!("wrote {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
