use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sensched::{execute, prepare, Overrides, Verb};

/// Budgeted sensor scheduling for batch state estimation.
#[derive(Parser)]
#[command(name = "sensched", version, about)]
struct Cli {
    #[command(subcommand)]
    verb: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured schedulers on a scenario.
    Run(Flags),
    /// Time oracle calls across a sweep of horizons.
    Bench(Flags),
    /// Certify the greedy approximation ratio by full enumeration.
    Certify(Flags),
}

#[derive(Args)]
struct Flags {
    /// Scenario file (TOML).
    #[arg(short, long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Timing repetitions; overrides `execution.reps`.
    #[arg(short, long)]
    reps: Option<usize>,
    /// Worker threads (0 = automatic); overrides `execution.threads`.
    #[arg(short = 'j', long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (verb, flags) = match cli.verb {
        Command::Run(f) => (Verb::Run, f),
        Command::Bench(f) => (Verb::Bench, f),
        Command::Certify(f) => (Verb::Certify, f),
    };
    let overrides = Overrides {
        out: flags.out,
        reps: flags.reps,
        threads: flags.threads,
    };
    let result = prepare(verb, &flags.config, &overrides).and_then(|scn| execute(verb, &scn));
    match result {
        Ok(dir) => {
            println!("wrote {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
