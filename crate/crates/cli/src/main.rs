use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod output;

/// Simulation, verification and auditing of dispatching policies for
/// heterogeneous server farms.
#[derive(Debug, Parser)]
#[command(name = "hetdispatch", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one scenario (optionally several replications).
    Run(Common),
    /// Simulate every point of the config's `sweep.*` grid.
    Sweep(Common),
    /// Check the Foster-Lyapunov certificate of the stored-ID chain.
    Certify(CertifyArgs),
    /// Test the symmetry of the policy's sampling and dispatch.
    Audit(AuditArgs),
    /// Slow-server instability experiment with benchmark bounds.
    Bench(Common),
}

#[derive(Debug, Clone, Args)]
struct Common {
    /// Scenario file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Independent replications, seeded `seed, seed + 1, ...`.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    reps: u64,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Overrides the horizon.
    #[arg(long)]
    horizon: Option<f64>,
}

#[derive(Debug, Args)]
struct CertifyArgs {
    #[command(flatten)]
    common: Common,
    /// Truncation level per queue (default: ceil(theta + 10)).
    #[arg(long)]
    q_max: Option<u64>,
    /// Remove memory-update transitions from the chain.
    #[arg(long)]
    broken_chain: bool,
    /// auto | enumeration | structured
    #[arg(long, default_value = "auto")]
    method: String,
}

#[derive(Debug, Args)]
struct AuditArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 100_000)]
    trials: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(c) => commands::run(&c),
        Command::Sweep(c) => commands::sweep(&c),
        Command::Certify(a) => commands::certify(&a),
        Command::Audit(a) => commands::audit(&a),
        Command::Bench(c) => commands::bench(&c),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
