//! Command-line driver for the sharpness-aware optimization toolkit:
//! `sharpopt toy|bench|verify --config <path> --out <dir> [overrides]`.
//!
//! Every subcommand reads an optional strict-JSON config (defaults apply
//! when omitted), applies flag overrides, echoes the fully resolved
//! configuration into the output directory, and writes its artifacts in
//! one pass at the end — so identical configurations produce
//! byte-identical outputs, and re-running with an emitted
//! `resolved_config.json` reproduces a run exactly.
//!
//! Exit codes: 0 success; 1 configuration or usage error; 2 failure while
//! executing a validated experiment; 3 verification property failure.

mod bench;
mod common;
mod toy;
mod verify;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "sharpopt",
    version,
    about = "Sharpness-aware optimization experiments: landscape studies, robustness benchmarks, and self-checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Map the two-basin (μ, σ) landscape and trace each optimizer's descent
    Toy(toy::ToyArgs),
    /// Train the blob classifier under label noise and parameter perturbation
    Bench(bench::BenchArgs),
    /// Run the property self-check suite and write a pass/fail report
    Verify(verify::VerifyArgs),
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes; anything else is a
            // usage problem and shares the configuration-error exit code.
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let result = match &cli.command {
        Command::Toy(args) => toy::run(args),
        Command::Bench(args) => bench::run(args),
        Command::Verify(args) => verify::run(args),
    };
    if let Err(e) = result {
        eprintln!("sharpopt: {e}");
        std::process::exit(e.exit_code());
    }
}
