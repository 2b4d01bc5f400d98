//! `bench` subcommand: train the blob classifier under every configured
//! optimizer and measure robustness to label noise and to adversarial
//! parameter perturbation.
//!
//! Artifacts written into the output directory:
//! - `resolved_config.json` — the protocol actually used;
//! - `noise.csv` — one row per (run, noise rate, seed);
//! - `perturb.csv` — one row per (run, seed, perturbation radius).

use std::path::PathBuf;

use clap::Args;
use sharpopt::bench::{
    run_noise_benchmark, run_perturbation_benchmark, write_bench_csv, BenchConfig,
};

use crate::common::{
    config_err, create_file, ensure_out_dir, load_config, runtime_err, write_json, CliError,
};

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// JSON protocol config; built-in defaults when omitted
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Override the number of training epochs
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Override the training-set size
    #[arg(long)]
    pub n_train: Option<usize>,
    /// Override the seed list (comma-separated, e.g. "0,1,2")
    #[arg(long, value_name = "LIST")]
    pub seeds: Option<String>,
}

fn parse_seed_list(s: &str) -> Result<Vec<u64>, CliError> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<u64>()
                .map_err(|e| CliError::Config(format!("bad seed '{}': {e}", t.trim())))
        })
        .collect()
}

pub fn run(args: &BenchArgs) -> Result<(), CliError> {
    let mut cfg: BenchConfig = load_config(args.config.as_deref())?;
    if let Some(epochs) = args.epochs {
        cfg.epochs = epochs;
    }
    if let Some(n_train) = args.n_train {
        cfg.n_train = n_train;
    }
    if let Some(seeds) = &args.seeds {
        cfg.seeds = parse_seed_list(seeds)?;
    }
    cfg.validate().map_err(config_err)?;

    ensure_out_dir(&args.out)?;
    write_json(&args.out.join("resolved_config.json"), &cfg)?;

    let noise = run_noise_benchmark(&cfg).map_err(runtime_err)?;
    write_bench_csv(create_file(&args.out.join("noise.csv"))?, &noise).map_err(runtime_err)?;
    println!("[bench] label-noise sweep: {} rows → noise.csv", noise.len());

    let perturb = run_perturbation_benchmark(&cfg).map_err(runtime_err)?;
    write_bench_csv(create_file(&args.out.join("perturb.csv"))?, &perturb).map_err(runtime_err)?;
    println!("[bench] perturbation sweep: {} rows → perturb.csv", perturb.len());

    println!("[bench] artifacts written to {}", args.out.display());
    Ok(())
}
