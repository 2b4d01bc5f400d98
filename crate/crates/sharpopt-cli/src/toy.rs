//! `toy` subcommand: locate the landscape's minima, trace each
//! configured optimizer's descent, and sample a contour grid.
//!
//! Artifacts written into the output directory:
//! - `resolved_config.json` — the full configuration actually used, with
//!   every default and flag override materialized;
//! - `minima.json` — the located minima, sorted by ascending loss;
//! - `trajectory_<variant>.csv` — per-step parameters for each run;
//! - `contour.csv` — loss samples over the configured (μ, σ) window;
//! - `summary.json` — final point and basin classification per run.

use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use sharpopt::bench::RunSpec;
use sharpopt::optim::{write_trajectory_csv, FisherMode, OptimConfig, Variant};
use sharpopt::toy2d::{
    basin_experiment, contour_grid, find_minima, nearest_minimum, write_contour_csv,
    MinimaSearchConfig, ToyLossSpec, ToyMinimum, ToyModel,
};

use crate::common::{
    config_err, create_file, ensure_out_dir, load_config, runtime_err, write_json, CliError,
};

/// Start preset `A`: high on the σ axis, between the two basins.
pub const START_A: (f64, f64) = (-12.0, 30.0);
/// Start preset `B`: closer to the narrow basin's μ.
pub const START_B: (f64, f64) = (-2.0, 15.0);

#[derive(Debug, Args)]
pub struct ToyArgs {
    /// JSON experiment config; built-in defaults when omitted
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Keep only this variant from the configured run list
    #[arg(long)]
    pub variant: Option<Variant>,
    /// Start preset: A = (-12, 30), B = (-2, 15)
    #[arg(long, value_name = "A|B")]
    pub start: Option<String>,
    /// Override the constant learning rate
    #[arg(long)]
    pub lr: Option<f64>,
    /// Override the number of optimizer steps per run
    #[arg(long)]
    pub iters: Option<usize>,
}

/// Contour-sampling window and resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContourConfig {
    pub mu_range: (f64, f64),
    pub sigma_range: (f64, f64),
    pub n_mu: usize,
    pub n_sigma: usize,
}

impl Default for ContourConfig {
    fn default() -> Self {
        ContourConfig {
            mu_range: (-60.0, 60.0),
            sigma_range: (1.0, 60.0),
            n_mu: 121,
            n_sigma: 60,
        }
    }
}

/// Full configuration of the landscape experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyConfig {
    /// Mixture landscape to descend.
    pub landscape: ToyLossSpec,
    /// Shared descent start (μ, σ).
    pub start: (f64, f64),
    /// Constant learning rate for every run.
    pub lr: f64,
    /// Optimizer steps per run.
    pub iters: usize,
    /// One trajectory file is written per entry, named after the variant,
    /// so variants must be distinct.
    pub runs: Vec<RunSpec>,
    /// Minima-search settings.
    pub search: MinimaSearchConfig,
    /// Contour sampling window.
    pub contour: ContourConfig,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            landscape: ToyLossSpec::reference(),
            start: START_A,
            lr: 10.0,
            iters: 1000,
            runs: vec![
                RunSpec { variant: Variant::Sgd, gamma: 0.0, eta: 0.0 },
                RunSpec { variant: Variant::Sam, gamma: 1.0, eta: 0.0 },
                RunSpec { variant: Variant::Asam, gamma: 0.3, eta: 0.0 },
                RunSpec { variant: Variant::Fsam, gamma: 1.0, eta: 0.0 },
            ],
            search: MinimaSearchConfig::default(),
            contour: ContourConfig::default(),
        }
    }
}

impl ToyConfig {
    /// Optimizer settings for one run entry. The landscape is a single
    /// distribution, so the Fisher variant uses the closed-form Gaussian
    /// metric rather than a sample estimate.
    fn optim_config(&self, run: &RunSpec) -> OptimConfig {
        OptimConfig {
            variant: run.variant,
            gamma: run.gamma,
            eta: run.eta,
            lr: self.lr,
            momentum: 0.0,
            weight_decay: 0.0,
            fisher_mode: FisherMode::ExactToy,
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        self.landscape.validate().map_err(config_err)?;
        if self.runs.is_empty() {
            return Err(CliError::Config("need at least one run".into()));
        }
        for (i, run) in self.runs.iter().enumerate() {
            if self.runs[..i].iter().any(|r| r.variant == run.variant) {
                return Err(CliError::Config(format!(
                    "variant {} appears more than once; trajectory files are named by variant",
                    run.variant
                )));
            }
            self.optim_config(run).validate().map_err(config_err)?;
        }
        if !(self.start.1 > 0.0) {
            return Err(CliError::Config(format!(
                "start sigma must be > 0, got {}",
                self.start.1
            )));
        }
        if self.iters == 0 {
            return Err(CliError::Config("iters must be >= 1".into()));
        }
        if self.search.starts_mu < 2 || self.search.starts_sigma < 2 {
            return Err(CliError::Config(
                "minima search needs at least a 2x2 grid of starts".into(),
            ));
        }
        if !(self.search.lr > 0.0) || self.search.max_iters == 0 {
            return Err(CliError::Config(
                "minima search needs lr > 0 and max_iters >= 1".into(),
            ));
        }
        if !(self.search.grad_tol > 0.0) || !(self.search.dedup_radius > 0.0) {
            return Err(CliError::Config(
                "minima search needs grad_tol > 0 and dedup_radius > 0".into(),
            ));
        }
        if self.contour.n_mu < 2 || self.contour.n_sigma < 2 {
            return Err(CliError::Config(
                "contour grid needs at least 2 points per axis".into(),
            ));
        }
        if !(self.contour.sigma_range.0 > 0.0) {
            return Err(CliError::Config(format!(
                "contour sigma range must start above 0, got {}",
                self.contour.sigma_range.0
            )));
        }
        Ok(())
    }
}

/// One run's outcome in `summary.json`.
#[derive(Debug, Serialize)]
struct ToyRunSummary {
    variant: Variant,
    gamma: f64,
    eta: f64,
    final_mu: f64,
    final_sigma: f64,
    final_loss: f64,
    /// Label of the nearest minimum ("sharp"/"flat" when exactly two
    /// minima exist, positional names otherwise).
    basin: String,
    /// Index of the nearest minimum in `minima.json`.
    nearest_minimum: usize,
    /// Steps whose update left the σ > 0 domain and was projected back.
    sigma_projections: usize,
}

#[derive(Debug, Serialize)]
struct ToySummary {
    start: (f64, f64),
    iters: usize,
    runs: Vec<ToyRunSummary>,
}

/// Labels for the located minima: with exactly two, the higher-curvature
/// one is "sharp" and the other "flat"; any other count gets positional
/// names.
fn basin_labels(minima: &[ToyMinimum]) -> Vec<String> {
    if minima.len() == 2 {
        let sharp = if minima[0].hessian_trace >= minima[1].hessian_trace { 0 } else { 1 };
        (0..2)
            .map(|i| if i == sharp { "sharp" } else { "flat" }.to_string())
            .collect()
    } else {
        (0..minima.len()).map(|i| format!("minimum_{i}")).collect()
    }
}

pub fn run(args: &ToyArgs) -> Result<(), CliError> {
    let mut cfg: ToyConfig = load_config(args.config.as_deref())?;
    if let Some(v) = args.variant {
        let runs: Vec<RunSpec> = cfg.runs.iter().copied().filter(|r| r.variant == v).collect();
        if runs.is_empty() {
            return Err(CliError::Config(format!(
                "--variant {v} does not appear in the configured run list"
            )));
        }
        cfg.runs = runs;
    }
    if let Some(s) = &args.start {
        cfg.start = match s.to_ascii_uppercase().as_str() {
            "A" => START_A,
            "B" => START_B,
            other => {
                return Err(CliError::Config(format!(
                    "unknown start preset '{other}' (expected A or B)"
                )))
            }
        };
    }
    if let Some(lr) = args.lr {
        cfg.lr = lr;
    }
    if let Some(iters) = args.iters {
        cfg.iters = iters;
    }
    cfg.validate()?;

    ensure_out_dir(&args.out)?;
    write_json(&args.out.join("resolved_config.json"), &cfg)?;

    let minima = find_minima(&cfg.landscape, &cfg.search).map_err(runtime_err)?;
    write_json(&args.out.join("minima.json"), &minima)?;
    let labels = basin_labels(&minima);
    for (m, label) in minima.iter().zip(&labels) {
        println!(
            "[toy] {label} minimum at (μ, σ) = ({:.6}, {:.6}), loss {:.8}, curvature trace {:.3e}",
            m.mu, m.sigma, m.loss, m.hessian_trace
        );
    }

    let model = ToyModel { spec: cfg.landscape.clone() };
    let mut run_summaries = Vec::with_capacity(cfg.runs.len());
    for run in &cfg.runs {
        let outcome = basin_experiment(&model, cfg.optim_config(run), cfg.start.0, cfg.start.1, cfg.iters)
            .map_err(runtime_err)?;
        let path = args.out.join(format!("trajectory_{}.csv", run.variant));
        write_trajectory_csv(create_file(&path)?, &outcome.records, true).map_err(runtime_err)?;
        let idx = nearest_minimum(&minima, outcome.final_mu, outcome.final_sigma).map_err(runtime_err)?;
        println!(
            "[toy] {} (γ = {}): final (μ, σ) = ({:.4}, {:.4}) → basin {}",
            run.variant, run.gamma, outcome.final_mu, outcome.final_sigma, labels[idx]
        );
        run_summaries.push(ToyRunSummary {
            variant: run.variant,
            gamma: run.gamma,
            eta: run.eta,
            final_mu: outcome.final_mu,
            final_sigma: outcome.final_sigma,
            final_loss: outcome.final_loss,
            basin: labels[idx].clone(),
            nearest_minimum: idx,
            sigma_projections: outcome.sigma_projections,
        });
    }

    let grid = contour_grid(
        &cfg.landscape,
        cfg.contour.mu_range,
        cfg.contour.sigma_range,
        cfg.contour.n_mu,
        cfg.contour.n_sigma,
    )
    .map_err(runtime_err)?;
    write_contour_csv(create_file(&args.out.join("contour.csv"))?, &grid).map_err(runtime_err)?;

    write_json(
        &args.out.join("summary.json"),
        &ToySummary { start: cfg.start, iters: cfg.iters, runs: run_summaries },
    )?;
    println!(
        "[toy] wrote minima.json, summary.json, contour.csv, and {} trajectory file(s) to {}",
        cfg.runs.len(),
        args.out.display()
    );
    Ok(())
}
