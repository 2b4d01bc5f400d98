//! `verify` subcommand: executable self-checks of the toolkit's core
//! identities, written as a pass/fail report.
//!
//! Seven property families run end to end:
//! 1. `subset_moment_identity` — the exact reconstruction of a population
//!    second moment from batch-mean outer products;
//! 2. `kl_fisher_ratio` — KL divergence over its metric quadratic tends
//!    to 1 for small steps on the Gaussian manifold;
//! 3. `probe_constraint` — every probe lands exactly on its neighborhood
//!    boundary;
//! 4. `probe_optimality` — no boundary point beats the probe's linearized
//!    loss gain;
//! 5. `gradcheck_toy` / 6. `gradcheck_mlp` — analytic gradients against
//!    central finite differences;
//! 7. `collapse` — γ = 0 reduces every variant to SGD and η = 0 reduces
//!    the estimated-metric Fisher variant to SAM, bitwise.
//!
//! Exit code 0 when all families pass, 3 when any fails; `report.json`
//! names each family with its verdict and a one-line summary.

use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use sharpopt::fisher::{anti_reg_inverse, gm_fisher_from_batch_grad, subset_moment_check_with_offset};
use sharpopt::mlp::{gen_blobs, MlpModel, MlpSpec};
use sharpopt::model::{finite_difference_grad, relative_error, DifferentiableModel};
use sharpopt::optim::{
    asam_probe, fsam_probe, sam_probe, FisherMode, OptimConfig, Optimizer, ProbeResult, Variant,
};
use sharpopt::rng::RandomSource;
use sharpopt::toy2d::{kl_fisher_ratio, ToyModel};
use sharpopt::vector::dot;

use crate::common::{ensure_out_dir, load_config, runtime_err, write_json, CliError};

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// JSON suite config; built-in defaults when omitted
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory for report.json, created if missing
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Override the seed behind the randomized checks
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the deliberate shift of the minibatch-identity
    /// coefficient (nonzero values must make that family fail)
    #[arg(long)]
    pub alpha_offset: Option<f64>,
}

/// Suite settings; the defaults are the supported verification gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// Seed for all randomized checks.
    pub seed: u64,
    /// Random (θ, g, γ) tuples in each probe family.
    pub probe_tuples: usize,
    /// Competing boundary points per tuple in the optimality check.
    pub probe_candidates: usize,
    /// Deliberate shift of the minibatch-identity coefficient. Zero for a
    /// real check; nonzero values exist to prove the check can fail.
    pub alpha_offset: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            seed: 7,
            probe_tuples: 200,
            probe_candidates: 200,
            alpha_offset: 0.0,
        }
    }
}

/// One property family's verdict.
#[derive(Debug, Serialize)]
pub struct FamilyReport {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub families: Vec<FamilyReport>,
}

pub fn run(args: &VerifyArgs) -> Result<(), CliError> {
    let mut cfg: VerifyConfig = load_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(offset) = args.alpha_offset {
        cfg.alpha_offset = offset;
    }
    if cfg.probe_tuples == 0 || cfg.probe_candidates == 0 {
        return Err(CliError::Config(
            "probe_tuples and probe_candidates must be >= 1".into(),
        ));
    }

    ensure_out_dir(&args.out)?;
    write_json(&args.out.join("resolved_config.json"), &cfg)?;

    let families = vec![
        subset_moment_family(&cfg)?,
        kl_ratio_family()?,
        probe_constraint_family(&cfg)?,
        probe_optimality_family(&cfg)?,
        gradcheck_toy_family()?,
        gradcheck_mlp_family(&cfg)?,
        collapse_family(&cfg)?,
    ];
    for f in &families {
        let verdict = if f.passed { "PASS" } else { "FAIL" };
        println!("[verify] {} {verdict} — {}", f.name, f.detail);
    }
    let passed = families.iter().all(|f| f.passed);
    write_json(&args.out.join("report.json"), &VerifyReport { passed, families })?;
    if passed {
        println!("[verify] all families passed; report.json written to {}", args.out.display());
        Ok(())
    } else {
        Err(CliError::Properties)
    }
}

/// Family 1: the population second moment must equal the α-weighted
/// combination of expected batch-mean outer products, to near machine
/// precision, for every small (N, M) pair. `alpha_offset` shifts the
/// coefficient and must break the identity.
fn subset_moment_family(cfg: &VerifyConfig) -> Result<FamilyReport, CliError> {
    let mut rng = RandomSource::new(cfg.seed).split(1);
    let mut worst = 0.0f64;
    let mut cases = 0u32;
    for n in 2..=6usize {
        for m in 1..n {
            let dim = 2 + (n + m) % 3;
            let vectors: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..dim).map(|_| rng.uniform_in(-2.0, 2.0)).collect())
                .collect();
            let report = subset_moment_check_with_offset(&vectors, m, cfg.alpha_offset)
                .map_err(runtime_err)?;
            worst = worst.max(report.max_abs_discrepancy);
            cases += 1;
        }
    }
    let passed = worst <= 1e-10;
    Ok(FamilyReport {
        name: "subset_moment_identity".into(),
        passed,
        detail: format!(
            "max |population moment − batch reconstruction| = {worst:.3e} over {cases} (N, M) pairs (coefficient offset {})",
            cfg.alpha_offset
        ),
    })
}

/// Family 2: at step length 1e-3·σ along assorted rays, KL divergence
/// divided by its metric quadratic stays within 5% of 1.
fn kl_ratio_family() -> Result<FamilyReport, CliError> {
    let points = [(0.0, 1.0), (3.0, 0.5), (-15.889, 13.499), (19.847, 29.949)];
    let mut worst = 0.0f64;
    let mut cases = 0u32;
    for &(mu, sigma) in &points {
        for k in 0..8 {
            let phi = std::f64::consts::PI * k as f64 / 8.0;
            let p = kl_fisher_ratio(mu, sigma, [phi.cos(), phi.sin()], 1e-3 * sigma)
                .map_err(runtime_err)?;
            worst = worst.max((p.ratio - 1.0).abs());
            cases += 1;
        }
    }
    let passed = worst <= 0.05;
    Ok(FamilyReport {
        name: "kl_fisher_ratio".into(),
        passed,
        detail: format!("max |KL/quadratic − 1| = {worst:.3e} over {cases} rays at step 1e-3·σ"),
    })
}

fn gamma_for(i: usize) -> f64 {
    [1e-3, 0.05, 0.5, 2.0][i % 4]
}

fn random_tuple(rng: &mut RandomSource, i: usize) -> (Vec<f64>, Vec<f64>, f64) {
    let dim = 2 + i % 7;
    let theta: Vec<f64> = (0..dim).map(|_| rng.uniform_in(-3.0, 3.0)).collect();
    let g: Vec<f64> = (0..dim).map(|_| rng.uniform_in(-3.0, 3.0)).collect();
    (theta, g, gamma_for(i))
}

fn all_probes(
    theta: &[f64],
    g: &[f64],
    gamma: f64,
) -> Result<[(Variant, ProbeResult, Vec<f64>); 3], CliError> {
    let inv = anti_reg_inverse(&gm_fisher_from_batch_grad(g), 1.0).map_err(runtime_err)?;
    Ok([
        (Variant::Sam, sam_probe(g, gamma), Vec::new()),
        (Variant::Asam, asam_probe(theta, g, gamma).map_err(runtime_err)?, Vec::new()),
        (Variant::Fsam, fsam_probe(g, &inv, gamma).map_err(runtime_err)?, inv),
    ])
}

/// Family 3: whenever a probe's effective gradient magnitude is positive,
/// its constraint value equals γ² to relative error 1e-9.
fn probe_constraint_family(cfg: &VerifyConfig) -> Result<FamilyReport, CliError> {
    let mut rng = RandomSource::new(cfg.seed).split(2);
    let mut worst = 0.0f64;
    let mut checks = 0u32;
    for i in 0..cfg.probe_tuples {
        let (theta, g, gamma) = random_tuple(&mut rng, i);
        for (_, probe, _) in all_probes(&theta, &g, gamma)? {
            if probe.grad_norm > 0.0 {
                worst = worst.max((probe.constraint_value - gamma * gamma).abs() / (gamma * gamma));
                checks += 1;
            }
        }
    }
    let passed = worst <= 1e-9;
    Ok(FamilyReport {
        name: "probe_constraint".into(),
        passed,
        detail: format!("max relative boundary error = {worst:.3e} over {checks} probes"),
    })
}

/// Rescales a random direction onto the variant's constraint boundary;
/// `None` when the rescaling degenerates (zero direction, or a weight
/// overflow on a near-frozen axis).
fn boundary_candidate(
    variant: Variant,
    theta: &[f64],
    inv: &[f64],
    gamma: f64,
    u: &[f64],
) -> Option<Vec<f64>> {
    let weighted_sq: f64 = match variant {
        Variant::Sam => u.iter().map(|ui| ui * ui).sum(),
        Variant::Asam => u
            .iter()
            .zip(theta)
            .map(|(ui, ti)| {
                let w = ui / ti;
                w * w
            })
            .sum(),
        Variant::Fsam => u.iter().zip(inv).map(|(ui, vi)| ui * ui / vi).sum(),
        Variant::Sgd => return None,
    };
    let denom = weighted_sq.sqrt();
    if !denom.is_finite() || denom == 0.0 {
        return None;
    }
    Some(u.iter().map(|ui| gamma * ui / denom).collect())
}

/// Family 4: the probe's linearized gain `g·ε*` is at least that of every
/// random point on the same constraint boundary (up to relative slack
/// 1e-9).
fn probe_optimality_family(cfg: &VerifyConfig) -> Result<FamilyReport, CliError> {
    let mut rng = RandomSource::new(cfg.seed).split(3);
    let mut worst_margin = f64::NEG_INFINITY;
    let mut comparisons = 0u64;
    for i in 0..cfg.probe_tuples {
        let (theta, g, gamma) = random_tuple(&mut rng, i);
        for (variant, probe, inv) in all_probes(&theta, &g, gamma)? {
            if probe.grad_norm == 0.0 {
                continue;
            }
            let gain_star = dot(&g, &probe.epsilon).map_err(runtime_err)?;
            for _ in 0..cfg.probe_candidates {
                let u: Vec<f64> = (0..g.len()).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
                let Some(candidate) = boundary_candidate(variant, &theta, &inv, gamma, &u) else {
                    continue;
                };
                let gain = dot(&g, &candidate).map_err(runtime_err)?;
                let margin = (gain - gain_star) / (1.0 + gain_star.abs());
                worst_margin = worst_margin.max(margin);
                comparisons += 1;
            }
        }
    }
    let passed = worst_margin <= 1e-9;
    Ok(FamilyReport {
        name: "probe_optimality".into(),
        passed,
        detail: format!(
            "best challenger's normalized gain margin = {worst_margin:.3e} over {comparisons} boundary points (≤ 0 means the probe is never beaten)"
        ),
    })
}

/// Family 5: the landscape's analytic gradient against central finite
/// differences at assorted points.
fn gradcheck_toy_family() -> Result<FamilyReport, CliError> {
    let model = ToyModel::reference();
    let points = [
        (-10.0, 5.0),
        (3.0, 0.7),
        (20.0, 30.0),
        (-15.0, 13.0),
        (0.5, 2.3),
        (-30.0, 8.0),
    ];
    let mut worst = 0.0f64;
    for &(mu, sigma) in &points {
        let params = [mu, sigma];
        let analytic = model.grad(&params, &[()]).map_err(runtime_err)?;
        let fd = finite_difference_grad(&model, &params, &[()]).map_err(runtime_err)?;
        for (a, b) in analytic.iter().zip(&fd) {
            worst = worst.max(relative_error(*a, *b, 1e-6));
        }
    }
    let passed = worst <= 1e-4;
    Ok(FamilyReport {
        name: "gradcheck_toy".into(),
        passed,
        detail: format!("max relative gradient error = {worst:.3e} over {} points", points.len()),
    })
}

/// Family 6: the classifier's backpropagated batch gradient against
/// central finite differences on a small network.
fn gradcheck_mlp_family(cfg: &VerifyConfig) -> Result<FamilyReport, CliError> {
    let spec = MlpSpec { layers: vec![2, 8, 6, 3], label_smoothing: 0.1 };
    let model = MlpModel::new(spec).map_err(runtime_err)?;
    let mut rng = RandomSource::new(cfg.seed).split(4);
    let data = gen_blobs(12, 3, 2, 0.3, &mut rng).map_err(runtime_err)?;
    let params = model.init_params(&mut rng);
    let analytic = model.grad(&params, &data.points).map_err(runtime_err)?;
    let fd = finite_difference_grad(&model, &params, &data.points).map_err(runtime_err)?;
    let mut worst = 0.0f64;
    for (a, b) in analytic.iter().zip(&fd) {
        worst = worst.max(relative_error(*a, *b, 1e-6));
    }
    let passed = worst <= 1e-4;
    Ok(FamilyReport {
        name: "gradcheck_mlp".into(),
        passed,
        detail: format!(
            "max relative gradient error = {worst:.3e} over {} parameters",
            params.len()
        ),
    })
}

/// Runs `steps` optimizer steps and returns every post-step parameter's
/// bit pattern, so comparisons are exact rather than within tolerance.
fn step_bits<M: DifferentiableModel>(
    model: &M,
    cfg: OptimConfig,
    start: &[f64],
    batch: &[M::Example],
    steps: usize,
) -> Result<Vec<u64>, CliError> {
    let mut opt = Optimizer::new(cfg, start.len()).map_err(runtime_err)?;
    let mut params = start.to_vec();
    let mut bits = Vec::with_capacity(steps * start.len());
    for _ in 0..steps {
        let (next, _) = opt.step(model, &params, batch, cfg.lr).map_err(runtime_err)?;
        params = next;
        bits.extend(params.iter().map(|p| p.to_bits()));
    }
    Ok(bits)
}

/// Family 7: γ = 0 collapses every variant to SGD and η = 0 collapses the
/// estimated-metric Fisher variant to SAM — bitwise, over full momentum +
/// weight-decay training runs on both the landscape and the classifier.
fn collapse_family(cfg: &VerifyConfig) -> Result<FamilyReport, CliError> {
    let make = |variant, gamma, eta, lr| OptimConfig {
        variant,
        gamma,
        eta,
        lr,
        momentum: 0.5,
        weight_decay: 1e-4,
        fisher_mode: FisherMode::GradientMagnitude,
    };

    let toy = ToyModel::reference();
    let toy_start = [-12.0, 30.0];
    let toy_steps = 50;

    let mut rng = RandomSource::new(cfg.seed).split(5);
    let data = gen_blobs(16, 3, 2, 0.3, &mut rng).map_err(runtime_err)?;
    let mlp = MlpModel::new(MlpSpec { layers: vec![2, 8, 3], label_smoothing: 0.1 })
        .map_err(runtime_err)?;
    let mlp_start = mlp.init_params(&mut rng);
    let mlp_steps = 30;

    let mut gamma_zero_ok = true;
    {
        let toy_ref = step_bits(&toy, make(Variant::Sgd, 0.0, 1.0, 1.0), &toy_start, &[()], toy_steps)?;
        let mlp_ref = step_bits(&mlp, make(Variant::Sgd, 0.0, 1.0, 0.1), &mlp_start, &data.points, mlp_steps)?;
        for v in [Variant::Sam, Variant::Asam, Variant::Fsam] {
            gamma_zero_ok &=
                step_bits(&toy, make(v, 0.0, 1.0, 1.0), &toy_start, &[()], toy_steps)? == toy_ref;
            gamma_zero_ok &= step_bits(&mlp, make(v, 0.0, 1.0, 0.1), &mlp_start, &data.points, mlp_steps)?
                == mlp_ref;
        }
    }

    let mut eta_zero_ok = true;
    {
        let toy_sam = step_bits(&toy, make(Variant::Sam, 0.05, 0.0, 1.0), &toy_start, &[()], toy_steps)?;
        let toy_fsam = step_bits(&toy, make(Variant::Fsam, 0.05, 0.0, 1.0), &toy_start, &[()], toy_steps)?;
        eta_zero_ok &= toy_sam == toy_fsam;
        let mlp_sam =
            step_bits(&mlp, make(Variant::Sam, 0.05, 0.0, 0.1), &mlp_start, &data.points, mlp_steps)?;
        let mlp_fsam =
            step_bits(&mlp, make(Variant::Fsam, 0.05, 0.0, 0.1), &mlp_start, &data.points, mlp_steps)?;
        eta_zero_ok &= mlp_sam == mlp_fsam;
    }

    let passed = gamma_zero_ok && eta_zero_ok;
    Ok(FamilyReport {
        name: "collapse".into(),
        passed,
        detail: format!(
            "γ = 0 ⇒ SGD bitwise: {gamma_zero_ok}; η = 0 ⇒ SAM bitwise: {eta_zero_ok} ({toy_steps} landscape steps, {mlp_steps} classifier steps, {} parameters)",
            mlp_start.len()
        ),
    })
}
