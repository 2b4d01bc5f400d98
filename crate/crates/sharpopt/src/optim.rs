//! Sharpness-aware optimizer steps: SGD, SAM, ASAM, and Fisher SAM.
//!
//! All four variants share one probe-then-step skeleton: compute the batch
//! gradient, move to the worst-case point of a variant-specific
//! neighborhood (the probe), re-evaluate the gradient there, and descend
//! along the re-evaluated gradient with weight decay and momentum. The
//! probes are the closed-form maximizers of the linearized loss over their
//! constraint sets:
//!
//! - SAM: Euclidean ball `‖ε‖ ≤ γ`, probe `γ·g/‖g‖`;
//! - ASAM: magnitude-scaled ellipsoid `Σ(εᵢ/|θᵢ|)² ≤ γ²`, probe
//!   `γ·θᵢ²gᵢ/‖θ⊙g‖`;
//! - Fisher SAM: metric ellipsoid `Σ εᵢ²/invᵢ ≤ γ²` for an inverse-metric
//!   diagonal `inv`, probe `γ·invᵢgᵢ/√(Σ invⱼgⱼ²)`.
//!
//! Degenerate collapses are exact by construction: `γ = 0` turns every
//! variant into plain SGD bit for bit, and an all-ones inverse metric
//! (anti-regularizer `η = 0`) turns the Fisher probe into the SAM probe
//! bit for bit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fisher::{
    anti_reg_inverse, empirical_diag_fisher, exact_gaussian_fisher, gm_fisher_from_batch_grad,
};
use crate::model::DifferentiableModel;
use crate::vector::norm2;

/// Optimizer variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Sgd,
    Sam,
    Asam,
    Fsam,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Variant::Sgd => "sgd",
            Variant::Sam => "sam",
            Variant::Asam => "asam",
            Variant::Fsam => "fsam",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(Variant::Sgd),
            "sam" => Ok(Variant::Sam),
            "asam" => Ok(Variant::Asam),
            "fsam" => Ok(Variant::Fsam),
            other => Err(Error::invalid(format!(
                "unknown variant '{other}' (expected sgd|sam|asam|fsam)"
            ))),
        }
    }
}

/// How the Fisher SAM variant obtains its inverse-metric diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FisherMode {
    /// Closed-form Gaussian metric for the 2-parameter toy model; uses the
    /// exact inverse `(σ², σ²/2)` and ignores `eta`.
    ExactToy,
    /// Mean of squared per-example score gradients, anti-regularized.
    EmpiricalDiag,
    /// Elementwise square of the batch gradient, anti-regularized; costs
    /// nothing beyond the gradient the step already computed.
    GradientMagnitude,
}

/// Hyperparameters of one optimizer instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub variant: Variant,
    /// Neighborhood size γ ≥ 0; 0 collapses every variant to SGD.
    pub gamma: f64,
    /// Fisher anti-regularizer η ≥ 0 (estimated Fisher modes only).
    pub eta: f64,
    /// Base learning rate > 0.
    pub lr: f64,
    /// Momentum coefficient in [0, 1).
    pub momentum: f64,
    /// Weight-decay coefficient ≥ 0, applied to the pre-step parameters.
    pub weight_decay: f64,
    /// Inverse-metric source for the Fisher SAM variant.
    pub fisher_mode: FisherMode,
}

impl OptimConfig {
    /// Plain SGD with the given learning rate and no extras.
    pub fn sgd(lr: f64) -> Self {
        OptimConfig {
            variant: Variant::Sgd,
            gamma: 0.0,
            eta: 0.0,
            lr,
            momentum: 0.0,
            weight_decay: 0.0,
            fisher_mode: FisherMode::GradientMagnitude,
        }
    }

    /// Validates the numeric ranges of every field.
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0) {
            return Err(Error::invalid(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if !(self.eta >= 0.0) {
            return Err(Error::invalid(format!("eta must be >= 0, got {}", self.eta)));
        }
        if !(self.lr > 0.0) {
            return Err(Error::invalid(format!("lr must be > 0, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::invalid(format!(
                "weight_decay must be >= 0, got {}",
                self.weight_decay
            )));
        }
        Ok(())
    }
}

/// A worst-case perturbation with diagnostics.
///
/// `grad_norm` is the norm appearing in the probe's denominator (the
/// variant's effective gradient magnitude: `‖g‖` for SAM, `‖θ⊙g‖` for
/// ASAM, `√(Σ invᵢgᵢ²)` for Fisher SAM). Whenever it is positive the
/// probe lies exactly on the constraint boundary, so `constraint_value`
/// equals `γ²` to relative error 1e-9; when it is zero the probe is the
/// zero vector by convention and `constraint_value` is 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeResult {
    pub epsilon: Vec<f64>,
    pub constraint_value: f64,
    pub grad_norm: f64,
}

impl ProbeResult {
    fn zero(len: usize, grad_norm: f64) -> Self {
        ProbeResult {
            epsilon: vec![0.0; len],
            constraint_value: 0.0,
            grad_norm,
        }
    }
}

/// SAM probe: `ε = γ·g/‖g‖`, or 0 when the gradient vanishes.
pub fn sam_probe(g: &[f64], gamma: f64) -> ProbeResult {
    let n = norm2(g);
    if n == 0.0 || gamma == 0.0 {
        return ProbeResult::zero(g.len(), n);
    }
    let eps: Vec<f64> = g.iter().map(|gi| gamma * gi / n).collect();
    let constraint = {
        let e = norm2(&eps);
        e * e
    };
    ProbeResult {
        epsilon: eps,
        constraint_value: constraint,
        grad_norm: n,
    }
}

/// ASAM probe: `εᵢ = γ·θᵢ²gᵢ/‖θ⊙g‖`, or 0 when `θ⊙g` vanishes.
///
/// Axes with `θᵢ = 0` are frozen (`εᵢ = 0`); their 0/0 constraint terms
/// count as 0, which is the limit of the ellipsoid as the axis collapses.
pub fn asam_probe(theta: &[f64], g: &[f64], gamma: f64) -> Result<ProbeResult> {
    if theta.len() != g.len() {
        return Err(Error::DimensionMismatch {
            expected: theta.len(),
            got: g.len(),
        });
    }
    let mut tg_norm_sq = 0.0;
    for (t, gi) in theta.iter().zip(g) {
        let tg = t * gi;
        tg_norm_sq += tg * tg;
    }
    let tg_norm = tg_norm_sq.sqrt();
    if tg_norm == 0.0 || gamma == 0.0 {
        return Ok(ProbeResult::zero(g.len(), tg_norm));
    }
    let eps: Vec<f64> = theta
        .iter()
        .zip(g)
        .map(|(t, gi)| gamma * (t * t * gi) / tg_norm)
        .collect();
    let mut constraint = 0.0;
    for (e, t) in eps.iter().zip(theta) {
        if *t != 0.0 {
            let r = e / t.abs();
            constraint += r * r;
        }
    }
    Ok(ProbeResult {
        epsilon: eps,
        constraint_value: constraint,
        grad_norm: tg_norm,
    })
}

/// Fisher probe: `εᵢ = γ·invᵢgᵢ/√(Σ invⱼgⱼ²)` for a positive
/// inverse-metric diagonal `inv_f`, or 0 when the radicand vanishes.
///
/// # Errors
/// [`Error::InvalidArgument`] if any `inv_f` entry is ≤ 0, or on a length
/// mismatch.
pub fn fsam_probe(g: &[f64], inv_f: &[f64], gamma: f64) -> Result<ProbeResult> {
    if inv_f.len() != g.len() {
        return Err(Error::DimensionMismatch {
            expected: g.len(),
            got: inv_f.len(),
        });
    }
    if let Some(bad) = inv_f.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::invalid(format!(
            "inverse-metric entries must be > 0, got {bad}"
        )));
    }
    let mut radicand = 0.0;
    for (inv, gi) in inv_f.iter().zip(g) {
        radicand += (inv * gi) * gi;
    }
    let denom = radicand.sqrt();
    if denom == 0.0 || gamma == 0.0 {
        return Ok(ProbeResult::zero(g.len(), denom));
    }
    let eps: Vec<f64> = inv_f
        .iter()
        .zip(g)
        .map(|(inv, gi)| gamma * (inv * gi) / denom)
        .collect();
    let mut constraint = 0.0;
    for (e, inv) in eps.iter().zip(inv_f) {
        constraint += e * e / inv;
    }
    Ok(ProbeResult {
        epsilon: eps,
        constraint_value: constraint,
        grad_norm: denom,
    })
}

/// Cosine learning-rate schedule: `base_lr · ½(1 + cos(π·t/T))`.
///
/// # Errors
/// [`Error::InvalidArgument`] if `t > T` or `T == 0`.
pub fn cosine_lr(base_lr: f64, t: usize, total: usize) -> Result<f64> {
    if total == 0 {
        return Err(Error::invalid("schedule length T must be >= 1"));
    }
    if t > total {
        return Err(Error::invalid(format!("step t={t} exceeds schedule length T={total}")));
    }
    Ok(base_lr * 0.5 * (1.0 + (std::f64::consts::PI * t as f64 / total as f64).cos()))
}

/// One row of a training trajectory.
#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryRecord {
    pub iter: usize,
    /// Parameters before this step.
    pub params: Vec<f64>,
    /// Mean batch loss at those parameters.
    pub loss: f64,
    /// Euclidean norm of the probe taken this step.
    pub probe_norm: f64,
    /// Learning rate applied this step.
    pub lr: f64,
}

/// Sequential optimizer state: one momentum buffer and a step counter.
#[derive(Debug, Clone)]
pub struct Optimizer {
    cfg: OptimConfig,
    momentum_buf: Vec<f64>,
    iter: usize,
}

impl Optimizer {
    /// Creates an optimizer for `param_len` parameters.
    ///
    /// # Errors
    /// Propagates [`OptimConfig::validate`] failures.
    pub fn new(cfg: OptimConfig, param_len: usize) -> Result<Self> {
        cfg.validate()?;
        Ok(Optimizer {
            cfg,
            momentum_buf: vec![0.0; param_len],
            iter: 0,
        })
    }

    pub fn config(&self) -> &OptimConfig {
        &self.cfg
    }

    /// Steps taken so far.
    pub fn iter(&self) -> usize {
        self.iter
    }

    /// Computes the variant's probe for gradient `g` at `params`.
    ///
    /// For the Fisher variant the inverse metric is rebuilt from the
    /// current batch on every call (no cross-step smoothing).
    pub fn probe<M: DifferentiableModel>(
        &self,
        model: &M,
        params: &[f64],
        batch: &[M::Example],
        g: &[f64],
    ) -> Result<ProbeResult> {
        match self.cfg.variant {
            Variant::Sgd => Ok(ProbeResult::zero(g.len(), norm2(g))),
            Variant::Sam => Ok(sam_probe(g, self.cfg.gamma)),
            Variant::Asam => asam_probe(params, g, self.cfg.gamma),
            Variant::Fsam => {
                let inv_f = self.inverse_metric(model, params, batch, g)?;
                fsam_probe(g, &inv_f, self.cfg.gamma)
            }
        }
    }

    fn inverse_metric<M: DifferentiableModel>(
        &self,
        model: &M,
        params: &[f64],
        batch: &[M::Example],
        g: &[f64],
    ) -> Result<Vec<f64>> {
        match self.cfg.fisher_mode {
            FisherMode::ExactToy => {
                if params.len() != 2 {
                    return Err(Error::invalid(
                        "exact_toy Fisher mode requires a 2-parameter (mu, sigma) model",
                    ));
                }
                let f = exact_gaussian_fisher(params[0], params[1])?;
                Ok(vec![1.0 / f.d11, 1.0 / f.d22])
            }
            FisherMode::EmpiricalDiag => {
                let grads = model.per_example_score_grads(params, batch)?;
                let f = empirical_diag_fisher(&grads)?;
                anti_reg_inverse(&f, self.cfg.eta)
            }
            FisherMode::GradientMagnitude => {
                let f = gm_fisher_from_batch_grad(g);
                anti_reg_inverse(&f, self.cfg.eta)
            }
        }
    }

    /// One optimizer step at learning rate `lr_now`.
    ///
    /// Phases: (1) loss and gradient at `params`; (2) variant probe ε*;
    /// (3) gradient re-evaluated at `params + ε*` — the probe is treated
    /// as constant, with no probe-Jacobian term; (4) weight decay (on the
    /// pre-step parameters), momentum, and the descent update. SGD skips
    /// phases 2–3 and reuses the phase-1 gradient.
    ///
    /// Returns the new parameters and the trajectory row for this step.
    ///
    /// # Errors
    /// [`Error::Numeric`] naming the failing phase if either evaluation
    /// produces a non-finite value (e.g. the probe left the model's
    /// domain).
    pub fn step<M: DifferentiableModel>(
        &mut self,
        model: &M,
        params: &[f64],
        batch: &[M::Example],
        lr_now: f64,
    ) -> Result<(Vec<f64>, TrajectoryRecord)> {
        let (loss, g) = model
            .loss_and_grad(params, batch)
            .map_err(|e| Error::numeric("probe-phase gradient", e.to_string()))?;
        if !loss.is_finite() || !crate::vector::all_finite(&g) {
            return Err(Error::numeric(
                "probe-phase gradient",
                "non-finite loss or gradient",
            ));
        }

        let probe = self.probe(model, params, batch, &g)?;

        let g_final = if self.cfg.variant == Variant::Sgd {
            g
        } else {
            let probed: Vec<f64> = params
                .iter()
                .zip(&probe.epsilon)
                .map(|(p, e)| p + e)
                .collect();
            let g2 = model
                .grad(&probed, batch)
                .map_err(|e| Error::numeric("re-evaluation gradient", e.to_string()))?;
            if !crate::vector::all_finite(&g2) {
                return Err(Error::numeric(
                    "re-evaluation gradient",
                    "non-finite gradient at probed point",
                ));
            }
            g2
        };

        // update = momentum·buf + (g' + wd·θ); θ' = θ − lr·update.
        let mut new_params = params.to_vec();
        for i in 0..params.len() {
            let total = g_final[i] + self.cfg.weight_decay * params[i];
            self.momentum_buf[i] = self.cfg.momentum * self.momentum_buf[i] + total;
            new_params[i] = params[i] - lr_now * self.momentum_buf[i];
        }

        let record = TrajectoryRecord {
            iter: self.iter,
            params: params.to_vec(),
            loss,
            probe_norm: norm2(&probe.epsilon),
            lr: lr_now,
        };
        self.iter += 1;
        Ok((new_params, record))
    }
}

/// Writes trajectory rows as CSV: `iter,loss,probe_norm,lr` followed by
/// one `theta_i` column per parameter when `include_params` is set (toy
/// runs include the full parameter vector; larger models omit it).
pub fn write_trajectory_csv<W: std::io::Write>(
    out: W,
    records: &[TrajectoryRecord],
    include_params: bool,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let k = records.first().map_or(0, |r| r.params.len());
    let mut header = vec![
        "iter".to_string(),
        "loss".to_string(),
        "probe_norm".to_string(),
        "lr".to_string(),
    ];
    if include_params {
        header.extend((0..k).map(|i| format!("theta_{i}")));
    }
    w.write_record(&header)
        .map_err(|e| Error::numeric("csv write", e.to_string()))?;
    for r in records {
        let mut row = vec![
            r.iter.to_string(),
            format!("{:.17e}", r.loss),
            format!("{:.17e}", r.probe_norm),
            format!("{:.17e}", r.lr),
        ];
        if include_params {
            row.extend(r.params.iter().map(|p| format!("{p:.17e}")));
        }
        w.write_record(&row)
            .map_err(|e| Error::numeric("csv write", e.to_string()))?;
    }
    w.flush().map_err(|e| Error::numeric("csv flush", e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::QuadraticModel;

    #[test]
    fn sam_probe_three_four_five() {
        let p = sam_probe(&[3.0, 4.0], 0.1);
        assert!((p.epsilon[0] - 0.06).abs() < 1e-15);
        assert!((p.epsilon[1] - 0.08).abs() < 1e-15);
        assert!((p.constraint_value - 0.01).abs() < 1e-15);
    }

    #[test]
    fn sam_probe_zero_gradient() {
        let p = sam_probe(&[0.0, 0.0], 2.0);
        assert_eq!(p.epsilon, vec![0.0, 0.0]);
        assert_eq!(p.constraint_value, 0.0);
        assert_eq!(p.grad_norm, 0.0);
    }

    #[test]
    fn asam_probe_hand_example() {
        // theta=(2,1), g=(1,2), gamma=1: ||theta.g|| = sqrt(4+4) = 2*sqrt2,
        // eps = (4*1, 1*2)/(2*sqrt2) = (sqrt2, 1/sqrt2).
        let p = asam_probe(&[2.0, 1.0], &[1.0, 2.0], 1.0).unwrap();
        assert!((p.epsilon[0] - std::f64::consts::SQRT_2).abs() < 1e-12);
        assert!((p.epsilon[1] - 1.0 / std::f64::consts::SQRT_2).abs() < 1e-12);
        assert!((p.constraint_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn asam_probe_freezes_zero_axes() {
        let p = asam_probe(&[0.0, 1.0], &[5.0, 2.0], 1.0).unwrap();
        assert_eq!(p.epsilon[0], 0.0);
        assert!((p.constraint_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fsam_probe_hand_example() {
        // F = diag(1,4), inv = (1, 0.25), g = (1,2), gamma = 1:
        // radicand = 1 + 0.25*4 = 2, eps = (1, 0.5)/sqrt2.
        let p = fsam_probe(&[1.0, 2.0], &[1.0, 0.25], 1.0).unwrap();
        assert!((p.epsilon[0] - 1.0 / std::f64::consts::SQRT_2).abs() < 1e-12);
        assert!((p.epsilon[1] - 0.5 / std::f64::consts::SQRT_2).abs() < 1e-12);
        // eps^T F eps with F = diag(1,4).
        let q = p.epsilon[0] * p.epsilon[0] + 4.0 * p.epsilon[1] * p.epsilon[1];
        assert!((q - 1.0).abs() < 1e-12);
        assert!((p.constraint_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fsam_probe_identity_metric_matches_sam_bitwise() {
        let g = [0.3, -1.2, 0.07, 4.5];
        let ones = vec![1.0; 4];
        let a = fsam_probe(&g, &ones, 0.7).unwrap();
        let b = sam_probe(&g, 0.7);
        assert_eq!(a.epsilon, b.epsilon);
    }

    #[test]
    fn fsam_probe_rejects_nonpositive_metric() {
        assert!(fsam_probe(&[1.0], &[0.0], 1.0).is_err());
        assert!(fsam_probe(&[1.0], &[-2.0], 1.0).is_err());
    }

    #[test]
    fn cosine_schedule_endpoints() {
        assert_eq!(cosine_lr(0.1, 0, 10).unwrap(), 0.1);
        assert!(cosine_lr(0.1, 10, 10).unwrap().abs() < 1e-17);
        assert!((cosine_lr(0.1, 5, 10).unwrap() - 0.05).abs() < 1e-15);
        assert!(cosine_lr(0.1, 11, 10).is_err());
        assert!(cosine_lr(0.1, 0, 0).is_err());
    }

    #[test]
    fn sgd_step_on_quadratic() {
        let model = QuadraticModel::new(2);
        let mut opt = Optimizer::new(OptimConfig::sgd(0.1), 2).unwrap();
        let (p, rec) = opt.step(&model, &[1.0, 0.0], &[()], 0.1).unwrap();
        assert_eq!(p, vec![0.9, 0.0]);
        assert_eq!(rec.iter, 0);
        assert_eq!(rec.loss, 0.5);
        assert_eq!(rec.probe_norm, 0.0);
    }
}
