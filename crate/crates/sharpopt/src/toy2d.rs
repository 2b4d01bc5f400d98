//! Two-parameter benchmark landscape with one wide and one narrow basin.
//!
//! The model is a univariate Gaussian `N(μ, σ²)`, and the loss scores it
//! against a small bank of target Gaussians: each component `i` contributes
//! a divergence `Eᵢ = KL(N(μ,σ²) ‖ N(mᵢ, sᵢ²))` and the total loss is the
//! soft minimum
//!
//! ```text
//! l(μ, σ) = −log Σᵢ αᵢ · exp(−Eᵢ / βᵢ²)
//! ```
//!
//! With the [`ToyLossSpec::reference`] constants this produces exactly two
//! local minima: a wide, low-curvature basin near (20, 30) and a narrow,
//! high-curvature basin near (−16, 13.5) whose loss is slightly lower.
//! Because the parameters are distribution parameters, the information
//! metric is wildly anisotropic across the landscape (it scales like
//! `1/σ²`), which is what makes this a useful stress test for
//! metric-aware perturbation rules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DifferentiableModel;
use crate::optim::{OptimConfig, Optimizer, TrajectoryRecord};

/// Smallest σ tolerated during iterative descent; steps below it are
/// projected back (a projection counter reports how often).
pub const SIGMA_FLOOR: f64 = 1e-3;

/// KL divergence between univariate Gaussians,
/// `KL(N(mu_p, sigma_p²) ‖ N(mu_q, sigma_q²))`.
///
/// # Errors
/// [`Error::Domain`] if either standard deviation is not positive.
pub fn kl_divergence(mu_p: f64, sigma_p: f64, mu_q: f64, sigma_q: f64) -> Result<f64> {
    if !(sigma_p > 0.0) || !(sigma_q > 0.0) {
        return Err(Error::Domain(format!(
            "standard deviations must be positive, got ({sigma_p}, {sigma_q})"
        )));
    }
    let d = mu_p - mu_q;
    Ok((sigma_q / sigma_p).ln() + (sigma_p * sigma_p + d * d) / (2.0 * sigma_q * sigma_q) - 0.5)
}

/// One target component of the landscape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyComponent {
    /// Target mean.
    pub m: f64,
    /// Target standard deviation (> 0).
    pub s: f64,
    /// Mixture weight (> 0; the weights need not sum to 1).
    pub alpha: f64,
    /// Basin-width temperature (> 0); the component's divergence enters
    /// the soft minimum divided by `beta²`.
    pub beta: f64,
}

impl ToyComponent {
    fn validate(&self) -> Result<()> {
        if !(self.s > 0.0) {
            return Err(Error::invalid(format!("component s must be > 0, got {}", self.s)));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::invalid(format!(
                "component alpha must be > 0, got {}",
                self.alpha
            )));
        }
        if !(self.beta > 0.0) {
            return Err(Error::invalid(format!(
                "component beta must be > 0, got {}",
                self.beta
            )));
        }
        Ok(())
    }

    /// Divergence of `N(mu, sigma²)` from this component's target.
    fn energy(&self, mu: f64, sigma: f64) -> Result<f64> {
        kl_divergence(mu, sigma, self.m, self.s)
    }

    /// Gradient of [`ToyComponent::energy`] in (mu, sigma).
    fn energy_grad(&self, mu: f64, sigma: f64) -> [f64; 2] {
        let s2 = self.s * self.s;
        [(mu - self.m) / s2, -1.0 / sigma + sigma / s2]
    }
}

/// The full landscape: a bank of components combined by a soft minimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyLossSpec {
    pub components: Vec<ToyComponent>,
}

impl ToyLossSpec {
    /// Reference two-basin landscape used by the toy experiments and the
    /// `toy` CLI command: a wide basin centered at (20, 30) and a narrow,
    /// slightly deeper basin centered at (−20, 10). Its minima sit at
    /// (19.85, 29.95) with loss 0.511 and (−15.89, 13.50) with loss 0.497,
    /// with curvature traces differing by roughly 6×.
    pub fn reference() -> Self {
        ToyLossSpec {
            components: vec![
                ToyComponent {
                    m: 20.0,
                    s: 30.0,
                    alpha: 0.6,
                    beta: 1.8,
                },
                ToyComponent {
                    m: -20.0,
                    s: 10.0,
                    alpha: 0.21,
                    beta: 1.2,
                },
            ],
        }
    }

    /// Validates every component and that at least one is present.
    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::invalid("landscape needs at least one component"));
        }
        for c in &self.components {
            c.validate()?;
        }
        Ok(())
    }

    /// Per-component log-scores `log αᵢ − Eᵢ/βᵢ²` at (mu, sigma).
    fn log_scores(&self, mu: f64, sigma: f64) -> Result<Vec<f64>> {
        self.components
            .iter()
            .map(|c| Ok(c.alpha.ln() - c.energy(mu, sigma)? / (c.beta * c.beta)))
            .collect()
    }

    /// Loss value, evaluated through a log-sum-exp for stability.
    ///
    /// # Errors
    /// [`Error::Domain`] if `sigma <= 0`.
    pub fn loss(&self, mu: f64, sigma: f64) -> Result<f64> {
        let t = self.log_scores(mu, sigma)?;
        let t_max = t.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = t.iter().map(|ti| (ti - t_max).exp()).sum();
        Ok(-(t_max + sum.ln()))
    }

    /// Gradient of the loss in (mu, sigma): the softmax-weighted average
    /// of the component divergence gradients, each divided by `βᵢ²`.
    pub fn grad(&self, mu: f64, sigma: f64) -> Result<[f64; 2]> {
        let t = self.log_scores(mu, sigma)?;
        let t_max = t.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = t.iter().map(|ti| (ti - t_max).exp()).sum();
        let mut g = [0.0, 0.0];
        for (ti, c) in t.iter().zip(&self.components) {
            let w = (ti - t_max).exp() / sum;
            let eg = c.energy_grad(mu, sigma);
            let b2 = c.beta * c.beta;
            g[0] += w * eg[0] / b2;
            g[1] += w * eg[1] / b2;
        }
        Ok(g)
    }

    /// Trace of the Hessian by central second differences with step `h`.
    pub fn hessian_trace_fd(&self, mu: f64, sigma: f64, h: f64) -> Result<f64> {
        if !(h > 0.0) {
            return Err(Error::invalid(format!("fd step must be > 0, got {h}")));
        }
        let c = self.loss(mu, sigma)?;
        let d_mu = (self.loss(mu + h, sigma)? - 2.0 * c + self.loss(mu - h, sigma)?) / (h * h);
        let d_sigma = (self.loss(mu, sigma + h)? - 2.0 * c + self.loss(mu, sigma - h)?) / (h * h);
        Ok(d_mu + d_sigma)
    }

    /// Full 2×2 Hessian by central differences (used to tell minima from
    /// saddles after descent).
    fn hessian_fd(&self, mu: f64, sigma: f64, h: f64) -> Result<[[f64; 2]; 2]> {
        let c = self.loss(mu, sigma)?;
        let h11 = (self.loss(mu + h, sigma)? - 2.0 * c + self.loss(mu - h, sigma)?) / (h * h);
        let h22 = (self.loss(mu, sigma + h)? - 2.0 * c + self.loss(mu, sigma - h)?) / (h * h);
        let h12 = (self.loss(mu + h, sigma + h)? - self.loss(mu + h, sigma - h)?
            - self.loss(mu - h, sigma + h)?
            + self.loss(mu - h, sigma - h)?)
            / (4.0 * h * h);
        Ok([[h11, h12], [h12, h22]])
    }
}

/// [`DifferentiableModel`] wrapper for the landscape.
///
/// The landscape is deterministic — examples carry no information — so
/// the batch argument only matters through the trait's mean-loss
/// convention, which is trivially satisfied.
#[derive(Debug, Clone)]
pub struct ToyModel {
    pub spec: ToyLossSpec,
}

impl ToyModel {
    pub fn reference() -> Self {
        ToyModel {
            spec: ToyLossSpec::reference(),
        }
    }
}

impl DifferentiableModel for ToyModel {
    type Example = ();

    fn param_len(&self) -> usize {
        2
    }

    fn loss(&self, params: &[f64], _batch: &[()]) -> Result<f64> {
        crate::model::check_len(2, params)?;
        self.spec.loss(params[0], params[1])
    }

    fn grad(&self, params: &[f64], _batch: &[()]) -> Result<Vec<f64>> {
        crate::model::check_len(2, params)?;
        Ok(self.spec.grad(params[0], params[1])?.to_vec())
    }
}

/// Search settings for [`find_minima`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinimaSearchConfig {
    pub mu_range: (f64, f64),
    pub sigma_range: (f64, f64),
    /// Number of descent starts along each axis.
    pub starts_mu: usize,
    pub starts_sigma: usize,
    pub lr: f64,
    pub max_iters: usize,
    /// Descent stops once the gradient norm falls below this.
    pub grad_tol: f64,
    /// Converged points closer than this are treated as the same minimum.
    pub dedup_radius: f64,
}

impl Default for MinimaSearchConfig {
    fn default() -> Self {
        MinimaSearchConfig {
            mu_range: (-60.0, 60.0),
            sigma_range: (1.0, 60.0),
            starts_mu: 13,
            starts_sigma: 12,
            lr: 10.0,
            max_iters: 50_000,
            grad_tol: 1e-9,
            dedup_radius: 0.5,
        }
    }
}

/// One local minimum of the landscape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToyMinimum {
    pub mu: f64,
    pub sigma: f64,
    pub loss: f64,
    /// Central-difference Hessian trace at step 1e-3 — the sharpness
    /// summary reported for each basin.
    pub hessian_trace: f64,
}

/// Locates every local minimum by gradient descent from a grid of starts,
/// filters out saddles with a positive-definiteness check, merges
/// duplicates, and returns the survivors sorted by ascending loss.
///
/// Starts that fail to meet `grad_tol` within `max_iters` are dropped
/// rather than reported half-converged.
pub fn find_minima(spec: &ToyLossSpec, cfg: &MinimaSearchConfig) -> Result<Vec<ToyMinimum>> {
    spec.validate()?;
    if cfg.starts_mu < 2 || cfg.starts_sigma < 2 {
        return Err(Error::invalid("need at least a 2x2 grid of starts"));
    }
    let mut converged: Vec<(f64, f64, f64)> = Vec::new(); // (loss, mu, sigma)
    for i in 0..cfg.starts_mu {
        for j in 0..cfg.starts_sigma {
            let fi = i as f64 / (cfg.starts_mu - 1) as f64;
            let fj = j as f64 / (cfg.starts_sigma - 1) as f64;
            let mut mu = cfg.mu_range.0 + fi * (cfg.mu_range.1 - cfg.mu_range.0);
            let mut sigma = cfg.sigma_range.0 + fj * (cfg.sigma_range.1 - cfg.sigma_range.0);
            for _ in 0..cfg.max_iters {
                let g = spec.grad(mu, sigma)?;
                let gn = (g[0] * g[0] + g[1] * g[1]).sqrt();
                if !gn.is_finite() {
                    break;
                }
                if gn < cfg.grad_tol {
                    converged.push((spec.loss(mu, sigma)?, mu, sigma));
                    break;
                }
                mu -= cfg.lr * g[0];
                sigma -= cfg.lr * g[1];
                if sigma < SIGMA_FLOOR {
                    sigma = SIGMA_FLOOR;
                }
            }
        }
    }

    // Keep only true minima: both Hessian eigenvalues positive.
    converged.retain(|&(_, mu, sigma)| {
        matches!(spec.hessian_fd(mu, sigma, 1e-3),
                 Ok(h) if h[0][0] > 0.0 && h[0][0] * h[1][1] - h[0][1] * h[1][0] > 0.0)
    });

    // Greedy dedup from the lowest loss up, so each cluster is represented
    // by its best point.
    converged.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut kept: Vec<ToyMinimum> = Vec::new();
    for (loss, mu, sigma) in converged {
        let dup = kept.iter().any(|m| {
            let d_mu = m.mu - mu;
            let d_sigma = m.sigma - sigma;
            (d_mu * d_mu + d_sigma * d_sigma).sqrt() < cfg.dedup_radius
        });
        if !dup {
            kept.push(ToyMinimum {
                mu,
                sigma,
                loss,
                hessian_trace: spec.hessian_trace_fd(mu, sigma, 1e-3)?,
            });
        }
    }
    Ok(kept)
}

/// Index of the minimum nearest to `(mu, sigma)` in Euclidean distance.
pub fn nearest_minimum(minima: &[ToyMinimum], mu: f64, sigma: f64) -> Result<usize> {
    if minima.is_empty() {
        return Err(Error::invalid("no minima to classify against"));
    }
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, m) in minima.iter().enumerate() {
        let d = ((m.mu - mu).powi(2) + (m.sigma - sigma).powi(2)).sqrt();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    Ok(best)
}

/// Outcome of one optimizer run on the landscape.
#[derive(Debug, Clone)]
pub struct BasinRun {
    pub final_mu: f64,
    pub final_sigma: f64,
    pub final_loss: f64,
    /// How often a step drove σ below [`SIGMA_FLOOR`] and was projected
    /// back; nonzero counts flag that the run brushed the domain edge.
    pub sigma_projections: usize,
    pub records: Vec<TrajectoryRecord>,
}

/// Runs `iters` fixed-learning-rate optimizer steps on the landscape from
/// `(start_mu, start_sigma)`, projecting σ back to [`SIGMA_FLOOR`] when a
/// step would leave the domain.
///
/// # Errors
/// [`Error::Numeric`] if a probe itself leaves the domain (the projection
/// only guards the descent update, not the lookahead evaluation).
pub fn basin_experiment(
    model: &ToyModel,
    opt_cfg: OptimConfig,
    start_mu: f64,
    start_sigma: f64,
    iters: usize,
) -> Result<BasinRun> {
    model.spec.validate()?;
    let mut opt = Optimizer::new(opt_cfg, 2)?;
    let mut params = vec![start_mu, start_sigma];
    let mut records = Vec::with_capacity(iters);
    let mut projections = 0usize;
    for _ in 0..iters {
        let (next, rec) = opt.step(model, &params, &[()], opt_cfg.lr)?;
        params = next;
        if params[1] < SIGMA_FLOOR {
            params[1] = SIGMA_FLOOR;
            projections += 1;
        }
        records.push(rec);
    }
    Ok(BasinRun {
        final_mu: params[0],
        final_sigma: params[1],
        final_loss: model.spec.loss(params[0], params[1])?,
        sigma_projections: projections,
        records,
    })
}

/// KL divergence along a ray against its information-metric quadratic
/// model, for validating that the metric is the right local geometry.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct KlQuadPoint {
    /// `KL(N(μ,σ²) ‖ N(μ+t·d₀, (σ+t·d₁)²))`.
    pub kl: f64,
    /// `½ t² dᵀ F d` with `F = diag(1/σ², 2/σ²)`, the Gaussian
    /// information metric at the base point.
    pub quad: f64,
    /// `kl / quad`; approaches 1 as `t → 0`.
    pub ratio: f64,
}

/// Compares the KL divergence from `(mu, sigma)` to the point displaced
/// by `t` along direction `d` against the quadratic form `½t²dᵀFd`.
///
/// # Errors
/// [`Error::Domain`] if the base or displaced σ is not positive;
/// [`Error::InvalidArgument`] for a zero direction or zero `t`.
pub fn kl_fisher_ratio(mu: f64, sigma: f64, d: [f64; 2], t: f64) -> Result<KlQuadPoint> {
    if !(sigma > 0.0) {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
    }
    if d[0] == 0.0 && d[1] == 0.0 {
        return Err(Error::invalid("direction must be nonzero"));
    }
    if t == 0.0 {
        return Err(Error::invalid("step t must be nonzero"));
    }
    let sigma_q = sigma + t * d[1];
    if !(sigma_q > 0.0) {
        return Err(Error::Domain(format!(
            "displaced sigma must stay positive, got {sigma_q}"
        )));
    }
    let kl = kl_divergence(mu, sigma, mu + t * d[0], sigma_q)?;
    let s2 = sigma * sigma;
    let quad = 0.5 * t * t * (d[0] * d[0] / s2 + 2.0 * d[1] * d[1] / s2);
    Ok(KlQuadPoint {
        kl,
        quad,
        ratio: kl / quad,
    })
}

/// Loss samples over a rectangular (μ, σ) grid, row-major with μ as the
/// outer (row) index.
#[derive(Debug, Clone)]
pub struct ContourGrid {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    /// `loss[i * sigma.len() + j]` is the loss at `(mu[i], sigma[j])`.
    pub loss: Vec<f64>,
}

impl ContourGrid {
    /// Grid point with the smallest loss, as `(mu, sigma, loss)`.
    pub fn argmin(&self) -> (f64, f64, f64) {
        let mut best = (0, 0.0f64, 0.0f64, f64::INFINITY);
        for (idx, &l) in self.loss.iter().enumerate() {
            if l < best.3 {
                let i = idx / self.sigma.len();
                let j = idx % self.sigma.len();
                best = (idx, self.mu[i], self.sigma[j], l);
            }
        }
        (best.1, best.2, best.3)
    }
}

/// Samples the landscape on an `n_mu × n_sigma` grid spanning the given
/// inclusive ranges.
pub fn contour_grid(
    spec: &ToyLossSpec,
    mu_range: (f64, f64),
    sigma_range: (f64, f64),
    n_mu: usize,
    n_sigma: usize,
) -> Result<ContourGrid> {
    spec.validate()?;
    if n_mu < 2 || n_sigma < 2 {
        return Err(Error::invalid("contour grid needs at least 2 points per axis"));
    }
    if !(sigma_range.0 > 0.0) {
        return Err(Error::Domain(format!(
            "sigma range must start above 0, got {}",
            sigma_range.0
        )));
    }
    let mu: Vec<f64> = (0..n_mu)
        .map(|i| mu_range.0 + (mu_range.1 - mu_range.0) * i as f64 / (n_mu - 1) as f64)
        .collect();
    let sigma: Vec<f64> = (0..n_sigma)
        .map(|j| sigma_range.0 + (sigma_range.1 - sigma_range.0) * j as f64 / (n_sigma - 1) as f64)
        .collect();
    let mut loss = Vec::with_capacity(n_mu * n_sigma);
    for &m in &mu {
        for &s in &sigma {
            loss.push(spec.loss(m, s)?);
        }
    }
    Ok(ContourGrid { mu, sigma, loss })
}

/// Writes a contour grid as CSV with header `mu,sigma,loss`, one row per
/// grid point in row-major order.
pub fn write_contour_csv<W: std::io::Write>(out: W, grid: &ContourGrid) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["mu", "sigma", "loss"])
        .map_err(|e| Error::numeric("csv write", e.to_string()))?;
    for (i, &m) in grid.mu.iter().enumerate() {
        for (j, &s) in grid.sigma.iter().enumerate() {
            let l = grid.loss[i * grid.sigma.len() + j];
            w.write_record(&[format!("{m:.17e}"), format!("{s:.17e}"), format!("{l:.17e}")])
                .map_err(|e| Error::numeric("csv write", e.to_string()))?;
        }
    }
    w.flush().map_err(|e| Error::numeric("csv flush", e.to_string()))?;
    Ok(())
}
