//! The differentiable-model contract consumed by every optimizer.
//!
//! A model exposes a batch loss, its gradient, and (optionally) the
//! per-example score gradients needed by the Fisher estimators. The loss
//! convention is the batch MEAN, so per-example gradients average exactly
//! to the batch gradient and the probe radius is comparable across batch
//! sizes.

use std::cell::Cell;

use crate::error::{Error, Result};

/// A differentiable model over flat `f64` parameters.
///
/// Implementations must be pure functions of `(params, batch)`: identical
/// inputs produce bitwise-identical outputs, and evaluation must be safe
/// for concurrent read-only use.
pub trait DifferentiableModel {
    /// One training example (a placeholder `()` for data-free models).
    type Example;

    /// Flat parameter count `k`.
    fn param_len(&self) -> usize;

    /// Mean loss over the batch; finite for valid parameters.
    fn loss(&self, params: &[f64], batch: &[Self::Example]) -> Result<f64>;

    /// Gradient of the mean batch loss.
    fn grad(&self, params: &[f64], batch: &[Self::Example]) -> Result<Vec<f64>>;

    /// Loss and gradient together.
    ///
    /// The default calls `loss` then `grad`; models that share work between
    /// the two should override it. Optimizer steps use this entry point for
    /// their first gradient evaluation, so an override keeps a step at one
    /// forward/backward pass per gradient.
    fn loss_and_grad(&self, params: &[f64], batch: &[Self::Example]) -> Result<(f64, Vec<f64>)> {
        Ok((self.loss(params, batch)?, self.grad(params, batch)?))
    }

    /// Whether [`per_example_score_grads`](Self::per_example_score_grads)
    /// is available.
    fn has_per_example_grads(&self) -> bool {
        false
    }

    /// Per-example loss gradients (the score vectors of the Fisher
    /// estimators). For a mean-reduced loss their mean equals
    /// [`grad`](Self::grad) to within 8 ulps per entry.
    fn per_example_score_grads(
        &self,
        _params: &[f64],
        _batch: &[Self::Example],
    ) -> Result<Vec<Vec<f64>>> {
        Err(Error::Unsupported("per-example gradients"))
    }
}

/// Quadratic bowl `l(θ) = ½‖θ‖²`, independent of the batch.
///
/// The gradient is `θ` itself, which makes optimizer steps and probe
/// behavior checkable by hand; used throughout the test suites.
#[derive(Debug, Clone)]
pub struct QuadraticModel {
    dim: usize,
}

impl QuadraticModel {
    pub fn new(dim: usize) -> Self {
        QuadraticModel { dim }
    }
}

impl DifferentiableModel for QuadraticModel {
    type Example = ();

    fn param_len(&self) -> usize {
        self.dim
    }

    fn loss(&self, params: &[f64], _batch: &[()]) -> Result<f64> {
        check_len(self.dim, params)?;
        let mut acc = 0.0;
        for p in params {
            acc += p * p;
        }
        Ok(0.5 * acc)
    }

    fn grad(&self, params: &[f64], _batch: &[()]) -> Result<Vec<f64>> {
        check_len(self.dim, params)?;
        Ok(params.to_vec())
    }
}

/// Wrapper counting model evaluations.
///
/// Used to verify the cost structure of optimizer steps (a two-pass
/// sharpness-aware step performs exactly two gradient evaluations, plain
/// SGD exactly one).
pub struct CountingModel<'a, M: DifferentiableModel> {
    inner: &'a M,
    loss_evals: Cell<u64>,
    grad_evals: Cell<u64>,
}

impl<'a, M: DifferentiableModel> CountingModel<'a, M> {
    pub fn new(inner: &'a M) -> Self {
        CountingModel {
            inner,
            loss_evals: Cell::new(0),
            grad_evals: Cell::new(0),
        }
    }

    /// Number of loss-only evaluations so far.
    pub fn loss_evals(&self) -> u64 {
        self.loss_evals.get()
    }

    /// Number of gradient evaluations so far (`loss_and_grad` counts once).
    pub fn grad_evals(&self) -> u64 {
        self.grad_evals.get()
    }

    pub fn reset(&self) {
        self.loss_evals.set(0);
        self.grad_evals.set(0);
    }
}

impl<M: DifferentiableModel> DifferentiableModel for CountingModel<'_, M> {
    type Example = M::Example;

    fn param_len(&self) -> usize {
        self.inner.param_len()
    }

    fn loss(&self, params: &[f64], batch: &[Self::Example]) -> Result<f64> {
        self.loss_evals.set(self.loss_evals.get() + 1);
        self.inner.loss(params, batch)
    }

    fn grad(&self, params: &[f64], batch: &[Self::Example]) -> Result<Vec<f64>> {
        self.grad_evals.set(self.grad_evals.get() + 1);
        self.inner.grad(params, batch)
    }

    fn loss_and_grad(&self, params: &[f64], batch: &[Self::Example]) -> Result<(f64, Vec<f64>)> {
        self.grad_evals.set(self.grad_evals.get() + 1);
        self.inner.loss_and_grad(params, batch)
    }

    fn has_per_example_grads(&self) -> bool {
        self.inner.has_per_example_grads()
    }

    fn per_example_score_grads(
        &self,
        params: &[f64],
        batch: &[Self::Example],
    ) -> Result<Vec<Vec<f64>>> {
        self.inner.per_example_score_grads(params, batch)
    }
}

pub(crate) fn check_len(expected: usize, params: &[f64]) -> Result<()> {
    if params.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: params.len(),
        });
    }
    Ok(())
}

/// Central finite-difference gradient with per-coordinate step
/// `h = 1e-4 · (1 + |θᵢ|)`.
///
/// This is the reference oracle for the gradient-check contract: analytic
/// gradients must agree to relative error ≤ 1e-4 per coordinate (absolute
/// ≤ 1e-6 near zero).
pub fn finite_difference_grad<M: DifferentiableModel>(
    model: &M,
    params: &[f64],
    batch: &[M::Example],
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(params.len());
    let mut work = params.to_vec();
    for i in 0..params.len() {
        let h = 1e-4 * (1.0 + params[i].abs());
        work[i] = params[i] + h;
        let up = model.loss(&work, batch)?;
        work[i] = params[i] - h;
        let down = model.loss(&work, batch)?;
        work[i] = params[i];
        out.push((up - down) / (2.0 * h));
    }
    Ok(out)
}

/// Relative error with the `max(|a| + |b|, floor)` denominator used by the
/// gradient checks.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs()).max(floor)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_loss_and_grad() {
        let m = QuadraticModel::new(2);
        assert_eq!(m.loss(&[1.0, 2.0], &[()]).unwrap(), 2.5);
        assert_eq!(m.grad(&[1.0, 2.0], &[()]).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn counting_model_counts_grad_evals() {
        let m = QuadraticModel::new(2);
        let c = CountingModel::new(&m);
        c.loss_and_grad(&[1.0, 0.0], &[()]).unwrap();
        c.grad(&[1.0, 0.0], &[()]).unwrap();
        c.loss(&[1.0, 0.0], &[()]).unwrap();
        assert_eq!(c.grad_evals(), 2);
        assert_eq!(c.loss_evals(), 1);
    }

    #[test]
    fn finite_difference_matches_quadratic() {
        let m = QuadraticModel::new(3);
        let p = [0.3, -1.7, 2.2];
        let fd = finite_difference_grad(&m, &p, &[()]).unwrap();
        let g = m.grad(&p, &[()]).unwrap();
        for (a, b) in fd.iter().zip(&g) {
            assert!(relative_error(*a, *b, 1e-6) < 1e-4);
        }
    }
}
