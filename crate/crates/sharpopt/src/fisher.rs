//! Fisher-information estimation.
//!
//! Two diagonal estimators are provided: the empirical mean of squared
//! per-example score gradients, and the gradient-magnitude form that
//! squares the mean gradient instead. The latter is what makes a
//! Fisher-scaled probe as cheap as a plain two-pass step, and
//! [`subset_moment_check`] verifies the exact population identity that links
//! the two through minibatch averaging. The anti-regularized inverse
//! `1/(1 + η·fᵢ)` converts either estimate into the inverse-metric
//! diagonal used by the Fisher probe, and [`exact_gaussian_fisher`] gives
//! the closed-form metric of the univariate-Gaussian toy model.

use serde::Serialize;

use crate::error::{Error, Result};

/// Exact Fisher information of a univariate Gaussian `N(μ, σ²)` in the
/// `(μ, σ)` parameterization: `Diag(1/σ², 2/σ²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactFisher2x2 {
    pub d11: f64,
    pub d22: f64,
}

/// Exact Gaussian Fisher diagonal `(1/σ², 2/σ²)`.
///
/// # Errors
/// [`Error::Domain`] if `sigma <= 0`.
pub fn exact_gaussian_fisher(_mu: f64, sigma: f64) -> Result<ExactFisher2x2> {
    if sigma <= 0.0 {
        return Err(Error::Domain(format!(
            "Gaussian Fisher requires sigma > 0, got {sigma}"
        )));
    }
    let s2 = sigma * sigma;
    Ok(ExactFisher2x2 {
        d11: 1.0 / s2,
        d22: 2.0 / s2,
    })
}

fn check_grads(grads: &[Vec<f64>]) -> Result<usize> {
    let first = grads
        .first()
        .ok_or_else(|| Error::invalid("empty gradient sequence"))?;
    let k = first.len();
    for g in grads {
        if g.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: g.len(),
            });
        }
    }
    Ok(k)
}

/// Empirical diagonal Fisher: entry `i` is the mean of the squared
/// per-example score-gradient entries, `(1/|B|) Σ_j g_j[i]²`.
///
/// # Errors
/// [`Error::InvalidArgument`] on an empty sequence,
/// [`Error::DimensionMismatch`] on ragged lengths.
pub fn empirical_diag_fisher(grads: &[Vec<f64>]) -> Result<Vec<f64>> {
    let k = check_grads(grads)?;
    let inv_b = 1.0 / grads.len() as f64;
    let mut out = vec![0.0; k];
    for g in grads {
        for (o, gi) in out.iter_mut().zip(g) {
            *o += gi * gi;
        }
    }
    for o in out.iter_mut() {
        *o *= inv_b;
    }
    Ok(out)
}

/// Gradient-magnitude Fisher: entry `i` is the square of the mean
/// gradient entry, `((1/|B|) Σ_j g_j[i])²`.
///
/// By Jensen's inequality this never exceeds
/// [`empirical_diag_fisher`] coordinatewise.
pub fn gm_fisher(grads: &[Vec<f64>]) -> Result<Vec<f64>> {
    let k = check_grads(grads)?;
    let inv_b = 1.0 / grads.len() as f64;
    let mut mean = vec![0.0; k];
    for g in grads {
        for (m, gi) in mean.iter_mut().zip(g) {
            *m += gi;
        }
    }
    for m in mean.iter_mut() {
        *m *= inv_b;
        *m *= *m;
    }
    Ok(mean)
}

/// Gradient-magnitude Fisher straight from the batch gradient: the
/// elementwise square of `∇l_B(θ)`.
///
/// For a mean negative-log-likelihood loss this equals
/// [`gm_fisher`] applied to the per-example score gradients, so a
/// Fisher-scaled step can reuse the gradient it already computed.
pub fn gm_fisher_from_batch_grad(batch_grad: &[f64]) -> Vec<f64> {
    batch_grad.iter().map(|g| g * g).collect()
}

/// Anti-regularized inverse-Fisher diagonal: entry `i` is
/// `1/(1 + η·fᵢ)`, always in `(0, 1]` for `fᵢ ≥ 0`.
///
/// `η = 0` gives the all-ones identity metric, collapsing a Fisher-scaled
/// probe to the plain gradient-normalized one.
///
/// # Errors
/// [`Error::InvalidArgument`] if `eta < 0`.
pub fn anti_reg_inverse(f: &[f64], eta: f64) -> Result<Vec<f64>> {
    if eta < 0.0 {
        return Err(Error::invalid(format!("eta must be >= 0, got {eta}")));
    }
    Ok(f.iter().map(|fi| 1.0 / (1.0 + eta * fi)).collect())
}

/// Report of one exact minibatch-averaging identity check.
#[derive(Debug, Clone, Serialize)]
pub struct SubsetMomentReport {
    /// Population size.
    pub n: usize,
    /// Batch size.
    pub m: usize,
    /// Rescaling coefficient `M(N−1)/(N−M)`.
    pub alpha: f64,
    /// Max elementwise `|LHS − RHS|` over the k×k moment matrices.
    pub max_abs_discrepancy: f64,
}

/// Checks the exact identity linking the population second moment to
/// batch-mean outer products:
///
/// `(1/N) Σ vᵢvᵢᵀ  ==  α·E_B[v̄(B)v̄(B)ᵀ] + (1−α)·v̄v̄ᵀ`,
/// with `α = M(N−1)/(N−M)`.
///
/// The expectation is taken by exhaustive enumeration over all `C(N, M)`
/// size-`M` index subsets (batches drawn without replacement, the sampling
/// model under which the identity is exact; `alpha_offset` shifts α and
/// exists so checkers can prove they would catch a wrong coefficient).
///
/// # Errors
/// [`Error::InvalidArgument`] if `m == 0` or `m >= n` (α is undefined at
/// `M = N`).
pub fn subset_moment_check(vectors: &[Vec<f64>], m: usize) -> Result<SubsetMomentReport> {
    subset_moment_check_with_offset(vectors, m, 0.0)
}

/// [`subset_moment_check`] with a deliberate offset added to α; nonzero offsets
/// must produce a visible discrepancy (checker sensitivity control).
pub fn subset_moment_check_with_offset(
    vectors: &[Vec<f64>],
    m: usize,
    alpha_offset: f64,
) -> Result<SubsetMomentReport> {
    let k = check_grads(vectors)?;
    let n = vectors.len();
    if m == 0 || m >= n {
        return Err(Error::invalid(format!(
            "batch size must satisfy 1 <= M < N; got M={m}, N={n}"
        )));
    }
    let alpha = (m as f64) * (n as f64 - 1.0) / (n as f64 - m as f64) + alpha_offset;

    // LHS: population second moment (1/N) sum v_i v_i^T.
    let mut lhs = vec![0.0; k * k];
    for v in vectors {
        accumulate_outer(&mut lhs, v, 1.0 / n as f64);
    }

    // Population mean outer product.
    let mut vbar = vec![0.0; k];
    for v in vectors {
        for (b, vi) in vbar.iter_mut().zip(v) {
            *b += vi / n as f64;
        }
    }

    // E_B[vbar(B) vbar(B)^T] over all C(N, M) subsets.
    let mut expect = vec![0.0; k * k];
    let mut count = 0usize;
    let mut idx: Vec<usize> = (0..m).collect();
    loop {
        let mut bmean = vec![0.0; k];
        for &i in &idx {
            for (b, vi) in bmean.iter_mut().zip(&vectors[i]) {
                *b += vi / m as f64;
            }
        }
        accumulate_outer(&mut expect, &bmean, 1.0);
        count += 1;
        if !next_combination(&mut idx, n) {
            break;
        }
    }
    for e in expect.iter_mut() {
        *e /= count as f64;
    }

    let mut max_abs = 0.0f64;
    for i in 0..k {
        for j in 0..k {
            let rhs =
                alpha * expect[i * k + j] + (1.0 - alpha) * vbar[i] * vbar[j];
            max_abs = max_abs.max((rhs - lhs[i * k + j]).abs());
        }
    }

    Ok(SubsetMomentReport {
        n,
        m,
        alpha,
        max_abs_discrepancy: max_abs,
    })
}

fn accumulate_outer(acc: &mut [f64], v: &[f64], w: f64) {
    let k = v.len();
    for i in 0..k {
        for j in 0..k {
            acc[i * k + j] += w * v[i] * v[j];
        }
    }
}

/// Advances `idx` to the next lexicographic M-combination of `0..n`;
/// returns false after the last one.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let m = idx.len();
    let mut i = m;
    while i > 0 {
        i -= 1;
        if idx[i] < n - m + i {
            idx[i] += 1;
            for j in i + 1..m {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}
