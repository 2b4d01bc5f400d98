//! Flat parameter-vector arithmetic.
//!
//! Parameters, gradients, and probes are all plain `Vec<f64>` / `&[f64]`
//! values. Every reduction uses a fixed left-to-right summation order so
//! that identical inputs produce bitwise-identical outputs on every
//! platform; reproducibility is worth more than marginal speed at the
//! problem sizes this crate targets.

use crate::error::{Error, Result};

/// Returns `a * x + y` elementwise.
///
/// # Errors
/// [`Error::DimensionMismatch`] if `x` and `y` differ in length.
pub fn axpy(a: f64, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    Ok(x.iter().zip(y).map(|(xi, yi)| a * xi + yi).collect())
}

/// Inner product with fixed left-to-right accumulation.
///
/// # Errors
/// [`Error::DimensionMismatch`] if the lengths differ.
pub fn dot(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let mut acc = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        acc += xi * yi;
    }
    Ok(acc)
}

/// Euclidean norm; zero exactly when every entry is zero.
pub fn norm2(x: &[f64]) -> f64 {
    let mut acc = 0.0;
    for xi in x {
        acc += xi * xi;
    }
    acc.sqrt()
}

/// Elementwise scale in place.
pub fn scale_in_place(x: &mut [f64], a: f64) {
    for xi in x.iter_mut() {
        *xi *= a;
    }
}

/// True when every entry is finite.
pub fn all_finite(x: &[f64]) -> bool {
    x.iter().all(|v| v.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axpy_zero_scale_returns_y() {
        assert_eq!(axpy(0.0, &[1.0, 2.0], &[3.0, 4.0]).unwrap(), vec![3.0, 4.0]);
    }

    #[test]
    fn axpy_identity() {
        assert_eq!(axpy(1.0, &[1.0, 2.0], &[0.0, 0.0]).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn axpy_hand_arithmetic() {
        assert_eq!(axpy(2.0, &[1.0, -1.0], &[1.0, 1.0]).unwrap(), vec![3.0, -1.0]);
    }

    #[test]
    fn axpy_length_mismatch_is_error() {
        assert!(axpy(1.0, &[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn norm2_cases() {
        assert_eq!(norm2(&[0.0, 0.0]), 0.0);
        assert_eq!(norm2(&[3.0, 4.0]), 5.0);
        assert_eq!(norm2(&[1.0, 1.0, 1.0, 1.0]), 2.0);
    }

    #[test]
    fn dot_cases() {
        assert_eq!(dot(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(dot(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), 25.0);
        assert_eq!(dot(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), 11.0);
    }
}
