//! Central finite-difference gradient checking.

use crate::nn::Real;

/// Central finite differences of a scalar function at `x`.
///
/// `step` is the absolute probe step; 1e-3 is a good default in f64 (the
/// truncation error is O(step²) while the subtraction noise stays far below
/// the tolerances used in this crate).
pub fn finite_difference_gradient<T: Real>(
    mut f: impl FnMut(&[T]) -> T,
    x: &[T],
    step: f64,
) -> Vec<T> {
    let h = T::from_f64(step);
    let two_h = h + h;
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let plus = f(&probe);
        probe[i] = orig - h;
        let minus = f(&probe);
        probe[i] = orig;
        grad.push((plus - minus) / two_h);
    }
    grad
}

/// Worst elementwise relative error, with a floor on the denominator so that
/// near-zero gradients are compared absolutely at the floor's scale.
pub fn max_relative_error<T: Real>(analytic: &[T], numeric: &[T], floor: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len(), "gradient length mismatch");
    let mut worst = 0.0f64;
    for (&a, &n) in analytic.iter().zip(numeric) {
        let (a, n) = (a.to_f64(), n.to_f64());
        let denom = a.abs().max(n.abs()).max(floor);
        worst = worst.max((a - n).abs() / denom);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_analytic_gradient_of_a_quadratic() {
        // f(x) = Σ i·x_i² has gradient 2·i·x_i.
        let x: Vec<f64> = vec![0.5, -1.0, 2.0, 0.0];
        let f = |v: &[f64]| -> f64 {
            v.iter().enumerate().map(|(i, &xi)| i as f64 * xi * xi).sum()
        };
        let fd = finite_difference_gradient(f, &x, 1e-3);
        let analytic: Vec<f64> =
            x.iter().enumerate().map(|(i, &xi)| 2.0 * i as f64 * xi).collect();
        assert!(max_relative_error(&analytic, &fd, 1e-9) < 1e-8);
    }

    #[test]
    fn relative_error_uses_the_floor_near_zero() {
        let a = [0.0f64];
        let n = [1e-9f64];
        // Denominator floored at 1e-6, so the error is 1e-3, not 1.
        assert!((max_relative_error(&a, &n, 1e-6) - 1e-3).abs() < 1e-12);
    }
}
