//! Shared helpers for unit tests: tolerance assertions and central
//! finite-difference gradients.

/// Asserts `|a - b| <= tol * max(1, |a|, |b|)`.
///
/// The unit floor keeps the comparison absolute near zero and relative for
/// large magnitudes, which is the right scale for gradient checks.
pub fn assert_close(a: f64, b: f64, tol: f64) {
    let scale = 1.0_f64.max(a.abs()).max(b.abs());
    assert!(
        (a - b).abs() <= tol * scale,
        "values differ: {a} vs {b} (tol {tol}, scale {scale})"
    );
}

/// Central finite-difference derivative of `f` at `x`: (f(x+h) − f(x−h)) / 2h.
pub fn central_diff<F: FnMut(f64) -> f64>(mut f: F, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Step size used by every finite-difference gradient check.
pub const FD_STEP: f64 = 1e-5;

/// Relative tolerance used by every finite-difference gradient check.
pub const FD_TOL: f64 = 1e-4;
