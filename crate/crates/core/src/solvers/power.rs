//! Leading eigenpair of a Hermitian matrix by shifted power iteration.

use nalgebra::Complex;

use crate::linalg::normalize_phase;
use crate::{CMatrix, CVector};

#[derive(Debug, Clone, PartialEq)]
pub struct PowerResult {
    /// Algebraically largest eigenvalue.
    pub value: f64,
    /// Unit eigenvector, first significant entry real and nonnegative.
    pub vector: CVector,
    pub iterations: usize,
    pub converged: bool,
}

fn default_start(n: usize) -> CVector {
    CVector::from_fn(n, |i, _| Complex::from_polar(1.0 + 0.1 * i as f64, 0.7 * i as f64))
}

/// Power iteration on `(R + R^H)/2 + c I` with `c = ‖R‖_1`, which makes the
/// algebraically largest eigenvalue dominant in magnitude.
pub fn power_method(r: &CMatrix, tol: f64, max_iters: usize) -> PowerResult {
    power_method_from(r, None, tol, max_iters)
}

/// As [`power_method`], warm-started from `start` when it is nonzero.
pub fn power_method_from(r: &CMatrix, start: Option<&CVector>, tol: f64, max_iters: usize) -> PowerResult {
    let n = r.nrows();
    assert_eq!(n, r.ncols(), "power method needs a square matrix");
    let h = (r + r.adjoint()) * Complex::new(0.5, 0.0);
    let shift = h
        .column_iter()
        .map(|c| c.iter().map(|x| x.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    if n == 0 {
        return PowerResult {
            value: 0.0,
            vector: CVector::zeros(0),
            iterations: 0,
            converged: true,
        };
    }
    if shift == 0.0 {
        let mut e = CVector::zeros(n);
        e[0] = Complex::new(1.0, 0.0);
        return PowerResult {
            value: 0.0,
            vector: e,
            iterations: 0,
            converged: true,
        };
    }
    let mut x = match start {
        Some(s) if s.len() == n && s.norm() > 0.0 => s.clone(),
        _ => default_start(n),
    };
    x /= Complex::new(x.norm(), 0.0);
    let mut converged = false;
    let mut iterations = 0;
    let mut hx = &h * &x;
    while iterations < max_iters {
        let rayleigh = x.dotc(&hx).re;
        let residual = (&hx - &x * Complex::new(rayleigh, 0.0)).norm();
        if residual <= tol * shift {
            converged = true;
            break;
        }
        let y = &hx + &x * Complex::new(shift, 0.0);
        let norm = y.norm();
        if norm == 0.0 || !norm.is_finite() {
            break;
        }
        x = y / Complex::new(norm, 0.0);
        hx = &h * &x;
        iterations += 1;
    }
    normalize_phase(&mut x);
    let value = x.dotc(&(&h * &x)).re;
    PowerResult {
        value,
        vector: x,
        iterations,
        converged,
    }
}
