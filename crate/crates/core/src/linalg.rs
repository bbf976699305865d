//! Small complex linear-algebra helpers shared by the modules.

use nalgebra::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::{CMatrix, CVector, C64};

/// RNG used for every random draw in the crate.
pub type SenseRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SenseRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mixes a base seed with a list of stream identifiers (splitmix64 finaliser).
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut x = base ^ 0x9e37_79b9_7f4a_7c15;
    for &p in parts {
        x = splitmix(x ^ splitmix(p.wrapping_add(0x632b_e59b_d9b4_e019)));
    }
    x
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One circularly-symmetric complex Gaussian sample with `E|x|^2 = variance`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex::new(s * re, s * im)
}

/// Matrix with i.i.d. `CN(0, sigma^2)` entries, filled column by column.
pub fn complex_gaussian_matrix<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    sigma: f64,
    rng: &mut R,
) -> CMatrix {
    let var = sigma * sigma;
    let mut m = CMatrix::zeros(rows, cols);
    for c in 0..cols {
        for r in 0..rows {
            m[(r, c)] = complex_gaussian(rng, var);
        }
    }
    m
}

/// Rotates `v` so its first significant entry is real and nonnegative.
pub fn normalize_phase(v: &mut CVector) {
    let max = v.iter().map(|x| x.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return;
    }
    if let Some(first) = v.iter().find(|x| x.norm() > 1e-9 * max).copied() {
        let rot = first.conj() / first.norm();
        v.iter_mut().for_each(|x| *x *= rot);
    }
}

/// Largest entry of `|A^H A - I|`.
pub fn orthonormality_error(a: &CMatrix) -> f64 {
    let gram = a.adjoint() * a;
    let mut worst: f64 = 0.0;
    for i in 0..gram.nrows() {
        for j in 0..gram.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - C64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// Leading `k` left singular vectors of `a`, ordered by descending singular
/// value (ties keep index order) and phase-normalised column by column.
///
/// Returns the basis together with all singular values in descending order.
pub fn leading_left_singular_vectors(a: &CMatrix, k: usize) -> (CMatrix, Vec<f64>) {
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| {
        svd.singular_values[j]
            .partial_cmp(&svd.singular_values[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut out = CMatrix::zeros(a.nrows(), k);
    for (dst, &src) in order.iter().take(k).enumerate() {
        let mut col: CVector = u.column(src).into_owned();
        normalize_phase(&mut col);
        out.set_column(dst, &col);
    }
    let sv = order.iter().map(|&i| svd.singular_values[i]).collect();
    (out, sv)
}

/// Cosines of the principal angles between the spans of two matrices with
/// orthonormal columns, in descending order.
pub fn principal_cosines(a: &CMatrix, b: &CMatrix) -> Vec<f64> {
    let cross = a.adjoint() * b;
    let mut sv: Vec<f64> = cross.singular_values().iter().map(|s| s.min(1.0)).collect();
    sv.sort_by(|x, y| y.partial_cmp(x).unwrap());
    sv
}

/// Largest principal angle (radians) between two equal-dimension subspaces
/// given by orthonormal bases.
pub fn max_principal_angle(a: &CMatrix, b: &CMatrix) -> f64 {
    principal_cosines(a, b)
        .last()
        .map(|c| c.clamp(-1.0, 1.0).acos())
        .unwrap_or(0.0)
}

/// Orthonormal basis for the column span of `a` (rank detected at `tol`
/// relative to the largest singular value).
pub fn orthonormal_span(a: &CMatrix, tol: f64) -> CMatrix {
    let (u, sv) = leading_left_singular_vectors(a, a.nrows().min(a.ncols()));
    let top = sv.first().copied().unwrap_or(0.0);
    let rank = sv.iter().filter(|&&s| s > tol * top).count();
    u.columns(0, rank).into_owned()
}

/// `‖x - P x‖ / ‖x‖` where `P` projects onto the span of orthonormal `basis`.
pub fn projection_residual(basis: &CMatrix, x: &CVector) -> f64 {
    let coeff = basis.adjoint() * x;
    let proj = basis * coeff;
    (x - proj).norm() / x.norm()
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|x| x.norm()).fold(0.0, f64::max)
}
