//! Accuracy metrics for sensed CSI.
//!
//! `correlation` is `|h^H h*| / (‖h‖ ‖h*‖)`. `nmse_r` is the norm ratio
//! `min_ψ ‖h − e^{jψ} h*‖ / ‖h‖`, reported in dB as `20 log10`. Matrix
//! inputs are compared column by column (one phase per column) and averaged.

use serde::{Deserialize, Serialize};

use crate::{CMatrix, CVector, Result, SenseError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub correlation: f64,
    pub nmse_r: f64,
    pub nmse_r_db: f64,
    /// `(correlation, nmse_r)` per carrier; one entry for flat channels.
    pub per_carrier: Vec<(f64, f64)>,
}

pub fn correlation(h: &CVector, h_star: &CVector) -> Result<f64> {
    check_pair(h, h_star)?;
    let (a, b) = (h.norm(), h_star.norm());
    if a == 0.0 || b == 0.0 {
        return Err(SenseError::invalid("correlation of a zero vector is undefined"));
    }
    Ok((h.dotc(h_star).norm() / (a * b)).min(1.0))
}

pub fn nmse_r(h: &CVector, h_star: &CVector) -> Result<f64> {
    check_pair(h, h_star)?;
    let a = h.norm();
    if a == 0.0 {
        return Err(SenseError::invalid("reference channel is zero"));
    }
    // ‖h − e^{jψ}h*‖² is minimised at ψ = arg(h^H h*).
    let sq = a * a + h_star.norm_squared() - 2.0 * h.dotc(h_star).norm();
    Ok(sq.max(0.0).sqrt() / a)
}

pub fn to_db(ratio: f64) -> f64 {
    20.0 * ratio.log10()
}

fn check_pair(h: &CVector, h_star: &CVector) -> Result<()> {
    if h.len() != h_star.len() || h.is_empty() {
        return Err(SenseError::dims(format!(
            "cannot compare vectors of length {} and {}",
            h.len(),
            h_star.len()
        )));
    }
    Ok(())
}

/// Column-wise evaluation of `h_star` against the reference `h`.
pub fn evaluate(h: &CMatrix, h_star: &CMatrix) -> Result<EvalResult> {
    if h.shape() != h_star.shape() || h.ncols() == 0 {
        return Err(SenseError::dims(format!(
            "cannot compare matrices of shape {:?} and {:?}",
            h.shape(),
            h_star.shape()
        )));
    }
    let per_carrier = (0..h.ncols())
        .map(|k| {
            let a = h.column(k).into_owned();
            let b = h_star.column(k).into_owned();
            let rho = if b.norm() == 0.0 { 0.0 } else { correlation(&a, &b)? };
            Ok((rho, nmse_r(&a, &b)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = per_carrier.len() as f64;
    let correlation = per_carrier.iter().map(|p| p.0).sum::<f64>() / n;
    let nmse = per_carrier.iter().map(|p| p.1).sum::<f64>() / n;
    Ok(EvalResult {
        correlation,
        nmse_r: nmse,
        nmse_r_db: to_db(nmse),
        per_carrier,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{complex_gaussian_matrix, rng_from_seed};
    use crate::C64;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn vec_seed(n: usize, seed: u64) -> CVector {
        complex_gaussian_matrix(n, 1, 1.0, &mut rng_from_seed(seed)).column(0).into_owned()
    }

    #[test]
    fn correlation_basic_cases() {
        let h = vec_seed(6, 1);
        assert!((correlation(&h, &(&h * C64::new(2.0, 0.0))).unwrap() - 1.0).abs() < 1e-12);
        let a = CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let b = CVector::from_vec(vec![C64::new(0.0, 0.0), C64::new(0.0, 1.0)]);
        assert_eq!(correlation(&a, &b).unwrap(), 0.0);
        assert!(correlation(&a, &CVector::zeros(2)).is_err());
        assert!(correlation(&a, &vec_seed(3, 2)).is_err());
    }

    #[test]
    fn correlation_matches_direct_formula() {
        let (h, g) = (vec_seed(8, 3), vec_seed(8, 4));
        let mut inner = C64::new(0.0, 0.0);
        let (mut na, mut nb) = (0.0, 0.0);
        for i in 0..8 {
            inner += h[i].conj() * g[i];
            na += h[i].norm_sqr();
            nb += g[i].norm_sqr();
        }
        let oracle = inner.norm() / (na.sqrt() * nb.sqrt());
        assert!((correlation(&h, &g).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn nmse_removes_common_phase() {
        let h = vec_seed(5, 5);
        let rot = C64::from_polar(1.0, PI / 3.0);
        assert!(nmse_r(&h, &(&h * rot)).unwrap() < 1e-7);
        assert!(nmse_r(&h, &(-&h)).unwrap() < 1e-7);
    }

    #[test]
    fn nmse_matches_grid_search() {
        let (h, g) = (vec_seed(6, 6), vec_seed(6, 7));
        let mut best = f64::INFINITY;
        for i in 0..10_000 {
            let psi = 2.0 * PI * i as f64 / 10_000.0;
            let d = &h - &g * C64::from_polar(1.0, psi);
            best = best.min(d.norm() / h.norm());
        }
        assert!((nmse_r(&h, &g).unwrap() - best).abs() < 1e-6);
    }

    #[test]
    fn evaluate_averages_columns() {
        let h = complex_gaussian_matrix(4, 3, 1.0, &mut rng_from_seed(8));
        let mut hs = h.clone();
        hs.set_column(1, &(h.column(1) * C64::from_polar(2.0, 0.7)));
        let r = evaluate(&h, &hs).unwrap();
        assert_eq!(r.per_carrier.len(), 3);
        assert!((r.correlation - 1.0).abs() < 1e-12);
        // sqrt of a cancelled difference: only ~1e-8 absolute accuracy near zero.
        assert!((r.nmse_r - 1.0 / 3.0).abs() < 1e-6);
        assert!((r.nmse_r_db - to_db(1.0 / 3.0)).abs() < 1e-4);
        assert!(evaluate(&h, &CMatrix::zeros(4, 2)).is_err());
    }

    proptest! {
        #[test]
        fn metrics_stay_in_range(seed in 0u64..500, theta in 0.0f64..6.28) {
            let (h, g) = (vec_seed(7, seed), vec_seed(7, seed + 1000));
            let rho = correlation(&h, &g).unwrap();
            prop_assert!((0.0..=1.0).contains(&rho));
            prop_assert!(nmse_r(&h, &g).unwrap() >= 0.0);
            prop_assert!(nmse_r(&h, &(&h * C64::from_polar(1.0, theta))).unwrap() < 1e-7);
            let c1 = C64::new(-0.3, 2.0);
            let c2 = C64::new(5.0, 0.1);
            let scaled = correlation(&(&h * c1), &(&g * c2)).unwrap();
            prop_assert!((scaled - rho).abs() < 1e-12);
        }
    }
}
