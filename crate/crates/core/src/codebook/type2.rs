//! Type-II surrogate used as reference-user feedback.
//!
//! The dictionary is the orthogonal (non-oversampled) 2D DFT beam set of the
//! array. The `n_beams` strongest beams, ranked by power summed over both
//! polarisations, are combined with per-polarisation projection
//! coefficients and the result is normalised. Optional quantisation mimics
//! the wideband Type-II payload: amplitude relative to the strongest
//! coefficient on a 3-bit grid and phase relative to it on 8-PSK.

use std::f64::consts::PI;

use nalgebra::Complex;

use super::dft_beam;
use crate::channel::ArrayGeometry;
use crate::{CVector, Result, SenseError, C64};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Type2Options {
    /// Quantise the combination coefficients (3-bit amplitude, 8-PSK phase).
    pub quantize: bool,
}

const AMPLITUDE_GRID: [f64; 8] = [1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625, 0.0];

fn quantize_coefficient(c: C64, reference: C64) -> C64 {
    if reference.norm() == 0.0 {
        return Complex::new(0.0, 0.0);
    }
    let rel = c / reference;
    let power = rel.norm_sqr();
    let amp = AMPLITUDE_GRID
        .iter()
        .copied()
        .min_by(|a, b| (a - power).abs().partial_cmp(&(b - power).abs()).unwrap())
        .unwrap()
        .sqrt();
    let step = 2.0 * PI / 8.0;
    let phase = (rel.arg() / step).round() * step;
    Complex::from_polar(amp, phase) * Complex::from_polar(1.0, reference.arg())
}

pub fn build_type2_surrogate(
    h: &CVector,
    n_beams: usize,
    geometry: &ArrayGeometry,
    opts: Type2Options,
) -> Result<CVector> {
    geometry.validate()?;
    let (n1, n2) = (geometry.n_horizontal, geometry.n_vertical);
    let per_pol = n1 * n2;
    let pols = if geometry.dual_polarized { 2 } else { 1 };
    if h.len() != geometry.ports() {
        return Err(SenseError::dims(format!(
            "channel has {} entries, array has {} ports",
            h.len(),
            geometry.ports()
        )));
    }
    if n_beams == 0 || n_beams > per_pol {
        return Err(SenseError::invalid(format!(
            "n_beams must be in 1..={per_pol}, got {n_beams}"
        )));
    }

    // coefficient[b][pol] = beam_b^H h_pol
    let mut beams = Vec::with_capacity(per_pol);
    for m2 in 0..n2 {
        for m1 in 0..n1 {
            let v = dft_beam(n1, n2, 1, 1, m1, m2);
            let coeffs: Vec<C64> = (0..pols)
                .map(|p| v.dotc(&h.rows(p * per_pol, per_pol)))
                .collect();
            let power: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
            beams.push((power, v, coeffs));
        }
    }
    // Stable sort keeps dictionary order among equal-power beams.
    beams.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    beams.truncate(n_beams);

    let reference = beams
        .iter()
        .flat_map(|(_, _, c)| c.iter().copied())
        .max_by(|a, b| a.norm_sqr().partial_cmp(&b.norm_sqr()).unwrap())
        .unwrap_or_default();

    let mut out = CVector::zeros(h.len());
    for (_, v, coeffs) in &beams {
        for (p, &c) in coeffs.iter().enumerate() {
            let c = if opts.quantize { quantize_coefficient(c, reference) } else { c };
            let mut block = out.rows_mut(p * per_pol, per_pol);
            block.axpy(c, v, Complex::new(1.0, 0.0));
        }
    }
    let norm = out.norm();
    if norm == 0.0 {
        return Err(SenseError::invalid("channel has no energy on the beam dictionary"));
    }
    Ok(out / Complex::new(norm, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{complex_gaussian_matrix, rng_from_seed};

    fn corr(a: &CVector, b: &CVector) -> f64 {
        a.dotc(b).norm() / (a.norm() * b.norm())
    }

    #[test]
    fn in_dictionary_beam_is_reproduced() {
        let g = ArrayGeometry::half_wavelength(4, 2, false).unwrap();
        let v = dft_beam(4, 2, 1, 1, 3, 1);
        let c = build_type2_surrogate(&v, 1, &g, Type2Options::default()).unwrap();
        assert!((&c - &v).norm() < 1e-12);
        assert!((corr(&c, &v) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn full_dictionary_reproduces_any_channel() {
        let mut rng = rng_from_seed(3);
        for dual in [false, true] {
            let g = ArrayGeometry::half_wavelength(4, 2, dual).unwrap();
            let h = complex_gaussian_matrix(g.ports(), 1, 1.0, &mut rng).column(0).into_owned();
            let c = build_type2_surrogate(&h, 8, &g, Type2Options::default()).unwrap();
            assert!((corr(&c, &h) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn multi_beam_beats_best_single_beam() {
        let g = ArrayGeometry::half_wavelength(4, 2, true).unwrap();
        let mut rng = rng_from_seed(11);
        for _ in 0..20 {
            let h = complex_gaussian_matrix(g.ports(), 1, 1.0, &mut rng).column(0).into_owned();
            // Oracle: best single orthogonal beam with exact co-phasing.
            let mut best = 0.0f64;
            for m2 in 0..2 {
                for m1 in 0..4 {
                    let v = dft_beam(4, 2, 1, 1, m1, m2);
                    let p: f64 = (0..2)
                        .map(|p| v.dotc(&h.rows(p * 8, 8)).norm_sqr())
                        .sum();
                    best = best.max(p.sqrt() / h.norm());
                }
            }
            let c = build_type2_surrogate(&h, 4, &g, Type2Options::default()).unwrap();
            assert!(corr(&c, &h) >= best - 1e-12);
        }
    }

    #[test]
    fn quantized_surrogate_stays_close() {
        let g = ArrayGeometry::half_wavelength(4, 2, true).unwrap();
        let mut rng = rng_from_seed(5);
        let h = complex_gaussian_matrix(g.ports(), 1, 1.0, &mut rng).column(0).into_owned();
        let exact = build_type2_surrogate(&h, 4, &g, Type2Options::default()).unwrap();
        let quant = build_type2_surrogate(&h, 4, &g, Type2Options { quantize: true }).unwrap();
        assert!((quant.norm() - 1.0).abs() < 1e-12);
        assert!(corr(&quant, &exact) > 0.8);
    }

    #[test]
    fn rejects_bad_beam_counts() {
        let g = ArrayGeometry::half_wavelength(2, 1, false).unwrap();
        let h = CVector::from_element(2, Complex::new(1.0, 0.0));
        assert!(build_type2_surrogate(&h, 0, &g, Type2Options::default()).is_err());
        assert!(build_type2_surrogate(&h, 3, &g, Type2Options::default()).is_err());
        let short = CVector::from_element(1, Complex::new(1.0, 0.0));
        assert!(build_type2_surrogate(&short, 1, &g, Type2Options::default()).is_err());
    }
}
