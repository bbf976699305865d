//! Geometric multipath channels on a uniform planar array.
//!
//! Array phase convention: for the single-polarisation block, element
//! `(p, q)` (horizontal index `p` fastest, so the flat index is `q * N1 + p`)
//! carries phase `2π (p · d_h · sin(el) · sin(az) + q · d_v · cos(el))`, with
//! the elevation measured from the array's vertical axis. Dual-polarised
//! arrays stack two identical blocks. Responses are unit norm.

mod dataset;
mod scenario;

use std::f64::consts::PI;

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::{CMatrix, CVector, Result, SenseError, C64};

pub use dataset::{load_csi_dataset, parse_csi_dataset, save_csi_dataset, write_csi_dataset};
pub use scenario::{gen_scenario, ReferenceUser, Scenario, ScenarioConfig, UserChannel};

/// Uniform planar array description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub n_horizontal: usize,
    pub n_vertical: usize,
    pub dual_polarized: bool,
    /// Horizontal element spacing in wavelengths.
    pub spacing_h: f64,
    /// Vertical element spacing in wavelengths.
    pub spacing_v: f64,
}

impl ArrayGeometry {
    pub fn new(
        n_horizontal: usize,
        n_vertical: usize,
        dual_polarized: bool,
        spacing_h: f64,
        spacing_v: f64,
    ) -> Result<Self> {
        let g = ArrayGeometry {
            n_horizontal,
            n_vertical,
            dual_polarized,
            spacing_h,
            spacing_v,
        };
        g.validate()?;
        Ok(g)
    }

    /// Half-wavelength spaced array.
    pub fn half_wavelength(n_horizontal: usize, n_vertical: usize, dual_polarized: bool) -> Result<Self> {
        Self::new(n_horizontal, n_vertical, dual_polarized, 0.5, 0.5)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_horizontal == 0 || self.n_vertical == 0 {
            return Err(SenseError::invalid("array dimensions must be at least 1"));
        }
        if !(self.spacing_h > 0.0 && self.spacing_h.is_finite())
            || !(self.spacing_v > 0.0 && self.spacing_v.is_finite())
        {
            return Err(SenseError::invalid("array spacings must be positive and finite"));
        }
        Ok(())
    }

    /// Elements per polarisation, `N1 * N2`.
    pub fn elements_per_polarization(&self) -> usize {
        self.n_horizontal * self.n_vertical
    }

    /// Total number of antenna ports `M`.
    pub fn ports(&self) -> usize {
        let n = self.elements_per_polarization();
        if self.dual_polarized {
            2 * n
        } else {
            n
        }
    }
}

/// One propagation path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Path {
    /// Linear power `ρ`.
    pub power: f64,
    /// Phase `θ` in radians.
    pub phase: f64,
    /// Delay `τ` in seconds.
    pub delay: f64,
    pub azimuth: f64,
    pub elevation: f64,
}

impl Path {
    /// Flat-fading complex gain `√ρ · e^{jθ}`.
    pub fn gain(&self) -> C64 {
        Complex::from_polar(self.power.sqrt(), self.phase)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSet {
    paths: Vec<Path>,
}

impl PathSet {
    pub fn new(paths: Vec<Path>) -> Result<Self> {
        if paths.is_empty() {
            return Err(SenseError::invalid("a path set needs at least one path"));
        }
        for (i, p) in paths.iter().enumerate() {
            let finite = [p.power, p.phase, p.delay, p.azimuth, p.elevation]
                .iter()
                .all(|v| v.is_finite());
            if !finite || p.power < 0.0 || p.delay < 0.0 {
                return Err(SenseError::invalid(format!(
                    "path {i}: power and delay must be finite and nonnegative"
                )));
            }
        }
        Ok(PathSet { paths })
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// Paths sorted by descending power (stable).
    pub fn strongest(&self, n: usize) -> Vec<Path> {
        let mut sorted = self.paths.clone();
        sorted.sort_by(|a, b| b.power.partial_cmp(&a.power).unwrap());
        sorted.truncate(n);
        sorted
    }
}

/// A channel matrix `M x n_C` (`n_C = 1` for flat fading).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub matrix: CMatrix,
    pub geometry: ArrayGeometry,
    /// System bandwidth in Hz, multi-carrier channels only.
    pub bandwidth: Option<f64>,
}

impl ChannelRealization {
    pub fn ports(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn carriers(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn column(&self, k: usize) -> CVector {
        self.matrix.column(k).into_owned()
    }
}

/// Unit-norm array response `a(az, el)`.
pub fn array_response(geometry: &ArrayGeometry, az: f64, el: f64) -> Result<CVector> {
    geometry.validate()?;
    if !az.is_finite() || !el.is_finite() {
        return Err(SenseError::invalid("angles must be finite"));
    }
    let n1 = geometry.n_horizontal;
    let n2 = geometry.n_vertical;
    let u = geometry.spacing_h * el.sin() * az.sin();
    let v = geometry.spacing_v * el.cos();
    let m = geometry.ports();
    let scale = 1.0 / (m as f64).sqrt();
    let block: Vec<C64> = (0..n2)
        .flat_map(|q| (0..n1).map(move |p| (p, q)))
        .map(|(p, q)| Complex::from_polar(scale, 2.0 * PI * (p as f64 * u + q as f64 * v)))
        .collect();
    let mut out = block.clone();
    if geometry.dual_polarized {
        out.extend_from_slice(&block);
    }
    Ok(CVector::from_vec(out))
}

/// Flat-fading channel `Σ_ℓ √ρ_ℓ e^{jθ_ℓ} a(az_ℓ, el_ℓ)`, optionally scaled to
/// unit norm.
pub fn gen_flat_channel(geometry: &ArrayGeometry, paths: &PathSet, normalize: bool) -> Result<CVector> {
    let mut h = CVector::zeros(geometry.ports());
    for p in paths.paths() {
        let a = array_response(geometry, p.azimuth, p.elevation)?;
        h.axpy(p.gain(), &a, C64::new(1.0, 0.0));
    }
    if normalize {
        normalize_in_place(&mut h);
    }
    Ok(h)
}

/// Multi-carrier channel whose column `k` (1-based) is
/// `Σ_ℓ √(ρ_ℓ / n_C) e^{j(θ_ℓ - 2π k τ_ℓ B / n_C)} a(az_ℓ, el_ℓ)`.
///
/// With `n_C = 1` the single column is the flat channel with each path phase
/// shifted by `-2π τ_ℓ B`; the `1/√n_C` amplitude factor is then 1. When
/// `normalize` is set every column is scaled to unit norm.
pub fn gen_multicarrier_channel(
    geometry: &ArrayGeometry,
    paths: &PathSet,
    n_carriers: usize,
    bandwidth: f64,
    normalize: bool,
) -> Result<ChannelRealization> {
    if n_carriers == 0 {
        return Err(SenseError::invalid("n_C must be at least 1"));
    }
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(SenseError::invalid("bandwidth must be positive"));
    }
    let responses = paths
        .paths()
        .iter()
        .map(|p| array_response(geometry, p.azimuth, p.elevation))
        .collect::<Result<Vec<_>>>()?;
    let nc = n_carriers as f64;
    let mut h = CMatrix::zeros(geometry.ports(), n_carriers);
    for k in 0..n_carriers {
        let k1 = (k + 1) as f64;
        let mut col = h.column_mut(k);
        for (p, a) in paths.paths().iter().zip(&responses) {
            let gain = Complex::from_polar(
                (p.power / nc).sqrt(),
                p.phase - 2.0 * PI * k1 * p.delay * bandwidth / nc,
            );
            col.axpy(gain, a, C64::new(1.0, 0.0));
        }
    }
    if normalize {
        for mut col in h.column_iter_mut() {
            let n = col.norm();
            if n > 0.0 {
                col /= C64::new(n, 0.0);
            }
        }
    }
    Ok(ChannelRealization {
        matrix: h,
        geometry: *geometry,
        bandwidth: Some(bandwidth),
    })
}

pub(crate) fn normalize_in_place(h: &mut CVector) {
    let n = h.norm();
    if n > 0.0 {
        *h /= C64::new(n, 0.0);
    }
}
