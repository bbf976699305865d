//! Low-dimensional channel bases and the delay-domain transform.
//!
//! A flat-fading basis `D` (M x L) holds the leading left singular vectors of
//! a matrix of reference channels. For multi-carrier channels the reference
//! channels are first mapped to the antenna-delay domain with the truncated
//! unitary IDFT `F` (n_C x ñ_L), and a shared spatial basis `D̃` is taken from
//! the concatenated delay-domain matrices; the channel is then approximated as
//! `D̃ G F^H` with a small coefficient matrix `G`.

use std::f64::consts::PI;

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::channel::{array_response, ArrayGeometry, PathSet};
use crate::linalg::{leading_left_singular_vectors, max_abs};
use crate::{CMatrix, Result, SenseError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisSource {
    RuCsi,
    RuType2,
    TuPaths,
    /// `D = I_M`: no dimension reduction.
    Identity,
}

impl std::str::FromStr for BasisSource {
    type Err = SenseError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ru_csi" => Ok(BasisSource::RuCsi),
            "ru_type2" => Ok(BasisSource::RuType2),
            "tu_paths" => Ok(BasisSource::TuPaths),
            "identity" | "full" => Ok(BasisSource::Identity),
            other => Err(SenseError::Config(format!(
                "unknown basis source `{other}` (ru_csi, ru_type2, tu_paths, identity)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisMatrix {
    /// `M x L`, orthonormal columns.
    pub d: CMatrix,
    pub source: BasisSource,
    /// Singular values of the source matrix, descending (empty for identity).
    pub singular_values: Vec<f64>,
}

impl BasisMatrix {
    pub fn ports(&self) -> usize {
        self.d.nrows()
    }

    pub fn dim(&self) -> usize {
        self.d.ncols()
    }

    pub fn identity(m: usize) -> Self {
        BasisMatrix {
            d: CMatrix::identity(m, m),
            source: BasisSource::Identity,
            singular_values: Vec::new(),
        }
    }

    /// `D D^H`.
    pub fn projector(&self) -> CMatrix {
        &self.d * self.d.adjoint()
    }
}

/// Leading `l` left singular vectors of `columns` (M x n).
pub fn build_basis(columns: &CMatrix, l: usize, source: BasisSource) -> Result<BasisMatrix> {
    let (m, n) = columns.shape();
    if l == 0 || l > m.min(n) {
        return Err(SenseError::invalid(format!(
            "basis dimension {l} must be in 1..={} for a {m} x {n} source",
            m.min(n)
        )));
    }
    if max_abs(columns) == 0.0 || columns.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
        return Err(SenseError::invalid("basis source must be finite and nonzero"));
    }
    let (d, singular_values) = leading_left_singular_vectors(columns, l);
    Ok(BasisMatrix {
        d,
        source,
        singular_values,
    })
}

/// Basis spanned by the array responses of the strongest known paths.
pub fn basis_from_paths(geometry: &ArrayGeometry, paths: &PathSet, l: usize) -> Result<BasisMatrix> {
    let cols = paths
        .strongest(paths.len())
        .iter()
        .map(|p| array_response(geometry, p.azimuth, p.elevation).map(|a| a * p.gain()))
        .collect::<Result<Vec<_>>>()?;
    build_basis(&CMatrix::from_columns(&cols), l, BasisSource::TuPaths)
}

/// First `n_l` columns of the unitary `n_c`-point IDFT matrix,
/// `F[n, m] = exp(+j 2π n m / n_c) / sqrt(n_c)` (0-based indices).
pub fn idft_matrix(n_c: usize, n_l: usize) -> CMatrix {
    let scale = 1.0 / (n_c as f64).sqrt();
    CMatrix::from_fn(n_c, n_l, |n, m| {
        let phase = 2.0 * PI * ((n * m) % n_c) as f64 / n_c as f64;
        Complex::from_polar(scale, phase)
    })
}

fn check_delay_taps(n_c: usize, n_l: usize) -> Result<()> {
    if n_l == 0 || n_l > n_c {
        return Err(SenseError::invalid(format!(
            "delay taps {n_l} must be in 1..={n_c}"
        )));
    }
    Ok(())
}

/// Antenna-delay representation `H F` (M x ñ_L).
pub fn delay_transform(h: &CMatrix, n_l: usize) -> Result<CMatrix> {
    check_delay_taps(h.ncols(), n_l)?;
    Ok(h * idft_matrix(h.ncols(), n_l))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayBasis {
    /// Shared spatial basis, `M x L̃`.
    pub d_tilde: CMatrix,
    /// Truncated IDFT, `n_C x ñ_L`.
    pub f: CMatrix,
    /// Per-carrier spatial bases `D^(k)`, each `M x L̃`.
    pub per_carrier: Vec<CMatrix>,
}

impl DelayBasis {
    pub fn ports(&self) -> usize {
        self.d_tilde.nrows()
    }

    pub fn carriers(&self) -> usize {
        self.f.nrows()
    }

    pub fn spatial_dim(&self) -> usize {
        self.d_tilde.ncols()
    }

    pub fn delay_taps(&self) -> usize {
        self.f.ncols()
    }
}

/// Builds `D̃` from the delay-domain RU matrices and `D^(k)` from the RU
/// channels on each carrier.
pub fn build_delay_basis(ru_channels: &[CMatrix], n_l: usize, l_tilde: usize) -> Result<DelayBasis> {
    let first = ru_channels
        .first()
        .ok_or_else(|| SenseError::invalid("no reference channels"))?;
    let (m, n_c) = first.shape();
    if ru_channels.iter().any(|h| h.shape() != (m, n_c)) {
        return Err(SenseError::invalid("reference channels have inconsistent dimensions"));
    }
    check_delay_taps(n_c, n_l)?;
    let n_r = ru_channels.len();
    if l_tilde == 0 || l_tilde > m.min(n_r) {
        return Err(SenseError::invalid(format!(
            "spatial dimension {l_tilde} must be in 1..={} with {n_r} reference users",
            m.min(n_r)
        )));
    }
    let f = idft_matrix(n_c, n_l);
    let mut stacked = CMatrix::zeros(m, n_r * n_l);
    for (r, h) in ru_channels.iter().enumerate() {
        stacked.columns_mut(r * n_l, n_l).copy_from(&(h * &f));
    }
    let d_tilde = build_basis(&stacked, l_tilde, BasisSource::RuCsi)?.d;
    let per_carrier = (0..n_c)
        .map(|k| {
            let cols: Vec<_> = ru_channels.iter().map(|h| h.column(k).into_owned()).collect();
            build_basis(&CMatrix::from_columns(&cols), l_tilde, BasisSource::RuCsi).map(|b| b.d)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DelayBasis {
        d_tilde,
        f,
        per_carrier,
    })
}

/// `D̃ G F^H` (M x n_C).
pub fn reconstruct_csi(g: &CMatrix, basis: &DelayBasis) -> Result<CMatrix> {
    if g.shape() != (basis.spatial_dim(), basis.delay_taps()) {
        return Err(SenseError::dims(format!(
            "coefficient matrix is {:?}, basis expects {:?}",
            g.shape(),
            (basis.spatial_dim(), basis.delay_taps())
        )));
    }
    Ok(&basis.d_tilde * g * basis.f.adjoint())
}
