//! Training precoders.
//!
//! The hybrid precoder is `W = W2 W1`: a Gaussian matrix `W1` provides
//! measurement diversity and the projector `W2 = D D^H` concentrates the
//! transmitted energy on the channel subspace. The plain Gaussian scheme is
//! the special case `W2 = I`.

use rand::Rng;

use crate::basis::{BasisMatrix, DelayBasis};
use crate::linalg::complex_gaussian_matrix;
use crate::{CMatrix, CVector, Result, SenseError};

#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    /// `M x N_p`.
    pub w: CMatrix,
    /// Gaussian component, `M x N_p`.
    pub w1: CMatrix,
    /// Projection component, `M x M`.
    pub w2: CMatrix,
    pub sigma_w: f64,
}

impl Precoder {
    pub fn ports(&self) -> usize {
        self.w.ncols()
    }

    /// Effective channel `W^H h`.
    pub fn effective(&self, h: &CVector) -> CVector {
        self.w.ad_mul(h)
    }

    /// Scales `W` (and `W1`) to unit Frobenius norm.
    pub fn normalized(mut self) -> Self {
        let n = self.w.norm();
        if n > 0.0 {
            self.w /= crate::C64::new(n, 0.0);
            self.w1 /= crate::C64::new(n, 0.0);
        }
        self
    }
}

fn check(m: usize, n_p: usize, sigma_w: f64) -> Result<()> {
    if n_p == 0 || n_p > m {
        return Err(SenseError::invalid(format!("need 1 <= N_p <= M, got N_p={n_p}, M={m}")));
    }
    if !(sigma_w > 0.0) || !sigma_w.is_finite() {
        return Err(SenseError::invalid("sigma_w must be positive"));
    }
    Ok(())
}

pub fn gen_hybrid_precoder<R: Rng + ?Sized>(
    basis: &BasisMatrix,
    n_p: usize,
    sigma_w: f64,
    rng: &mut R,
) -> Result<Precoder> {
    let m = basis.ports();
    check(m, n_p, sigma_w)?;
    let w1 = complex_gaussian_matrix(m, n_p, sigma_w, rng);
    let w2 = basis.projector();
    Ok(Precoder {
        w: &w2 * &w1,
        w1,
        w2,
        sigma_w,
    })
}

pub fn gen_gaussian_precoder<R: Rng + ?Sized>(
    m: usize,
    n_p: usize,
    sigma_w: f64,
    rng: &mut R,
) -> Result<Precoder> {
    check(m, n_p, sigma_w)?;
    let w1 = complex_gaussian_matrix(m, n_p, sigma_w, rng);
    Ok(Precoder {
        w: w1.clone(),
        w1,
        w2: CMatrix::identity(m, m),
        sigma_w,
    })
}

/// One precoder per carrier sharing a single Gaussian draw:
/// `W^k = D^(k) D^(k)^H W1`.
pub fn gen_subcarrier_precoders<R: Rng + ?Sized>(
    basis: &DelayBasis,
    n_p: usize,
    sigma_w: f64,
    rng: &mut R,
) -> Result<Vec<Precoder>> {
    let m = basis.ports();
    check(m, n_p, sigma_w)?;
    if basis.per_carrier.is_empty() {
        return Err(SenseError::invalid("delay basis has no per-carrier bases"));
    }
    let w1 = complex_gaussian_matrix(m, n_p, sigma_w, rng);
    Ok(basis
        .per_carrier
        .iter()
        .map(|d| {
            let w2 = d * d.adjoint();
            Precoder {
                w: &w2 * &w1,
                w1: w1.clone(),
                w2,
                sigma_w,
            }
        })
        .collect())
}
