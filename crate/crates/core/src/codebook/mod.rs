//! Type-I codebook, PMI/CQI selection and a Type-II surrogate.
//!
//! The Type-I codebook is the single-panel rank-1 structure: 2D oversampled
//! DFT beams on an `N1 x N2` port grid per polarisation, co-phased across the
//! two polarisations with QPSK. Codeword indices are 0-based with `m1`
//! fastest, then `m2`, then the co-phasing index.

mod quantize;
mod type2;

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::{CMatrix, CVector, Result, SenseError, C64};

pub use quantize::{dequantize_cqi, quantize_cqi, QuantScheme, QuantizerSpec};
pub use type2::{build_type2_surrogate, Type2Options};

const COPHASE: [C64; 4] = [
    Complex { re: 1.0, im: 0.0 },
    Complex { re: 0.0, im: 1.0 },
    Complex { re: -1.0, im: 0.0 },
    Complex { re: 0.0, im: -1.0 },
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Type1Params {
    pub n1: usize,
    pub n2: usize,
    pub o1: usize,
    pub o2: usize,
}

impl Type1Params {
    pub fn ports(&self) -> usize {
        2 * self.n1 * self.n2
    }

    pub fn size(&self) -> usize {
        self.n1 * self.o1 * self.n2 * self.o2 * COPHASE.len()
    }

    /// Bits needed to signal one PMI.
    pub fn pmi_bits(&self) -> u32 {
        (self.size() as f64).log2().ceil() as u32
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Type1Codebook {
    /// `N_p x n_T1`, unit-norm columns.
    pub codewords: CMatrix,
    pub params: Type1Params,
}

/// PMI and CQI reported for one effective channel (or one carrier group).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmiSelection {
    pub pmi: usize,
    pub cqi: f64,
}

/// One oversampled 2D DFT beam on an `n1 x n2` grid, unit norm.
pub(crate) fn dft_beam(n1: usize, n2: usize, o1: usize, o2: usize, m1: usize, m2: usize) -> CVector {
    let scale = 1.0 / ((n1 * n2) as f64).sqrt();
    CVector::from_iterator(
        n1 * n2,
        (0..n2).flat_map(|q| (0..n1).map(move |p| (p, q))).map(|(p, q)| {
            let phase = 2.0
                * PI
                * ((p * m1) as f64 / (n1 * o1) as f64 + (q * m2) as f64 / (n2 * o2) as f64);
            Complex::from_polar(scale, phase)
        }),
    )
}

pub fn build_type1_codebook(n1: usize, n2: usize, o1: usize, o2: usize) -> Result<Type1Codebook> {
    if n1 == 0 || n2 == 0 || o1 == 0 || o2 == 0 {
        return Err(SenseError::invalid("codebook parameters must be at least 1"));
    }
    let params = Type1Params { n1, n2, o1, o2 };
    let half = n1 * n2;
    let mut codewords = CMatrix::zeros(params.ports(), params.size());
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut j = 0;
    for phi in COPHASE {
        for m2 in 0..n2 * o2 {
            for m1 in 0..n1 * o1 {
                let v = dft_beam(n1, n2, o1, o2, m1, m2);
                for i in 0..half {
                    codewords[(i, j)] = v[i] * inv_sqrt2;
                    codewords[(i + half, j)] = v[i] * phi * inv_sqrt2;
                }
                j += 1;
            }
        }
    }
    Ok(Type1Codebook { codewords, params })
}

impl Type1Codebook {
    pub fn ports(&self) -> usize {
        self.codewords.nrows()
    }

    pub fn len(&self) -> usize {
        self.codewords.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.ncols() == 0
    }

    pub fn codeword(&self, j: usize) -> CVector {
        self.codewords.column(j).into_owned()
    }

    /// Debug dump: parameters then one column norm per line.
    pub fn dump(&self) -> String {
        let p = self.params;
        let mut s = format!(
            "type1 N1={} N2={} O1={} O2={} cophase=4 ports={} size={}\n",
            p.n1,
            p.n2,
            p.o1,
            p.o2,
            self.ports(),
            self.len()
        );
        for (j, col) in self.codewords.column_iter().enumerate() {
            writeln!(s, "{j} {:.15}", col.norm()).unwrap();
        }
        s
    }

    fn check_dims(&self, h: &CVector) -> Result<()> {
        if h.is_empty() {
            return Err(SenseError::invalid("empty effective channel"));
        }
        if h.len() != self.ports() {
            return Err(SenseError::dims(format!(
                "effective channel has {} entries, codebook has {} ports",
                h.len(),
                self.ports()
            )));
        }
        Ok(())
    }
}

/// First index of the strictly largest value.
fn argmax_first(values: impl Iterator<Item = f64>) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (j, v) in values.enumerate() {
        if v > best.1 {
            best = (j, v);
        }
    }
    best
}

/// `pmi = argmax_j |u_j^H h|` (lowest index on ties), `cqi = |u_pmi^H h|^2`.
pub fn select_pmi(h_eff: &CVector, codebook: &Type1Codebook) -> Result<PmiSelection> {
    codebook.check_dims(h_eff)?;
    let corr = codebook.codewords.ad_mul(h_eff);
    let (pmi, cqi) = argmax_first(corr.iter().map(|c| c.norm_sqr()));
    Ok(PmiSelection { pmi, cqi })
}

/// Group selection over several carriers: maximises `Σ_k |u_j^H h_k|^2` and
/// reports that sum as the CQI.
pub fn select_pmi_group(h_effs: &[CVector], codebook: &Type1Codebook) -> Result<PmiSelection> {
    if h_effs.is_empty() {
        return Err(SenseError::invalid("empty carrier group"));
    }
    let mut power = vec![0.0; codebook.len()];
    for h in h_effs {
        codebook.check_dims(h)?;
        let corr = codebook.codewords.ad_mul(h);
        power.iter_mut().zip(corr.iter()).for_each(|(p, c)| *p += c.norm_sqr());
    }
    let (pmi, cqi) = argmax_first(power.into_iter());
    Ok(PmiSelection { pmi, cqi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{complex_gaussian_matrix, rng_from_seed};

    #[test]
    fn codebook_sizes_match_port_counts() {
        let cb16 = build_type1_codebook(4, 2, 4, 4).unwrap();
        assert_eq!((cb16.ports(), cb16.len()), (16, 512));
        let cb32 = build_type1_codebook(8, 2, 4, 4).unwrap();
        assert_eq!((cb32.ports(), cb32.len()), (32, 1024));
        assert_eq!(cb16.params.pmi_bits(), 9);
        for col in cb32.codewords.column_iter() {
            assert!((col.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn minimal_codebook_is_cophasing_alphabet() {
        let cb = build_type1_codebook(1, 1, 1, 1).unwrap();
        assert_eq!(cb.len(), 4);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for (j, phi) in COPHASE.iter().enumerate() {
            assert!((cb.codewords[(0, j)] - C64::new(s, 0.0)).norm() < 1e-15);
            assert!((cb.codewords[(1, j)] - phi * s).norm() < 1e-15);
        }
    }

    #[test]
    fn index_ordering_is_m1_fastest() {
        let (n1, n2, o1, o2) = (2, 2, 2, 2);
        let cb = build_type1_codebook(n1, n2, o1, o2).unwrap();
        // j = m1 + N1 O1 (m2 + N2 O2 p)
        let (m1, m2, p) = (3, 1, 2);
        let j = m1 + n1 * o1 * (m2 + n2 * o2 * p);
        let v = dft_beam(n1, n2, o1, o2, m1, m2);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for i in 0..4 {
            assert!((cb.codewords[(i, j)] - v[i] * s).norm() < 1e-14);
            assert!((cb.codewords[(i + 4, j)] - v[i] * COPHASE[p] * s).norm() < 1e-14);
        }
    }

    #[test]
    fn scaled_codeword_selects_itself() {
        let cb = build_type1_codebook(2, 2, 4, 4).unwrap();
        let h = cb.codeword(7) * C64::new(3.0, 0.0);
        let sel = select_pmi(&h, &cb).unwrap();
        assert_eq!(sel.pmi, 7);
        assert!((sel.cqi - 9.0).abs() < 1e-12);
    }

    #[test]
    fn forced_winner() {
        // With O = 1 the beams of one co-phase are orthogonal; a codeword is
        // orthogonal to all codewords of other beams and to its antipodal
        // co-phase partner.
        let cb = build_type1_codebook(2, 2, 1, 1).unwrap();
        let h = cb.codeword(9);
        for j in 0..cb.len() {
            let c = (cb.codeword(j).adjoint() * &h)[0].norm();
            if j % 4 != 9 % 4 {
                assert!(c < 1e-12);
            }
        }
        assert_eq!(select_pmi(&h, &cb).unwrap().pmi, 9);
    }

    #[test]
    fn selection_matches_exhaustive_scan() {
        let cb = build_type1_codebook(2, 2, 4, 4).unwrap();
        let mut rng = rng_from_seed(3);
        for _ in 0..50 {
            let h: CVector = complex_gaussian_matrix(8, 1, 1.0, &mut rng).column(0).into_owned();
            let sel = select_pmi(&h, &cb).unwrap();
            let mut best = (0, -1.0);
            for j in 0..cb.len() {
                let mut acc = C64::new(0.0, 0.0);
                for i in 0..8 {
                    acc += cb.codewords[(i, j)].conj() * h[i];
                }
                if acc.norm() > best.1 {
                    best = (j, acc.norm());
                }
            }
            assert_eq!(sel.pmi, best.0);
            assert!((sel.cqi - best.1 * best.1).abs() < 1e-12);
        }
    }

    #[test]
    fn ties_break_to_lowest_index() {
        let cb = build_type1_codebook(1, 1, 1, 1).unwrap();
        // [1, 0] has equal correlation with all four codewords.
        let h = CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        assert_eq!(select_pmi(&h, &cb).unwrap().pmi, 0);
    }

    #[test]
    fn selection_rejects_bad_dimensions() {
        let cb = build_type1_codebook(1, 1, 1, 1).unwrap();
        assert!(select_pmi(&CVector::zeros(0), &cb).is_err());
        assert!(select_pmi(&CVector::zeros(3), &cb).is_err());
        assert!(select_pmi_group(&[], &cb).is_err());
    }

    #[test]
    fn group_selection_reductions() {
        let cb = build_type1_codebook(2, 1, 4, 4).unwrap();
        let mut rng = rng_from_seed(8);
        let h: CVector = complex_gaussian_matrix(4, 1, 1.0, &mut rng).column(0).into_owned();
        let single = select_pmi(&h, &cb).unwrap();
        let group1 = select_pmi_group(std::slice::from_ref(&h), &cb).unwrap();
        assert_eq!(single, group1);
        let rep = vec![h.clone(); 3];
        let group3 = select_pmi_group(&rep, &cb).unwrap();
        assert_eq!(group3.pmi, single.pmi);
        assert!((group3.cqi - 3.0 * single.cqi).abs() < 1e-12);
    }

    #[test]
    fn group_selection_matches_double_loop() {
        let cb = build_type1_codebook(2, 2, 4, 4).unwrap();
        let mut rng = rng_from_seed(19);
        for _ in 0..20 {
            let hs: Vec<CVector> = (0..4)
                .map(|_| complex_gaussian_matrix(8, 1, 1.0, &mut rng).column(0).into_owned())
                .collect();
            let sel = select_pmi_group(&hs, &cb).unwrap();
            let mut best = (0, -1.0);
            for j in 0..cb.len() {
                let mut total = 0.0;
                for h in &hs {
                    let mut acc = C64::new(0.0, 0.0);
                    for i in 0..8 {
                        acc += cb.codewords[(i, j)].conj() * h[i];
                    }
                    total += acc.norm_sqr();
                }
                if total > best.1 {
                    best = (j, total);
                }
            }
            assert_eq!(sel.pmi, best.0);
            assert!((sel.cqi - best.1).abs() < 1e-10);
        }
    }

    #[test]
    fn dump_lists_every_norm() {
        let cb = build_type1_codebook(1, 1, 2, 1).unwrap();
        let d = cb.dump();
        assert!(d.starts_with("type1 N1=1 N2=1 O1=2 O2=1"));
        assert_eq!(d.lines().count(), 1 + cb.len());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn pmi_invariant_to_complex_scaling(
                seed in any::<u64>(), re in -5.0f64..5.0, im in -5.0f64..5.0,
            ) {
                prop_assume!(re.abs() + im.abs() > 1e-3);
                let cb = build_type1_codebook(2, 1, 4, 2).unwrap();
                let h: CVector = complex_gaussian_matrix(4, 1, 1.0, &mut rng_from_seed(seed))
                    .column(0).into_owned();
                let c = C64::new(re, im);
                let a = select_pmi(&h, &cb).unwrap();
                let b = select_pmi(&(h * c), &cb).unwrap();
                prop_assert_eq!(a.pmi, b.pmi);
                prop_assert!((b.cqi - a.cqi * c.norm_sqr()).abs() <= 1e-9 * b.cqi.max(1.0));
            }

            #[test]
            fn codeword_count_formula(n1 in 1usize..4, n2 in 1usize..3, o1 in 1usize..5, o2 in 1usize..5) {
                let cb = build_type1_codebook(n1, n2, o1, o2).unwrap();
                prop_assert_eq!(cb.len(), n1 * o1 * n2 * o2 * 4);
                for col in cb.codewords.column_iter() {
                    prop_assert!((col.norm() - 1.0).abs() < 1e-12);
                }
            }
        }
    }
}
