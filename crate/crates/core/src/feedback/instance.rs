//! Constrained phase retrieval instances.
//!
//! An instance is a list of measurement blocks. Block `b` has one or more
//! components `A_{b,c}` (dim x n_T1), one per carrier it covers, and the
//! codeword power seen by the UE for codeword `j` is
//! `Q_{b,j}(g) = Σ_c |a_{b,c,j}^H g|²`. The reported codeword `j*_b` gives
//! the target `Q_{b,j*}(g) ≈ q_b` and the inequality constraints
//! `Q_{b,j}(g) − Q_{b,j*}(g) ≤ 0` for every `j ≠ j*_b`.
//!
//! Flat channels use `a_{t,j} = D^H W_t u_j`. Multi-carrier channels use the
//! vectorised coefficient matrix `vec(G)` (column-major) as unknown, with
//! `a_{t,k,j}[a + L̃ b] = r_a F[k, b]` where `r = D̃^H W_t^k u_j`.

use serde::{Deserialize, Serialize};

use super::FeedbackRecord;
use crate::basis::{BasisMatrix, DelayBasis};
use crate::codebook::Type1Codebook;
use crate::precoder::Precoder;
use crate::{CMatrix, CVector, Result, SenseError, C64};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetSource {
    /// Dequantized CQI (equal to the raw value when no quantizer is used).
    #[default]
    Reported,
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Grouping {
    PerCarrier,
    /// Consecutive groups of this many carriers share one PMI/CQI.
    Groups(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ConstraintId {
    pub block: usize,
    pub codeword: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementBlock {
    pub round: usize,
    pub carrier: Option<usize>,
    pub group: Option<usize>,
    pub pmi: usize,
    pub target: f64,
    /// One `dim x n_T1` matrix per carrier covered by the block.
    pub components: Vec<CMatrix>,
}

/// Maps the unknown coefficient vector back to the channel.
#[derive(Debug, Clone, PartialEq)]
pub enum Lift {
    Flat { d: CMatrix },
    Delay { d_tilde: CMatrix, f: CMatrix },
}

impl Lift {
    pub fn dim(&self) -> usize {
        match self {
            Lift::Flat { d } => d.ncols(),
            Lift::Delay { d_tilde, f } => d_tilde.ncols() * f.ncols(),
        }
    }

    /// Channel estimate, `M x n_C` (`n_C = 1` for flat channels).
    pub fn reconstruct(&self, g: &CVector) -> CMatrix {
        match self {
            Lift::Flat { d } => {
                let v = d * g;
                CMatrix::from_column_slice(v.len(), 1, v.as_slice())
            }
            Lift::Delay { d_tilde, f } => {
                let gm = CMatrix::from_column_slice(d_tilde.ncols(), f.ncols(), g.as_slice());
                d_tilde * gm * f.adjoint()
            }
        }
    }

    /// Best in-span coefficients for a channel: `D^H h` or `vec(D̃^H H F)`.
    pub fn coefficients(&self, h: &CMatrix) -> CVector {
        match self {
            Lift::Flat { d } => d.ad_mul(&h.column(0).into_owned()),
            Lift::Delay { d_tilde, f } => {
                let g = d_tilde.adjoint() * h * f;
                CVector::from_column_slice(g.as_slice())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CprInstance {
    pub blocks: Vec<MeasurementBlock>,
    pub n_codewords: usize,
    pub lift: Lift,
}

impl CprInstance {
    pub fn dim(&self) -> usize {
        self.lift.dim()
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Size of the full constraint set, `blocks · (n_T1 − 1)`.
    pub fn n_constraints(&self) -> usize {
        self.blocks.len() * (self.n_codewords - 1)
    }

    pub fn targets(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| b.target).collect()
    }

    pub fn mean_target(&self) -> f64 {
        self.targets().iter().sum::<f64>() / self.blocks.len() as f64
    }

    /// `μ_{j*}` of a single-component block.
    pub fn mu_star(&self, b: usize) -> CVector {
        let blk = &self.blocks[b];
        blk.components[0].column(blk.pmi).into_owned()
    }

    /// Codeword powers `Q_{b,j}(g)` for all `j`.
    pub fn powers(&self, b: usize, g: &CVector) -> Vec<f64> {
        let mut out = vec![0.0; self.n_codewords];
        for a in &self.blocks[b].components {
            let proj = a.ad_mul(g);
            out.iter_mut().zip(proj.iter()).for_each(|(o, p)| *o += p.norm_sqr());
        }
        out
    }

    pub fn codeword_power(&self, b: usize, j: usize, g: &CVector) -> f64 {
        self.blocks[b]
            .components
            .iter()
            .map(|a| a.column(j).dotc(g).norm_sqr())
            .sum()
    }

    pub fn selected_power(&self, b: usize, g: &CVector) -> f64 {
        self.codeword_power(b, self.blocks[b].pmi, g)
    }

    /// `U_{b,j} x = Σ_c a_{b,c,j} (a_{b,c,j}^H x)`.
    pub fn apply_codeword(&self, b: usize, j: usize, x: &CVector) -> CVector {
        let mut out = CVector::zeros(self.dim());
        for a in &self.blocks[b].components {
            let col = a.column(j);
            out.axpy(col.dotc(x), &col, C64::new(1.0, 0.0));
        }
        out
    }

    pub fn apply_selected(&self, b: usize, x: &CVector) -> CVector {
        self.apply_codeword(b, self.blocks[b].pmi, x)
    }

    /// `V_{b,j} x = (U_{b,j} − U_{b,j*}) x`.
    pub fn apply_constraint(&self, id: ConstraintId, x: &CVector) -> CVector {
        self.apply_codeword(id.block, id.codeword, x) - self.apply_selected(id.block, x)
    }

    /// `g^H V_{b,j} g`.
    pub fn constraint_value(&self, id: ConstraintId, g: &CVector) -> f64 {
        self.codeword_power(id.block, id.codeword, g) - self.selected_power(id.block, g)
    }

    /// Dense `U_{b,j}`.
    pub fn codeword_outer(&self, b: usize, j: usize) -> CMatrix {
        let mut u = CMatrix::zeros(self.dim(), self.dim());
        for a in &self.blocks[b].components {
            let col = a.column(j);
            u.ger(C64::new(1.0, 0.0), &col, &col.conjugate(), C64::new(1.0, 0.0));
        }
        u
    }

    pub fn selected_outer(&self, b: usize) -> CMatrix {
        self.codeword_outer(b, self.blocks[b].pmi)
    }

    /// Every `(block, codeword)` pair with `codeword ≠ pmi`.
    pub fn all_constraints(&self) -> impl Iterator<Item = ConstraintId> + '_ {
        self.blocks.iter().enumerate().flat_map(move |(b, blk)| {
            (0..self.n_codewords)
                .filter(move |&j| j != blk.pmi)
                .map(move |j| ConstraintId { block: b, codeword: j })
        })
    }

    /// `Σ_b (q_b − Q_{b,j*}(g))²`.
    pub fn objective(&self, g: &CVector) -> f64 {
        (0..self.blocks.len())
            .map(|b| (self.blocks[b].target - self.selected_power(b, g)).powi(2))
            .sum()
    }

    pub fn reconstruct(&self, g: &CVector) -> CMatrix {
        self.lift.reconstruct(g)
    }

    /// Keeps only the first `t` rounds.
    pub fn truncate_rounds(&self, t: usize) -> CprInstance {
        CprInstance {
            blocks: self.blocks.iter().filter(|b| b.round < t).cloned().collect(),
            n_codewords: self.n_codewords,
            lift: self.lift.clone(),
        }
    }
}

fn target_of(r: &FeedbackRecord, source: TargetSource) -> Result<f64> {
    match source {
        TargetSource::Reported => Ok(r.cqi_hat),
        TargetSource::Raw => r
            .cqi_raw
            .ok_or_else(|| SenseError::invalid(format!("round {} has no raw CQI", r.round))),
    }
}

fn check_pmi(r: &FeedbackRecord, codebook: &Type1Codebook) -> Result<()> {
    if r.pmi >= codebook.len() {
        return Err(SenseError::invalid(format!(
            "PMI {} out of range for a codebook of {} codewords",
            r.pmi,
            codebook.len()
        )));
    }
    Ok(())
}

/// Flat-channel instance; `precoders[i]` is the precoder of `records[i]`.
pub fn assemble_cpr_instance(
    records: &[FeedbackRecord],
    basis: &BasisMatrix,
    precoders: &[Precoder],
    codebook: &Type1Codebook,
    source: TargetSource,
) -> Result<CprInstance> {
    if records.is_empty() {
        return Err(SenseError::invalid("no feedback records"));
    }
    if records.len() != precoders.len() {
        return Err(SenseError::dims(format!(
            "{} records but {} precoders",
            records.len(),
            precoders.len()
        )));
    }
    let blocks = records
        .iter()
        .zip(precoders)
        .map(|(r, p)| {
            check_pmi(r, codebook)?;
            if p.w.shape() != (basis.ports(), codebook.ports()) {
                return Err(SenseError::dims(format!(
                    "precoder is {:?}, expected {:?}",
                    p.w.shape(),
                    (basis.ports(), codebook.ports())
                )));
            }
            let mu_all = (basis.d.adjoint() * &p.w) * &codebook.codewords;
            Ok(MeasurementBlock {
                round: r.round,
                carrier: r.carrier,
                group: r.group,
                pmi: r.pmi,
                target: target_of(r, source)?,
                components: vec![mu_all],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CprInstance {
        blocks,
        n_codewords: codebook.len(),
        lift: Lift::Flat { d: basis.d.clone() },
    })
}

fn carrier_measurements(
    basis: &DelayBasis,
    precoder: &Precoder,
    codebook: &Type1Codebook,
    k: usize,
) -> CMatrix {
    let l = basis.spatial_dim();
    let n_l = basis.delay_taps();
    let r = (basis.d_tilde.adjoint() * &precoder.w) * &codebook.codewords;
    let mut a = CMatrix::zeros(l * n_l, codebook.len());
    for b in 0..n_l {
        let fk = basis.f[(k, b)];
        for j in 0..codebook.len() {
            for i in 0..l {
                a[(i + l * b, j)] = r[(i, j)] * fk;
            }
        }
    }
    a
}

/// Multi-carrier instance over `vec(G)`. `precoders[t][k]` is the precoder
/// of carrier `k` in round `t`. Per-carrier records carry `carrier`; group
/// records carry `group` and cover carriers `group·n_c .. (group+1)·n_c`.
pub fn assemble_multicarrier_instance(
    records: &[FeedbackRecord],
    basis: &DelayBasis,
    precoders: &[Vec<Precoder>],
    codebook: &Type1Codebook,
    grouping: Grouping,
    source: TargetSource,
) -> Result<CprInstance> {
    if records.is_empty() {
        return Err(SenseError::invalid("no feedback records"));
    }
    let n_c = basis.carriers();
    let group_size = match grouping {
        Grouping::PerCarrier => 1,
        Grouping::Groups(n) => n,
    };
    if group_size == 0 || n_c % group_size != 0 {
        return Err(SenseError::invalid(format!(
            "group size {group_size} does not divide {n_c} carriers"
        )));
    }
    let blocks = records
        .iter()
        .map(|r| {
            check_pmi(r, codebook)?;
            let per_round = precoders
                .get(r.round)
                .ok_or_else(|| SenseError::dims(format!("no precoders for round {}", r.round)))?;
            if per_round.len() != n_c {
                return Err(SenseError::dims(format!(
                    "round {} has {} precoders for {n_c} carriers",
                    r.round,
                    per_round.len()
                )));
            }
            let carriers: Vec<usize> = match grouping {
                Grouping::PerCarrier => {
                    let k = r
                        .carrier
                        .ok_or_else(|| SenseError::invalid("per-carrier record without carrier"))?;
                    vec![k]
                }
                Grouping::Groups(n) => {
                    let g = r
                        .group
                        .ok_or_else(|| SenseError::invalid("group record without group"))?;
                    (g * n..(g + 1) * n).collect()
                }
            };
            if carriers.iter().any(|&k| k >= n_c) {
                return Err(SenseError::invalid("record refers to a carrier out of range"));
            }
            let components = carriers
                .iter()
                .map(|&k| carrier_measurements(basis, &per_round[k], codebook, k))
                .collect();
            Ok(MeasurementBlock {
                round: r.round,
                carrier: r.carrier,
                group: r.group,
                pmi: r.pmi,
                target: target_of(r, source)?,
                components,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CprInstance {
        blocks,
        n_codewords: codebook.len(),
        lift: Lift::Delay {
            d_tilde: basis.d_tilde.clone(),
            f: basis.f.clone(),
        },
    })
}
