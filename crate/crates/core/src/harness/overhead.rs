//! Feedback overhead arithmetic.
//!
//! Type-I sensing sends one PMI per `pmi_group` carriers and one CQI per
//! `cqi_group` carriers in every round. The Type-II reference sends one
//! wideband report plus one subband report per `type2_subband_size`
//! carriers, once.

use serde::{Deserialize, Serialize};

use crate::{Result, SenseError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverheadSpec {
    pub n_carriers: usize,
    pub pmi_group: usize,
    pub pmi_bits: u32,
    pub cqi_group: usize,
    pub cqi_bits: u32,
    pub rounds: usize,
    pub type2_wideband_bits: u32,
    pub type2_subband_bits: u32,
    pub type2_subband_size: usize,
}

impl Default for OverheadSpec {
    fn default() -> Self {
        OverheadSpec {
            n_carriers: 48,
            pmi_group: 12,
            pmi_bits: 9,
            cqi_group: 4,
            cqi_bits: 4,
            rounds: 6,
            type2_wideband_bits: 20,
            type2_subband_bits: 56,
            type2_subband_size: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverheadReport {
    pub type1_bits_per_round: u64,
    pub type1_bits: u64,
    pub type2_bits: u64,
    /// `1 − type1 / type2`.
    pub saving: f64,
}

fn groups(n: usize, size: usize, what: &str) -> Result<u64> {
    if size == 0 || n % size != 0 {
        return Err(SenseError::Config(format!(
            "{what} group of {size} carriers does not divide {n} carriers"
        )));
    }
    Ok((n / size) as u64)
}

pub fn compute_overhead(spec: &OverheadSpec) -> Result<OverheadReport> {
    let pmi = groups(spec.n_carriers, spec.pmi_group, "PMI")? * spec.pmi_bits as u64;
    let cqi = groups(spec.n_carriers, spec.cqi_group, "CQI")? * spec.cqi_bits as u64;
    let per_round = pmi + cqi;
    let type1 = per_round * spec.rounds as u64;
    let type2 = spec.type2_wideband_bits as u64
        + groups(spec.n_carriers, spec.type2_subband_size, "Type-II subband")? * spec.type2_subband_bits as u64;
    Ok(OverheadReport {
        type1_bits_per_round: per_round,
        type1_bits: type1,
        type2_bits: type2,
        saving: 1.0 - type1 as f64 / type2 as f64,
    })
}
