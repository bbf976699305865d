//! UE-side feedback simulation and solver instance assembly.
//!
//! A round sends the training precoder `W_t`; the UE estimates its
//! effective channel `W_t^H h` (optionally with additive estimation error),
//! reports the best Type-I codeword index and its CQI, and the CQI is
//! optionally quantized. The base station turns a list of such records into
//! a [`CprInstance`].

mod instance;
mod replay;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::codebook::{quantize_cqi, select_pmi, select_pmi_group, QuantizerSpec, Type1Codebook};
use crate::linalg::complex_gaussian;
use crate::precoder::Precoder;
use crate::{CVector, Result, SenseError};

pub use instance::{
    assemble_cpr_instance, assemble_multicarrier_instance, ConstraintId, CprInstance, Grouping,
    Lift, MeasurementBlock, TargetSource,
};
pub use replay::{parse_feedback_log, read_feedback_log, write_feedback_log};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackRecord {
    pub round: usize,
    /// 0-based codeword index.
    pub pmi: usize,
    /// Unquantized CQI; `None` for records replayed from a log.
    pub cqi_raw: Option<f64>,
    pub cqi_index: Option<u32>,
    /// Dequantized CQI, or the raw CQI when no quantizer is configured.
    pub cqi_hat: f64,
    pub carrier: Option<usize>,
    pub group: Option<usize>,
}

/// How the UE estimates its effective channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Estimation {
    Exact,
    /// Additive circular Gaussian error at this effective-CSI SNR (dB).
    SnrDb(f64),
}

fn estimate<R: Rng + ?Sized>(h_eff: CVector, est: Estimation, rng: &mut R) -> CVector {
    match est {
        Estimation::Exact => h_eff,
        Estimation::SnrDb(snr) => {
            let var = h_eff.norm_squared() / (h_eff.len() as f64 * 10f64.powf(snr / 10.0));
            h_eff.map(|x| x + complex_gaussian(rng, var))
        }
    }
}

fn finish(
    round: usize,
    pmi: usize,
    cqi: f64,
    quantizer: Option<&QuantizerSpec>,
    carrier: Option<usize>,
    group: Option<usize>,
) -> Result<FeedbackRecord> {
    let (cqi_index, cqi_hat) = match quantizer {
        Some(spec) => {
            let (i, q) = quantize_cqi(cqi, spec)?;
            (Some(i), q)
        }
        None => (None, cqi),
    };
    Ok(FeedbackRecord {
        round,
        pmi,
        cqi_raw: Some(cqi),
        cqi_index,
        cqi_hat,
        carrier,
        group,
    })
}

/// One flat-fading feedback round.
pub fn simulate_round<R: Rng + ?Sized>(
    h: &CVector,
    precoder: &Precoder,
    codebook: &Type1Codebook,
    est: Estimation,
    quantizer: Option<&QuantizerSpec>,
    round: usize,
    rng: &mut R,
) -> Result<FeedbackRecord> {
    if h.len() != precoder.w.nrows() {
        return Err(SenseError::dims(format!(
            "channel has {} entries, precoder has {} rows",
            h.len(),
            precoder.w.nrows()
        )));
    }
    let h_hat = estimate(precoder.effective(h), est, rng);
    let sel = select_pmi(&h_hat, codebook)?;
    finish(round, sel.pmi, sel.cqi, quantizer, None, None)
}

/// Per-carrier round: carrier `carrier` is observed through its own precoder.
#[allow(clippy::too_many_arguments)]
pub fn simulate_carrier_round<R: Rng + ?Sized>(
    h: &CVector,
    precoder: &Precoder,
    codebook: &Type1Codebook,
    est: Estimation,
    quantizer: Option<&QuantizerSpec>,
    round: usize,
    carrier: usize,
    rng: &mut R,
) -> Result<FeedbackRecord> {
    let mut r = simulate_round(h, precoder, codebook, est, quantizer, round, rng)?;
    r.carrier = Some(carrier);
    Ok(r)
}

/// Group round: one PMI/CQI for a set of carriers, maximising the summed
/// codeword power.
pub fn simulate_group_round<R: Rng + ?Sized>(
    carriers: &[(CVector, &Precoder)],
    codebook: &Type1Codebook,
    est: Estimation,
    quantizer: Option<&QuantizerSpec>,
    round: usize,
    group: usize,
    rng: &mut R,
) -> Result<FeedbackRecord> {
    let h_hats = carriers
        .iter()
        .map(|(h, p)| {
            if h.len() != p.w.nrows() {
                return Err(SenseError::dims("carrier channel and precoder disagree"));
            }
            Ok(estimate(p.effective(h), est, rng))
        })
        .collect::<Result<Vec<_>>>()?;
    let sel = select_pmi_group(&h_hats, codebook)?;
    finish(round, sel.pmi, sel.cqi, quantizer, None, Some(group))
}
