//! CQI quantization.
//!
//! The range `[q_min, q_max]` is always given in linear CQI units; the dB
//! scheme converts both the value and the range with `10·log10` and places
//! uniform bins in that domain. Reconstruction is the bin midpoint mapped
//! back to linear units. Out-of-range values clamp to the end bins, and
//! `q = 0` under the dB scheme clamps to bin 0.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Result, SenseError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuantScheme {
    Linear,
    Db,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizerSpec {
    pub scheme: QuantScheme,
    pub bits: u32,
    pub q_min: f64,
    pub q_max: f64,
}

impl QuantizerSpec {
    /// 4-bit quantizer over the CQI range observed for unit-norm channels.
    pub fn four_bit(scheme: QuantScheme) -> Self {
        QuantizerSpec {
            scheme,
            bits: 4,
            q_min: 3.35,
            q_max: 28.89,
        }
    }

    pub fn new(scheme: QuantScheme, bits: u32, q_min: f64, q_max: f64) -> Result<Self> {
        let s = QuantizerSpec {
            scheme,
            bits,
            q_min,
            q_max,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bits == 0 || self.bits > 24 {
            return Err(SenseError::invalid("quantizer bits must be in 1..=24"));
        }
        if !(self.q_min < self.q_max) || !self.q_min.is_finite() || !self.q_max.is_finite() {
            return Err(SenseError::invalid("quantizer range needs finite q_min < q_max"));
        }
        if self.scheme == QuantScheme::Db && self.q_min <= 0.0 {
            return Err(SenseError::invalid("dB quantizer needs q_min > 0"));
        }
        Ok(())
    }

    pub fn levels(&self) -> u32 {
        1 << self.bits
    }

    fn domain_range(&self) -> (f64, f64) {
        match self.scheme {
            QuantScheme::Linear => (self.q_min, self.q_max),
            QuantScheme::Db => (to_db(self.q_min), to_db(self.q_max)),
        }
    }

    /// Bin width in the quantizer's native domain (linear units or dB).
    pub fn bin_width(&self) -> f64 {
        let (lo, hi) = self.domain_range();
        (hi - lo) / self.levels() as f64
    }
}

fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Quantizes a CQI value; returns the bin index and its reconstruction.
pub fn quantize_cqi(q: f64, spec: &QuantizerSpec) -> Result<(u32, f64)> {
    if !(q >= 0.0) || !q.is_finite() {
        return Err(SenseError::invalid(format!("CQI must be finite and nonnegative, got {q}")));
    }
    let (lo, _) = spec.domain_range();
    let x = match spec.scheme {
        QuantScheme::Linear => q,
        QuantScheme::Db if q == 0.0 => lo,
        QuantScheme::Db => to_db(q),
    };
    let raw = ((x - lo) / spec.bin_width()).floor();
    let index = raw.clamp(0.0, (spec.levels() - 1) as f64) as u32;
    Ok((index, dequantize_cqi(index, spec)))
}

/// Reconstruction value of bin `index`.
pub fn dequantize_cqi(index: u32, spec: &QuantizerSpec) -> f64 {
    let (lo, _) = spec.domain_range();
    let mid = lo + (index as f64 + 0.5) * spec.bin_width();
    match spec.scheme {
        QuantScheme::Linear => mid,
        QuantScheme::Db => 10f64.powf(mid / 10.0),
    }
}

impl fmt::Display for QuantizerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let scheme = match self.scheme {
            QuantScheme::Linear => "linear",
            QuantScheme::Db => "db",
        };
        write!(f, "{scheme}:{}:{}:{}", self.bits, self.q_min, self.q_max)
    }
}

impl FromStr for QuantizerSpec {
    type Err = SenseError;

    /// `scheme:bits:q_min:q_max`, e.g. `db:4:3.35:28.89`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        if parts.len() != 4 {
            return Err(SenseError::Config(format!(
                "quantizer `{s}` should look like `db:4:3.35:28.89`"
            )));
        }
        let scheme = match parts[0].to_ascii_lowercase().as_str() {
            "linear" | "lin" => QuantScheme::Linear,
            "db" => QuantScheme::Db,
            other => return Err(SenseError::Config(format!("unknown quantizer scheme `{other}`"))),
        };
        let num = |v: &str| -> Result<f64> {
            v.parse()
                .map_err(|_| SenseError::Config(format!("invalid number `{v}` in quantizer `{s}`")))
        };
        let bits = parts[1]
            .parse()
            .map_err(|_| SenseError::Config(format!("invalid bit count in quantizer `{s}`")))?;
        QuantizerSpec::new(scheme, bits, num(parts[2])?, num(parts[3])?)
            .map_err(|e| SenseError::Config(e.to_string()))
    }
}
