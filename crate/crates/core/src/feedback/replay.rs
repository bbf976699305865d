//! Feedback-log replay: CSV with columns `round,carrier,group,pmi,cqi_index`.
//!
//! `carrier` and `group` may be empty. CQI values are recovered by
//! dequantizing `cqi_index` with the configured quantizer.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::FeedbackRecord;
use crate::codebook::{dequantize_cqi, QuantizerSpec};
use crate::{Result, SenseError};

const COLUMNS: [&str; 5] = ["round", "carrier", "group", "pmi", "cqi_index"];

#[derive(Debug, Serialize, Deserialize)]
struct LogRow {
    round: usize,
    carrier: Option<usize>,
    group: Option<usize>,
    pmi: usize,
    cqi_index: u32,
}

pub fn read_feedback_log(path: impl AsRef<Path>, quantizer: &QuantizerSpec) -> Result<Vec<FeedbackRecord>> {
    parse_feedback_log(std::fs::File::open(path)?, quantizer)
}

pub fn parse_feedback_log<R: Read>(input: R, quantizer: &QuantizerSpec) -> Result<Vec<FeedbackRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers()?.clone();
    for col in COLUMNS {
        if !headers.iter().any(|h| h == col) {
            return Err(SenseError::MissingColumn(col.into()));
        }
    }
    let levels = quantizer.levels();
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<LogRow>().enumerate() {
        // Header is line 1.
        let line = i + 2;
        let row = row.map_err(|e| SenseError::parse(line, e.to_string()))?;
        if row.cqi_index >= levels {
            return Err(SenseError::parse(
                line,
                format!("cqi_index {} exceeds {} levels", row.cqi_index, levels),
            ));
        }
        out.push(FeedbackRecord {
            round: row.round,
            pmi: row.pmi,
            cqi_raw: None,
            cqi_index: Some(row.cqi_index),
            cqi_hat: dequantize_cqi(row.cqi_index, quantizer),
            carrier: row.carrier,
            group: row.group,
        });
    }
    Ok(out)
}

/// Writes records that carry a quantized CQI index.
pub fn write_feedback_log<W: Write>(records: &[FeedbackRecord], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(COLUMNS)?;
    for r in records {
        let idx = r
            .cqi_index
            .ok_or_else(|| SenseError::invalid(format!("round {} has no CQI index", r.round)))?;
        w.serialize(LogRow {
            round: r.round,
            carrier: r.carrier,
            group: r.group,
            pmi: r.pmi,
            cqi_index: idx,
        })?;
    }
    w.flush()?;
    Ok(())
}
