use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One line of a metrics CSV. Unmeasured values are written as empty fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub decoder: String,
    #[serde(rename = "L")]
    pub l: usize,
    pub p: f64,
    pub p_train: Option<f64>,
    pub samples: usize,
    pub accuracy: f64,
    /// Mean cross-entropy of the true class, for decoders with distributions.
    pub loss: Option<f64>,
    /// Seconds.
    pub wall_time_per_decode: Option<f64>,
}

pub(crate) fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

/// Header plus one record per row, LF line endings.
pub fn write_metrics<W: Write>(w: W, rows: &[MetricsRow]) -> Result<()> {
    let mut out = csv_writer(w);
    if rows.is_empty() {
        out.write_record([
            "decoder",
            "L",
            "p",
            "p_train",
            "samples",
            "accuracy",
            "loss",
            "wall_time_per_decode",
        ])?;
    }
    for row in rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_metrics<R: Read>(r: R) -> Result<Vec<MetricsRow>> {
    let mut rows = Vec::new();
    for row in csv::Reader::from_reader(r).deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}
