//! Evaluation rows written to `metrics.csv`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

pub const METRICS_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub schema_version: u32,
    pub method: String,
    pub seed: u64,
    pub generation: usize,
    pub protocol: String,
    pub win_rate: f64,
    pub mean_return: f64,
    pub ci_half_width: f64,
    pub episodes: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("row {row}: non-finite {field}")]
    NonFinite { row: usize, field: &'static str },
    #[error("row {row}: schema version {found}, expected {METRICS_SCHEMA_VERSION}")]
    Schema { row: usize, found: u32 },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn validate(rows: &[MetricRecord]) -> Result<(), MetricsError> {
    for (row, r) in rows.iter().enumerate() {
        if r.schema_version != METRICS_SCHEMA_VERSION {
            return Err(MetricsError::Schema { row, found: r.schema_version });
        }
        for (field, v) in [("win_rate", r.win_rate), ("mean_return", r.mean_return), ("ci_half_width", r.ci_half_width)] {
            if !v.is_finite() {
                return Err(MetricsError::NonFinite { row, field });
            }
        }
    }
    Ok(())
}

pub fn write_metrics_csv<W: Write>(rows: &[MetricRecord], writer: W) -> Result<(), MetricsError> {
    validate(rows)?;
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_metrics_csv<R: Read>(reader: R) -> Result<Vec<MetricRecord>, MetricsError> {
    let rows = csv::Reader::from_reader(reader)
        .deserialize()
        .collect::<Result<Vec<MetricRecord>, _>>()?;
    validate(&rows)?;
    Ok(rows)
}
