//! Result rows and their CSV form.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const CSV_HEADER: &str = "experiment,algorithm,sweep,symbol,ber,sinr_db,ci,seed";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub experiment: String,
    pub algorithm: String,
    /// Value of the swept variable (SNR in dB or normalized Doppler).
    pub sweep: f64,
    pub symbol: usize,
    pub ber: Option<f64>,
    pub sinr_db: Option<f64>,
    /// 95% confidence half-width of whichever metric is present.
    pub ci: f64,
    pub seed: u64,
}

/// Orders by algorithm, then sweep value, then symbol.
pub fn sort_records(records: &mut [MetricsRecord]) {
    records.sort_by(|a, b| {
        a.algorithm
            .cmp(&b.algorithm)
            .then(a.sweep.total_cmp(&b.sweep))
            .then(a.symbol.cmp(&b.symbol))
    });
}

pub fn write_csv<W: Write>(records: &[MetricsRecord], out: W) -> Result<()> {
    let mut sorted = records.to_vec();
    sort_records(&mut sorted);
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    for r in &sorted {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(records: &[MetricsRecord], path: &Path) -> Result<()> {
    write_csv(records, File::create(path)?)
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<MetricsRecord>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|row| row.map_err(Into::into)).collect()
}

/// Normalized autocorrelation of a generated channel at one lag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelStatRecord {
    pub fading_rate: f64,
    pub lag: usize,
    pub empirical: f64,
    pub theoretical: f64,
    pub seed: u64,
}

pub fn write_channel_stats<W: Write>(records: &[ChannelStatRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
