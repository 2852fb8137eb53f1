//! Trace, summary and sweep files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::run::TraceRecord;
use super::sweep::{SweepRow, SweepTable, SWEEP_METRICS};
use crate::error::{Error, Result};

pub fn write_trace<W: Write>(writer: W, trace: &[TraceRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in trace {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

pub fn read_trace<R: std::io::Read>(reader: R) -> Result<Vec<TraceRecord>> {
    let mut r = csv::Reader::from_reader(reader);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

pub fn write_trace_csv(path: impl AsRef<Path>, trace: &[TraceRecord]) -> Result<()> {
    write_trace(create(path.as_ref())?, trace)
}

pub fn read_trace_csv(path: impl AsRef<Path>) -> Result<Vec<TraceRecord>> {
    let path = path.as_ref();
    read_trace(File::open(path).map_err(|e| Error::io(path, e))?)
}

pub fn write_json(path: impl AsRef<Path>, value: &impl Serialize) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn row_fields(row: &SweepRow) -> Vec<String> {
    let mut fields: Vec<String> = row.params.iter().map(|(_, v)| v.to_string()).collect();
    fields.extend([
        row.seed.map(|s| s.to_string()).unwrap_or_else(|| "mean".into()),
        row.mean_delay.to_string(),
        opt(row.mean_delay_key),
        opt(row.mean_delay_nonkey),
        row.total_regret.to_string(),
        row.incumbent_regret.to_string(),
        opt(row.mape),
        opt(row.adaptation_frames),
        opt(row.adapted),
    ]);
    fields
}

/// Per-seed rows followed by one `seed = mean` row per grid point.
pub fn write_sweep<W: Write>(writer: W, table: &SweepTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let header: Vec<&str> = table.params.iter().map(|p| p.name()).chain(SWEEP_METRICS).collect();
    w.write_record(&header)?;
    for row in table.rows.iter().chain(&table.means) {
        w.write_record(row_fields(row))?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

pub fn write_sweep_csv(path: impl AsRef<Path>, table: &SweepTable) -> Result<()> {
    write_sweep(create(path.as_ref())?, table)
}
