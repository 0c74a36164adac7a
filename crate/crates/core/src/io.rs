//! File formats.
//!
//! * Sweep CSV: header `<x_label>,<column>...`, one row per grid point, every
//!   number written with 17 significant digits.
//! * Sweep binary: `SWR1`, u64 rows, u64 columns (x included), then per column
//!   a u32 byte length and UTF-8 name, then row-major f64 values.
//! * Record CSV: a `# sample_rate_khz=<f>,delta_khz=<f>` comment line, then
//!   `time_ms,intensity` rows.
//! * Record binary: `BNR1`, f64 sample rate (kHz), f64 δ (kHz), u64 count,
//!   then the samples as f64.
//!
//! All binary fields are little-endian.

use std::io::{Read, Write};

use crate::analyzer::Histogram;
use crate::beatnote::{BeatnoteRecord, DetectionConfig};
use crate::error::{Error, Result};
use crate::sweeps::SweepResult;

const SWEEP_MAGIC: &[u8; 4] = b"SWR1";
const RECORD_MAGIC: &[u8; 4] = b"BNR1";

/// Fixed 17-significant-digit formatting; parses back losslessly.
pub fn format_number(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format(format!("{other:?}")),
    }
}

pub fn write_sweep_csv<W: Write>(result: &SweepResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![result.x_label.as_str()];
    header.extend(result.columns.iter().map(|c| c.name.as_str()));
    w.write_record(&header).map_err(csv_err)?;
    for (k, x) in result.x.iter().enumerate() {
        let mut row = vec![format_number(*x)];
        row.extend(result.columns.iter().map(|c| format_number(c.values[k])));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// A numeric CSV table: header names and rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.headers.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }
}

pub fn read_table<R: Read>(input: R) -> Result<Table> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = r
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_string)
        .collect::<Vec<_>>();
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let row = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::Format(format!("row {}: `{f}` is not a number", line + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(Table { headers, rows })
}

pub fn write_sweep_json<W: Write>(result: &SweepResult, out: W) -> Result<()> {
    serde_json::to_writer_pretty(out, &result.metadata).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_sweep_binary<W: Write>(result: &SweepResult, mut out: W) -> Result<()> {
    let names: Vec<&str> = std::iter::once(result.x_label.as_str())
        .chain(result.columns.iter().map(|c| c.name.as_str()))
        .collect();
    out.write_all(SWEEP_MAGIC)?;
    out.write_all(&(result.x.len() as u64).to_le_bytes())?;
    out.write_all(&(names.len() as u64).to_le_bytes())?;
    for name in &names {
        out.write_all(&(name.len() as u32).to_le_bytes())?;
        out.write_all(name.as_bytes())?;
    }
    for (k, x) in result.x.iter().enumerate() {
        out.write_all(&x.to_le_bytes())?;
        for c in &result.columns {
            out.write_all(&c.values[k].to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_exact<const N: usize>(input: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    input
        .read_exact(&mut buf)
        .map_err(|e| Error::Format(format!("truncated binary data: {e}")))?;
    Ok(buf)
}

pub fn read_sweep_binary<R: Read>(mut input: R) -> Result<Table> {
    if &read_exact::<4>(&mut input)? != SWEEP_MAGIC {
        return Err(Error::Format("not a sweep binary (bad magic)".into()));
    }
    let rows = u64::from_le_bytes(read_exact(&mut input)?) as usize;
    let cols = u64::from_le_bytes(read_exact(&mut input)?) as usize;
    let mut headers = Vec::with_capacity(cols);
    for _ in 0..cols {
        let len = u32::from_le_bytes(read_exact(&mut input)?) as usize;
        let mut name = vec![0u8; len];
        input
            .read_exact(&mut name)
            .map_err(|e| Error::Format(format!("truncated column name: {e}")))?;
        headers.push(String::from_utf8(name).map_err(|e| Error::Format(e.to_string()))?);
    }
    let mut data = Vec::with_capacity(rows);
    for _ in 0..rows {
        let row = (0..cols)
            .map(|_| Ok(f64::from_le_bytes(read_exact(&mut input)?)))
            .collect::<Result<Vec<_>>>()?;
        data.push(row);
    }
    Ok(Table {
        headers,
        rows: data,
    })
}

pub fn write_record_csv<W: Write>(rec: &BeatnoteRecord, mut out: W) -> Result<()> {
    writeln!(
        out,
        "# sample_rate_khz={},delta_khz={}",
        format_number(rec.sample_rate),
        format_number(rec.delta)
    )?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time_ms", "intensity"]).map_err(csv_err)?;
    for (t, v) in rec.times().zip(&rec.samples) {
        w.write_record([format_number(t), format_number(*v)])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Detection settings of an ingested record; only the sampling is known.
fn ingested_config(sample_rate: f64, n: usize, residual_pump_intensity: f64) -> DetectionConfig {
    DetectionConfig {
        sample_rate,
        n_samples: n,
        noise_sigma: 0.0,
        rng_seed: 0,
        residual_pump_intensity,
    }
}

/// Reads a record CSV. `residual_pump_intensity` is not stored in the file
/// and is supplied by the caller.
pub fn read_record_csv<R: Read>(
    mut input: R,
    residual_pump_intensity: f64,
) -> Result<BeatnoteRecord> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let meta = text
        .lines()
        .find_map(|l| l.trim().strip_prefix('#'))
        .ok_or_else(|| Error::Format("record CSV lacks the `# sample_rate_khz=..` line".into()))?;
    let mut sample_rate = None;
    let mut delta = None;
    for part in meta.split(',') {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("bad metadata field `{part}`")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::Format(format!("bad metadata value `{v}`")))?;
        match k.trim() {
            "sample_rate_khz" => sample_rate = Some(v),
            "delta_khz" => delta = Some(v),
            _ => {}
        }
    }
    let (Some(sample_rate), Some(delta)) = (sample_rate, delta) else {
        return Err(Error::Format(
            "record CSV metadata needs sample_rate_khz and delta_khz".into(),
        ));
    };
    let table = read_table(text.as_bytes())?;
    let samples = table
        .column("intensity")
        .ok_or_else(|| Error::Format("record CSV lacks an `intensity` column".into()))?;
    Ok(BeatnoteRecord {
        config_echo: ingested_config(sample_rate, samples.len(), residual_pump_intensity),
        samples,
        sample_rate,
        delta,
    })
}

pub fn write_record_binary<W: Write>(rec: &BeatnoteRecord, mut out: W) -> Result<()> {
    out.write_all(RECORD_MAGIC)?;
    out.write_all(&rec.sample_rate.to_le_bytes())?;
    out.write_all(&rec.delta.to_le_bytes())?;
    out.write_all(&(rec.samples.len() as u64).to_le_bytes())?;
    for v in &rec.samples {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_record_binary<R: Read>(
    mut input: R,
    residual_pump_intensity: f64,
) -> Result<BeatnoteRecord> {
    if &read_exact::<4>(&mut input)? != RECORD_MAGIC {
        return Err(Error::Format("not a beatnote record (bad magic)".into()));
    }
    let sample_rate = f64::from_le_bytes(read_exact(&mut input)?);
    let delta = f64::from_le_bytes(read_exact(&mut input)?);
    let n = u64::from_le_bytes(read_exact(&mut input)?) as usize;
    let samples = (0..n)
        .map(|_| Ok(f64::from_le_bytes(read_exact(&mut input)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(BeatnoteRecord {
        config_echo: ingested_config(sample_rate, n, residual_pump_intensity),
        samples,
        sample_rate,
        delta,
    })
}

pub fn write_histogram_csv<W: Write>(h: &Histogram, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bin_lo", "bin_hi", "count"])
        .map_err(csv_err)?;
    for (k, c) in h.counts.iter().enumerate() {
        w.write_record([
            format_number(h.edges[k]),
            format_number(h.edges[k + 1]),
            c.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
