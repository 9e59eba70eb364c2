//! Output formats: the binary field snapshot, the energy time-series CSV,
//! and the run-metadata sidecar.
//!
//! Snapshot layout: 16-byte header (magic "TLNS", u8 dims, u8 dtype byte
//! width = 8 for f64, u16 reserved, two u32 interior node counts with the
//! unused axis written as 0), then little-endian f64 values row-major.
//! CSV rows carry 17 significant digits so write-then-read round-trips
//! bitwise.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::energy::EnergyReport;
use crate::error::{Result, SimError};
use crate::grid::Field;

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"TLNS";
pub const CSV_HEADER: &str = "t,E0,E1,E2,D_p,E_theta,D_theta,Lambda,Fterm,min_alpha";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SimError + '_ {
    move |source| SimError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Write a field in the binary snapshot format.
pub fn write_snapshot(field: &Field, path: &Path) -> Result<()> {
    let grid = field.grid();
    let mut buf = Vec::with_capacity(16 + 8 * field.len());
    buf.extend_from_slice(SNAPSHOT_MAGIC);
    buf.push(grid.dims() as u8);
    buf.push(8u8); // dtype: f64 byte width
    buf.extend_from_slice(&0u16.to_le_bytes());
    buf.extend_from_slice(&(grid.n(0) as u32).to_le_bytes());
    let n1 = if grid.dims() == 2 { grid.n(1) as u32 } else { 0 };
    buf.extend_from_slice(&n1.to_le_bytes());
    for v in field.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf).map_err(io_err(path))
}

/// A snapshot as read back from disk; the grid's physical extents are not
/// stored in the format, only the shape.
#[derive(Clone, Debug, PartialEq)]
pub struct RawSnapshot {
    pub dims: u8,
    pub n: [u32; 2],
    pub values: Vec<f64>,
}

pub fn read_snapshot(path: &Path) -> Result<RawSnapshot> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let malformed = |reason: &str| SimError::MalformedFile {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    if bytes.len() < 16 {
        return Err(malformed("shorter than the 16-byte header"));
    }
    if &bytes[0..4] != SNAPSHOT_MAGIC {
        return Err(malformed("bad magic, expected TLNS"));
    }
    let dims = bytes[4];
    if dims != 1 && dims != 2 {
        return Err(malformed("dims must be 1 or 2"));
    }
    if bytes[5] != 8 {
        return Err(malformed("dtype byte width must be 8 (f64)"));
    }
    let n0 = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    let n1 = u32::from_le_bytes(bytes[12..16].try_into().unwrap());
    let count = n0 as usize * if dims == 2 { n1 as usize } else { 1 };
    if bytes.len() != 16 + 8 * count {
        return Err(malformed("payload size does not match the header shape"));
    }
    let values = bytes[16..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(RawSnapshot {
        dims,
        n: [n0, n1],
        values,
    })
}

fn format_row(r: &EnergyReport) -> String {
    format!(
        "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
        r.t, r.e0, r.e1, r.e2, r.d_p, r.e_theta, r.d_theta, r.lambda, r.f_term, r.min_alpha
    )
}

/// Write the energy time series as CSV with the fixed column order.
pub fn write_timeseries(series: &[EnergyReport], path: &Path) -> Result<()> {
    let mut out = String::with_capacity(64 + 200 * series.len());
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in series {
        out.push_str(&format_row(r));
        out.push('\n');
    }
    fs::write(path, out).map_err(io_err(path))
}

pub fn read_timeseries(path: &Path) -> Result<Vec<EnergyReport>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let malformed = |reason: String| SimError::MalformedFile {
        path: path.to_path_buf(),
        reason,
    };
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        _ => return Err(malformed("missing or wrong CSV header".into())),
    }
    let mut series = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(malformed(format!("row {} has {} columns", idx + 2, fields.len())));
        }
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|e| malformed(format!("row {}: {e}", idx + 2)))
        };
        series.push(EnergyReport {
            t: parse(fields[0])?,
            e0: parse(fields[1])?,
            e1: parse(fields[2])?,
            e2: parse(fields[3])?,
            d_p: parse(fields[4])?,
            e_theta: parse(fields[5])?,
            d_theta: parse(fields[6])?,
            lambda: parse(fields[7])?,
            f_term: parse(fields[8])?,
            min_alpha: parse(fields[9])?,
        });
    }
    Ok(series)
}

/// Run metadata goes next to the data files, never inside them, so data
/// outputs stay byte-deterministic for a given config.
pub fn write_sidecar(path: &Path, entries: &[(&str, String)]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    for (key, value) in entries {
        writeln!(f, "{key} = {value:?}").map_err(io_err(path))?;
    }
    Ok(())
}
