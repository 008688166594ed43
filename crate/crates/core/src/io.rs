//! File formats: versioned CSV tables, a little-endian binary grid and its JSON sidecar.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::wigner::PairingStat;

pub const SCHEMA_VERSION: &str = "v1";
pub const GRID_MAGIC: &[u8; 8] = b"TCGRID\0\0";
pub const GRID_VERSION: u32 = 1;

/// Exact-round-trip formatting for floats.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `# schema=<name>/v1`, a header row and the rows.
pub fn write_csv(path: &Path, schema: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut file = File::create(path)?;
    writeln!(file, "# schema={schema}/{SCHEMA_VERSION}")?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::Format(format!("{schema}: row has {} fields, header {}", row.len(), header.len())));
        }
        w.write_record(row.iter().map(|v| fmt_f64(*v)))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let i = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Format(format!("missing column {name}")))?;
        Ok(self.rows.iter().map(|r| r[i]).collect())
    }
}

/// Reads a table written by [`write_csv`]. A missing schema line is tolerated
/// only when `require_schema` is false; a foreign name or version never is.
pub fn read_csv(path: &Path, schema: &str, require_schema: bool) -> Result<Table> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let mut body = String::new();
    match first.trim().strip_prefix("# schema=") {
        Some(tag) => {
            let expected = format!("{schema}/{SCHEMA_VERSION}");
            if tag != expected {
                return Err(Error::Format(format!("expected schema {expected}, found {tag}")));
            }
        }
        None if require_schema => return Err(Error::Format(format!("{}: no schema line", path.display()))),
        None => body.push_str(&first),
    }
    reader.read_to_string(&mut body)?;
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(body.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| Error::Format(format!("not a number: {f:?}"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}

/// A grid as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFile {
    pub rows: usize,
    pub cols: usize,
    pub eps: f64,
    pub t: f64,
    pub values: Vec<Complex64>,
}

/// Header (magic, version, rows, cols, ε, t) followed by row-major complex doubles.
pub fn write_grid(path: &Path, rows: usize, cols: usize, eps: f64, t: f64, payload: &[u8]) -> Result<()> {
    if payload.len() != rows * cols * 16 {
        return Err(Error::Format(format!("payload holds {} bytes for a {rows}x{cols} grid", payload.len())));
    }
    let mut f = File::create(path)?;
    f.write_all(GRID_MAGIC)?;
    f.write_all(&GRID_VERSION.to_le_bytes())?;
    f.write_all(&(rows as u64).to_le_bytes())?;
    f.write_all(&(cols as u64).to_le_bytes())?;
    f.write_all(&eps.to_le_bytes())?;
    f.write_all(&t.to_le_bytes())?;
    f.write_all(payload)?;
    Ok(())
}

/// Real values stored with zero imaginary parts.
pub fn real_payload(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes().into_iter().chain(0f64.to_le_bytes())).collect()
}

pub fn read_grid(path: &Path) -> Result<GridFile> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 44 || &bytes[..8] != GRID_MAGIC {
        return Err(Error::Format(format!("{}: not a grid file", path.display())));
    }
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let u64_at = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
    let f64_at = |i: usize| f64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
    let version = u32_at(8);
    if version != GRID_VERSION {
        return Err(Error::Format(format!("grid version {version} is not supported")));
    }
    let (rows, cols) = (u64_at(12) as usize, u64_at(20) as usize);
    let (eps, t) = (f64_at(28), f64_at(36));
    let payload = &bytes[44..];
    if payload.len() != rows * cols * 16 {
        return Err(Error::Format("grid payload length does not match its dimensions".into()));
    }
    let values = payload
        .chunks_exact(16)
        .map(|c| Complex64::new(f64::from_le_bytes(c[..8].try_into().unwrap()), f64::from_le_bytes(c[8..].try_into().unwrap())))
        .collect();
    Ok(GridFile { rows, cols, eps, t, values })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Axis {
    pub fn of(name: &str, values: &[f64]) -> Self {
        Axis {
            name: name.into(),
            min: values.first().copied().unwrap_or(0.0),
            max: values.last().copied().unwrap_or(0.0),
            count: values.len(),
        }
    }
}

/// Metadata written next to every binary grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSidecar {
    pub schema: String,
    /// `wigner_xi`, `wigner_x`, `wigner_stderr` or `kinetic`.
    pub kind: String,
    pub data_file: String,
    pub eps: f64,
    pub t: f64,
    pub rows: Axis,
    pub cols: Axis,
    pub realizations: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub atom_weight: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub atom_position: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pairings: Vec<PairingStat>,
}

impl GridSidecar {
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = File::create(path)?;
        serde_json::to_writer_pretty(&mut f, self)?;
        writeln!(f)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let s: GridSidecar = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        if s.schema != format!("grid/{SCHEMA_VERSION}") {
            return Err(Error::Format(format!("unknown sidecar schema {}", s.schema)));
        }
        Ok(s)
    }
}
