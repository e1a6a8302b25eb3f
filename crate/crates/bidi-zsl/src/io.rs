//! Matrix and label files.
//!
//! Binary matrices (`.bin`): the ASCII magic `BDLM`, a little-endian `u32`
//! version (1), `u64` rows, `u64` cols, then `rows·cols` little-endian
//! `f64` values in column-major order.
//!
//! CSV matrices: one matrix row per line, comma separated, no header.
//!
//! Labels: two-column CSV `instance_id,label`, optional header line.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use bidi_zsl_core::{Label, RealMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const MAGIC: &[u8; 4] = b"BDLM";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixFormat {
    Csv,
    Bin,
}

impl MatrixFormat {
    /// `.bin` is binary, anything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("bin") => MatrixFormat::Bin,
            _ => MatrixFormat::Csv,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn load_matrix(path: &Path, format: MatrixFormat) -> Result<RealMatrix> {
    match format {
        MatrixFormat::Bin => {
            let mut bytes = Vec::new();
            File::open(path)
                .and_then(|f| BufReader::new(f).read_to_end(&mut bytes))
                .map_err(io_err(path))?;
            decode_bin(&bytes).map_err(|m| HarnessError::parse(path, 0, m))
        }
        MatrixFormat::Csv => {
            let file = File::open(path).map_err(io_err(path))?;
            read_csv_matrix(BufReader::new(file), path)
        }
    }
}

pub fn save_matrix(m: &RealMatrix, path: &Path, format: MatrixFormat) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    match format {
        MatrixFormat::Bin => w.write_all(&encode_bin(m)),
        MatrixFormat::Csv => write_csv_matrix(m, &mut w),
    }
    .and_then(|_| w.flush())
    .map_err(io_err(path))
}

/// Format inferred from the extension.
pub fn load_matrix_auto(path: &Path) -> Result<RealMatrix> {
    load_matrix(path, MatrixFormat::from_path(path))
}

pub fn save_matrix_auto(m: &RealMatrix, path: &Path) -> Result<()> {
    save_matrix(m, path, MatrixFormat::from_path(path))
}

pub fn encode_bin(m: &RealMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * m.as_slice().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_bin(bytes: &[u8]) -> std::result::Result<RealMatrix, String> {
    if bytes.len() < HEADER_LEN {
        return Err(format!("truncated header ({} bytes)", bytes.len()));
    }
    if &bytes[..4] != MAGIC {
        return Err("bad magic, expected BDLM".into());
    }
    let word = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let (rows, cols) = (word(8), word(16));
    let count = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| format!("dimensions {rows}x{cols} overflow"))?;
    let body = &bytes[HEADER_LEN..];
    if body.len() as u64 != count {
        return Err(format!(
            "expected {count} data bytes for {rows}x{cols}, found {}",
            body.len()
        ));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    RealMatrix::from_col_major(rows as usize, cols as usize, data).map_err(|e| e.to_string())
}

fn read_csv_matrix(reader: impl Read, path: &Path) -> Result<RealMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            HarnessError::parse(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let row = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| HarnessError::parse(path, line, format!("not a number: {f:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(HarnessError::parse(
                    path,
                    line,
                    format!("ragged row: {} fields, expected {}", row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(HarnessError::parse(path, 0, "empty matrix"));
    }
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    RealMatrix::from_rows(&refs).map_err(|e| HarnessError::parse(path, 0, e.to_string()))
}

fn write_csv_matrix(m: &RealMatrix, w: &mut impl Write) -> std::io::Result<()> {
    for i in 0..m.rows() {
        let line: Vec<String> = m.row(i).iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

/// Parses a CSV matrix from a string; `origin` names it in errors.
pub fn parse_csv_matrix(text: &str, origin: &str) -> Result<RealMatrix> {
    read_csv_matrix(text.as_bytes(), Path::new(origin))
}

/// Labels ordered by instance id. Ids must be exactly `0..n` in some order.
pub fn load_labels(path: &Path) -> Result<Vec<Label>> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));
    let mut pairs: Vec<(u64, Label)> = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            HarnessError::parse(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 2 {
            return Err(HarnessError::parse(path, line, format!("{} fields, expected 2", rec.len())));
        }
        let (id, label) = (rec[0].parse::<u64>(), rec[1].parse::<Label>());
        match (id, label) {
            (Ok(id), Ok(label)) => pairs.push((id, label)),
            _ if idx == 0 => continue, // header
            _ => {
                return Err(HarnessError::parse(
                    path,
                    line,
                    format!("expected instance_id,label, found {:?},{:?}", &rec[0], &rec[1]),
                ))
            }
        }
    }
    pairs.sort_unstable_by_key(|p| p.0);
    for (expected, &(id, _)) in pairs.iter().enumerate() {
        if id != expected as u64 {
            return Err(HarnessError::parse(
                path,
                0,
                format!("instance ids must be 0..{}; missing or repeated id near {id}", pairs.len()),
            ));
        }
    }
    Ok(pairs.into_iter().map(|p| p.1).collect())
}

pub fn save_labels(labels: &[Label], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    (|| {
        writeln!(w, "instance_id,label")?;
        for (i, l) in labels.iter().enumerate() {
            writeln!(w, "{i},{l}")?;
        }
        w.flush()
    })()
    .map_err(io_err(path))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(io_err(path))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| HarnessError::parse(path, e.line() as u64, e.to_string()))
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(io_err(path))
}
