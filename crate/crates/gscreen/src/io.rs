//! Reading and writing designs and correlation matrices.
//!
//! Text designs are CSV with one row per sample and the response in the last column; an optional
//! non-numeric header row and `#` comment lines are skipped. Binary designs are
//! `"GSX1" | n: u64 | p: u64 | X column-major (n·p f64) | Y (n f64)`, all little-endian.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::model::ModelError;

pub const BINARY_MAGIC: &[u8; 4] = b"GSX1";

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("line {line}: cannot parse {field:?} as a number")]
    Parse { line: usize, field: String },
    #[error("line {line}: expected {expected} fields, found {found}")]
    Ragged {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Numeric rows of a CSV source, skipping comments and a leading header.
fn read_rows<R: Read>(reader: R) -> Result<Vec<Vec<f64>>, IoError> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in csv.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(i + 1, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(row) => {
                if let Some(first) = rows.first() {
                    if first.len() != row.len() {
                        return Err(IoError::Ragged {
                            line,
                            expected: first.len(),
                            found: row.len(),
                        });
                    }
                }
                if row.iter().any(|v| !v.is_finite()) {
                    return Err(ModelError::NonFinite("input").into());
                }
                rows.push(row);
            }
            Err(_) if rows.is_empty() && i == 0 => continue,
            Err(_) => {
                let field = record
                    .iter()
                    .find(|f| f.parse::<f64>().is_err())
                    .unwrap_or_default()
                    .to_string();
                return Err(IoError::Parse { line, field });
            }
        }
    }
    Ok(rows)
}

/// Design matrix and response from CSV text.
pub fn read_design_csv<R: Read>(reader: R) -> Result<(DMatrix<f64>, DVector<f64>), IoError> {
    let rows = read_rows(reader)?;
    let n = rows.len();
    let cols = rows.first().map_or(0, Vec::len);
    if n == 0 || cols < 2 {
        return Err(IoError::Format(
            "design CSV needs at least one row with a predictor and a response column".into(),
        ));
    }
    let p = cols - 1;
    let x = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
    let y = DVector::from_fn(n, |i, _| rows[i][p]);
    Ok((x, y))
}

pub fn read_design_binary<R: Read>(mut reader: R) -> Result<(DMatrix<f64>, DVector<f64>), IoError> {
    let mut magic = [0u8; 4];
    reader.read_exact(&mut magic)?;
    if &magic != BINARY_MAGIC {
        return Err(IoError::Format("missing GSX1 magic".into()));
    }
    let mut word = [0u8; 8];
    reader.read_exact(&mut word)?;
    let n = u64::from_le_bytes(word) as usize;
    reader.read_exact(&mut word)?;
    let p = u64::from_le_bytes(word) as usize;
    let total = n
        .checked_mul(p)
        .and_then(|np| np.checked_add(n))
        .ok_or_else(|| IoError::Format("dimensions overflow".into()))?;
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    if bytes.len() != total * 8 {
        return Err(IoError::Format(format!(
            "expected {} payload bytes for n = {n}, p = {p}, found {}",
            total * 8,
            bytes.len()
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::NonFinite("input").into());
    }
    let x = DMatrix::from_column_slice(n, p, &values[..n * p]);
    let y = DVector::from_column_slice(&values[n * p..]);
    Ok((x, y))
}

pub fn write_design_binary<W: Write>(
    mut writer: W,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
) -> Result<(), IoError> {
    if x.nrows() != y.len() {
        return Err(ModelError::DimensionMismatch {
            rows: x.nrows(),
            len: y.len(),
        }
        .into());
    }
    writer.write_all(BINARY_MAGIC)?;
    writer.write_all(&(x.nrows() as u64).to_le_bytes())?;
    writer.write_all(&(x.ncols() as u64).to_le_bytes())?;
    for v in x.iter().chain(y.iter()) {
        writer.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Reads a design from `path`, choosing the binary reader when the file starts with the magic.
pub fn read_design_file(path: &Path) -> Result<(DMatrix<f64>, DVector<f64>), IoError> {
    let bytes = std::fs::read(path)?;
    if bytes.starts_with(BINARY_MAGIC) {
        read_design_binary(bytes.as_slice())
    } else {
        read_design_csv(bytes.as_slice())
    }
}

/// Square matrix from CSV text (symmetry is the caller's concern).
pub fn read_matrix_csv<R: Read>(reader: R) -> Result<DMatrix<f64>, IoError> {
    let rows = read_rows(reader)?;
    let p = rows.len();
    if p == 0 || rows[0].len() != p {
        return Err(ModelError::NotSquare {
            rows: p,
            cols: rows.first().map_or(0, Vec::len),
        }
        .into());
    }
    Ok(DMatrix::from_fn(p, p, |i, j| rows[i][j]))
}

pub fn write_matrix_csv<W: Write>(writer: W, m: &DMatrix<f64>) -> Result<(), IoError> {
    let mut csv = csv::Writer::from_writer(writer);
    for i in 0..m.nrows() {
        csv.write_record(m.row(i).iter().map(|v| v.to_string()))?;
    }
    csv.flush()?;
    Ok(())
}
