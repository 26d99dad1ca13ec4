//! CSV input and output.
//!
//! Dialect: comma separated, UTF-8, `.` decimal point. Data tables may carry
//! a header row, detected by its first record failing to parse as numbers;
//! square matrices are header-free. Floats are written with 17 significant
//! digits so that they read back bit-exactly.

use nalgebra::DMatrix;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::kernel::GramMatrix;
use crate::rke::{Dissimilarity, DissimilaritySet};

/// A numeric table with optional column names.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Option<Vec<String>>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn ncols(&self) -> usize {
        self.rows.first().map_or_else(|| self.header.as_ref().map_or(0, Vec::len), Vec::len)
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    /// Header names, or `x0, x1, …` when there is no header.
    pub fn column_names(&self) -> Vec<String> {
        match &self.header {
            Some(h) => h.clone(),
            None => (0..self.ncols()).map(|j| format!("x{j}")).collect(),
        }
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    /// The given columns of every row.
    pub fn select(&self, columns: &[usize]) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| columns.iter().map(|&j| r[j]).collect()).collect()
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.nrows(), self.ncols(), |i, j| self.rows[i][j])
    }
}

fn path_string(path: &Path) -> String {
    path.display().to_string()
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path_string(path),
        line,
        message: message.into(),
    }
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path_string(path),
        source,
    }
}

fn parse_field(field: &str) -> Option<f64> {
    field.trim().parse::<f64>().ok()
}

fn read(path: &Path, allow_header: bool) -> Result<Table> {
    let bytes = fs::read(path).map_err(|e| io_error(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(bytes.as_slice());
    let mut header = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(k + 1, |p| p.line() as usize);
            parse_error(path, line, e.to_string())
        })?;
        let line = record.position().map_or(k + 1, |p| p.line() as usize);
        if record.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        let parsed: Vec<Option<f64>> = record.iter().map(parse_field).collect();
        if k == 0 && allow_header && parsed.iter().any(Option::is_none) {
            let names: Vec<String> = record.iter().map(|f| f.trim().to_string()).collect();
            width = Some(names.len());
            header = Some(names);
            continue;
        }
        let expected = *width.get_or_insert(parsed.len());
        if parsed.len() != expected {
            return Err(parse_error(
                path,
                line,
                format!("expected {expected} fields, found {}", parsed.len()),
            ));
        }
        let mut row = Vec::with_capacity(parsed.len());
        for (j, (v, raw)) in parsed.into_iter().zip(record.iter()).enumerate() {
            match v {
                Some(v) if v.is_finite() => row.push(v),
                _ => {
                    return Err(parse_error(
                        path,
                        line,
                        format!("field {} is not a finite number: {:?}", j + 1, raw.trim()),
                    ))
                }
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_error(path, 1, "no data rows"));
    }
    Ok(Table { header, rows })
}

/// A data table, with the header row detected automatically.
pub fn read_table(path: &Path) -> Result<Table> {
    read(path, true)
}

/// A header-free numeric matrix.
pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    Ok(read(path, false)?.to_matrix())
}

/// A header-free square matrix, symmetrized.
pub fn read_gram(path: &Path) -> Result<GramMatrix> {
    let m = read_matrix(path)?;
    if !m.is_square() {
        return Err(parse_error(
            path,
            1,
            format!("expected a square matrix, found {} x {}", m.nrows(), m.ncols()),
        ));
    }
    GramMatrix::from_matrix(m)
}

/// Dissimilarities as three columns `i,j,d` with 0-based indices.
pub fn read_dissimilarities(path: &Path) -> Result<DissimilaritySet> {
    let table = read_table(path)?;
    if table.ncols() != 3 {
        return Err(parse_error(
            path,
            1,
            format!("expected 3 columns i,j,d, found {}", table.ncols()),
        ));
    }
    let offset = usize::from(table.header.is_some()) + 1;
    let index = |v: f64, line: usize| -> Result<usize> {
        if v >= 0.0 && v.fract() == 0.0 && v < u32::MAX as f64 {
            Ok(v as usize)
        } else {
            Err(parse_error(path, line, format!("index {v} is not a nonnegative integer")))
        }
    };
    let entries = table
        .rows
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let line = k + offset;
            Ok(Dissimilarity {
                i: index(r[0], line)?,
                j: index(r[1], line)?,
                d: r[2],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    DissimilaritySet::from_entries(entries)
}

/// 17 significant digits in scientific notation.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `bytes` to a temporary file beside `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(io_error(path, e));
    }
    Ok(())
}

/// Renders a CSV document; numbers go through [`format_float`].
pub fn csv_string(header: &[String], rows: &[Vec<Cell>]) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    if !header.is_empty() {
        w.write_record(header).expect("in-memory write");
    }
    for r in rows {
        w.write_record(r.iter().map(Cell::render)).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8 fields")
}

/// A CSV field.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Float(v) => format_float(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// Writes a CSV file atomically.
pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<Cell>]) -> Result<()> {
    write_atomic(path, csv_string(header, rows).as_bytes())
}

/// Writes a header-free numeric matrix atomically.
pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let rows: Vec<Vec<Cell>> = (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| Cell::Float(m[(i, j)])).collect())
        .collect();
    write_csv(path, &[], &rows)
}
