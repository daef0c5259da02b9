//! CSV formats.
//!
//! Matrices and vectors: one matrix row per line, comma-separated decimal
//! literals, no header. A vector may be written as a single column or a
//! single row. Experiment tables: a `# key=value ...` provenance line, a
//! header line, then numeric rows. Reals are written with 17 significant
//! digits so every value round-trips exactly.

use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use kaczmarz_core::{DenseMatrix, RealVector};

use crate::{Error, Result};

/// Formats a real with 17 significant digits.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(contents.as_bytes())
        .map_err(|e| Error::io(path, e))
}

fn parse_field(source: &str, line: u64, column: usize, field: &str) -> Result<f64> {
    let trimmed = field.trim();
    let value: f64 = trimmed.parse().map_err(|_| Error::Parse {
        path: source.to_string(),
        line,
        column,
        message: format!("invalid number {trimmed:?}"),
    })?;
    if !value.is_finite() {
        return Err(Error::Parse {
            path: source.to_string(),
            line,
            column,
            message: format!("non-finite value {trimmed:?}"),
        });
    }
    Ok(value)
}

/// Parses header-less numeric CSV into rows. Blank lines are skipped.
/// Columns in error messages are 1-based field numbers.
pub fn parse_rows(source: &str, text: &str) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].trim().is_empty() {
            continue;
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(j, f)| parse_field(source, line, j + 1, f))
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            let first: &Vec<f64> = first;
            if first.len() != row.len() {
                return Err(Error::Parse {
                    path: source.to_string(),
                    line,
                    column: row.len().min(first.len()) + 1,
                    message: format!("expected {} fields, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn parse_matrix(source: &str, text: &str) -> Result<DenseMatrix> {
    let rows = parse_rows(source, text)?;
    if rows.is_empty() {
        return Err(Error::Invalid(format!("{source}: empty matrix")));
    }
    Ok(DenseMatrix::from_rows(&rows)?)
}

/// A single column or a single row.
pub fn parse_vector(source: &str, text: &str) -> Result<RealVector> {
    let rows = parse_rows(source, text)?;
    let values = match rows.as_slice() {
        [] => return Err(Error::Invalid(format!("{source}: empty vector"))),
        [single] => single.clone(),
        many if many[0].len() == 1 => many.iter().map(|r| r[0]).collect(),
        many => {
            return Err(Error::Invalid(format!(
                "{source}: expected a single row or column, found {}x{}",
                many.len(),
                many[0].len()
            )))
        }
    };
    Ok(RealVector::try_from(values)?)
}

pub fn read_matrix(path: &Path) -> Result<DenseMatrix> {
    parse_matrix(&path.display().to_string(), &read_file(path)?)
}

pub fn read_vector(path: &Path) -> Result<RealVector> {
    parse_vector(&path.display().to_string(), &read_file(path)?)
}

pub fn format_matrix(a: &DenseMatrix) -> String {
    let mut out = String::new();
    for row in a.row_iter() {
        let fields: Vec<String> = row.iter().map(|&v| fmt_real(v)).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// One value per line.
pub fn format_vector(v: &[f64]) -> String {
    let mut out = String::new();
    for &x in v {
        let _ = writeln!(out, "{}", fmt_real(x));
    }
    out
}

pub fn write_matrix(path: &Path, a: &DenseMatrix) -> Result<()> {
    write_file(path, &format_matrix(a))
}

pub fn write_vector(path: &Path, v: &[f64]) -> Result<()> {
    write_file(path, &format_vector(v))
}

/// Ordered `key=value` pairs rendered as the leading comment line of a table.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Provenance(Vec<(String, String)>);

impl Provenance {
    pub fn new(seed: u64, m: usize, n: usize) -> Self {
        Provenance(vec![
            ("seed".into(), seed.to_string()),
            ("m".into(), m.to_string()),
            ("n".into(), n.to_string()),
        ])
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.0.push((key.to_string(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.0
    }

    pub fn render(&self) -> String {
        let parts: Vec<String> = self.0.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("# {}", parts.join(" "))
    }

    pub fn parse(line: &str) -> Result<Self> {
        let body = line
            .strip_prefix('#')
            .ok_or_else(|| Error::Invalid(format!("not a provenance line: {line:?}")))?;
        body.split_whitespace()
            .map(|tok| {
                tok.split_once('=')
                    .map(|(k, v)| (k.to_string(), v.to_string()))
                    .ok_or_else(|| Error::Invalid(format!("malformed provenance entry {tok:?}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Provenance)
    }
}

/// A cell of an experiment table: integers stay integers on output.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cell {
    Int(u64),
    Real(f64),
}

impl Cell {
    pub fn value(self) -> f64 {
        match self {
            Cell::Int(i) => i as f64,
            Cell::Real(v) => v,
        }
    }

    fn render(self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Real(v) => fmt_real(v),
        }
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

/// An experiment output table.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub provenance: Provenance,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(provenance: Provenance, header: &[&str]) -> Self {
        Table {
            provenance,
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(Error::Invalid(format!(
                "row has {} cells, header has {}",
                row.len(),
                self.header.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j].value()).collect())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        writer.write_record(&self.header)?;
        for row in &self.rows {
            writer.write_record(row.iter().map(|c| c.render()))?;
        }
        let body = writer
            .into_inner()
            .map_err(|e| Error::Invalid(e.to_string()))?;
        let body = String::from_utf8(body).map_err(|e| Error::Invalid(e.to_string()))?;
        Ok(format!("{}\n{body}", self.provenance.render()))
    }

    /// Integer-looking fields in the input are read back as [`Cell::Int`].
    pub fn parse(source: &str, text: &str) -> Result<Self> {
        let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
        let provenance = Provenance::parse(first.trim_end_matches('\r'))?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .comment(Some(b'#'))
            .from_reader(rest.as_bytes());
        let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        let mut table = Table {
            provenance,
            header,
            rows: Vec::new(),
        };
        for record in reader.records() {
            let record = record?;
            // The provenance line was split off, so shift line numbers back.
            let line = record.position().map_or(0, |p| p.line()) + 1;
            let row = record
                .iter()
                .enumerate()
                .map(|(j, f)| match f.parse::<u64>() {
                    Ok(i) => Ok(Cell::Int(i)),
                    Err(_) => parse_field(source, line, j + 1, f).map(Cell::Real),
                })
                .collect::<Result<Vec<_>>>()?;
            table.push(row)?;
        }
        Ok(table)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_csv()?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut text = String::new();
        fs::File::open(path)
            .and_then(|mut f| f.read_to_string(&mut text))
            .map_err(|e| Error::io(path, e))?;
        Self::parse(&path.display().to_string(), &text)
    }
}
