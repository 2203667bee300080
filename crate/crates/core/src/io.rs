//! CSV formats: headerless matrices, snapshot tables with an optional header
//! row of state names, and a shortest round-trip number format.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::estimation::SnapshotData;

/// Shortest decimal that parses back to the same `f64`; switches to
/// exponent notation outside `[1e-4, 1e15)`.
pub fn format_number(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// A numeric table with optional column names.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub names: Option<Vec<String>>,
    pub values: DMatrix<f64>,
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::ParseError { line, message: message.into() }
}

/// Parses comma-separated rows. A first row that is not entirely numeric is
/// taken as column names when `allow_header` is set.
pub fn parse_table<R: Read>(reader: R, allow_header: bool) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut names = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (k, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(k + 1, |p| p.line() as usize);
            parse_error(line, e.to_string())
        })?;
        let line = record.position().map_or(k + 1, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(|f| f.parse::<f64>()).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if allow_header && names.is_none() && rows.is_empty() => {
                let header: Vec<String> = record.iter().map(str::to_string).collect();
                if let Some(empty) = header.iter().position(String::is_empty) {
                    return Err(parse_error(line, format!("empty column name in column {}", empty + 1)));
                }
                width = Some(header.len());
                names = Some(header);
                continue;
            }
            Err(_) => {
                let (col, field) = record
                    .iter()
                    .enumerate()
                    .find(|(_, f)| f.parse::<f64>().is_err())
                    .expect("some field failed to parse");
                return Err(parse_error(
                    line,
                    format!("column {}: '{}' is not a number", col + 1, field),
                ));
            }
        };
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(parse_error(line, format!("column {}: value is not finite", i + 1)));
        }
        match width {
            Some(w) if w != values.len() => {
                return Err(parse_error(
                    line,
                    format!("expected {w} columns, found {}", values.len()),
                ))
            }
            _ => width = Some(values.len()),
        }
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(parse_error(1, "no numeric rows"));
    }
    let ncols = width.unwrap_or(0);
    let values = DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]);
    Ok(Table { names, values })
}

/// Headerless matrix CSV.
pub fn parse_matrix_csv<R: Read>(reader: R) -> Result<DMatrix<f64>> {
    parse_table(reader, false).map(|t| t.values)
}

pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    parse_matrix_csv(File::open(path)?)
}

/// Square matrix CSV whose first row may name the states.
pub fn read_labeled_matrix_csv(path: impl AsRef<Path>) -> Result<Table> {
    let table = parse_table(File::open(path)?, true)?;
    if !table.values.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "matrix must be square, got {}x{}",
            table.values.nrows(),
            table.values.ncols()
        )));
    }
    Ok(table)
}

pub fn write_matrix_csv<W: Write>(mut writer: W, m: &DMatrix<f64>) -> Result<()> {
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|v| format_number(*v)).collect();
        writeln!(writer, "{}", line.join(","))?;
    }
    Ok(())
}

/// Snapshot CSV: optional header of state names, then one row per sample.
pub fn parse_snapshot_csv<R: Read>(reader: R) -> Result<SnapshotData> {
    let table = parse_table(reader, true)?;
    let data = SnapshotData::new(table.values)?;
    match table.names {
        Some(names) => data.with_names(names),
        None => Ok(data),
    }
}

pub fn read_snapshot_csv(path: impl AsRef<Path>) -> Result<SnapshotData> {
    parse_snapshot_csv(File::open(path)?)
}

pub fn write_snapshot_csv<W: Write>(mut writer: W, data: &SnapshotData) -> Result<()> {
    if let Some(names) = data.names() {
        writeln!(writer, "{}", names.join(","))?;
    }
    write_matrix_csv(writer, data.states())
}
