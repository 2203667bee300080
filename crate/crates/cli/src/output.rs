//! Output sinks and small formatting helpers.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use infoflow::io::format_number;
use nalgebra::Complex;

use crate::CliError;

/// Buffered writer to a file, or to standard output when `path` is `None`.
pub fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| {
            CliError::Usage(format!("cannot create {}: {e}", p.display()))
        })?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn csv_writer(path: Option<&Path>) -> Result<csv::Writer<Box<dyn Write>>, CliError> {
    Ok(csv::WriterBuilder::new().flexible(true).from_writer(sink(path)?))
}

pub fn num(v: f64) -> String {
    format_number(v)
}

pub fn complex(l: &Complex<f64>) -> String {
    if l.im == 0.0 {
        num(l.re)
    } else if l.im > 0.0 {
        format!("{}+{}i", num(l.re), num(l.im))
    } else {
        format!("{}-{}i", num(l.re), num(-l.im))
    }
}

/// Resolves a comma-separated list of state indices or names.
pub fn resolve_states(spec: &str, names: Option<&[String]>, n: usize) -> Result<Vec<usize>, CliError> {
    let mut out = Vec::new();
    for token in spec.split(',').map(str::trim) {
        if token.is_empty() {
            return Err(CliError::Usage(format!("empty state in '{spec}'")));
        }
        let index = match token.parse::<usize>() {
            Ok(i) => i,
            Err(_) => names
                .and_then(|ns| ns.iter().position(|s| s == token))
                .ok_or_else(|| infoflow::Error::NameError(format!("unknown state '{token}'")))?,
        };
        if index >= n {
            return Err(infoflow::Error::IndexError { index, dim: n }.into());
        }
        out.push(index);
    }
    Ok(out)
}

/// Display label for a group of states.
pub fn group_label(states: &[usize], names: Option<&[String]>) -> String {
    states
        .iter()
        .map(|&i| names.map_or_else(|| i.to_string(), |ns| ns[i].clone()))
        .collect::<Vec<_>>()
        .join("+")
}
