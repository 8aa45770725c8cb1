//! JSON and CSV emission to stdout or a file.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use clap::ValueEnum;
use serde::Serialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

fn open(out: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn output_error(e: impl std::fmt::Display) -> CliError {
    CliError::Output(e.to_string())
}

/// JSON gets `document`; CSV gets one line per row with a header.
pub fn emit<D, R>(format: Format, out: Option<&Path>, document: &D, rows: &[R]) -> Result<(), CliError>
where
    D: Serialize + ?Sized,
    R: Serialize,
{
    let mut w = open(out)?;
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, document).map_err(output_error)?;
            writeln!(w).map_err(output_error)?;
        }
        Format::Csv => {
            let mut csv = csv::Writer::from_writer(&mut w);
            for row in rows {
                csv.serialize(row).map_err(output_error)?;
            }
            csv.flush().map_err(output_error)?;
        }
    }
    w.flush().map_err(output_error)
}

/// Rows serve as both the JSON array and the CSV table.
pub fn emit_rows<R: Serialize>(format: Format, out: Option<&Path>, rows: &[R]) -> Result<(), CliError> {
    emit(format, out, rows, rows)
}
