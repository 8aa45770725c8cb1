//! File formats: CSV matrices (optional header row), the `CMX1` binary
//! matrix format, edge lists and PMF tables.
//!
//! `CMX1` layout: the ASCII magic `CMX1`, then `u32` rows and `u32` columns,
//! then `rows * cols` `f64` values in row-major order, all little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::cpois::DiscreteDist;
use crate::error::{Error, Result};
use crate::graphs::SimpleGraph;
use crate::scores::{DataMatrix, SymmetricMatrix};

const MAGIC: &[u8; 4] = b"CMX1";

/// Reads a numeric CSV table; a first row with any non-numeric field is
/// taken as a header and skipped.
pub fn read_matrix_csv<R: Read>(reader: R) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if line == 0 => continue,
            Err(e) => return Err(Error::Parse(format!("CSV row {}: {e}", line + 1))),
        }
    }
    let cols = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
        return Err(Error::Dimension(format!(
            "CSV row {} has {} fields, expected {cols}",
            bad + 1,
            rows[bad].len()
        )));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

pub fn write_matrix_csv<W: Write>(m: &DMatrix<f64>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for i in 0..m.nrows() {
        w.write_record(m.row(i).iter().map(|v| format!("{v:e}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_binary<R: Read>(mut reader: R) -> Result<DMatrix<f64>> {
    let mut magic = [0u8; 4];
    reader.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Parse(format!("bad magic {magic:?}, expected CMX1")));
    }
    let mut word = [0u8; 4];
    reader.read_exact(&mut word)?;
    let rows = u32::from_le_bytes(word) as usize;
    reader.read_exact(&mut word)?;
    let cols = u32::from_le_bytes(word) as usize;
    let mut values = vec![0.0; rows * cols];
    let mut buf = [0u8; 8];
    for v in values.iter_mut() {
        reader.read_exact(&mut buf)?;
        *v = f64::from_le_bytes(buf);
    }
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

pub fn write_matrix_binary<W: Write>(m: &DMatrix<f64>, mut writer: W) -> Result<()> {
    let dim = |d: usize| u32::try_from(d).map_err(|_| Error::Overflow("matrix dimension"));
    writer.write_all(MAGIC)?;
    writer.write_all(&dim(m.nrows())?.to_le_bytes())?;
    writer.write_all(&dim(m.ncols())?.to_le_bytes())?;
    for i in 0..m.nrows() {
        for v in m.row(i).iter() {
            writer.write_all(&v.to_le_bytes())?;
        }
    }
    writer.flush()?;
    Ok(())
}

fn is_binary(path: &Path) -> Result<bool> {
    let mut head = [0u8; 4];
    let mut f = File::open(path)?;
    Ok(f.read(&mut head)? == 4 && &head == MAGIC)
}

/// Reads a matrix file in either format, detected by the magic bytes.
pub fn read_matrix_file(path: &Path) -> Result<DMatrix<f64>> {
    let reader = BufReader::new(File::open(path)?);
    if is_binary(path)? {
        read_matrix_binary(reader)
    } else {
        read_matrix_csv(reader)
    }
}

/// Writes `CMX1` when the extension is `.cmx` or `.bin`, CSV otherwise.
pub fn write_matrix_file(m: &DMatrix<f64>, path: &Path) -> Result<()> {
    let writer = BufWriter::new(File::create(path)?);
    match path.extension().and_then(|e| e.to_str()) {
        Some("cmx" | "bin") => write_matrix_binary(m, writer),
        _ => write_matrix_csv(m, writer),
    }
}

pub fn read_data(path: &Path) -> Result<DataMatrix> {
    DataMatrix::new(read_matrix_file(path)?)
}

pub fn read_symmetric(path: &Path) -> Result<SymmetricMatrix> {
    SymmetricMatrix::new(read_matrix_file(path)?)
}

/// One `i,j` line per edge, 0-indexed, `i < j`.
pub fn write_edge_list<W: Write>(g: &SimpleGraph, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["i", "j"])?;
    for (i, j) in g.edges() {
        w.write_record([i.to_string(), j.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_edge_list<R: Read>(p: usize, reader: R) -> Result<SimpleGraph> {
    let m = read_matrix_csv(reader)?;
    if m.nrows() > 0 && m.ncols() != 2 {
        return Err(Error::Dimension(format!("edge list has {} columns", m.ncols())));
    }
    let edges: Vec<(usize, usize)> = (0..m.nrows())
        .map(|r| (m[(r, 0)] as usize, m[(r, 1)] as usize))
        .collect();
    SimpleGraph::from_edges(p, &edges)
}

/// `k,probability` rows, with the truncated tail as a trailing comment.
pub fn write_pmf_csv<W: Write>(d: &DiscreteDist, mut writer: W) -> Result<()> {
    {
        let mut w = csv::Writer::from_writer(&mut writer);
        w.write_record(["k", "probability"])?;
        for (k, p) in d.pmf().iter().enumerate() {
            w.write_record([k.to_string(), format!("{p:e}")])?;
        }
        w.flush()?;
    }
    writeln!(writer, "# tail_mass,{:e}", d.tail_mass())?;
    Ok(())
}
