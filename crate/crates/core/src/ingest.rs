//! Readers and writers for observation matrices.
//!
//! Two formats are supported:
//!
//! - CSV without a header, one row per variable and one column per
//!   observation (so the file is the `p x n` matrix as written);
//! - raw little-endian binary: `p: u64`, `n: u64`, then `p * n` `f64` values
//!   in column-major order (observation by observation).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectra::DataMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    Csv,
    Binary,
}

pub fn read_data(path: &Path, format: DataFormat) -> Result<DataMatrix> {
    let file = BufReader::new(File::open(path)?);
    match format {
        DataFormat::Csv => read_csv(file),
        DataFormat::Binary => read_binary(file),
    }
}

pub fn read_csv<R: Read>(reader: R) -> Result<DataMatrix> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in csv.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(rows.len() as u64 + 1, |p| p.line());
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(col, field)| {
                field.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    message: format!("column {}: cannot parse {field:?} as a number", col + 1),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {} fields, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    let p = rows.len();
    let n = rows.first().map_or(0, Vec::len);
    DataMatrix::new(DMatrix::from_fn(p, n, |i, j| rows[i][j]))
}

pub fn read_binary<R: Read>(mut reader: R) -> Result<DataMatrix> {
    let mut word = [0u8; 8];
    reader.read_exact(&mut word)?;
    let p = u64::from_le_bytes(word) as usize;
    reader.read_exact(&mut word)?;
    let n = u64::from_le_bytes(word) as usize;
    let len = p
        .checked_mul(n)
        .ok_or_else(|| Error::Shape(format!("header dimensions {p} x {n} overflow")))?;
    let mut values = Vec::with_capacity(len);
    for idx in 0..len {
        reader.read_exact(&mut word).map_err(|_| {
            Error::Shape(format!(
                "binary payload ends after {idx} of {len} values for {p} x {n}"
            ))
        })?;
        values.push(f64::from_le_bytes(word));
    }
    if reader.read(&mut word)? != 0 {
        return Err(Error::Shape(format!(
            "binary payload has trailing bytes after {len} values"
        )));
    }
    DataMatrix::new(DMatrix::from_vec(p, n, values))
}

pub fn write_binary(path: &Path, data: &DataMatrix) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(&(data.p() as u64).to_le_bytes())?;
    out.write_all(&(data.n() as u64).to_le_bytes())?;
    // nalgebra storage is column-major already
    for x in data.entries().iter() {
        out.write_all(&x.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_csv(path: &Path, data: &DataMatrix) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for row in data.entries().row_iter() {
        let fields: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
        writeln!(out, "{}", fields.join(","))?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_rows_are_variables() {
        let data = read_csv("1,2,3\n4,5,6\n".as_bytes()).unwrap();
        assert_eq!((data.p(), data.n()), (2, 3));
        assert_eq!(data.entries()[(1, 0)], 4.0);
    }

    #[test]
    fn csv_errors_name_the_line() {
        let err = read_csv("1,2\n3,x\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = read_csv("1,2\n3,4\n5\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn binary_roundtrip_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.bin");
        let data = DataMatrix::new(DMatrix::from_fn(3, 4, |i, j| i as f64 - 0.5 * j as f64)).unwrap();
        write_binary(&path, &data).unwrap();
        let back = read_data(&path, DataFormat::Binary).unwrap();
        assert_eq!(back, data);

        let bytes = std::fs::read(&path).unwrap();
        assert!(read_binary(&bytes[..bytes.len() - 3]).is_err());
        let mut longer = bytes.clone();
        longer.push(0);
        assert!(read_binary(longer.as_slice()).is_err());
    }

    #[test]
    fn csv_writer_roundtrips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        let data = DataMatrix::new(DMatrix::from_fn(2, 3, |i, j| (i as f64 + 0.1) / (j as f64 + 3.0))).unwrap();
        write_csv(&path, &data).unwrap();
        assert_eq!(read_data(&path, DataFormat::Csv).unwrap(), data);
    }
}
