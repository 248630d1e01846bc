//! Headerless numeric CSV: one row per variable, one column per sample.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub fn read_matrix_from<T: Scalar, R: Read>(reader: R) -> Result<Array2<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0usize;
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(Error::Input(format!(
                    "row {} has {} fields, expected {c}",
                    line + 1,
                    record.len()
                )))
            }
            _ => {}
        }
        for field in record.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Input(format!("row {}: cannot parse {field:?} as a number", line + 1)))?;
            if !v.is_finite() {
                return Err(Error::Input(format!("row {}: non-finite value {field:?}", line + 1)));
            }
            values.push(T::of(v));
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::Input("empty matrix".into()))?;
    Array2::from_shape_vec((rows, cols), values).map_err(|e| Error::Input(e.to_string()))
}

pub fn read_matrix<T: Scalar>(path: &Path) -> Result<Array2<T>> {
    let file = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_matrix_from(file)
}

pub fn write_matrix_to<T: Scalar, W: Write>(matrix: ArrayView2<'_, T>, writer: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    for row in matrix.rows() {
        wtr.write_record(row.iter().map(|v| format!("{:.16e}", v.as_f64())))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_matrix<T: Scalar>(matrix: ArrayView2<'_, T>, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    write_matrix_to(matrix, file)
}
