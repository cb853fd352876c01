//! Matrix persistence: a human-readable CSV format and the exact `LGM1`
//! little-endian binary format.
//!
//! CSV files carry a header `dim_0,...,dim_{d-1}` plus an optional trailing
//! `label` column. Values are written with shortest round-trip formatting,
//! so a CSV round trip reproduces every f64 exactly. The binary layout is
//! magic `LGM1`, u64 row count, u64 column count, then row-major f64, all
//! little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::data::LatentMatrix;
use crate::error::{Error, Result};

const BINARY_MAGIC: &[u8; 4] = b"LGM1";

/// Saves a matrix, choosing CSV for `.csv` paths and binary otherwise.
pub fn save_matrix(y: &LatentMatrix, path: &Path) -> Result<()> {
    if is_csv(path) {
        save_csv(path, y, None)
    } else {
        save_binary(path, y)
    }
}

/// Loads a matrix, choosing the format by extension as in [`save_matrix`].
/// A label column in a CSV file is ignored here; use [`load_csv`] to keep it.
pub fn load_matrix(path: &Path) -> Result<LatentMatrix> {
    if is_csv(path) {
        Ok(load_csv(path)?.0)
    } else {
        load_binary(path)
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .map(|e| e.eq_ignore_ascii_case("csv"))
        .unwrap_or(false)
}

pub fn save_csv(path: &Path, y: &LatentMatrix, labels: Option<&[String]>) -> Result<()> {
    if let Some(l) = labels {
        if l.len() != y.n() {
            return Err(Error::DataValidation(format!(
                "{} labels for {} rows",
                l.len(),
                y.n()
            )));
        }
    }
    let file = File::create(path)?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let mut header: Vec<String> = (0..y.dim()).map(|j| format!("dim_{j}")).collect();
    if labels.is_some() {
        header.push("label".into());
    }
    w.write_record(&header)
        .map_err(|e| Error::DataValidation(e.to_string()))?;
    for i in 0..y.n() {
        let mut record: Vec<String> = y.row(i).iter().map(|v| format!("{v}")).collect();
        if let Some(l) = labels {
            record.push(l[i].clone());
        }
        w.write_record(&record)
            .map_err(|e| Error::DataValidation(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a CSV matrix and its label column when one is present.
pub fn load_csv(path: &Path) -> Result<(LatentMatrix, Option<Vec<String>>)> {
    let file = File::open(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(BufReader::new(file));
    let headers = reader
        .headers()
        .map_err(|e| Error::DataValidation(format!("unreadable header: {e}")))?
        .clone();
    if headers.is_empty() {
        return Err(Error::DataValidation("zero rows".into()));
    }
    let has_label = headers.iter().next_back() == Some("label");
    let d = if has_label {
        headers.len() - 1
    } else {
        headers.len()
    };
    if d == 0 {
        return Err(Error::DataValidation("no value columns".into()));
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<String> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            row: i + 1,
            col: 0,
            message: e.to_string(),
        })?;
        let expected = d + usize::from(has_label);
        if record.len() != expected {
            return Err(Error::Parse {
                row: i + 1,
                col: record.len(),
                message: format!("expected {expected} fields, found {}", record.len()),
            });
        }
        let mut row = Vec::with_capacity(d);
        for j in 0..d {
            let field = &record[j];
            let value: f64 = field.trim().parse().map_err(|_| Error::Parse {
                row: i + 1,
                col: j + 1,
                message: format!("not a number: {field:?}"),
            })?;
            row.push(value);
        }
        if has_label {
            labels.push(record[d].to_string());
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::DataValidation("zero rows".into()));
    }
    let matrix = LatentMatrix::from_rows(&rows)?;
    Ok((matrix, has_label.then_some(labels)))
}

pub fn save_binary(path: &Path, y: &LatentMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(BINARY_MAGIC)?;
    w.write_all(&(y.n() as u64).to_le_bytes())?;
    w.write_all(&(y.dim() as u64).to_le_bytes())?;
    for v in y.data().iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_binary(path: &Path) -> Result<LatentMatrix> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| {
        Error::DataValidation("zero rows: file too short for header".into())
    })?;
    if &magic != BINARY_MAGIC {
        return Err(Error::DataValidation(format!(
            "bad magic {magic:?}, expected {BINARY_MAGIC:?}"
        )));
    }
    let n = read_u64(&mut r)? as usize;
    let d = read_u64(&mut r)? as usize;
    if n == 0 {
        return Err(Error::DataValidation("zero rows".into()));
    }
    if d == 0 {
        return Err(Error::DataValidation("zero columns".into()));
    }
    n.checked_mul(d)
        .filter(|total| *total <= (1 << 32))
        .ok_or_else(|| Error::DataValidation(format!("implausible shape {n}x{d}")))?;
    let mut rows = Vec::with_capacity(n);
    let mut buf = [0u8; 8];
    for i in 0..n {
        let mut row = Vec::with_capacity(d);
        for j in 0..d {
            r.read_exact(&mut buf).map_err(|_| Error::Parse {
                row: i + 1,
                col: j + 1,
                message: "file truncated".into(),
            })?;
            row.push(f64::from_le_bytes(buf));
        }
        rows.push(row);
    }
    LatentMatrix::from_rows(&rows)
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)
        .map_err(|_| Error::DataValidation("file truncated in header".into()))?;
    Ok(u64::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn sample() -> LatentMatrix {
        LatentMatrix::from_rows(&[
            vec![0.1, -2.5],
            vec![1e-17, 3.0],
            vec![12345.6789, -0.0],
        ])
        .unwrap()
    }

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.lgm");
        let y = sample();
        save_binary(&path, &y).unwrap();
        let back = load_binary(&path).unwrap();
        for (a, b) in y.data().iter().zip(back.data().iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let y = sample();
        save_csv(&path, &y, None).unwrap();
        let (back, labels) = load_csv(&path).unwrap();
        assert!(labels.is_none());
        assert_eq!(y, back);
    }

    #[test]
    fn csv_labels_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let y = sample();
        let labels = vec!["a".to_string(), "b".to_string(), "a".to_string()];
        save_csv(&path, &y, Some(&labels)).unwrap();
        let (back, back_labels) = load_csv(&path).unwrap();
        assert_eq!(y, back);
        assert_eq!(back_labels.unwrap(), labels);
    }

    #[test]
    fn csv_parse_error_names_row_and_column() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "dim_0,dim_1\n1.0,2.0\n3.0,oops\n").unwrap();
        match load_csv(&path) {
            Err(Error::Parse { row, col, .. }) => {
                assert_eq!((row, col), (2, 2));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn empty_csv_is_zero_rows() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        std::fs::write(&path, "").unwrap();
        let err = load_csv(&path).unwrap_err();
        assert!(err.to_string().contains("zero rows"), "{err}");
        // Header-only files fail the same way.
        std::fs::write(&path, "dim_0\n").unwrap();
        let err = load_csv(&path).unwrap_err();
        assert!(err.to_string().contains("zero rows"), "{err}");
    }

    #[test]
    fn extension_dispatch() {
        let dir = tempdir().unwrap();
        let y = sample();
        let csv_path = dir.path().join("m.csv");
        let bin_path = dir.path().join("m.lgm");
        save_matrix(&y, &csv_path).unwrap();
        save_matrix(&y, &bin_path).unwrap();
        assert!(std::fs::read(&csv_path).unwrap().starts_with(b"dim_0"));
        assert!(std::fs::read(&bin_path).unwrap().starts_with(b"LGM1"));
        assert_eq!(load_matrix(&csv_path).unwrap(), y);
        assert_eq!(load_matrix(&bin_path).unwrap(), y);
    }
}
