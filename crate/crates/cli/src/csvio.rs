//! Feature and weight CSV files.
//!
//! Feature files have a header row, `f` feature columns and a trailing
//! integer label column. Weight files hold one row per class and one column
//! per feature plus a final bias column.

use std::path::Path;

use cipherfit::data::Dataset;
use cipherfit::{Error, Result};
use ndarray::Array2;

fn parse_err(path: &Path, line: Option<u64>, msg: impl std::fmt::Display) -> Error {
    match line {
        Some(l) => Error::Parse(format!("{}:{l}: {msg}", path.display())),
        None => Error::Parse(format!("{}: {msg}", path.display())),
    }
}

/// Reads a labelled feature file.
pub fn ingest(path: &Path, classes: usize) -> Result<Dataset> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| parse_err(path, None, e))?;
    let width = rdr.headers().map_err(|e| parse_err(path, None, e))?.len();
    if width < 2 {
        return Err(parse_err(path, Some(1), "need at least one feature column and a label column"));
    }
    let f = width - 1;
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(path, e.position().map(|p| p.line()), e))?;
        let line = rec.position().map(|p| p.line());
        for field in rec.iter().take(f) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse_err(path, line, format!("not a number: {field:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(path, line, format!("non-finite feature {field:?}")));
            }
            values.push(v);
        }
        let raw = rec[f].trim();
        let label: usize = raw
            .parse()
            .map_err(|_| parse_err(path, line, format!("label {raw:?} is not a class index")))?;
        if label >= classes {
            return Err(parse_err(path, line, format!("label {label} out of range for {classes} classes")));
        }
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(parse_err(path, None, "no data rows"));
    }
    let features = Array2::from_shape_vec((labels.len(), f), values).expect("row widths checked");
    Dataset::new(features, labels, classes)
}

fn io_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => parse_err(path, None, format!("{other:?}")),
    }
}

/// Writes a labelled feature file that [`ingest`] reads back exactly.
pub fn export(path: &Path, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    let mut header: Vec<String> = (0..data.num_features()).map(|j| format!("f{j}")).collect();
    header.push("label".into());
    w.write_record(&header).map_err(|e| io_err(path, e))?;
    for (row, label) in data.features.rows().into_iter().zip(&data.labels) {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        rec.push(label.to_string());
        w.write_record(&rec).map_err(|e| io_err(path, e))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `c × (f+1)` weights with a `bias` last column.
pub fn write_weights(path: &Path, w: &Array2<f64>) -> Result<()> {
    let mut out = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    let f = w.ncols().saturating_sub(1);
    let mut header: Vec<String> = (0..f).map(|j| format!("f{j}")).collect();
    header.push("bias".into());
    out.write_record(&header).map_err(|e| io_err(path, e))?;
    for row in w.rows() {
        out.write_record(row.iter().map(|v| v.to_string())).map_err(|e| io_err(path, e))?;
    }
    out.flush()?;
    Ok(())
}

/// Reads weights written by [`write_weights`].
pub fn read_weights(path: &Path) -> Result<Array2<f64>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| parse_err(path, None, e))?;
    let cols = rdr.headers().map_err(|e| parse_err(path, None, e))?.len();
    let mut values = Vec::new();
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(path, None, e))?;
        for field in &rec {
            values.push(field.parse::<f64>().map_err(|_| parse_err(path, None, format!("not a number: {field:?}")))?);
        }
        rows += 1;
    }
    Array2::from_shape_vec((rows, cols), values).map_err(|e| parse_err(path, None, e))
}
