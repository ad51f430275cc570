//! Numeric CSV input: a header row, feature columns, then the response.

use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TableData {
    pub feature_names: Vec<String>,
    pub x: Array2<f64>,
    pub y: Array1<f64>,
}

pub fn read_csv(path: &Path) -> Result<TableData> {
    let bad = |message: String| HarnessError::Data {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => HarnessError::io(path, io),
            other => bad(format!("{other:?}")),
        })?;
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    if headers.len() < 2 {
        return Err(bad("need at least one feature column and a response column".into()));
    }
    let cols = headers.len();
    let mut values = Vec::new();
    let mut rows = 0;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        if record.len() != cols {
            return Err(bad(format!("row {}: expected {cols} fields, found {}", i + 1, record.len())));
        }
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| bad(format!("row {}, column {}: not a number: {field:?}", i + 1, j + 1)))?;
            if !v.is_finite() {
                return Err(bad(format!("row {}, column {}: non-finite value", i + 1, j + 1)));
            }
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(bad("no data rows".into()));
    }
    let table = Array2::from_shape_vec((rows, cols), values).expect("row lengths checked");
    Ok(TableData {
        feature_names: headers.iter().take(cols - 1).map(str::to_owned).collect(),
        x: table.slice(ndarray::s![.., ..cols - 1]).to_owned(),
        y: table.column(cols - 1).to_owned(),
    })
}
