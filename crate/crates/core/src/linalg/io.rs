//! CSV exchange format for matrices: row-major, comma-separated, no header.

use std::path::Path;

use crate::error::{LabError, Result};
use crate::scalar::{cast, Scalar};

use super::matrix::Matrix;

/// Formats a scalar with 17 significant digits, enough for exact f64 replay.
pub fn format_float<T: Scalar>(v: T) -> String {
    format!("{:.16e}", v)
}

pub fn matrix_to_csv<T: Scalar>(m: &Matrix<T>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format_float(*v)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn matrix_from_csv_str<T: Scalar>(text: &str) -> Result<Matrix<T>> {
    let mut rows: Vec<Vec<T>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|e| {
                LabError::Parse(format!("line {}: bad float {:?}: {e}", lineno + 1, field))
            })?;
            row.push(cast::<T>(v));
        }
        rows.push(row);
    }
    Matrix::from_rows(&rows)
}

pub fn write_matrix_csv<T: Scalar>(path: &Path, m: &Matrix<T>) -> Result<()> {
    std::fs::write(path, matrix_to_csv(m))?;
    Ok(())
}

pub fn read_matrix_csv<T: Scalar>(path: &Path) -> Result<Matrix<T>> {
    let text = std::fs::read_to_string(path)?;
    matrix_from_csv_str(&text)
}
