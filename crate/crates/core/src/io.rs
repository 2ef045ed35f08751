//! The `corrmat-csv` matrix format: no header, `n` lines of `n`
//! comma-separated values written with 17 significant digits, so every
//! `f64` round-trips exactly.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{CorrError, Result};
use crate::matrix::{CorrelationMatrix, RawMatrix, Tolerances};

pub fn format_matrix(m: &DMatrix<f64>) -> String {
    let mut out = String::with_capacity(m.len() * 25);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format!("{:.16e}", m[(i, j)]));
        }
        out.push('\n');
    }
    out
}

pub fn parse_matrix(text: &str, origin: &Path) -> Result<DMatrix<f64>> {
    let parse_err = |msg: String| CorrError::Parse {
        path: origin.to_path_buf(),
        msg,
    };
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| parse_err(format!("line {}: {e}: {f:?}", lineno + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 {
        return Err(parse_err("empty matrix file".into()));
    }
    if let Some(bad) = rows.iter().position(|r| r.len() != n) {
        return Err(parse_err(format!(
            "row {} has {} values, expected {n}",
            bad + 1,
            rows[bad].len()
        )));
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(DMatrix::from_row_slice(n, n, &flat))
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    fs::write(path, format_matrix(m)).map_err(|e| CorrError::io(path, e))
}

pub fn read_raw(path: &Path) -> Result<RawMatrix> {
    let text = fs::read_to_string(path).map_err(|e| CorrError::io(path, e))?;
    RawMatrix::new(parse_matrix(&text, path)?)
}

pub fn read_correlation(path: &Path, tol: Tolerances) -> Result<CorrelationMatrix> {
    let text = fs::read_to_string(path).map_err(|e| CorrError::io(path, e))?;
    CorrelationMatrix::from_matrix(parse_matrix(&text, path)?, tol)
}

/// Lists `*.csv` files in `dir`, sorted by file name.
pub fn list_matrix_files(dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .map_err(|e| CorrError::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "csv"))
        .collect();
    files.sort();
    Ok(files)
}

/// Reads every matrix file in a directory as a correlation matrix.
pub fn read_correlation_dir(dir: &Path, tol: Tolerances) -> Result<Vec<CorrelationMatrix>> {
    list_matrix_files(dir)?
        .iter()
        .map(|p| read_correlation(p, tol))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.1 + 0.2, 0.1 + 0.2, 1.0 - 1e-17]);
        let text = format_matrix(&m);
        let back = parse_matrix(&text, Path::new("mem")).unwrap();
        assert!(m.iter().zip(back.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
        let first = text.lines().next().unwrap().split(',').nth(1).unwrap();
        let digits = first.split('e').next().unwrap().replace(['.', '-'], "");
        assert!(digits.len() >= 15);
    }

    #[test]
    fn ragged_file_is_rejected() {
        assert!(parse_matrix("1,0\n0\n", Path::new("mem")).is_err());
        assert!(parse_matrix("1,x\n0,1\n", Path::new("mem")).is_err());
        assert!(parse_matrix("", Path::new("mem")).is_err());
    }
}
