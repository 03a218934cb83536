//! File interchange for matrices and deterministic scalar formatting.
//!
//! Matrices travel as JSON objects `{"rows", "cols", "data"}` where `data`
//! is the row-major entry list, each entry a `[re, im]` pair. The format is
//! strict: unknown fields, wrong entry counts, and non-finite values are
//! rejected on read.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{C64, ComplexMatrix};

/// Serialized form of a complex matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFile {
    pub rows: usize,
    pub cols: usize,
    /// Row-major entries as `[re, im]` pairs.
    pub data: Vec<[f64; 2]>,
}

impl MatrixFile {
    pub fn from_matrix(m: &ComplexMatrix) -> Self {
        MatrixFile {
            rows: m.rows(),
            cols: m.cols(),
            data: m.row_major().iter().map(|z| [z.re, z.im]).collect(),
        }
    }

    pub fn into_matrix(self) -> Result<ComplexMatrix> {
        let expected = self.rows.checked_mul(self.cols).ok_or_else(|| {
            Error::Parse("matrix dimensions overflow".to_string())
        })?;
        if self.data.len() != expected {
            return Err(Error::Parse(format!(
                "matrix file declares {}x{} = {} entries but carries {}",
                self.rows,
                self.cols,
                expected,
                self.data.len()
            )));
        }
        let entries: Vec<C64> = self.data.iter().map(|&[re, im]| C64::new(re, im)).collect();
        ComplexMatrix::new(self.rows, self.cols, entries)
    }
}

/// Reads a matrix from a JSON file.
pub fn read_matrix(path: &Path) -> Result<ComplexMatrix> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
    let mf: MatrixFile = serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    mf.into_matrix()
}

/// Writes a matrix as pretty JSON with a trailing newline.
pub fn write_matrix(path: &Path, m: &ComplexMatrix) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&MatrixFile::from_matrix(m))
        .expect("matrix file serializes");
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Formats a scalar with twelve significant digits.
///
/// Values whose decimal exponent lies in `[-4, 12)` print in fixed notation
/// (`0.5` → `0.500000000000`, `2` → `2.00000000000`); anything smaller or
/// larger uses scientific notation with the same significance.
pub fn format_sig12(x: f64) -> String {
    if x == 0.0 {
        return "0.000000000000".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs();
    let mut e = mag.log10().floor() as i32;
    // log10 can land a hair under an exact decade; renormalize.
    let ratio = mag / 10f64.powi(e);
    if ratio >= 10.0 {
        e += 1;
    } else if ratio < 1.0 {
        e -= 1;
    }
    if (-4..12).contains(&e) {
        let decimals = (11 - e).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.11e}")
    }
}
