//! JSON description of a finite ħ-graded complex.
//!
//! The file carries the lowest ghost degree, the dimension of each graded
//! sector, and one dense matrix per operator order and adjacent sector
//! pair, with entries as exact rationals in `"p/q"` (or `"n"`) strings:
//!
//! ```json
//! {
//!   "ghost_min": 0,
//!   "dimensions": [2, 2],
//!   "operators": [
//!     [[["0", "0"], ["0", "1"]]],
//!     [[["0", "0"], ["1", "0"]]]
//!   ]
//! }
//! ```
//!
//! `operators[l][i]` is the block of the order-`l` operator mapping sector
//! `i` to sector `i + 1`, written row-major with `dimensions[i+1]` rows of
//! `dimensions[i]` entries. `operators[0]` is the classical differential.

use std::fmt;
use std::str::FromStr;

use bvqft::linalg::Mat;
use bvqft::scalar::Rat;
use bvqft::tower::{FiniteComplex, TowerError};
use serde::{Deserialize, Serialize};

/// Errors turning file text into a [`FiniteComplex`].
#[derive(Debug)]
pub enum ComplexFileError {
    /// JSON-level syntax or type error.
    Json(serde_json::Error),
    /// Well-formed JSON with inconsistent shapes or bad entries.
    Structure(String),
    /// The data does not satisfy the square-zero relations.
    Tower(TowerError),
}

impl fmt::Display for ComplexFileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ComplexFileError::Json(e) => write!(f, "{e}"),
            ComplexFileError::Structure(msg) => write!(f, "{msg}"),
            ComplexFileError::Tower(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for ComplexFileError {}

/// Serialized form of a complex; see the module docs for the layout.
#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexFile {
    /// Ghost degree of the first sector.
    pub ghost_min: i32,
    /// Dimension of each sector, ascending in ghost degree.
    pub dimensions: Vec<usize>,
    /// `operators[l][i]`: order-`l` block out of sector `i`, row-major.
    pub operators: Vec<Vec<Vec<Vec<String>>>>,
}

impl ComplexFile {
    /// Validates shapes, parses entries, and runs the square-zero checks.
    pub fn into_complex(self) -> Result<FiniteComplex, ComplexFileError> {
        let dims = self.dimensions;
        if dims.is_empty() {
            return Err(ComplexFileError::Structure("`dimensions` must be nonempty".into()));
        }
        let nblocks = dims.len() - 1;
        let mut k_ops = Vec::with_capacity(self.operators.len());
        for (l, blocks) in self.operators.into_iter().enumerate() {
            if blocks.len() != nblocks {
                return Err(ComplexFileError::Structure(format!(
                    "operator {l} has {} blocks, expected one per adjacent sector pair ({nblocks})",
                    blocks.len()
                )));
            }
            let mut mats = Vec::with_capacity(nblocks);
            for (i, rows) in blocks.into_iter().enumerate() {
                let (nr, nc) = (dims[i + 1], dims[i]);
                if rows.len() != nr {
                    return Err(ComplexFileError::Structure(format!(
                        "operator {l} block {i} has {} rows, expected {nr}",
                        rows.len()
                    )));
                }
                let mut m = Mat::zeros(nr, nc);
                for (r, row) in rows.into_iter().enumerate() {
                    if row.len() != nc {
                        return Err(ComplexFileError::Structure(format!(
                            "operator {l} block {i} row {r} has {} entries, expected {nc}",
                            row.len()
                        )));
                    }
                    for (c, s) in row.into_iter().enumerate() {
                        let v = Rat::from_str(&s).map_err(|_| {
                            ComplexFileError::Structure(format!(
                                "operator {l} block {i} entry ({r}, {c}): `{s}` is not a rational `p/q`"
                            ))
                        })?;
                        m.set(r, c, v);
                    }
                }
                mats.push(m);
            }
            k_ops.push(mats);
        }
        FiniteComplex::new(self.ghost_min, dims, k_ops).map_err(ComplexFileError::Tower)
    }

    /// The serialized form of an in-memory complex (exact round-trip).
    pub fn from_complex(cx: &FiniteComplex) -> Self {
        let dims: Vec<usize> = (0..cx.sectors()).map(|i| cx.dim(i)).collect();
        let operators = (0..=cx.order())
            .map(|l| {
                (0..cx.sectors() - 1)
                    .map(|i| {
                        let m = cx.k_block(l, i);
                        (0..m.nrows())
                            .map(|r| (0..m.ncols()).map(|c| m.get(r, c).to_string()).collect())
                            .collect()
                    })
                    .collect()
            })
            .collect();
        ComplexFile { ghost_min: cx.ghost_min(), dimensions: dims, operators }
    }
}

/// Parses complex-file text.
pub fn parse_complex_file(src: &str) -> Result<FiniteComplex, ComplexFileError> {
    let file: ComplexFile = serde_json::from_str(src).map_err(ComplexFileError::Json)?;
    file.into_complex()
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_LEVEL: &str = r#"{
  "ghost_min": 0,
  "dimensions": [1, 1],
  "operators": [
    [[["0"]]],
    [[["1"]]]
  ]
}"#;

    #[test]
    fn parses_and_round_trips() {
        let cx = parse_complex_file(TWO_LEVEL).unwrap();
        assert_eq!(cx.sectors(), 2);
        assert_eq!(cx.order(), 1);
        let again = ComplexFile::from_complex(&cx).into_complex().unwrap();
        assert_eq!(again.k_block(1, 0), cx.k_block(1, 0));
    }

    #[test]
    fn shape_and_entry_errors_are_reported() {
        let bad = TWO_LEVEL.replace("\"1\"", "\"1/one\"");
        let err = parse_complex_file(&bad).unwrap_err();
        assert!(matches!(err, ComplexFileError::Structure(_)));
        assert!(err.to_string().contains("not a rational"));

        let bad = TWO_LEVEL.replace("[[[\"0\"]]]", "[[[\"0\"], [\"0\"]]]");
        let err = parse_complex_file(&bad).unwrap_err();
        assert!(matches!(err, ComplexFileError::Structure(_)));

        // Square-zero failure surfaces as a tower error: K¹K¹ ≠ 0 needs a
        // third sector to be visible, so build one.
        let bad = r#"{
  "ghost_min": 0,
  "dimensions": [1, 1, 1],
  "operators": [
    [[["0"]], [["0"]]],
    [[["1"]], [["1"]]],
    [[["0"]], [["0"]]]
  ]
}"#;
        let err = parse_complex_file(bad).unwrap_err();
        assert!(matches!(
            err,
            ComplexFileError::Tower(TowerError::NotNilpotent { hbar_order: 2, ghost: 0 })
        ));
    }
}
