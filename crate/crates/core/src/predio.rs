//! Import/export of externally produced prediction files, so third-party
//! models can be scored by the error metrics.
//!
//! Format: two-column CSV, `pool index, predicted value`, no header.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Loads predictions and aligns them with `expected_indices`, which the
/// file must cover exactly (same index set, each exactly once).
pub fn load_predictions(path: impl AsRef<Path>, expected_indices: &[usize]) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let mut by_index: HashMap<usize, f64> = HashMap::with_capacity(expected_indices.len());
    let mut count = 0usize;
    for (lineno0, line) in text.lines().enumerate() {
        let lineno = lineno0 + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::Parse {
                line: lineno,
                msg: "expected exactly two columns: pool index, predicted value".into(),
            });
        };
        let idx: usize = a.trim().parse().map_err(|_| Error::Parse {
            line: lineno,
            msg: format!("bad pool index {a:?}"),
        })?;
        let val: f64 = b.trim().parse().map_err(|_| Error::Parse {
            line: lineno,
            msg: format!("bad predicted value {b:?}"),
        })?;
        if !val.is_finite() {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("predicted value {b:?} is not finite"),
            });
        }
        if by_index.insert(idx, val).is_some() {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("pool index {idx} appears twice"),
            });
        }
        count += 1;
    }
    if count != expected_indices.len() {
        return Err(Error::InvalidParameter(format!(
            "predictions file {} holds {count} rows, evaluation set has {}",
            path.display(),
            expected_indices.len()
        )));
    }
    expected_indices
        .iter()
        .map(|i| {
            by_index.get(i).copied().ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "predictions file {} is missing pool index {i}",
                    path.display()
                ))
            })
        })
        .collect()
}

/// Renders predictions for the given indices as two-column CSV.
pub fn predictions_to_csv(indices: &[usize], values: &[f64]) -> String {
    let mut out = String::new();
    for (i, v) in indices.iter().zip(values) {
        let _ = writeln!(out, "{i},{v}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_alignment() {
        let dir = std::env::temp_dir().join("dafps-predio-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("preds.csv");
        std::fs::write(&path, predictions_to_csv(&[3, 1, 7], &[0.5, -1.25, 9.0])).unwrap();
        // alignment follows the expected order, not file order
        let vals = load_predictions(&path, &[1, 3, 7]).unwrap();
        assert_eq!(vals, vec![-1.25, 0.5, 9.0]);
    }

    #[test]
    fn wrong_length_and_missing_index_rejected() {
        let dir = std::env::temp_dir().join("dafps-predio-test2");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("preds.csv");
        std::fs::write(&path, "0,1.0\n1,2.0\n").unwrap();
        assert!(load_predictions(&path, &[0, 1, 2]).is_err());
        assert!(load_predictions(&path, &[0, 2]).is_err());
        assert!(load_predictions(&path, &[0, 1]).is_ok());
    }

    #[test]
    fn malformed_rows_name_lines() {
        let dir = std::env::temp_dir().join("dafps-predio-test3");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("preds.csv");
        std::fs::write(&path, "0,1.0\nx,2.0\n").unwrap();
        match load_predictions(&path, &[0, 1]) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
