//! Plain-text matrix format: a header line `rows cols`, then one line per
//! row of whitespace-separated entries with 17 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

pub fn to_text(m: &DenseMatrix) -> String {
    let mut out = format!("{} {}\n", m.rows(), m.cols());
    for i in 0..m.rows() {
        let row = m.row(i);
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(' ');
            }
            write!(out, "{v:.16e}").expect("writing to a String");
        }
        out.push('\n');
    }
    out
}

pub fn from_text(text: &str) -> Result<DenseMatrix> {
    let mut tokens = text.split_whitespace();
    let mut header = |what: &str| -> Result<usize> {
        tokens
            .next()
            .ok_or_else(|| Error::Parse(format!("missing {what} in header")))?
            .parse::<usize>()
            .map_err(|e| Error::Parse(format!("bad {what} in header: {e}")))
    };
    let rows = header("row count")?;
    let cols = header("column count")?;
    let data = tokens
        .map(|t| {
            t.parse::<f64>()
                .map_err(|e| Error::Parse(format!("bad matrix entry {t:?}: {e}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    DenseMatrix::from_row_major(rows, cols, data).map_err(|e| Error::Parse(e.to_string()))
}

pub fn write_matrix(path: &Path, m: &DenseMatrix) -> Result<()> {
    fs::write(path, to_text(m))?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<DenseMatrix> {
    from_text(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_and_layout() {
        let m = DenseMatrix::from_rows(&[&[1.0, -0.5], &[0.1, 3.0e10]]);
        let text = to_text(&m);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("2 2"));
        assert_eq!(lines.next(), Some("1.0000000000000000e0 -5.0000000000000000e-1"));
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn malformed_input_is_a_parse_error() {
        assert!(matches!(from_text("2 2\n1 2 3"), Err(Error::Parse(_))));
        assert!(matches!(from_text("x 2\n"), Err(Error::Parse(_))));
        assert!(matches!(from_text("1 1\nnan"), Err(Error::Parse(_))));
    }

    proptest! {
        #[test]
        fn text_round_trip_is_exact(rows in 1usize..5, cols in 1usize..5, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<f64> = (0..rows * cols).map(|_| rng.random::<f64>() * 1e6 - 5e5).collect();
            let m = DenseMatrix::from_row_major(rows, cols, data).unwrap();
            prop_assert_eq!(from_text(&to_text(&m)).unwrap(), m);
        }
    }
}
