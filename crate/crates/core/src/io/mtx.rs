//! Matrix Market coordinate files.
//!
//! Accepts `%%MatrixMarket matrix coordinate <real|integer|pattern>
//! <general|symmetric>`. Indices are 1-based on disk. Pattern entries get value
//! 1, symmetric files mirror every off-diagonal entry, duplicates are summed.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::csr::CsrMatrix;
use crate::error::MatrixError;
use crate::scalar::{ColIndex, Scalar};

#[derive(Debug, Error)]
pub enum MtxError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Matrix(#[from] MatrixError),

    #[error(transparent)]
    Io(#[from] io::Error),
}

fn parse_err(line: usize, msg: impl Into<String>) -> MtxError {
    MtxError::Parse {
        line,
        msg: msg.into(),
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Field {
    Real,
    Integer,
    Pattern,
}

pub fn read_matrix_market<T: Scalar>(path: impl AsRef<Path>) -> Result<CsrMatrix<T>, MtxError> {
    parse_matrix_market(BufReader::new(File::open(path)?))
}

pub fn parse_matrix_market<T: Scalar, R: BufRead>(reader: R) -> Result<CsrMatrix<T>, MtxError> {
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (lineno, header) = match lines.next() {
        Some((n, l)) => (n, l?),
        None => return Err(parse_err(1, "empty file")),
    };
    let tokens: Vec<String> = header
        .split_whitespace()
        .map(str::to_ascii_lowercase)
        .collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(parse_err(lineno, format!("malformed header: {header:?}")));
    }
    if tokens[2] != "coordinate" {
        return Err(parse_err(
            lineno,
            format!("unsupported format {:?}", tokens[2]),
        ));
    }
    let field = match tokens[3].as_str() {
        "real" => Field::Real,
        "integer" => Field::Integer,
        "pattern" => Field::Pattern,
        other => return Err(parse_err(lineno, format!("unsupported field {other:?}"))),
    };
    let symmetric = match tokens[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(parse_err(lineno, format!("unsupported symmetry {other:?}"))),
    };

    let mut size = None;
    let mut entries: Vec<(usize, usize, T)> = Vec::new();
    let mut seen = 0usize;
    for (lineno, line) in lines {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let mut parts = trimmed.split_whitespace();
        let Some((m, n, nnz)) = size else {
            let mut next = || -> Result<usize, MtxError> {
                let tok = parts
                    .next()
                    .ok_or_else(|| parse_err(lineno, "size line needs m n nnz"))?;
                tok.parse()
                    .map_err(|_| parse_err(lineno, format!("invalid size {tok:?}")))
            };
            let dims = (next()?, next()?, next()?);
            if parts.next().is_some() {
                return Err(parse_err(lineno, "size line has extra fields"));
            }
            entries.reserve(if symmetric { 2 * dims.2 } else { dims.2 });
            size = Some(dims);
            continue;
        };
        let mut index = |what: &str, bound: usize| -> Result<usize, MtxError> {
            let tok = parts
                .next()
                .ok_or_else(|| parse_err(lineno, format!("missing {what} index")))?;
            let i: usize = tok
                .parse()
                .map_err(|_| parse_err(lineno, format!("invalid {what} index {tok:?}")))?;
            if i == 0 || i > bound {
                return Err(parse_err(
                    lineno,
                    format!("{what} index {i} out of declared bounds 1..={bound}"),
                ));
            }
            Ok(i - 1)
        };
        let r = index("row", m)?;
        let c = index("column", n)?;
        let v = match field {
            Field::Pattern => T::one(),
            Field::Real | Field::Integer => {
                let tok = parts
                    .next()
                    .ok_or_else(|| parse_err(lineno, "missing value"))?;
                let v: f64 = tok
                    .parse()
                    .map_err(|_| parse_err(lineno, format!("non-numeric value {tok:?}")))?;
                if field == Field::Integer && v.fract() != 0.0 {
                    return Err(parse_err(lineno, format!("non-integer value {tok:?}")));
                }
                T::from_f64(v)
            }
        };
        if parts.next().is_some() {
            return Err(parse_err(lineno, "entry has extra fields"));
        }
        seen += 1;
        if seen > nnz {
            return Err(parse_err(
                lineno,
                format!("more than the declared {nnz} entries"),
            ));
        }
        entries.push((r, c, v));
        if symmetric && r != c {
            entries.push((c, r, v));
        }
    }
    let Some((m, n, nnz)) = size else {
        return Err(parse_err(lineno + 1, "missing size line"));
    };
    if seen != nnz {
        return Err(parse_err(
            0,
            format!("declared {nnz} entries, found {seen}"),
        ));
    }
    Ok(CsrMatrix::from_coo(&entries, m, n)?)
}

/// Writes `coordinate real general` with 1-based indices in storage order.
pub fn write_matrix_market<T: Scalar, I: ColIndex>(
    a: &CsrMatrix<T, I>,
    path: impl AsRef<Path>,
) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.nrows(), a.ncols(), a.nnz())?;
    for (r, c, v) in a.to_coo() {
        writeln!(w, "{} {} {}", r + 1, c + 1, v)?;
    }
    w.flush()
}
