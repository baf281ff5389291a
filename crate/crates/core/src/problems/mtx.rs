//! Matrix Market text reader.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Clone, Copy, Debug, PartialEq)]
enum Format {
    Coordinate,
    Array,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Field {
    Real,
    Integer,
    Pattern,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Symmetry {
    General,
    Symmetric,
    SkewSymmetric,
}

/// Reads a real-valued Matrix Market file.
///
/// Coordinate files produce CSR storage, array files dense storage.
/// Symmetric and skew-symmetric files are expanded, duplicates are summed and
/// pattern entries get the value 1.
pub fn load_matrix_market(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_with_path(&text, path.to_path_buf())
}

pub fn parse_matrix_market(text: &str) -> Result<Matrix> {
    parse_with_path(text, PathBuf::from("<input>"))
}

fn parse_with_path(text: &str, path: PathBuf) -> Result<Matrix> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.clone(),
        line,
        message,
    };

    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let tokens: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(err(1, format!("malformed header: {header:?}")));
    }
    let format = match tokens[2].as_str() {
        "coordinate" => Format::Coordinate,
        "array" => Format::Array,
        other => return Err(err(1, format!("unknown format {other:?}"))),
    };
    let field = match tokens[3].as_str() {
        "real" | "double" => Field::Real,
        "integer" => Field::Integer,
        "pattern" => Field::Pattern,
        "complex" => return Err(Error::Unsupported("complex Matrix Market field".into())),
        other => return Err(err(1, format!("unknown field {other:?}"))),
    };
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::SkewSymmetric,
        "hermitian" => return Err(Error::Unsupported("hermitian Matrix Market symmetry".into())),
        other => return Err(err(1, format!("unknown symmetry {other:?}"))),
    };
    if format == Format::Array && field == Field::Pattern {
        return Err(err(1, "pattern field is only valid for coordinate format".into()));
    }

    let mut data = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });

    let (size_line, size) = data.next().ok_or_else(|| err(2, "missing size line".into()))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| err(size_line, format!("bad size line: {e}")))?;

    let parse_value = |line: usize, tok: Option<&str>| -> Result<f64> {
        let tok = tok.ok_or_else(|| err(line, "missing value".into()))?;
        tok.parse::<f64>()
            .map_err(|e| err(line, format!("bad value {tok:?}: {e}")))
    };

    match format {
        Format::Coordinate => {
            let [rows, cols, nnz] = dims[..] else {
                return Err(err(size_line, "coordinate size line needs rows cols nnz".into()));
            };
            if symmetry != Symmetry::General && rows != cols {
                return Err(err(size_line, "symmetric matrix must be square".into()));
            }
            let mut triplets = Vec::with_capacity(nnz * 2);
            let mut seen = 0usize;
            for (line, entry) in data {
                let mut it = entry.split_whitespace();
                let mut index = |name: &str, limit: usize| -> Result<usize> {
                    let tok = it.next().ok_or_else(|| err(line, format!("missing {name} index")))?;
                    let v: usize = tok
                        .parse()
                        .map_err(|e| err(line, format!("bad {name} index {tok:?}: {e}")))?;
                    if v == 0 || v > limit {
                        return Err(err(line, format!("{name} index {v} out of range 1..={limit}")));
                    }
                    Ok(v - 1)
                };
                let i = index("row", rows)?;
                let j = index("column", cols)?;
                let v = match field {
                    Field::Pattern => 1.0,
                    _ => parse_value(line, it.next())?,
                };
                triplets.push((i, j, v));
                if i != j {
                    match symmetry {
                        Symmetry::General => {}
                        Symmetry::Symmetric => triplets.push((j, i, v)),
                        Symmetry::SkewSymmetric => triplets.push((j, i, -v)),
                    }
                }
                seen += 1;
            }
            if seen != nnz {
                return Err(err(size_line, format!("expected {nnz} entries, found {seen}")));
            }
            Matrix::from_triplets(rows, cols, &triplets)
        }
        Format::Array => {
            let [rows, cols] = dims[..] else {
                return Err(err(size_line, "array size line needs rows cols".into()));
            };
            if symmetry != Symmetry::General && rows != cols {
                return Err(err(size_line, "symmetric matrix must be square".into()));
            }
            let mut values = vec![0.0; rows * cols];
            // Column-major; symmetric variants store the lower triangle only.
            let mut slots = (0..cols).flat_map(|j| {
                let start = match symmetry {
                    Symmetry::General => 0,
                    Symmetry::Symmetric => j,
                    Symmetry::SkewSymmetric => j + 1,
                };
                (start..rows).map(move |i| (i, j))
            });
            let mut last_line = size_line;
            for (line, entry) in data {
                last_line = line;
                for tok in entry.split_whitespace() {
                    let (i, j) = slots
                        .next()
                        .ok_or_else(|| err(line, "more values than the declared size".into()))?;
                    let v = parse_value(line, Some(tok))?;
                    values[i * cols + j] = v;
                    match symmetry {
                        Symmetry::General => {}
                        Symmetry::Symmetric => values[j * cols + i] = v,
                        Symmetry::SkewSymmetric => values[j * cols + i] = -v,
                    }
                }
            }
            if slots.next().is_some() {
                return Err(err(last_line, "fewer values than the declared size".into()));
            }
            Matrix::from_row_major(rows, cols, values)
        }
    }
}
