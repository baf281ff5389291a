//! On-disk formats: Matrix Market for matrices, one value per line for
//! vectors, CSV or JSON for traces.
//!
//! Floats are written in shortest round-trip scientific notation, so files are
//! reproducible byte for byte and reload to the same bits.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use ashbm::analysis::TraceRecord;
use ashbm::matrix::Storage;
use ashbm::Matrix;

use crate::config::OutputFormat;
use crate::error::{CliError, CliResult};

pub const TRACE_HEADER: &str = "k,rse,residual_norm,alpha,beta,wall_nanos,moved";

/// Dense matrices are written in array format (column-major), sparse ones in
/// coordinate format with 1-based indices.
pub fn matrix_market_string(a: &Matrix) -> String {
    let (m, n) = (a.rows(), a.cols());
    let mut out = String::new();
    match a.storage() {
        Storage::Dense(values) => {
            out.push_str("%%MatrixMarket matrix array real general\n");
            writeln!(out, "{m} {n}").unwrap();
            for j in 0..n {
                for i in 0..m {
                    writeln!(out, "{:e}", values[i * n + j]).unwrap();
                }
            }
        }
        Storage::Sparse { offsets, indices, values } => {
            out.push_str("%%MatrixMarket matrix coordinate real general\n");
            writeln!(out, "{m} {n} {}", values.len()).unwrap();
            for i in 0..m {
                for k in offsets[i]..offsets[i + 1] {
                    writeln!(out, "{} {} {:e}", i + 1, indices[k] + 1, values[k]).unwrap();
                }
            }
        }
    }
    out
}

pub fn write_matrix_market(path: &Path, a: &Matrix) -> CliResult<()> {
    fs::write(path, matrix_market_string(a))?;
    Ok(())
}

pub fn write_vector(path: &Path, v: &[f64]) -> CliResult<()> {
    let mut out = String::with_capacity(v.len() * 24);
    for x in v {
        writeln!(out, "{x:e}").unwrap();
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads one value per line; blank lines and lines starting with `%` or `#` are skipped.
pub fn read_vector(path: &Path) -> CliResult<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    let mut v = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') || t.starts_with('#') {
            continue;
        }
        let x = t.parse().map_err(|_| {
            CliError::Config(format!("{}:{}: not a number: {t:?}", path.display(), i + 1))
        })?;
        v.push(x);
    }
    Ok(v)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

pub fn trace_csv(trace: &[TraceRecord]) -> String {
    let mut out = String::with_capacity(64 * (trace.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for t in trace {
        writeln!(
            out,
            "{},{},{},{:e},{:e},{},{}",
            t.k,
            opt(t.rse),
            opt(t.residual_norm),
            t.alpha,
            t.beta,
            t.wall_nanos,
            t.moved
        )
        .unwrap();
    }
    out
}

pub fn write_trace(path: &Path, trace: &[TraceRecord], format: OutputFormat) -> CliResult<()> {
    let mut file = fs::File::create(path)?;
    match format {
        OutputFormat::Csv => file.write_all(trace_csv(trace).as_bytes())?,
        OutputFormat::Json => {
            serde_json::to_writer(&mut file, trace).map_err(std::io::Error::from)?;
            file.write_all(b"\n")?;
        }
    }
    Ok(())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::from)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}
