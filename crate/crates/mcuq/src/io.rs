//! File formats: UTF-8 CSV with explicit headers where stated, 0-based
//! indices, `.` decimal separator, LF line endings. Floats are written with
//! Rust's shortest round-trip formatting, so re-ingesting a file recovers
//! the exact bits — the byte-level contract the golden tests rely on.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use mcuq_core::matrix::DenseMatrix;
use mcuq_core::obs::MaskedObservations;

pub const TRIPLET_HEADER: &str = "i,j,value";

/// Parsed observation input: either sparse triplets (`i,j,value` header) or
/// a dense grid (no header, every entry observed).
#[derive(Debug)]
pub struct ObservationInput {
    pub entries: Vec<(usize, usize, f64)>,
    pub rows: usize,
    pub cols: usize,
    /// True when the file was a dense grid (fully observed, p = 1).
    pub dense: bool,
}

pub fn read_observations(path: &Path) -> Result<ObservationInput> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let mut lines = text.lines().enumerate();
    let Some((_, first)) = lines.next() else {
        bail!("{}: empty file", path.display());
    };
    if first.trim() == TRIPLET_HEADER {
        let mut entries = Vec::new();
        let (mut rows, mut cols) = (0usize, 0usize);
        for (lineno, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let parse_err = || format!("{}:{}: malformed row `{line}`", path.display(), lineno + 1);
            let i: usize = parts
                .next()
                .and_then(|s| s.trim().parse().ok())
                .with_context(parse_err)?;
            let j: usize = parts
                .next()
                .and_then(|s| s.trim().parse().ok())
                .with_context(parse_err)?;
            let v: f64 = parts
                .next()
                .and_then(|s| s.trim().parse().ok())
                .with_context(parse_err)?;
            if parts.next().is_some() {
                bail!("{}:{}: expected 3 fields", path.display(), lineno + 1);
            }
            rows = rows.max(i + 1);
            cols = cols.max(j + 1);
            entries.push((i, j, v));
        }
        if entries.is_empty() {
            bail!("{}: no data rows", path.display());
        }
        Ok(ObservationInput { entries, rows, cols, dense: false })
    } else {
        // Dense grid: parse every line as a comma-separated row.
        let mut entries = Vec::new();
        let mut cols = 0usize;
        let mut rows = 0usize;
        for (lineno, line) in std::iter::once((0usize, first)).chain(lines) {
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .with_context(|| {
                    format!("{}:{}: malformed dense row", path.display(), lineno + 1)
                })?;
            if cols == 0 {
                cols = vals.len();
            } else if vals.len() != cols {
                bail!(
                    "{}:{}: ragged dense row ({} fields, expected {cols})",
                    path.display(),
                    lineno + 1,
                    vals.len()
                );
            }
            for (j, v) in vals.into_iter().enumerate() {
                entries.push((rows, j, v));
            }
            rows += 1;
        }
        if entries.is_empty() {
            bail!("{}: no data rows", path.display());
        }
        Ok(ObservationInput { entries, rows, cols, dense: true })
    }
}

pub fn build_observations(
    input: ObservationInput,
    rows_flag: Option<usize>,
    cols_flag: Option<usize>,
    p_flag: Option<f64>,
) -> Result<MaskedObservations> {
    let rows = rows_flag.unwrap_or(input.rows);
    let cols = cols_flag.unwrap_or(input.cols);
    if rows < input.rows || cols < input.cols {
        bail!(
            "grid {rows}x{cols} smaller than the data extent {}x{}",
            input.rows,
            input.cols
        );
    }
    let p = if input.dense { p_flag.or(Some(1.0)) } else { p_flag };
    let obs = match p {
        Some(p) => MaskedObservations::with_rate(rows, cols, input.entries, p),
        None => MaskedObservations::with_estimated_rate(rows, cols, input.entries),
    }?;
    Ok(obs)
}

/// Dense CSV: one line per row, no header.
pub fn write_dense_csv(path: &Path, m: &DenseMatrix) -> Result<()> {
    let mut out = String::new();
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format!("{}", m.get(i, j)));
        }
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

/// Rows of `(i, j, md, s)` with an optional interval, under a caller-chosen
/// header.
pub fn write_rows_csv(path: &Path, header: &str, rows: &[Vec<String>]) -> Result<()> {
    let mut out = String::with_capacity(rows.len() * 24 + header.len() + 1);
    out.push_str(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

/// `i,j,md,s` rows for the covmax command.
pub fn read_interval_rows(path: &Path) -> Result<Vec<(usize, usize, f64, f64)>> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim().starts_with("i,j,md,s") => {}
        _ => bail!("{}: expected header starting with `i,j,md,s`", path.display()),
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 4 {
            bail!("{}:{}: expected at least 4 fields", path.display(), lineno + 1);
        }
        let parse = |s: &str, what: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .with_context(|| format!("{}:{}: bad {what}", path.display(), lineno + 1))
        };
        let i: usize = fields[0].trim().parse().with_context(|| {
            format!("{}:{}: bad row index", path.display(), lineno + 1)
        })?;
        let j: usize = fields[1].trim().parse().with_context(|| {
            format!("{}:{}: bad column index", path.display(), lineno + 1)
        })?;
        let md = parse(fields[2], "center")?;
        let s = parse(fields[3], "spread")?;
        rows.push((i, j, md, s));
    }
    if rows.is_empty() {
        bail!("{}: no data rows", path.display());
    }
    Ok(rows)
}

pub fn format_float(v: f64) -> String {
    format!("{v}")
}
