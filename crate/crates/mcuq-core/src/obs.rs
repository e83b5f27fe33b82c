//! Masked observations: the revealed entries of a partially observed matrix,
//! with the sampling rate `p` either supplied or estimated as `|Ω|/(m·n)`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// Sparse set of observed entries of an `m × n` matrix.
///
/// Entries are stored sorted by `(i, j)`; every summation over Ω runs in
/// that order, so results are reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedObservations {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
    p: f64,
    p_estimated: bool,
}

impl MaskedObservations {
    /// Builds an observation set with a known sampling rate.
    pub fn with_rate(
        rows: usize,
        cols: usize,
        entries: Vec<(usize, usize, f64)>,
        p: f64,
    ) -> Result<Self> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidConfig {
                field: "p",
                message: alloc::format!("observation rate {p} not in (0, 1]"),
            });
        }
        Self::build(rows, cols, entries, p, false)
    }

    /// Builds an observation set, estimating `p = |Ω|/(m·n)` (clamped to
    /// `[1/(m·n), 1]`) and flagging it as estimated.
    pub fn with_estimated_rate(
        rows: usize,
        cols: usize,
        entries: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyObservations);
        }
        let mn = (rows * cols) as f64;
        let p = ((entries.len() as f64) / mn).clamp(1.0 / mn, 1.0);
        Self::build(rows, cols, entries, p, true)
    }

    fn build(
        rows: usize,
        cols: usize,
        mut entries: Vec<(usize, usize, f64)>,
        p: f64,
        p_estimated: bool,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidConfig {
                field: "dims",
                message: alloc::format!("grid {rows}x{cols} is empty"),
            });
        }
        for &(i, j, v) in &entries {
            if i >= rows || j >= cols {
                return Err(Error::InvalidEntry { i, j, reason: "index out of range" });
            }
            if !v.is_finite() {
                return Err(Error::InvalidEntry { i, j, reason: "non-finite value" });
            }
        }
        entries.sort_by_key(|e| (e.0, e.1));
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 && w[0].1 == w[1].1 {
                return Err(Error::InvalidEntry {
                    i: w[0].0,
                    j: w[0].1,
                    reason: "duplicate index",
                });
            }
        }
        Ok(Self { rows, cols, entries, p, p_estimated })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Observed triples sorted by `(i, j)`.
    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn p_estimated(&self) -> bool {
        self.p_estimated
    }

    /// Dense `(1/p)·P_Ω(O)` used by the spectral initialization.
    pub fn rescaled_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        let inv_p = 1.0 / self.p;
        for &(i, j, v) in &self.entries {
            out.set(i, j, v * inv_p);
        }
        out
    }
}

/// Maximum-likelihood estimate of the observation rate under uniform
/// sampling: `|Ω|/(m·n)`, clamped to `[1/(m·n), 1]`. Errors when nothing was
/// observed.
pub fn estimate_p(obs: &MaskedObservations) -> Result<f64> {
    if obs.is_empty() {
        return Err(Error::EmptyObservations);
    }
    let mn = (obs.rows() * obs.cols()) as f64;
    Ok(((obs.len() as f64) / mn).clamp(1.0 / mn, 1.0))
}
