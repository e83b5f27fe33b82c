//! De-biased low-rank matrix completion with entrywise uncertainty
//! quantification under heterogeneous, sub-exponential noise.
//!
//! The crate is split along the pipeline:
//!
//! * [`matrix`] / [`svd`] — dense matrices, truncated SVD, norms, incoherence;
//! * [`obs`] — masked observations of a partially revealed matrix;
//! * [`estimator`] — spectral initialization, regularized factored gradient
//!   descent, and the de-biasing transform;
//! * [`uq`] — entrywise variance formulas (oracle, plug-in, residual),
//!   confidence intervals, z-scores, and normality diagnostics;
//! * [`sim`] — seeded synthetic instance generation and the Monte-Carlo
//!   coverage harness;
//! * [`covmax`] — budget-constrained interval allocation by water-filling.
//!
//! The core is `no_std` (with `alloc`); all file and process I/O lives in the
//! companion CLI crate.

#![cfg_attr(not(test), no_std)]
// Index loops deliberately mirror the summation formulas.
#![allow(clippy::needless_range_loop)]
// Negated comparisons like `!(p > 0.0)` also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::excessive_precision)]

extern crate alloc;

pub mod covmax;
pub mod error;
pub mod estimator;
pub mod gauss;
pub mod matrix;
pub mod obs;
pub mod rng;
pub mod sim;
pub mod svd;
pub mod uq;

pub use error::Error;
pub use matrix::DenseMatrix;
pub use obs::MaskedObservations;
pub use svd::SvdTriple;
