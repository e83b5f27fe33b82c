//! Budget-constrained coverage maximization: distribute a total interval
//! length α across entries to maximize the mean expected coverage
//! `Σ_e [2Φ(ℓ_e/(2s_e)) − 1]/E`, each interval centered at its entry's
//! estimate.
//!
//! The per-entry objective is concave in ℓ, so the optimum equalizes the
//! marginal gains `φ(ℓ_e/(2s_e))/s_e` at a common multiplier λ*:
//!
//! ```text
//! ℓ_e(λ) = 2·s_e·√(max(0, 2·ln(1/(λ·s_e·√(2π)))))
//! ```
//!
//! λ* is found by bisection on the total length (water-filling). A
//! discretized greedy allocator (marginal-gain heap) is kept alongside as an
//! independent route to the same optimum for cross-checking.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::gauss::{phi_cdf, phi_pdf};
use crate::matrix::DenseMatrix;

const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// Entries to cover, their centers (`Mᵈ_ij`), predictive spreads, and the
/// total-length budget.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationProblem {
    pub entries: Vec<(usize, usize)>,
    pub centers: Vec<f64>,
    pub s: Vec<f64>,
    pub budget: f64,
}

impl AllocationProblem {
    fn validate(&self) -> Result<()> {
        if self.centers.len() != self.entries.len() || self.s.len() != self.entries.len() {
            return Err(Error::DimensionMismatch {
                expected: (self.entries.len(), 1),
                got: (self.centers.len(), self.s.len()),
            });
        }
        if !(self.budget >= 0.0) {
            return Err(Error::InvalidConfig {
                field: "budget",
                message: alloc::format!("{} is negative", self.budget),
            });
        }
        if self.s.iter().any(|&x| !(x >= 0.0)) {
            return Err(Error::DomainViolation { what: "negative predictive spread" });
        }
        Ok(())
    }
}

/// Per-entry intervals under the budget, with the KKT multiplier and the
/// expected coverage at the allocation. Entries with `s = 0` are excluded
/// from the optimization (zero-length interval at the center) and counted.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalAllocation {
    pub entries: Vec<(usize, usize)>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub total_length: f64,
    pub multiplier: f64,
    pub expected_coverage: f64,
    pub excluded_zero_s: usize,
}

fn length_at(lambda: f64, s: f64) -> f64 {
    // φ(ℓ/(2s))/s = λ  ⇔  ℓ = 2s·√(−2·ln(λ·s·√(2π))), clipped at 0.
    let arg = lambda * s * SQRT_2PI;
    if arg >= 1.0 {
        return 0.0;
    }
    2.0 * s * libm::sqrt(-2.0 * libm::log(arg))
}

fn expected_for_length(len: f64, s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    2.0 * phi_cdf(len / (2.0 * s)) - 1.0
}

fn build_allocation(
    prob: &AllocationProblem,
    lengths: &[f64],
    multiplier: f64,
    excluded: usize,
) -> IntervalAllocation {
    let e = prob.entries.len();
    let mut lo = Vec::with_capacity(e);
    let mut hi = Vec::with_capacity(e);
    let mut total = 0.0;
    let mut cov = 0.0;
    for k in 0..e {
        let half = 0.5 * lengths[k];
        lo.push(prob.centers[k] - half);
        hi.push(prob.centers[k] + half);
        total += lengths[k];
        cov += expected_for_length(lengths[k], prob.s[k]);
    }
    let expected_coverage = if e == 0 { 0.0 } else { cov / e as f64 };
    IntervalAllocation {
        entries: prob.entries.clone(),
        lo,
        hi,
        total_length: total,
        multiplier,
        expected_coverage,
        excluded_zero_s: excluded,
    }
}

/// Exact water-filling solution of the concave allocation program.
pub fn allocate(prob: &AllocationProblem) -> Result<IntervalAllocation> {
    prob.validate()?;
    let e = prob.entries.len();
    let active: Vec<usize> = (0..e).filter(|&k| prob.s[k] > 0.0).collect();
    let excluded = e - active.len();
    let alpha = prob.budget;

    let mut lengths = vec![0.0; e];
    if active.is_empty() || alpha == 0.0 {
        let multiplier = active
            .iter()
            .map(|&k| phi_pdf(0.0) / prob.s[k])
            .fold(0.0f64, f64::max);
        return Ok(build_allocation(prob, &lengths, multiplier, excluded));
    }

    let total_at = |lambda: f64| -> f64 {
        active.iter().map(|&k| length_at(lambda, prob.s[k])).sum()
    };

    // All lengths vanish at λ ≥ max φ(0)/s. Below ~1e-300 the logs saturate:
    // treat the budget as beyond any practical marginal and split it with a
    // common standardized half-width (expected coverage is 1 to machine
    // precision there anyway).
    let lambda_hi = active.iter().map(|&k| phi_pdf(0.0) / prob.s[k]).fold(0.0f64, f64::max);
    let lambda_lo = 1e-300;
    if total_at(lambda_lo) < alpha {
        let sum_s: f64 = active.iter().map(|&k| prob.s[k]).sum();
        let t = alpha / (2.0 * sum_s);
        for &k in &active {
            lengths[k] = 2.0 * prob.s[k] * t;
        }
        return Ok(build_allocation(prob, &lengths, 0.0, excluded));
    }

    let mut u_lo = libm::log(lambda_lo);
    let mut u_hi = libm::log(lambda_hi);
    let mut lambda = libm::exp(0.5 * (u_lo + u_hi));
    for _ in 0..300 {
        lambda = libm::exp(0.5 * (u_lo + u_hi));
        let total = total_at(lambda);
        if (total - alpha).abs() <= 1e-9 * alpha {
            break;
        }
        if total > alpha {
            u_lo = libm::log(lambda);
        } else {
            u_hi = libm::log(lambda);
        }
    }
    for &k in &active {
        lengths[k] = length_at(lambda, prob.s[k]);
    }
    // Enforce feasibility exactly; the rescale is within bisection tolerance.
    let total: f64 = lengths.iter().sum();
    if total > alpha {
        let c = alpha / total;
        for l in lengths.iter_mut() {
            *l *= c;
        }
    }
    Ok(build_allocation(prob, &lengths, lambda, excluded))
}

/// Discretized greedy allocator: hand out the budget in `steps` equal slices,
/// each to the entry with the largest marginal coverage gain (ties to the
/// lowest index). Serves as the independent optimum for cross-checks.
pub fn allocate_greedy(prob: &AllocationProblem, steps: usize) -> Result<IntervalAllocation> {
    prob.validate()?;
    let e = prob.entries.len();
    let active: Vec<usize> = (0..e).filter(|&k| prob.s[k] > 0.0).collect();
    let excluded = e - active.len();
    let mut lengths = vec![0.0; e];
    if active.is_empty() || prob.budget == 0.0 || steps == 0 {
        return Ok(build_allocation(prob, &lengths, 0.0, excluded));
    }
    let delta = prob.budget / steps as f64;

    #[derive(PartialEq)]
    struct Item {
        gain: f64,
        idx: usize,
    }
    impl Eq for Item {}
    impl PartialOrd for Item {
        fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for Item {
        fn cmp(&self, other: &Self) -> core::cmp::Ordering {
            self.gain
                .partial_cmp(&other.gain)
                .unwrap()
                .then_with(|| other.idx.cmp(&self.idx))
        }
    }

    let gain = |len: f64, s: f64| expected_for_length(len + delta, s) - expected_for_length(len, s);
    let mut heap: BinaryHeap<Item> = active
        .iter()
        .map(|&k| Item { gain: gain(0.0, prob.s[k]), idx: k })
        .collect();
    for _ in 0..steps {
        let top = heap.pop().expect("non-empty heap");
        let k = top.idx;
        lengths[k] += delta;
        heap.push(Item { gain: gain(lengths[k], prob.s[k]), idx: k });
    }
    // The greedy multiplier is the smallest marginal still unserved.
    let multiplier = heap.peek().map(|i| i.gain / delta).unwrap_or(0.0);
    Ok(build_allocation(prob, &lengths, multiplier, excluded))
}

/// Mean expected coverage of an allocation under `M_e ~ N(center_e, s_e²)`:
/// `Σ_e [Φ((b−c)/s) − Φ((a−c)/s)]/E`, with `s = 0` entries contributing 0.
pub fn expected_coverage(alloc: &IntervalAllocation, centers: &[f64], s: &[f64]) -> Result<f64> {
    let e = alloc.entries.len();
    if centers.len() != e || s.len() != e {
        return Err(Error::DimensionMismatch { expected: (e, 1), got: (centers.len(), s.len()) });
    }
    if e == 0 {
        return Ok(0.0);
    }
    let mut acc = 0.0;
    for k in 0..e {
        if s[k] > 0.0 {
            acc += phi_cdf((alloc.hi[k] - centers[k]) / s[k])
                - phi_cdf((alloc.lo[k] - centers[k]) / s[k]);
        }
    }
    Ok(acc / e as f64)
}

/// Fraction of allocated entries whose true value falls inside its interval.
pub fn realized_coverage(alloc: &IntervalAllocation, truth: &DenseMatrix) -> Result<f64> {
    if alloc.entries.is_empty() {
        return Err(Error::EmptySubset);
    }
    let mut hit = 0usize;
    for (k, &(i, j)) in alloc.entries.iter().enumerate() {
        if i >= truth.rows() || j >= truth.cols() {
            return Err(Error::InvalidEntry { i, j, reason: "missing from truth matrix" });
        }
        let t = truth.get(i, j);
        if t >= alloc.lo[k] && t <= alloc.hi[k] {
            hit += 1;
        }
    }
    Ok(hit as f64 / alloc.entries.len() as f64)
}
