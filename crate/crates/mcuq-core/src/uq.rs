//! Entrywise uncertainty quantification for the de-biased estimate.
//!
//! The asymptotic standard deviation of `Mᵈ_ij − M*_ij` is
//!
//! ```text
//! s_ij² = [ Σ_l σ_lj²·(Σ_k U_ik U_lk)²  +  Σ_l σ_il²·(Σ_k V_lk V_jk)² ] / p
//! ```
//!
//! with noise-model specializations: homogeneous Gaussian
//! `σ²(‖U_i‖² + ‖V_j‖²)/p`, Poisson (`σ_lj² = M*_lj`), and Bernoulli
//! (`σ_lj² = M*_lj(1 − M*_lj)`). Empirical versions plug in `(Mᵈ, Uᵈ, Vᵈ)`,
//! or weight squared residuals on the observed set. The sums are evaluated
//! through the r×r cross-moment matrices `W_j = Σ_l σ_lj²·U_l U_lᵀ`, which
//! turns the naive O(mn(m+n)r) double loop into O(mnr²) without changing the
//! algebra.
//!
//! The Gaussian limiting law degenerates where `s_ij ≈ 0`; interval
//! construction then falls back to the conservative entrywise error bound
//! (see [`intervals_with_fallback`] and [`entrywise_bound`]). The residual
//! estimator's validity additionally assumes the per-entry noise scales are
//! comparable, which cannot be checked from data; treat its field as a
//! diagnostic in strongly unbalanced designs.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::estimator::DebiasedEstimate;
use crate::gauss::{phi_cdf, z_for_level};
use crate::matrix::{norm_max, DenseMatrix};
use crate::obs::MaskedObservations;

/// Observation noise model.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum NoiseModel {
    #[cfg_attr(feature = "serde", serde(rename = "gaussian"))]
    HomogeneousGaussian { sigma: f64 },
    Poisson,
    Binary,
    #[cfg_attr(feature = "serde", serde(rename = "oracle"))]
    HeterogeneousOracle { sigma_sq: DenseMatrix },
    Empirical,
}

impl NoiseModel {
    pub fn kind(&self) -> NoiseKind {
        match self {
            NoiseModel::HomogeneousGaussian { .. } => NoiseKind::Gaussian,
            NoiseModel::Poisson => NoiseKind::Poisson,
            NoiseModel::Binary => NoiseKind::Binary,
            NoiseModel::HeterogeneousOracle { .. } => NoiseKind::HeterogeneousOracle,
            NoiseModel::Empirical => NoiseKind::Empirical,
        }
    }
}

/// Lightweight tag identifying which formula produced a variance field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum NoiseKind {
    Gaussian,
    Poisson,
    Binary,
    HeterogeneousOracle,
    Empirical,
}

/// Per-entry standard deviations `s_ij ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceField {
    pub s: DenseMatrix,
    pub model: NoiseKind,
    pub p: f64,
}

/// Entrywise interval bounds at a confidence level.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalField {
    pub lo: DenseMatrix,
    pub hi: DenseMatrix,
    pub level: f64,
}

fn check_orthonormal(a: &DenseMatrix, tol: f64) -> Result<()> {
    let r = a.cols();
    let mut worst = 0.0f64;
    for p in 0..r {
        for q in p..r {
            let mut acc = 0.0;
            for i in 0..a.rows() {
                acc += a.get(i, p) * a.get(i, q);
            }
            let target = if p == q { 1.0 } else { 0.0 };
            worst = worst.max((acc - target).abs());
        }
    }
    if worst > tol {
        return Err(Error::NotOrthonormal { defect: worst });
    }
    Ok(())
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidConfig {
            field: "p",
            message: alloc::format!("observation rate {p} not in (0, 1]"),
        });
    }
    Ok(())
}

/// Row half of the variance sum: `out_ij += Σ_l w_lj·(Σ_k U_ik U_lk)²`,
/// with `w_lj` read through `weight(l, j)`.
fn accumulate_row_part<F: Fn(usize, usize) -> f64>(
    out: &mut DenseMatrix,
    u: &DenseMatrix,
    n: usize,
    weight: F,
) {
    let m = u.rows();
    let r = u.cols();
    let mut w = vec![0.0f64; r * r];
    for j in 0..n {
        w.iter_mut().for_each(|x| *x = 0.0);
        for l in 0..m {
            let wt = weight(l, j);
            if wt != 0.0 {
                let ul = u.row(l);
                for k in 0..r {
                    let ulk = wt * ul[k];
                    for k2 in k..r {
                        w[k * r + k2] += ulk * ul[k2];
                    }
                }
            }
        }
        for i in 0..m {
            let ui = u.row(i);
            let mut acc = 0.0;
            for k in 0..r {
                acc += ui[k] * ui[k] * w[k * r + k];
                let mut cross = 0.0;
                for k2 in k + 1..r {
                    cross += ui[k2] * w[k * r + k2];
                }
                acc += 2.0 * ui[k] * cross;
            }
            let v = out.get(i, j) + acc;
            out.set(i, j, v);
        }
    }
}

/// Column half: `out_ij += Σ_l w_il·(Σ_k V_lk V_jk)²`.
fn accumulate_col_part<F: Fn(usize, usize) -> f64>(
    out: &mut DenseMatrix,
    v: &DenseMatrix,
    m: usize,
    weight: F,
) {
    let n = v.rows();
    let r = v.cols();
    let mut w = vec![0.0f64; r * r];
    for i in 0..m {
        w.iter_mut().for_each(|x| *x = 0.0);
        for l in 0..n {
            let wt = weight(i, l);
            if wt != 0.0 {
                let vl = v.row(l);
                for k in 0..r {
                    let vlk = wt * vl[k];
                    for k2 in k..r {
                        w[k * r + k2] += vlk * vl[k2];
                    }
                }
            }
        }
        for j in 0..n {
            let vj = v.row(j);
            let mut acc = 0.0;
            for k in 0..r {
                acc += vj[k] * vj[k] * w[k * r + k];
                let mut cross = 0.0;
                for k2 in k + 1..r {
                    cross += vj[k2] * w[k * r + k2];
                }
                acc += 2.0 * vj[k] * cross;
            }
            let val = out.get(i, j) + acc;
            out.set(i, j, val);
        }
    }
}

fn field_from_variance(mut s2: DenseMatrix, p: f64, model: NoiseKind) -> VarianceField {
    for v in s2.data_mut().iter_mut() {
        *v = libm::sqrt(*v / p);
    }
    VarianceField { s: s2, model, p }
}

/// Entrywise standard deviations with known per-entry noise variances.
pub fn oracle_variance(
    u: &DenseMatrix,
    v: &DenseMatrix,
    sigma_sq: &DenseMatrix,
    p: f64,
) -> Result<VarianceField> {
    let (m, n) = (u.rows(), v.rows());
    if sigma_sq.rows() != m || sigma_sq.cols() != n || u.cols() != v.cols() {
        return Err(Error::DimensionMismatch {
            expected: (m, n),
            got: (sigma_sq.rows(), sigma_sq.cols()),
        });
    }
    check_p(p)?;
    check_orthonormal(u, 1e-8)?;
    check_orthonormal(v, 1e-8)?;
    if sigma_sq.data().iter().any(|&x| x < 0.0) {
        return Err(Error::DomainViolation { what: "negative noise variance" });
    }
    let mut s2 = DenseMatrix::zeros(m, n);
    accumulate_row_part(&mut s2, u, n, |l, j| sigma_sq.get(l, j));
    accumulate_col_part(&mut s2, v, m, |i, l| sigma_sq.get(i, l));
    Ok(field_from_variance(s2, p, NoiseKind::HeterogeneousOracle))
}

/// Homogeneous Gaussian specialization: `s_ij² = σ²(‖U_i‖² + ‖V_j‖²)/p`.
pub fn gaussian_homogeneous_variance(
    u: &DenseMatrix,
    v: &DenseMatrix,
    sigma: f64,
    p: f64,
) -> Result<VarianceField> {
    if !(sigma > 0.0) {
        return Err(Error::DomainViolation { what: "sigma must be positive" });
    }
    check_p(p)?;
    check_orthonormal(u, 1e-8)?;
    check_orthonormal(v, 1e-8)?;
    let (m, n) = (u.rows(), v.rows());
    let urow: Vec<f64> = (0..m).map(|i| u.row(i).iter().map(|x| x * x).sum()).collect();
    let vrow: Vec<f64> = (0..n).map(|j| v.row(j).iter().map(|x| x * x).sum()).collect();
    let mut s2 = DenseMatrix::zeros(m, n);
    let s2ref = s2.data_mut();
    for i in 0..m {
        for j in 0..n {
            s2ref[i * n + j] = sigma * sigma * (urow[i] + vrow[j]);
        }
    }
    Ok(field_from_variance(s2, p, NoiseKind::Gaussian))
}

/// Poisson specialization: noise variance equals the mean, `σ_lj² = M*_lj`.
pub fn poisson_variance(
    m_star: &DenseMatrix,
    u: &DenseMatrix,
    v: &DenseMatrix,
    p: f64,
) -> Result<VarianceField> {
    if m_star.data().iter().any(|&x| x < 0.0) {
        return Err(Error::DomainViolation { what: "Poisson mean must be nonnegative" });
    }
    let field = oracle_variance(u, v, m_star, p)?;
    Ok(VarianceField { model: NoiseKind::Poisson, ..field })
}

/// Bernoulli specialization: `σ_lj² = M*_lj·(1 − M*_lj)`, means in `[0, 1]`.
pub fn binary_variance(
    m_star: &DenseMatrix,
    u: &DenseMatrix,
    v: &DenseMatrix,
    p: f64,
) -> Result<VarianceField> {
    if m_star.data().iter().any(|&x| !(0.0..=1.0).contains(&x)) {
        return Err(Error::DomainViolation { what: "Bernoulli mean outside [0, 1]" });
    }
    let sig: Vec<f64> = m_star.data().iter().map(|&x| x * (1.0 - x)).collect();
    let sig = DenseMatrix::from_vec_unchecked(m_star.rows(), m_star.cols(), sig);
    let field = oracle_variance(u, v, &sig, p)?;
    Ok(VarianceField { model: NoiseKind::Binary, ..field })
}

/// Rank-one noise model for the closed forms below.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rank1Model {
    Gaussian { sigma_sq: f64 },
    Poisson,
    Binary,
}

/// Closed-form rank-one variance fields for `M* = σ₁·u·vᵀ` with unit `u, v`:
///
/// ```text
/// Gaussian:  σ²(u_i² + v_j²)/p
/// Poisson:   M*_ij(u_i·Σu³ + v_j·Σv³)/p
/// Binary:    M*_ij(u_i·Σu³ + v_j·Σv³ − M*_ij(Σu⁴ + Σv⁴))/p
/// ```
pub fn rank1_closed_form(
    model: Rank1Model,
    sigma1: f64,
    u: &[f64],
    v: &[f64],
    p: f64,
) -> Result<VarianceField> {
    check_p(p)?;
    if !(sigma1 > 0.0) {
        return Err(Error::DomainViolation { what: "sigma1 must be positive" });
    }
    let nu = libm::sqrt(u.iter().map(|x| x * x).sum::<f64>());
    let nv = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
    if (nu - 1.0).abs() > 1e-8 || (nv - 1.0).abs() > 1e-8 {
        return Err(Error::DomainViolation { what: "u and v must be unit vectors" });
    }
    let (m, n) = (u.len(), v.len());
    let mut s2 = DenseMatrix::zeros(m, n);
    match model {
        Rank1Model::Gaussian { sigma_sq } => {
            if !(sigma_sq > 0.0) {
                return Err(Error::DomainViolation { what: "sigma_sq must be positive" });
            }
            for i in 0..m {
                for j in 0..n {
                    s2.set(i, j, sigma_sq * (u[i] * u[i] + v[j] * v[j]));
                }
            }
            Ok(field_from_variance(s2, p, NoiseKind::Gaussian))
        }
        Rank1Model::Poisson | Rank1Model::Binary => {
            let u3: f64 = u.iter().map(|x| x * x * x).sum();
            let v3: f64 = v.iter().map(|x| x * x * x).sum();
            let u4: f64 = u.iter().map(|x| x * x * x * x).sum();
            let v4: f64 = v.iter().map(|x| x * x * x * x).sum();
            let binary = matches!(model, Rank1Model::Binary);
            for i in 0..m {
                for j in 0..n {
                    let mij = sigma1 * u[i] * v[j];
                    if mij < 0.0 {
                        return Err(Error::DomainViolation {
                            what: "rank-1 mean matrix has a negative entry",
                        });
                    }
                    if binary && mij > 1.0 {
                        return Err(Error::DomainViolation {
                            what: "Bernoulli mean outside [0, 1]",
                        });
                    }
                    let mut val = mij * (u[i] * u3 + v[j] * v3);
                    if binary {
                        val -= mij * mij * (u4 + v4);
                    }
                    s2.set(i, j, val.max(0.0));
                }
            }
            let kind = if binary { NoiseKind::Binary } else { NoiseKind::Poisson };
            Ok(field_from_variance(s2, p, kind))
        }
    }
}

/// Which plug-in formula to use with the fitted quantities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PluginModel {
    Gaussian,
    Poisson,
    Binary,
}

/// Empirical plug-in field: the oracle formula evaluated at
/// `(Mᵈ, Uᵈ, Vᵈ)` instead of the unknown truth. `Mᵈ` is clamped into the
/// model's domain first (Poisson: `≥ 0`; Binary: `[0, 1]`); the returned
/// count says how many entries were clamped. The Gaussian branch estimates
/// `σ̂² = Σ_Ω (O_ij − Mᵈ_ij)²/|Ω|` from the observations.
pub fn empirical_plugin_variance(
    est: &DebiasedEstimate,
    obs: &MaskedObservations,
    model: PluginModel,
    p: f64,
) -> Result<(VarianceField, usize)> {
    check_p(p)?;
    let u = &est.svd.u;
    let v = &est.svd.v;
    match model {
        PluginModel::Gaussian => {
            if obs.is_empty() {
                return Err(Error::EmptyObservations);
            }
            let mut acc = 0.0;
            for &(i, j, o) in obs.entries() {
                let e = o - est.md.get(i, j);
                acc += e * e;
            }
            let sig = libm::sqrt(acc / obs.len() as f64);
            if sig == 0.0 {
                // Degenerate fit: zero residuals give a zero field.
                let s = DenseMatrix::zeros(est.rows(), est.cols());
                return Ok((VarianceField { s, model: NoiseKind::Gaussian, p }, 0));
            }
            Ok((gaussian_homogeneous_variance(u, v, sig, p)?, 0))
        }
        PluginModel::Poisson => {
            let mut clamped = 0usize;
            let data: Vec<f64> = est
                .md
                .data()
                .iter()
                .map(|&x| {
                    if x < 0.0 {
                        clamped += 1;
                        0.0
                    } else {
                        x
                    }
                })
                .collect();
            let md = DenseMatrix::from_vec_unchecked(est.rows(), est.cols(), data);
            let field = poisson_variance(&md, u, v, p)?;
            Ok((field, clamped))
        }
        PluginModel::Binary => {
            let mut clamped = 0usize;
            let data: Vec<f64> = est
                .md
                .data()
                .iter()
                .map(|&x| {
                    if !(0.0..=1.0).contains(&x) {
                        clamped += 1;
                        x.clamp(0.0, 1.0)
                    } else {
                        x
                    }
                })
                .collect();
            let md = DenseMatrix::from_vec_unchecked(est.rows(), est.cols(), data);
            let field = binary_variance(&md, u, v, p)?;
            Ok((field, clamped))
        }
    }
}

/// Residual-weighted variance estimate for one entry:
///
/// ```text
/// ŝ_ij² = (1/p)·[ Σ_{l:(l,j)∈Ω} (1/p)·Ê_lj²·(Σ_k Uᵈ_ik Uᵈ_lk)²
///               + Σ_{l:(i,l)∈Ω} (1/p)·Ê_il²·(Σ_k Vᵈ_lk Vᵈ_jk)² ]
/// ```
///
/// with `Ê = O − Mᵈ` on the observed set. Returns the *variance* (ŝ²); it is
/// zero when both column `j` and row `i` carry no observations.
pub fn empirical_residual_variance(
    obs: &MaskedObservations,
    est: &DebiasedEstimate,
    i: usize,
    j: usize,
) -> f64 {
    let u = &est.svd.u;
    let v = &est.svd.v;
    let p = est.p_used;
    let mut acc = 0.0;
    for &(l, jj, o) in obs.entries() {
        if jj == j {
            let e = o - est.md.get(l, jj);
            let mut dot = 0.0;
            for (a, b) in u.row(i).iter().zip(u.row(l)) {
                dot += a * b;
            }
            acc += (e * e / p) * dot * dot;
        }
        if l == i {
            let e = o - est.md.get(l, jj);
            let mut dot = 0.0;
            for (a, b) in v.row(jj).iter().zip(v.row(j)) {
                dot += a * b;
            }
            acc += (e * e / p) * dot * dot;
        }
    }
    acc / p
}

/// Residual-weighted field over every entry, plus the count of entries whose
/// row and column are both unobserved (those get `s = 0`).
pub fn residual_variance_field(
    obs: &MaskedObservations,
    est: &DebiasedEstimate,
) -> (VarianceField, usize) {
    let (m, n) = (est.rows(), est.cols());
    let p = est.p_used;
    let mut wmat = DenseMatrix::zeros(m, n);
    let mut row_seen = vec![false; m];
    let mut col_seen = vec![false; n];
    for &(i, j, o) in obs.entries() {
        let e = o - est.md.get(i, j);
        wmat.set(i, j, e * e / p);
        row_seen[i] = true;
        col_seen[j] = true;
    }
    let mut s2 = DenseMatrix::zeros(m, n);
    accumulate_row_part(&mut s2, &est.svd.u, n, |l, j| wmat.get(l, j));
    accumulate_col_part(&mut s2, &est.svd.v, m, |i, l| wmat.get(i, l));
    let mut no_data = 0usize;
    for i in 0..m {
        for j in 0..n {
            if !row_seen[i] && !col_seen[j] {
                no_data += 1;
            }
        }
    }
    (field_from_variance(s2, p, NoiseKind::Empirical), no_data)
}

/// Central intervals `Mᵈ_ij ± z·s_ij` with `z = Φ⁻¹((1 + level)/2)`.
pub fn intervals(md: &DenseMatrix, s: &VarianceField, level: f64) -> Result<IntervalField> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidConfig {
            field: "level",
            message: alloc::format!("{level} not in (0, 1)"),
        });
    }
    if md.rows() != s.s.rows() || md.cols() != s.s.cols() {
        return Err(Error::DimensionMismatch {
            expected: (md.rows(), md.cols()),
            got: (s.s.rows(), s.s.cols()),
        });
    }
    let z = z_for_level(level);
    let lo: Vec<f64> =
        md.data().iter().zip(s.s.data()).map(|(c, sd)| c - z * sd).collect();
    let hi: Vec<f64> =
        md.data().iter().zip(s.s.data()).map(|(c, sd)| c + z * sd).collect();
    Ok(IntervalField {
        lo: DenseMatrix::from_vec_unchecked(md.rows(), md.cols(), lo),
        hi: DenseMatrix::from_vec_unchecked(md.rows(), md.cols(), hi),
        level,
    })
}

/// Default factor for treating an entry's `s` as degenerate relative to
/// `‖Mᵈ‖_max`.
pub const DEGENERATE_S_FACTOR: f64 = 1e-8;

/// Intervals with the degenerate-`s` fallback: where
/// `s_ij < threshold_factor·‖Mᵈ‖_max` the Gaussian half-width is replaced by
/// the conservative entrywise bound. Returns the number of replaced entries.
pub fn intervals_with_fallback(
    md: &DenseMatrix,
    s: &VarianceField,
    level: f64,
    fallback_halfwidth: f64,
    threshold_factor: f64,
) -> Result<(IntervalField, usize)> {
    let mut iv = intervals(md, s, level)?;
    let threshold = threshold_factor * norm_max(md);
    let mut replaced = 0usize;
    let (mrows, mcols) = (md.rows(), md.cols());
    for i in 0..mrows {
        for j in 0..mcols {
            if s.s.get(i, j) < threshold {
                replaced += 1;
                let c = md.get(i, j);
                iv.lo.set(i, j, c - fallback_halfwidth);
                iv.hi.set(i, j, c + fallback_halfwidth);
            }
        }
    }
    Ok((iv, replaced))
}

/// Fraction of entries (all, or the given subset) whose true value lies in
/// its interval.
pub fn coverage_rate(
    iv: &IntervalField,
    truth: &DenseMatrix,
    subset: Option<&[(usize, usize)]>,
) -> Result<f64> {
    if truth.rows() != iv.lo.rows() || truth.cols() != iv.lo.cols() {
        return Err(Error::DimensionMismatch {
            expected: (iv.lo.rows(), iv.lo.cols()),
            got: (truth.rows(), truth.cols()),
        });
    }
    let mut hit = 0usize;
    let mut total = 0usize;
    match subset {
        Some(list) => {
            for &(i, j) in list {
                if i >= truth.rows() || j >= truth.cols() {
                    return Err(Error::InvalidEntry { i, j, reason: "outside the grid" });
                }
                total += 1;
                let t = truth.get(i, j);
                if t >= iv.lo.get(i, j) && t <= iv.hi.get(i, j) {
                    hit += 1;
                }
            }
        }
        None => {
            total = truth.rows() * truth.cols();
            for i in 0..truth.rows() {
                for j in 0..truth.cols() {
                    let t = truth.get(i, j);
                    if t >= iv.lo.get(i, j) && t <= iv.hi.get(i, j) {
                        hit += 1;
                    }
                }
            }
        }
    }
    if total == 0 {
        return Err(Error::EmptySubset);
    }
    Ok(hit as f64 / total as f64)
}

/// Standardized errors `z_ij = (Mᵈ_ij − truth_ij)/s_ij` in row-major order,
/// plus the count of entries excluded because `s_ij = 0`.
pub fn zscores(
    md: &DenseMatrix,
    truth: &DenseMatrix,
    s: &VarianceField,
) -> (Vec<f64>, usize) {
    let mut out = Vec::with_capacity(md.rows() * md.cols());
    let mut excluded = 0usize;
    for i in 0..md.rows() {
        for j in 0..md.cols() {
            let sd = s.s.get(i, j);
            if sd > 0.0 {
                out.push((md.get(i, j) - truth.get(i, j)) / sd);
            } else {
                excluded += 1;
            }
        }
    }
    (out, excluded)
}

/// One-sample Kolmogorov–Smirnov distance between the sample and the
/// standard normal, `sup_t |F̂(t) − Φ(t)|` evaluated at the sample points.
/// NaN on an empty sample.
pub fn ks_statistic(z: &[f64]) -> f64 {
    if z.is_empty() {
        return f64::NAN;
    }
    let mut sorted: Vec<f64> = z.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (idx, &x) in sorted.iter().enumerate() {
        let cdf = phi_cdf(x);
        let above = (idx as f64 + 1.0) / n - cdf;
        let below = cdf - idx as f64 / n;
        d = d.max(above).max(below);
    }
    d
}

/// Conservative entrywise half-width `κ·μ·r·L̂·√(ln(n)/(m·p))` used when the
/// Gaussian approximation degenerates (`m = min(dims)`, `n = max(dims)`).
pub fn entrywise_bound(
    est: &DebiasedEstimate,
    l_hat: f64,
    mu: f64,
    r: usize,
    kappa: f64,
    p: f64,
) -> f64 {
    let m_eff = est.rows().min(est.cols()) as f64;
    let n_eff = est.rows().max(est.cols()) as f64;
    kappa * mu * r as f64 * l_hat * libm::sqrt(libm::log(n_eff) / (m_eff * p))
}

/// Proxy for the sub-exponential scale: the 99th percentile (nearest rank) of
/// the absolute residuals `|O − Mᵈ|` on the observed set.
pub fn l_hat_proxy(obs: &MaskedObservations, est: &DebiasedEstimate) -> f64 {
    if obs.is_empty() {
        return 0.0;
    }
    let mut resid: Vec<f64> = obs
        .entries()
        .iter()
        .map(|&(i, j, o)| (o - est.md.get(i, j)).abs())
        .collect();
    resid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = resid.len();
    let idx = (libm::ceil(0.99 * n as f64) as usize).clamp(1, n) - 1;
    resid[idx]
}
