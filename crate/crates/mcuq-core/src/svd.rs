//! Truncated singular value decomposition and incoherence measurement.
//!
//! The dense path is a one-sided (Hestenes) Jacobi SVD: cyclic column
//! rotations until all column pairs are orthogonal. It is deterministic,
//! accurate to near machine precision in every singular value, and has no
//! special cases for clustered or zero singular values. Above
//! `SUBSPACE_THRESHOLD` on the short side, a seeded block subspace iteration
//! computes just the leading subspace instead.
//!
//! Sign convention: within each column of `U` the entry of largest absolute
//! value is nonnegative (ties broken by lowest row index), and `V`'s sign
//! follows. Together with the fixed rotation order this makes every
//! decomposition bitwise reproducible. When singular values repeat, the
//! returned basis of the shared subspace is arbitrary; consumers should rely
//! only on subspace projectors.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::rng::RngStream;

/// Short-side size beyond which `truncated_svd` switches from the dense
/// Jacobi path to block subspace iteration.
pub const SUBSPACE_THRESHOLD: usize = 2000;

const JACOBI_TOL: f64 = 1e-14;
const JACOBI_MAX_SWEEPS: usize = 60;

/// A rank-`r` singular triple `U · diag(sigma) · Vᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdTriple {
    /// `m × r`, orthonormal columns.
    pub u: DenseMatrix,
    /// Non-increasing, nonnegative singular values.
    pub sigma: Vec<f64>,
    /// `n × r`, orthonormal columns.
    pub v: DenseMatrix,
}

impl SvdTriple {
    /// `U · diag(sigma) · Vᵀ`.
    pub fn reconstruct(&self) -> DenseMatrix {
        let m = self.u.rows();
        let n = self.v.rows();
        let r = self.sigma.len();
        let mut out = DenseMatrix::zeros(m, n);
        for i in 0..m {
            for k in 0..r {
                let c = self.u.get(i, k) * self.sigma[k];
                if c == 0.0 {
                    continue;
                }
                for j in 0..n {
                    let v = out.get(i, j) + c * self.v.get(j, k);
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    /// Largest orthonormality defect `max(‖UᵀU − I‖_max, ‖VᵀV − I‖_max)`
    /// plus a check that sigma is sorted and nonnegative.
    pub fn validate(&self) -> Result<()> {
        let defect = ortho_defect(&self.u).max(ortho_defect(&self.v));
        if defect > 1e-10 {
            return Err(Error::NotOrthonormal { defect });
        }
        for w in self.sigma.windows(2) {
            if w[1] > w[0] {
                return Err(Error::InvalidConfig {
                    field: "sigma",
                    message: alloc::string::String::from("singular values not sorted"),
                });
            }
        }
        if self.sigma.iter().any(|&s| s < 0.0) {
            return Err(Error::InvalidConfig {
                field: "sigma",
                message: alloc::string::String::from("negative singular value"),
            });
        }
        Ok(())
    }
}

fn ortho_defect(a: &DenseMatrix) -> f64 {
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
    worst
}

/// Top-`r` singular triple of `a`.
pub fn truncated_svd(a: &DenseMatrix, r: usize) -> Result<SvdTriple> {
    let (m, n) = (a.rows(), a.cols());
    let maxr = m.min(n);
    if r == 0 || r > maxr {
        return Err(Error::RankOutOfRange { r, max: maxr });
    }
    if maxr > SUBSPACE_THRESHOLD {
        return subspace_svd(a, r, 1e-10, 500);
    }
    let (u, sigma, v) = if m >= n {
        jacobi_svd_tall(a)
    } else {
        let (vt, sigma, ut) = jacobi_svd_tall(&a.transpose());
        (ut, sigma, vt)
    };
    Ok(truncate_with_signs(u, sigma, v, r))
}

/// One-sided Jacobi on a tall matrix (`m ≥ n`). Returns column-major
/// `(left m×n, sigma, right n×n)` before sorting or sign fixing.
fn jacobi_svd_tall(a: &DenseMatrix) -> (Vec<Vec<f64>>, Vec<f64>, Vec<Vec<f64>>) {
    let (m, n) = (a.rows(), a.cols());
    debug_assert!(m >= n);

    // Column-major working copies.
    let mut g: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| a.get(i, j)).collect()).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut col = vec![0.0; n];
            col[j] = 1.0;
            col
        })
        .collect();

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut norms: Vec<f64> = g.iter().map(|c| c.iter().map(|x| x * x).sum()).collect();
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let (head, tail) = g.split_at_mut(q);
                let gp = &mut head[p];
                let gq = &mut tail[0];
                let mut gamma = 0.0;
                for (x, y) in gp.iter().zip(gq.iter()) {
                    gamma += x * y;
                }
                let alpha = norms[p];
                let beta = norms[q];
                if gamma.abs() <= JACOBI_TOL * libm::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = {
                    let sign = if zeta >= 0.0 { 1.0 } else { -1.0 };
                    sign / (zeta.abs() + libm::sqrt(1.0 + zeta * zeta))
                };
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = c * t;
                for (x, y) in gp.iter_mut().zip(gq.iter_mut()) {
                    let xp = *x;
                    *x = c * xp - s * *y;
                    *y = s * xp + c * *y;
                }
                let (vhead, vtail) = v.split_at_mut(q);
                let vp = &mut vhead[p];
                let vq = &mut vtail[0];
                for (x, y) in vp.iter_mut().zip(vq.iter_mut()) {
                    let xp = *x;
                    *x = c * xp - s * *y;
                    *y = s * xp + c * *y;
                }
                norms[p] = alpha - t * gamma;
                norms[q] = beta + t * gamma;
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sigma = vec![0.0; n];
    for j in 0..n {
        let s = libm::sqrt(g[j].iter().map(|x| x * x).sum::<f64>());
        sigma[j] = s;
    }
    let smax = sigma.iter().fold(0.0f64, |a, &b| a.max(b));
    let tiny = smax * 1e-14;
    let mut left = g;
    let mut degenerate: Vec<usize> = Vec::new();
    for j in 0..n {
        if sigma[j] > tiny && sigma[j] > 0.0 {
            let inv = 1.0 / sigma[j];
            for x in left[j].iter_mut() {
                *x *= inv;
            }
        } else {
            degenerate.push(j);
        }
    }
    complete_orthonormal(&mut left, &degenerate, m);
    (left, sigma, v)
}

/// Replaces near-null columns with a deterministic orthonormal completion:
/// for each slot, the standard basis vector with the largest residual after
/// projecting out every other column (lowest index on ties).
fn complete_orthonormal(cols: &mut [Vec<f64>], slots: &[usize], m: usize) {
    for &slot in slots {
        let mut best: Option<(f64, Vec<f64>)> = None;
        for k in 0..m {
            let mut cand = vec![0.0; m];
            cand[k] = 1.0;
            for (j, col) in cols.iter().enumerate() {
                if j == slot {
                    continue;
                }
                // Only subtract unit-norm columns (filled ones).
                let dot: f64 = col.iter().zip(cand.iter()).map(|(a, b)| a * b).sum();
                let nrm: f64 = col.iter().map(|x| x * x).sum();
                if (nrm - 1.0).abs() > 1e-6 {
                    continue;
                }
                for (c, a) in cand.iter_mut().zip(col.iter()) {
                    *c -= dot * a;
                }
            }
            let nrm = libm::sqrt(cand.iter().map(|x| x * x).sum::<f64>());
            if best.as_ref().is_none_or(|(b, _)| nrm > *b) {
                best = Some((nrm, cand));
            }
        }
        let (nrm, mut cand) = best.expect("m > 0");
        for x in cand.iter_mut() {
            *x /= nrm;
        }
        cols[slot] = cand;
    }
}

/// Sorts by descending singular value (stable), applies the sign convention,
/// and truncates to rank `r`.
fn truncate_with_signs(
    left: Vec<Vec<f64>>,
    sigma: Vec<f64>,
    right: Vec<Vec<f64>>,
    r: usize,
) -> SvdTriple {
    let m = left[0].len();
    let n = right[0].len();
    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&a, &b| sigma[b].partial_cmp(&sigma[a]).unwrap().then(a.cmp(&b)));

    let mut u = DenseMatrix::zeros(m, r);
    let mut v = DenseMatrix::zeros(n, r);
    let mut s = vec![0.0; r];
    for (dst, &src) in order.iter().take(r).enumerate() {
        s[dst] = sigma[src];
        // Sign convention: largest-|entry| element of the U column must be
        // nonnegative; first occurrence wins on ties.
        let col = &left[src];
        let mut pivot = 0usize;
        let mut best = col[0].abs();
        for (i, &x) in col.iter().enumerate().skip(1) {
            if x.abs() > best {
                best = x.abs();
                pivot = i;
            }
        }
        let flip = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..m {
            u.set(i, dst, flip * col[i]);
        }
        for i in 0..n {
            v.set(i, dst, flip * right[src][i]);
        }
    }
    SvdTriple { u, sigma: s, v }
}

/// Block subspace iteration for the leading `r` triple of a large matrix.
/// Seeded start, deterministic Gram–Schmidt, tolerance on the singular-value
/// estimates.
fn subspace_svd(a: &DenseMatrix, r: usize, tol: f64, max_sweeps: usize) -> Result<SvdTriple> {
    let (m, n) = (a.rows(), a.cols());
    let block = (r + 5).min(n.min(m));
    let mut rng = RngStream::new(0x737662_u64, 0);
    let mut q: Vec<Vec<f64>> = (0..block).map(|_| (0..n).map(|_| rng.next_f64() - 0.5).collect()).collect();
    gram_schmidt(&mut q);

    let mut sig_prev = vec![0.0; block];
    for _ in 0..max_sweeps {
        // y_k = Aᵀ (A q_k)
        let mut y: Vec<Vec<f64>> = Vec::with_capacity(block);
        for qk in &q {
            let mut aq = vec![0.0; m];
            for i in 0..m {
                let row = a.row(i);
                let mut acc = 0.0;
                for (x, w) in row.iter().zip(qk.iter()) {
                    acc += x * w;
                }
                aq[i] = acc;
            }
            let mut yk = vec![0.0; n];
            for i in 0..m {
                let c = aq[i];
                if c == 0.0 {
                    continue;
                }
                for (t, x) in yk.iter_mut().zip(a.row(i)) {
                    *t += c * x;
                }
            }
            y.push(yk);
        }
        let sig: Vec<f64> = y
            .iter()
            .map(|yk| libm::sqrt(libm::sqrt(yk.iter().map(|x| x * x).sum::<f64>())))
            .collect();
        q = y;
        gram_schmidt(&mut q);
        let scale = sig[0].max(1e-300);
        let done = sig
            .iter()
            .zip(&sig_prev)
            .take(r)
            .all(|(s, p)| (s - p).abs() <= tol * scale);
        sig_prev = sig;
        if done {
            break;
        }
    }

    // Project: B = A·Q (m × block), small dense SVD, rotate back.
    let mut b = DenseMatrix::zeros(m, block);
    for (k, qk) in q.iter().enumerate() {
        for i in 0..m {
            let row = a.row(i);
            let mut acc = 0.0;
            for (x, w) in row.iter().zip(qk.iter()) {
                acc += x * w;
            }
            b.set(i, k, acc);
        }
    }
    let small = truncated_svd(&b, r)?;
    let mut v = DenseMatrix::zeros(n, r);
    for k in 0..r {
        for i in 0..n {
            let mut acc = 0.0;
            for (j, qj) in q.iter().enumerate() {
                acc += qj[i] * small.v.get(j, k);
            }
            v.set(i, k, acc);
        }
    }
    let mut triple = SvdTriple { u: small.u, sigma: small.sigma, v };
    resign(&mut triple);
    Ok(triple)
}

fn resign(t: &mut SvdTriple) {
    let m = t.u.rows();
    let n = t.v.rows();
    for k in 0..t.sigma.len() {
        let mut pivot = 0usize;
        let mut best = t.u.get(0, k).abs();
        for i in 1..m {
            let x = t.u.get(i, k).abs();
            if x > best {
                best = x;
                pivot = i;
            }
        }
        if t.u.get(pivot, k) < 0.0 {
            for i in 0..m {
                let x = -t.u.get(i, k);
                t.u.set(i, k, x);
            }
            for i in 0..n {
                let x = -t.v.get(i, k);
                t.v.set(i, k, x);
            }
        }
    }
}

fn gram_schmidt(cols: &mut [Vec<f64>]) {
    let k = cols.len();
    for j in 0..k {
        for i in 0..j {
            let dot: f64 = {
                let (a, b) = (&cols[i], &cols[j]);
                a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
            };
            let (head, tail) = cols.split_at_mut(j);
            for (t, s) in tail[0].iter_mut().zip(head[i].iter()) {
                *t -= dot * s;
            }
        }
        let nrm = libm::sqrt(cols[j].iter().map(|x| x * x).sum::<f64>());
        if nrm > 1e-300 {
            for x in cols[j].iter_mut() {
                *x /= nrm;
            }
        }
    }
}

/// Thin Householder QR of a tall matrix (`m ≥ k`): `a = Q · R` with `Q`
/// `m×k` orthonormal and `R` `k×k` upper triangular.
pub(crate) fn qr_thin(a: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
    let (m, k) = (a.rows(), a.cols());
    debug_assert!(m >= k);
    // Column-major working copy and reflectors.
    let mut w: Vec<Vec<f64>> = (0..k).map(|j| (0..m).map(|i| a.get(i, j)).collect()).collect();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(k);
    for j in 0..k {
        let norm = libm::sqrt(w[j][j..].iter().map(|x| x * x).sum::<f64>());
        let mut vj = vec![0.0; m];
        if norm > 0.0 {
            let alpha = if w[j][j] >= 0.0 { -norm } else { norm };
            vj[j..].copy_from_slice(&w[j][j..]);
            vj[j] -= alpha;
            let vnorm = libm::sqrt(vj[j..].iter().map(|x| x * x).sum::<f64>());
            if vnorm > 0.0 {
                for x in vj[j..].iter_mut() {
                    *x /= vnorm;
                }
                for col in w.iter_mut().skip(j) {
                    let dot: f64 = vj[j..].iter().zip(col[j..].iter()).map(|(x, y)| x * y).sum();
                    for (vi, ci) in vj[j..].iter().zip(col[j..].iter_mut()) {
                        *ci -= 2.0 * dot * vi;
                    }
                }
            }
        }
        reflectors.push(vj);
    }
    let mut r = DenseMatrix::zeros(k, k);
    for j in 0..k {
        for i in 0..=j.min(k - 1) {
            r.set(i, j, w[j][i]);
        }
    }
    // Q = H_0 … H_{k−1} · [I_k; 0], applied reflector-by-reflector.
    let mut q = DenseMatrix::zeros(m, k);
    for j in 0..k {
        q.set(j, j, 1.0);
    }
    for j in (0..k).rev() {
        let vj = &reflectors[j];
        for c in 0..k {
            let mut dot = 0.0;
            for i in j..m {
                dot += vj[i] * q.get(i, c);
            }
            if dot != 0.0 {
                for i in j..m {
                    let x = q.get(i, c) - 2.0 * dot * vj[i];
                    q.set(i, c, x);
                }
            }
        }
    }
    (q, r)
}

/// SVD of a product `scale · X · Yᵀ` without forming the full matrix:
/// thin QR of each factor and a small dense SVD of the `r × r` core.
pub fn svd_from_factors(scale: f64, x: &DenseMatrix, y: &DenseMatrix) -> Result<SvdTriple> {
    if x.cols() != y.cols() {
        return Err(Error::DimensionMismatch {
            expected: (x.rows(), x.cols()),
            got: (y.rows(), y.cols()),
        });
    }
    let r = x.cols();
    if r == 0 || r > x.rows().min(y.rows()) {
        return Err(Error::RankOutOfRange { r, max: x.rows().min(y.rows()) });
    }
    let (qx, rx) = qr_thin(x);
    let (qy, ry) = qr_thin(y);
    let core = rx.matmul_transb(&ry).scale(scale);
    let small = truncated_svd(&core, r)?;
    let mut triple = SvdTriple {
        u: qx.matmul(&small.u),
        sigma: small.sigma,
        v: qy.matmul(&small.v),
    };
    resign(&mut triple);
    Ok(triple)
}

/// Cyclic Jacobi eigendecomposition of a small symmetric matrix:
/// `a = Q · diag(eig) · Qᵀ` with eigenvalues sorted descending.
pub(crate) fn sym_eig_jacobi(a: &DenseMatrix) -> (DenseMatrix, Vec<f64>) {
    let n = a.rows();
    debug_assert_eq!(n, a.cols());
    let mut m = a.clone();
    let mut q = DenseMatrix::identity(n);
    for _ in 0..100 {
        let mut off = 0.0f64;
        for p in 0..n {
            for r in p + 1..n {
                off = off.max(m.get(p, r).abs());
            }
        }
        let scale = (0..n).fold(0.0f64, |s, i| s.max(m.get(i, i).abs())).max(1e-300);
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n.saturating_sub(1) {
            for r in p + 1..n {
                let apq = m.get(p, r);
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(r, r);
                let zeta = (aqq - app) / (2.0 * apq);
                let t = {
                    let sign = if zeta >= 0.0 { 1.0 } else { -1.0 };
                    sign / (zeta.abs() + libm::sqrt(1.0 + zeta * zeta))
                };
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = c * t;
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, r);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, r, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(r, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(r, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let qkp = q.get(k, p);
                    let qkq = q.get(k, r);
                    q.set(k, p, c * qkp - s * qkq);
                    q.set(k, r, s * qkp + c * qkq);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| m.get(i, i)).collect();
    order.sort_by(|&a, &b| diag[b].partial_cmp(&diag[a]).unwrap().then(a.cmp(&b)));
    let mut qq = DenseMatrix::zeros(n, n);
    let mut eig = vec![0.0; n];
    for (dst, &src) in order.iter().enumerate() {
        eig[dst] = diag[src];
        for i in 0..n {
            qq.set(i, dst, q.get(i, src));
        }
    }
    (qq, eig)
}

/// Incoherence `μ = max((m/r)·‖U‖²_{2,∞}, (n/r)·‖V‖²_{2,∞})` of a pair of
/// orthonormal factor matrices.
pub fn incoherence(u: &DenseMatrix, v: &DenseMatrix, r: usize) -> Result<f64> {
    if u.cols() != r || v.cols() != r {
        return Err(Error::DimensionMismatch {
            expected: (u.rows(), r),
            got: (u.rows(), u.cols().max(v.cols())),
        });
    }
    let du = ortho_defect(u);
    let dv = ortho_defect(v);
    let defect = du.max(dv);
    if defect > 1e-8 {
        return Err(Error::NotOrthonormal { defect });
    }
    let m = u.rows() as f64;
    let n = v.rows() as f64;
    let u2 = crate::matrix::norm_2inf(u);
    let v2 = crate::matrix::norm_2inf(v);
    Ok(((m / r as f64) * u2 * u2).max((n / r as f64) * v2 * v2))
}
