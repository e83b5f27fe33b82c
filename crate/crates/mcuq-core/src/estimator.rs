//! Spectral initialization, regularized factored gradient descent, and the
//! de-biasing transform.
//!
//! The estimator minimizes
//!
//! ```text
//! f(X, Y) = (1/2p)·‖P_Ω(XYᵀ − O)‖_F² + (λ/2p)·(‖X‖_F² + ‖Y‖_F²)
//! ```
//!
//! starting from the scaled top-r SVD of `(1/p)·P_Ω(O)`, then removes the
//! shrinkage the regularizer introduces:
//!
//! ```text
//! Xᵈ = X · (I + (λ/p)(XᵀX)⁻¹)^{1/2},   Yᵈ = Y · (I + (λ/p)(YᵀY)⁻¹)^{1/2}.
//! ```
//!
//! Everything here is deterministic given `(obs, config)`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::obs::MaskedObservations;
use crate::svd::{svd_from_factors, sym_eig_jacobi, truncated_svd, SvdTriple};

/// Low-rank factor pair `X (m×r)`, `Y (n×r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPair {
    pub x: DenseMatrix,
    pub y: DenseMatrix,
}

impl FactorPair {
    pub fn rank(&self) -> usize {
        debug_assert_eq!(self.x.cols(), self.y.cols());
        self.x.cols()
    }

    /// `X · Yᵀ`.
    pub fn product(&self) -> DenseMatrix {
        self.x.matmul_transb(&self.y)
    }
}

/// Fit configuration. `lambda`/`eta` of `None` select the automatic choices:
/// `λ = 0.1·σ̂·ln(n)·√(n·p)` from the residual spread at the spectral
/// initializer, and `η = 0.5/σ₁((1/p)P_Ω(O))` with halving on any objective
/// increase.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitConfig {
    pub r: usize,
    pub lambda: Option<f64>,
    pub eta: Option<f64>,
    pub max_iters: usize,
    pub grad_tol: f64,
    /// Reserved for seeded solver variants; the current solver is fully
    /// deterministic and does not consume it.
    pub seed: u64,
}

impl FitConfig {
    pub fn new(r: usize) -> Self {
        Self { r, lambda: None, eta: None, max_iters: 2000, grad_tol: 1e-7, seed: 0 }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = Some(lambda);
        self
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = Some(eta);
        self
    }

    pub fn with_max_iters(mut self, it: usize) -> Self {
        self.max_iters = it;
        self
    }

    pub fn with_grad_tol(mut self, tol: f64) -> Self {
        self.grad_tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig {
                field: "max_iters",
                message: alloc::string::String::from("must be at least 1"),
            });
        }
        if self.grad_tol < 0.0 {
            return Err(Error::InvalidConfig {
                field: "grad_tol",
                message: alloc::string::String::from("must be nonnegative"),
            });
        }
        if let Some(l) = self.lambda {
            if !(l >= 0.0) {
                return Err(Error::InvalidConfig {
                    field: "lambda",
                    message: alloc::string::String::from("must be nonnegative"),
                });
            }
        }
        if let Some(e) = self.eta {
            if !(e > 0.0) {
                return Err(Error::InvalidConfig {
                    field: "eta",
                    message: alloc::string::String::from("must be positive"),
                });
            }
        }
        Ok(())
    }
}

/// The de-biased estimate `Mᵈ = Xᵈ·Yᵈᵀ` with its SVD and fit diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct DebiasedEstimate {
    pub xd: DenseMatrix,
    pub yd: DenseMatrix,
    pub md: DenseMatrix,
    pub svd: SvdTriple,
    pub iters_used: usize,
    pub final_grad_norm: f64,
    pub config: FitConfig,
    pub p_used: f64,
    pub lambda_used: f64,
}

impl DebiasedEstimate {
    pub fn rows(&self) -> usize {
        self.md.rows()
    }

    pub fn cols(&self) -> usize {
        self.md.cols()
    }

    pub fn rank(&self) -> usize {
        self.svd.sigma.len()
    }
}

/// Spectral initialization: `X⁰ = U√Σ, Y⁰ = V√Σ` from the top-`r` SVD of
/// `(1/p)·P_Ω(O)`.
pub fn spectral_init(obs: &MaskedObservations, r: usize) -> Result<FactorPair> {
    let svd = truncated_svd(&obs.rescaled_dense(), r)?;
    Ok(factors_from_svd(&svd))
}

fn factors_from_svd(svd: &SvdTriple) -> FactorPair {
    let r = svd.sigma.len();
    let (m, n) = (svd.u.rows(), svd.v.rows());
    let mut x = DenseMatrix::zeros(m, r);
    let mut y = DenseMatrix::zeros(n, r);
    for k in 0..r {
        let s = libm::sqrt(svd.sigma[k]);
        for i in 0..m {
            x.set(i, k, svd.u.get(i, k) * s);
        }
        for j in 0..n {
            y.set(j, k, svd.v.get(j, k) * s);
        }
    }
    FactorPair { x, y }
}

fn residuals(f: &FactorPair, obs: &MaskedObservations) -> Vec<f64> {
    obs.entries()
        .iter()
        .map(|&(i, j, o)| {
            let xi = f.x.row(i);
            let yj = f.y.row(j);
            let mut acc = 0.0;
            for (a, b) in xi.iter().zip(yj) {
                acc += a * b;
            }
            acc - o
        })
        .collect()
}

fn objective_from_residuals(res: &[f64], f: &FactorPair, lambda: f64, p: f64) -> f64 {
    let fit: f64 = res.iter().map(|r| r * r).sum();
    let reg: f64 = f.x.data().iter().map(|v| v * v).sum::<f64>()
        + f.y.data().iter().map(|v| v * v).sum::<f64>();
    (fit + lambda * reg) / (2.0 * p)
}

/// `f(X, Y)`: masked squared error plus the ridge terms, both scaled by `1/p`.
pub fn objective(f: &FactorPair, obs: &MaskedObservations, lambda: f64) -> f64 {
    let res = residuals(f, obs);
    objective_from_residuals(&res, f, lambda, obs.p())
}

fn gradient_from_residuals(
    res: &[f64],
    f: &FactorPair,
    obs: &MaskedObservations,
    lambda: f64,
    p: f64,
) -> FactorPair {
    let r = f.rank();
    let mut gx = DenseMatrix::zeros(f.x.rows(), r);
    let mut gy = DenseMatrix::zeros(f.y.rows(), r);
    for (&(i, j, _), &c) in obs.entries().iter().zip(res) {
        if c != 0.0 {
            let yj = f.y.row(j);
            let gxi = gx.row_mut(i);
            for (g, b) in gxi.iter_mut().zip(yj) {
                *g += c * b;
            }
            let xi = f.x.row(i);
            let gyj = gy.row_mut(j);
            for (g, a) in gyj.iter_mut().zip(xi) {
                *g += c * a;
            }
        }
    }
    let inv_p = 1.0 / p;
    for (g, x) in gx.data_mut().iter_mut().zip(f.x.data()) {
        *g = (*g + lambda * x) * inv_p;
    }
    for (g, y) in gy.data_mut().iter_mut().zip(f.y.data()) {
        *g = (*g + lambda * y) * inv_p;
    }
    FactorPair { x: gx, y: gy }
}

/// `(∇_X f, ∇_Y f) = ((1/p)(P_Ω(XYᵀ−O)·Y + λX), (1/p)(P_Ω(XYᵀ−O)ᵀ·X + λY))`.
pub fn gradient(f: &FactorPair, obs: &MaskedObservations, lambda: f64) -> FactorPair {
    let res = residuals(f, obs);
    gradient_from_residuals(&res, f, obs, lambda, obs.p())
}

fn grad_norm(g: &FactorPair) -> f64 {
    let sx: f64 = g.x.data().iter().map(|v| v * v).sum();
    let sy: f64 = g.y.data().iter().map(|v| v * v).sum();
    libm::sqrt(sx + sy)
}

pub(crate) struct GdRun {
    pub factors: FactorPair,
    pub lambda_used: f64,
    pub iters_used: usize,
    pub final_grad_norm: f64,
    #[allow(dead_code)]
    pub objective_trace: Vec<f64>,
}

/// Total step-size halvings allowed over a run before the solver treats the
/// step as stalled at numerical precision.
const MAX_HALVINGS: usize = 30;

pub(crate) fn gd_run(obs: &MaskedObservations, cfg: &FitConfig) -> Result<GdRun> {
    cfg.validate()?;
    let init_svd = truncated_svd(&obs.rescaled_dense(), cfg.r)?;
    let sigma1 = init_svd.sigma[0];
    let mut f = factors_from_svd(&init_svd);
    let p = obs.p();

    let lambda = cfg.lambda.unwrap_or_else(|| {
        // 0.1 · σ̂ · ln(n) · √(n·p), σ̂ = residual spread at the initializer.
        let res = residuals(&f, obs);
        if res.is_empty() {
            return 0.0;
        }
        let mean: f64 = res.iter().sum::<f64>() / res.len() as f64;
        let var: f64 =
            res.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / res.len() as f64;
        let n_eff = obs.rows().max(obs.cols()) as f64;
        0.1 * libm::sqrt(var) * libm::log(n_eff) * libm::sqrt(n_eff * p)
    });
    let mut eta = cfg.eta.unwrap_or(if sigma1 > 0.0 { 0.5 / sigma1 } else { 1.0 });

    let res0 = residuals(&f, obs);
    let mut obj = objective_from_residuals(&res0, &f, lambda, p);
    let init_obj = obj;
    let mut grad = gradient_from_residuals(&res0, &f, obs, lambda, p);
    let init_gnorm = grad_norm(&grad);
    let stop_at = cfg.grad_tol * (init_gnorm + 1.0);

    let mut trace = Vec::with_capacity(cfg.max_iters.min(4096) + 1);
    trace.push(obj);
    let mut iters_used = 0usize;
    let mut gnorm = init_gnorm;
    let mut halvings = 0usize;

    for t in 0..cfg.max_iters {
        if gnorm <= stop_at {
            break;
        }
        // Backtracking: reject any step that raises the objective, halving η
        // until it descends or the halving budget runs out.
        let accepted = loop {
            let xn = step(&f.x, &grad.x, eta);
            let yn = step(&f.y, &grad.y, eta);
            let cand = FactorPair { x: xn, y: yn };
            let res = residuals(&cand, obs);
            let cand_obj = objective_from_residuals(&res, &cand, lambda, p);
            if cand_obj.is_finite() && cand_obj <= obj {
                break Some((cand, res, cand_obj));
            }
            halvings += 1;
            if halvings > MAX_HALVINGS {
                break None;
            }
            eta *= 0.5;
        };
        let Some((cand, res, cand_obj)) = accepted else {
            break; // stalled at numerical precision
        };
        if !cand_obj.is_finite() || cand_obj > 10.0 * (init_obj + 1e-12) {
            return Err(Error::Divergence { iter: t });
        }
        f = cand;
        obj = cand_obj;
        if trace.len() < 4096 {
            trace.push(obj);
        }
        grad = gradient_from_residuals(&res, &f, obs, lambda, p);
        gnorm = grad_norm(&grad);
        if !gnorm.is_finite() {
            return Err(Error::Divergence { iter: t });
        }
        iters_used = t + 1;
    }

    Ok(GdRun { factors: f, lambda_used: lambda, iters_used, final_grad_norm: gnorm, objective_trace: trace })
}

fn step(x: &DenseMatrix, g: &DenseMatrix, eta: f64) -> DenseMatrix {
    let data: Vec<f64> =
        x.data().iter().zip(g.data()).map(|(a, b)| a - eta * b).collect();
    DenseMatrix::from_vec_unchecked(x.rows(), x.cols(), data)
}

/// Runs the gradient stage alone: spectral initialization followed by the
/// descent loop. Returns the final factor pair.
pub fn gd_fit(obs: &MaskedObservations, cfg: &FitConfig) -> Result<FactorPair> {
    Ok(gd_run(obs, cfg)?.factors)
}

fn debias_side(f: &DenseMatrix, lambda: f64, p: f64, name: &'static str) -> Result<DenseMatrix> {
    if lambda == 0.0 {
        return Ok(f.clone());
    }
    let r = f.cols();
    let gram = f.transpose().matmul(f);
    let (q, eig) = sym_eig_jacobi(&gram);
    let emax = eig[0];
    let emin = eig[r - 1];
    if !(emin > 0.0) || emax / emin >= 1e12 {
        return Err(Error::SingularGram { factor: name });
    }
    // (I + (λ/p)·G⁻¹)^{1/2} shares G's eigenvectors.
    let mut s = DenseMatrix::zeros(r, r);
    for a in 0..r {
        for b in 0..r {
            let mut acc = 0.0;
            for k in 0..r {
                let w = libm::sqrt(1.0 + lambda / (p * eig[k]));
                acc += q.get(a, k) * w * q.get(b, k);
            }
            s.set(a, b, acc);
        }
    }
    Ok(f.matmul(&s))
}

/// De-bias transform. With `λ = 0` the factors are returned unchanged.
pub fn debias(f: &FactorPair, lambda: f64, p: f64) -> Result<DebiasedEstimate> {
    let cfg = FitConfig::new(f.rank()).with_lambda(lambda);
    assemble(f, lambda, p, cfg, 0, 0.0)
}

fn assemble(
    f: &FactorPair,
    lambda: f64,
    p: f64,
    config: FitConfig,
    iters_used: usize,
    final_grad_norm: f64,
) -> Result<DebiasedEstimate> {
    let xd = debias_side(&f.x, lambda, p, "X")?;
    let yd = debias_side(&f.y, lambda, p, "Y")?;
    let md = xd.matmul_transb(&yd);
    let svd = svd_from_factors(1.0, &xd, &yd)?;
    Ok(DebiasedEstimate {
        xd,
        yd,
        md,
        svd,
        iters_used,
        final_grad_norm,
        config,
        p_used: p,
        lambda_used: lambda,
    })
}

/// Full pipeline: spectral initialization → gradient descent → de-bias.
pub fn fit(obs: &MaskedObservations, cfg: &FitConfig) -> Result<DebiasedEstimate> {
    let run = gd_run(obs, cfg)?;
    assemble(
        &run.factors,
        run.lambda_used,
        obs.p(),
        cfg.clone(),
        run.iters_used,
        run.final_grad_norm,
    )
}
