//! Seeded synthetic instances and the Monte-Carlo coverage harness.
//!
//! Ground truth follows the experiment recipe: factor matrices with i.i.d.
//! Gamma(2,1) entries, rescaled so the entrywise mean of `M* = k·U·Vᵀ` hits
//! the target; the observation set is Bernoulli(p); observed values come
//! from the configured noise channel. Each trial draws from its own stream
//! (`stream_id = trial`), so runs are reproducible and trials can execute in
//! any order or in parallel without changing a single bit of the result.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::estimator::{fit, DebiasedEstimate, FitConfig};
use crate::matrix::DenseMatrix;
use crate::obs::MaskedObservations;
use crate::rng::rng_stream;
use crate::svd::{incoherence, svd_from_factors, SvdTriple};
use crate::uq::{
    binary_variance, empirical_plugin_variance, entrywise_bound,
    gaussian_homogeneous_variance, intervals_with_fallback, ks_statistic, l_hat_proxy,
    poisson_variance, residual_variance_field, NoiseModel, PluginModel,
    VarianceField, DEGENERATE_S_FACTOR,
};

/// Which variance formula feeds the intervals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum VarianceSource {
    /// Theorem formula at the true `(M*, U*, V*)`.
    Oracle,
    /// Same formula at the fitted `(Mᵈ, Uᵈ, Vᵈ)`.
    Plugin,
    /// Residual-weighted estimator on the observed set.
    Residual,
}

/// Full description of a simulation experiment.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimConfig {
    pub m: usize,
    pub n: usize,
    pub r: usize,
    pub p: f64,
    pub mean_target: f64,
    pub noise: NoiseModel,
    pub trials: usize,
    pub seed: u64,
    pub variance_source: VarianceSource,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |field: &'static str, message: alloc::string::String| {
            Err(Error::InvalidConfig { field, message })
        };
        if self.m == 0 || self.n == 0 {
            return fail("m", alloc::format!("grid {}x{} is empty", self.m, self.n));
        }
        if self.r == 0 || self.r > self.m.min(self.n) {
            return fail("r", alloc::format!("rank {} not in 1..={}", self.r, self.m.min(self.n)));
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return fail("p", alloc::format!("{} not in (0, 1]", self.p));
        }
        if !(self.mean_target > 0.0) {
            return fail("mean_target", alloc::format!("{} must be positive", self.mean_target));
        }
        if self.trials == 0 {
            return fail("trials", alloc::string::String::from("must be at least 1"));
        }
        match &self.noise {
            NoiseModel::Poisson | NoiseModel::Binary => {}
            NoiseModel::HomogeneousGaussian { sigma } => {
                if !(*sigma > 0.0) {
                    return fail("noise.sigma", alloc::format!("{sigma} must be positive"));
                }
            }
            _ => {
                return fail(
                    "noise",
                    alloc::string::String::from(
                        "simulation noise must be poisson, binary, or gaussian",
                    ),
                )
            }
        }
        Ok(())
    }
}

/// One generated ground truth and its sampled observations.
#[derive(Debug, Clone)]
pub struct SimInstance {
    pub m_star: DenseMatrix,
    pub svd_star: SvdTriple,
    pub obs: MaskedObservations,
    pub seed: u64,
}

/// Generates the ground truth and observations for one trial. Binary noise
/// caps the rescaling so every mean stays at or below 0.95 (Gamma factor
/// products routinely exceed 1, so the entrywise mean target yields to the
/// domain constraint).
pub fn gen_instance(cfg: &SimConfig, trial: usize) -> Result<SimInstance> {
    cfg.validate()?;
    let mut rng = rng_stream(cfg.seed, trial as u64);
    let (m, n, r) = (cfg.m, cfg.n, cfg.r);

    let uf: Vec<f64> = (0..m * r).map(|_| rng.next_gamma2()).collect();
    let vf: Vec<f64> = (0..n * r).map(|_| rng.next_gamma2()).collect();
    let u = DenseMatrix::from_vec_unchecked(m, r, uf);
    let v = DenseMatrix::from_vec_unchecked(n, r, vf);

    let m0 = u.matmul_transb(&v);
    let sum: f64 = m0.data().iter().sum();
    debug_assert!(sum > 0.0);
    let mut k = cfg.mean_target * (m * n) as f64 / sum;
    if matches!(cfg.noise, NoiseModel::Binary) {
        // Cap k so every Bernoulli mean stays at or below 0.95.
        let maxv = m0.data().iter().fold(0.0f64, |a, &b| a.max(b));
        k = k.min(0.95 / maxv);
    }
    let m_star = m0.scale(k);
    let svd_star = svd_from_factors(k, &u, &v)?;

    let mut entries = Vec::new();
    for i in 0..m {
        for j in 0..n {
            if rng.next_bernoulli(cfg.p) {
                let mean = m_star.get(i, j);
                let o = match &cfg.noise {
                    NoiseModel::Poisson => rng.next_poisson(mean),
                    NoiseModel::Binary => {
                        if rng.next_bernoulli(mean) {
                            1.0
                        } else {
                            0.0
                        }
                    }
                    NoiseModel::HomogeneousGaussian { sigma } => {
                        mean + sigma * rng.next_gaussian()
                    }
                    _ => unreachable!("rejected by validate"),
                };
                entries.push((i, j, o));
            }
        }
    }
    let obs = MaskedObservations::with_rate(m, n, entries, cfg.p)?;
    Ok(SimInstance { m_star, svd_star, obs, seed: cfg.seed })
}

/// Everything measured in a single successful trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub coverage: f64,
    /// Standardized error at the probe entry; `None` when its `s` is zero.
    pub z_probe: Option<f64>,
    pub fallback_intervals: usize,
    pub gd_iters: usize,
}

fn variance_for(
    cfg: &SimConfig,
    inst: &SimInstance,
    est: &DebiasedEstimate,
) -> Result<VarianceField> {
    match cfg.variance_source {
        VarianceSource::Oracle => match &cfg.noise {
            NoiseModel::Poisson => {
                poisson_variance(&inst.m_star, &inst.svd_star.u, &inst.svd_star.v, cfg.p)
            }
            NoiseModel::Binary => {
                binary_variance(&inst.m_star, &inst.svd_star.u, &inst.svd_star.v, cfg.p)
            }
            NoiseModel::HomogeneousGaussian { sigma } => gaussian_homogeneous_variance(
                &inst.svd_star.u,
                &inst.svd_star.v,
                *sigma,
                cfg.p,
            ),
            _ => unreachable!("rejected by validate"),
        },
        VarianceSource::Plugin => {
            let model = match &cfg.noise {
                NoiseModel::Poisson => PluginModel::Poisson,
                NoiseModel::Binary => PluginModel::Binary,
                NoiseModel::HomogeneousGaussian { .. } => PluginModel::Gaussian,
                _ => unreachable!("rejected by validate"),
            };
            Ok(empirical_plugin_variance(est, &inst.obs, model, cfg.p)?.0)
        }
        VarianceSource::Residual => Ok(residual_variance_field(&inst.obs, est).0),
    }
}

/// Runs one trial end to end: generate, fit, build the variance field,
/// form 95% intervals around `Mᵈ`, and score coverage against `M*`.
pub fn run_trial(cfg: &SimConfig, trial: usize, probe: (usize, usize)) -> Result<TrialOutcome> {
    let inst = gen_instance(cfg, trial)?;
    let est = fit(&inst.obs, &FitConfig::new(cfg.r))?;
    let field = variance_for(cfg, &inst, &est)?;

    // Degenerate-s fallback: conservative half-width from the entrywise
    // error bound, with diagnostics estimated from the fit.
    let kappa = {
        let smax = est.svd.sigma[0];
        let smin = est.svd.sigma[est.svd.sigma.len() - 1];
        if smin > 0.0 {
            smax / smin
        } else {
            1.0
        }
    };
    let mu = incoherence(&est.svd.u, &est.svd.v, cfg.r)?;
    let l_hat = l_hat_proxy(&inst.obs, &est);
    let halfwidth = entrywise_bound(&est, l_hat, mu, cfg.r, kappa, cfg.p);
    let (iv, fallback_intervals) =
        intervals_with_fallback(&est.md, &field, 0.95, halfwidth, DEGENERATE_S_FACTOR)?;

    let coverage = crate::uq::coverage_rate(&iv, &inst.m_star, None)?;
    let sp = field.s.get(probe.0, probe.1);
    let z_probe = if sp > 0.0 {
        Some((est.md.get(probe.0, probe.1) - inst.m_star.get(probe.0, probe.1)) / sp)
    } else {
        None
    };
    Ok(TrialOutcome {
        coverage,
        z_probe,
        fallback_intervals,
        gd_iters: est.iters_used,
    })
}

/// Aggregated results across trials.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CoverageReport {
    pub trials_requested: usize,
    pub trials_completed: usize,
    pub trials_skipped: usize,
    pub per_trial_coverage: Vec<f64>,
    pub mean_coverage: f64,
    /// Sample standard deviation across trials (0 for a single trial).
    pub std_coverage: f64,
    /// Standardized probe-entry errors, one per completed trial with
    /// positive probe variance.
    pub z_samples: Vec<f64>,
    /// Trials whose probe entry had zero variance.
    pub z_excluded: usize,
    pub ks: Option<f64>,
    /// Intervals replaced by the conservative error-bound fallback, summed
    /// over trials.
    pub fallback_intervals: usize,
    /// Gradient-descent iterations summed over completed trials.
    pub total_gd_iters: usize,
}

/// Folds per-trial outcomes (in trial order) into a report.
pub fn aggregate(trials_requested: usize, outcomes: &[Result<TrialOutcome>]) -> CoverageReport {
    let mut per_trial = Vec::new();
    let mut z_samples = Vec::new();
    let mut z_excluded = 0usize;
    let mut skipped = 0usize;
    let mut fallback = 0usize;
    let mut iters = 0usize;
    for out in outcomes {
        match out {
            Ok(t) => {
                per_trial.push(t.coverage);
                match t.z_probe {
                    Some(z) => z_samples.push(z),
                    None => z_excluded += 1,
                }
                fallback += t.fallback_intervals;
                iters += t.gd_iters;
            }
            Err(_) => skipped += 1,
        }
    }
    let nc = per_trial.len();
    let mean = if nc == 0 { 0.0 } else { per_trial.iter().sum::<f64>() / nc as f64 };
    let std = if nc < 2 {
        0.0
    } else {
        let ss: f64 = per_trial.iter().map(|c| (c - mean) * (c - mean)).sum();
        libm::sqrt(ss / (nc as f64 - 1.0))
    };
    let ks = if z_samples.is_empty() { None } else { Some(ks_statistic(&z_samples)) };
    CoverageReport {
        trials_requested,
        trials_completed: nc,
        trials_skipped: skipped,
        per_trial_coverage: per_trial,
        mean_coverage: mean,
        std_coverage: std,
        z_samples,
        z_excluded,
        ks,
        fallback_intervals: fallback,
        total_gd_iters: iters,
    }
}

/// Serial coverage experiment: per-trial pipeline at the probe entry (0,0),
/// aggregated in trial order. Failed fits are skipped and counted.
pub fn run_coverage_experiment(cfg: &SimConfig) -> Result<CoverageReport> {
    cfg.validate()?;
    let outcomes: Vec<Result<TrialOutcome>> =
        (0..cfg.trials).map(|t| run_trial(cfg, t, (0, 0))).collect();
    Ok(aggregate(cfg.trials, &outcomes))
}

/// Distribution check at a fixed entry: collects the standardized error
/// across trials and reports its Kolmogorov–Smirnov distance to the
/// standard normal.
pub fn run_distribution_check(cfg: &SimConfig, entry: (usize, usize)) -> Result<CoverageReport> {
    cfg.validate()?;
    if entry.0 >= cfg.m || entry.1 >= cfg.n {
        return Err(Error::InvalidEntry { i: entry.0, j: entry.1, reason: "outside the grid" });
    }
    let outcomes: Vec<Result<TrialOutcome>> =
        (0..cfg.trials).map(|t| run_trial(cfg, t, entry)).collect();
    Ok(aggregate(cfg.trials, &outcomes))
}

/// Histogram of the samples over `[lo, hi)` with equal bins; outliers are
/// clipped into the edge bins. Returns `(bin_left, bin_right, count)` rows.
pub fn histogram(samples: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<(f64, f64, usize)> {
    if bins == 0 || !(hi > lo) {
        return Vec::new();
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = alloc::vec![0usize; bins];
    for &x in samples {
        let idx = ((x - lo) / width) as isize;
        let idx = idx.clamp(0, bins as isize - 1) as usize;
        counts[idx] += 1;
    }
    (0..bins)
        .map(|b| (lo + b as f64 * width, lo + (b + 1) as f64 * width, counts[b]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> SimConfig {
        SimConfig {
            m: 24,
            n: 20,
            r: 2,
            p: 0.7,
            mean_target: 8.0,
            noise: NoiseModel::Poisson,
            trials: 3,
            seed: 42,
            variance_source: VarianceSource::Oracle,
        }
    }

    #[test]
    fn instance_mean_matches_target() {
        let cfg = small_cfg();
        for trial in 0..5 {
            let inst = gen_instance(&cfg, trial).unwrap();
            let mean: f64 = inst.m_star.data().iter().sum::<f64>()
                / (cfg.m * cfg.n) as f64;
            assert!((mean - cfg.mean_target).abs() < 1e-9, "mean {mean}");
            assert!(inst.m_star.data().iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn instance_rank_is_exact() {
        let cfg = small_cfg();
        let inst = gen_instance(&cfg, 0).unwrap();
        // svd_star reconstructs M* and every singular value is well above 0.
        let back = inst.svd_star.reconstruct();
        let err = crate::matrix::norm_fro(&back.sub(&inst.m_star));
        assert!(err <= 1e-10 * crate::matrix::norm_fro(&inst.m_star), "err {err}");
        // The (r+1)-th singular value of a rank-r product is zero: check via
        // a full SVD of M*.
        let full = crate::svd::truncated_svd(&inst.m_star, cfg.r + 1).unwrap();
        assert!(full.sigma[cfg.r] < 1e-9 * full.sigma[0]);
    }

    #[test]
    fn binary_instances_stay_in_unit_interval() {
        let mut cfg = small_cfg();
        cfg.noise = NoiseModel::Binary;
        cfg.mean_target = 0.4;
        let inst = gen_instance(&cfg, 1).unwrap();
        assert!(inst.m_star.data().iter().all(|&x| (0.0..=0.95).contains(&x)));
        assert!(inst.obs.entries().iter().all(|&(_, _, o)| o == 0.0 || o == 1.0));
    }

    #[test]
    fn observation_rate_concentrates() {
        let cfg = SimConfig { m: 50, n: 50, p: 0.3, ..small_cfg() };
        let mut outside = 0usize;
        let trials = 200;
        for t in 0..trials {
            let inst = gen_instance(&cfg, t).unwrap();
            let rate = inst.obs.len() as f64 / (cfg.m * cfg.n) as f64;
            let sd = libm::sqrt(cfg.p * (1.0 - cfg.p) / (cfg.m * cfg.n) as f64);
            if (rate - cfg.p).abs() > 5.0 * sd {
                outside += 1;
            }
        }
        assert!(outside <= 2, "{outside} of {trials} outside 5 standard errors");
    }

    #[test]
    fn identical_config_identical_report() {
        let cfg = small_cfg();
        let a = run_coverage_experiment(&cfg).unwrap();
        let b = run_coverage_experiment(&cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn parallel_style_aggregation_matches_serial() {
        let cfg = small_cfg();
        let serial = run_coverage_experiment(&cfg).unwrap();
        // Out-of-order trial execution, aggregated back in trial order.
        let mut outcomes: Vec<Option<Result<TrialOutcome>>> = (0..cfg.trials).map(|_| None).collect();
        for t in (0..cfg.trials).rev() {
            outcomes[t] = Some(run_trial(&cfg, t, (0, 0)));
        }
        let collected: Vec<_> = outcomes.into_iter().map(Option::unwrap).collect();
        assert_eq!(aggregate(cfg.trials, &collected), serial);
    }

    #[test]
    fn histogram_clips_outliers() {
        let h = histogram(&[-10.0, -0.5, 0.5, 10.0], -1.0, 1.0, 2);
        assert_eq!(h.len(), 2);
        assert_eq!(h[0].2, 2);
        assert_eq!(h[1].2, 2);
    }

    #[test]
    fn vanishing_noise_fully_covered_via_fallback() {
        // Nearly noiseless Gaussian channel at p = 1: every s is degenerate
        // relative to ‖Mᵈ‖_max, intervals switch to the error-bound
        // half-width, and the exact fit is covered everywhere.
        let cfg = SimConfig {
            m: 30,
            n: 30,
            r: 2,
            p: 1.0,
            mean_target: 10.0,
            noise: NoiseModel::HomogeneousGaussian { sigma: 1e-10 },
            trials: 2,
            seed: 5,
            variance_source: VarianceSource::Oracle,
        };
        let rep = run_coverage_experiment(&cfg).unwrap();
        assert_eq!(rep.trials_skipped, 0);
        assert_eq!(rep.mean_coverage, 1.0, "coverage {:?}", rep.per_trial_coverage);
        assert_eq!(rep.fallback_intervals, 2 * 30 * 30);
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut cfg = small_cfg();
        cfg.r = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = small_cfg();
        cfg.p = 1.5;
        assert!(cfg.validate().is_err());
        let mut cfg = small_cfg();
        cfg.noise = NoiseModel::Empirical;
        assert!(cfg.validate().is_err());
        let mut cfg = small_cfg();
        cfg.noise = NoiseModel::HomogeneousGaussian { sigma: 0.0 };
        assert!(cfg.validate().is_err());
    }
}
