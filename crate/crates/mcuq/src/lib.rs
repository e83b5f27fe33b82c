//! Command implementations behind the `mcuq` binary.
//!
//! Every command is a pure function of (input files, flags, seed): identical
//! invocations produce byte-identical outputs, including under `--threads`
//! variation. Wall-clock timings go only into the manifest, never into the
//! data outputs.

pub mod io;
pub mod manifest;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use mcuq_core::covmax::{allocate, AllocationProblem};
use mcuq_core::estimator::{fit, DebiasedEstimate, FitConfig};
use mcuq_core::obs::MaskedObservations;
use mcuq_core::sim::{aggregate, histogram, run_trial, SimConfig, TrialOutcome};
use mcuq_core::svd::incoherence;
use mcuq_core::uq::{
    empirical_plugin_variance, entrywise_bound, intervals_with_fallback, l_hat_proxy,
    residual_variance_field, PluginModel, VarianceField, DEGENERATE_S_FACTOR,
};
use mcuq_core::Error as CoreError;

use crate::io::format_float;
use crate::manifest::ManifestBuilder;

pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

/// Command failure carrying the exit code contract: 64 for anything wrong
/// with the invocation or its inputs, 2 for numerical failures at runtime.
#[derive(Debug)]
pub struct CmdError {
    pub code: i32,
    pub source: anyhow::Error,
}

impl CmdError {
    fn usage(source: anyhow::Error) -> Self {
        Self { code: EXIT_USAGE, source }
    }
}

impl From<anyhow::Error> for CmdError {
    fn from(source: anyhow::Error) -> Self {
        // Numerical failures surface from the core; everything else is an
        // input/usage problem.
        let code = match source.downcast_ref::<CoreError>() {
            Some(CoreError::Divergence { .. }) | Some(CoreError::SingularGram { .. }) => {
                EXIT_NUMERICAL
            }
            _ => EXIT_USAGE,
        };
        Self { code, source }
    }
}

type CmdResult = Result<(), CmdError>;

#[derive(Parser, Debug)]
#[command(
    name = "mcuq",
    version,
    about = "De-biased low-rank matrix completion with entrywise confidence intervals"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Complete a partially observed matrix; writes the estimate as dense CSV
    Complete(CompleteArgs),
    /// Entrywise confidence intervals around the completed matrix
    Intervals(IntervalsArgs),
    /// Monte-Carlo coverage experiment driven by a JSON config
    Simulate(SimulateArgs),
    /// Distribution check of one entry's standardized error across trials
    Distcheck(DistcheckArgs),
    /// Budget-constrained interval allocation maximizing expected coverage
    Covmax(CovmaxArgs),
}

#[derive(Args, Debug, Clone)]
pub struct FitFlags {
    /// Rank of the fitted matrix
    #[arg(long)]
    pub rank: usize,
    /// Grid rows (default: inferred from the data extent)
    #[arg(long)]
    pub rows: Option<usize>,
    /// Grid columns (default: inferred from the data extent)
    #[arg(long)]
    pub cols: Option<usize>,
    /// Observation rate; estimated as |Ω|/(m·n) when omitted
    #[arg(long)]
    pub p: Option<f64>,
    /// Ridge weight (default: residual-scaled heuristic)
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Gradient step size (default: 0.5/σ₁ with halving on increase)
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long, default_value_t = 2000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-7)]
    pub grad_tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl FitFlags {
    fn to_config(&self) -> FitConfig {
        FitConfig {
            r: self.rank,
            lambda: self.lambda,
            eta: self.eta,
            max_iters: self.max_iters,
            grad_tol: self.grad_tol,
            seed: self.seed,
        }
    }
}

#[derive(Args, Debug)]
pub struct CompleteArgs {
    /// Input CSV: `i,j,value` triplets, or a dense grid without a header
    pub input: PathBuf,
    #[command(flatten)]
    pub fit: FitFlags,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelArg {
    Gaussian,
    Poisson,
    Binary,
    Residual,
}

#[derive(Args, Debug)]
pub struct IntervalsArgs {
    pub input: PathBuf,
    #[command(flatten)]
    pub fit: FitFlags,
    /// Variance formula evaluated at the fitted quantities
    #[arg(long, value_enum)]
    pub model: ModelArg,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Restrict output to these entries, e.g. `0,0;2,5` (default: all)
    #[arg(long)]
    pub entries: Option<String>,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// JSON simulation config
    #[arg(long)]
    pub config: PathBuf,
    /// Coverage report JSON
    #[arg(short, long)]
    pub output: PathBuf,
    /// Per-trial CSV (default: report path with `.csv` extension)
    #[arg(long)]
    pub z_out: Option<PathBuf>,
    /// Worker threads (default: all cores; MCUQ_THREADS overrides)
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Args, Debug)]
pub struct DistcheckArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Entry to track, as `i,j` (0-based)
    #[arg(long)]
    pub entry: String,
    /// Histogram CSV output
    #[arg(short, long)]
    pub output: PathBuf,
    /// Full report JSON (default: histogram path with `.json` extension)
    #[arg(long)]
    pub json: Option<PathBuf>,
    #[arg(long, default_value_t = 40)]
    pub bins: usize,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Args, Debug)]
pub struct CovmaxArgs {
    /// Input CSV with header `i,j,md,s`
    pub input: PathBuf,
    /// Total interval-length budget
    #[arg(long)]
    pub budget: f64,
    /// Truth values (`i,j,value` triplets or dense grid) for realized coverage
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Allocation CSV output (`i,j,a,b`)
    #[arg(short, long)]
    pub output: PathBuf,
    /// Summary JSON (default: allocation path with `.json` extension)
    #[arg(long)]
    pub json: Option<PathBuf>,
}

pub fn run(cli: Cli, argv: Vec<String>) -> CmdResult {
    match cli.command {
        Command::Complete(args) => cmd_complete(args, argv),
        Command::Intervals(args) => cmd_intervals(args, argv),
        Command::Simulate(args) => cmd_simulate(args, argv),
        Command::Distcheck(args) => cmd_distcheck(args, argv),
        Command::Covmax(args) => cmd_covmax(args, argv),
    }
}

fn load_and_fit(
    input: &Path,
    flags: &FitFlags,
) -> Result<(MaskedObservations, DebiasedEstimate), CmdError> {
    let parsed = io::read_observations(input).map_err(CmdError::usage)?;
    let obs = io::build_observations(parsed, flags.rows, flags.cols, flags.p)
        .map_err(CmdError::usage)?;
    let cfg = flags.to_config();
    let est = fit(&obs, &cfg).map_err(|e| CmdError::from(anyhow::Error::new(e)))?;
    Ok((obs, est))
}

fn cmd_complete(args: CompleteArgs, argv: Vec<String>) -> CmdResult {
    let mut mb = ManifestBuilder::new(
        "complete",
        argv,
        serde_json::json!({
            "input": args.input.display().to_string(),
            "rank": args.fit.rank,
            "rows": args.fit.rows,
            "cols": args.fit.cols,
            "p": args.fit.p,
            "lambda": args.fit.lambda,
            "eta": args.fit.eta,
            "max_iters": args.fit.max_iters,
            "grad_tol": args.fit.grad_tol,
            "output": args.output.display().to_string(),
        }),
        Some(args.fit.seed),
    );
    mb.record_input(&args.input).map_err(CmdError::usage)?;
    let (_obs, est) = load_and_fit(&args.input, &args.fit)?;
    io::write_dense_csv(&args.output, &est.md)?;
    mb.record_output(&args.output)?;
    mb.write(&args.output)?;
    eprintln!(
        "fit: {} iters, final gradient norm {:.3e}, lambda {}",
        est.iters_used,
        est.final_grad_norm,
        format_float(est.lambda_used)
    );
    Ok(())
}

/// Builds the requested variance field plus the interval fallback inputs.
fn variance_for_model(
    model: ModelArg,
    obs: &MaskedObservations,
    est: &DebiasedEstimate,
) -> Result<(VarianceField, usize), CmdError> {
    let p = est.p_used;
    let out = match model {
        ModelArg::Gaussian => empirical_plugin_variance(est, obs, PluginModel::Gaussian, p)
            .map_err(anyhow::Error::new)?,
        ModelArg::Poisson => empirical_plugin_variance(est, obs, PluginModel::Poisson, p)
            .map_err(anyhow::Error::new)?,
        ModelArg::Binary => empirical_plugin_variance(est, obs, PluginModel::Binary, p)
            .map_err(anyhow::Error::new)?,
        ModelArg::Residual => residual_variance_field(obs, est),
    };
    Ok(out)
}

fn cmd_intervals(args: IntervalsArgs, argv: Vec<String>) -> CmdResult {
    if !(args.level > 0.0 && args.level < 1.0) {
        return Err(CmdError::usage(anyhow!("--level must lie in (0, 1)")));
    }
    let mut mb = ManifestBuilder::new(
        "intervals",
        argv,
        serde_json::json!({
            "input": args.input.display().to_string(),
            "rank": args.fit.rank,
            "model": format!("{:?}", args.model).to_lowercase(),
            "level": args.level,
            "entries": args.entries.clone(),
            "p": args.fit.p,
            "lambda": args.fit.lambda,
            "output": args.output.display().to_string(),
        }),
        Some(args.fit.seed),
    );
    mb.record_input(&args.input).map_err(CmdError::usage)?;
    let (obs, est) = load_and_fit(&args.input, &args.fit)?;
    let (field, clamped) = variance_for_model(args.model, &obs, &est)?;
    if args.model == ModelArg::Binary {
        let total = est.rows() * est.cols();
        if clamped * 10 > total {
            eprintln!(
                "warning: binary model clamped {clamped} of {total} fitted means into [0, 1]"
            );
        }
    } else if clamped > 0 {
        eprintln!("note: clamped {clamped} fitted means into the model domain");
    }

    let (iv, replaced) = fallback_intervals(&obs, &est, &field, args.level)?;
    if replaced > 0 {
        eprintln!(
            "note: {replaced} entries used the conservative error-bound half-width (degenerate s)"
        );
    }

    let wanted: Option<Vec<(usize, usize)>> = match &args.entries {
        Some(spec) => {
            let mut list = Vec::new();
            for part in spec.split(';').filter(|s| !s.trim().is_empty()) {
                let e = parse_entry(part)?;
                if e.0 >= est.rows() || e.1 >= est.cols() {
                    return Err(CmdError::usage(anyhow!(
                        "entry ({}, {}) outside the {}x{} grid",
                        e.0,
                        e.1,
                        est.rows(),
                        est.cols()
                    )));
                }
                list.push(e);
            }
            Some(list)
        }
        None => None,
    };
    let all: Vec<(usize, usize)>;
    let selected: &[(usize, usize)] = match &wanted {
        Some(list) => list,
        None => {
            all = (0..est.rows()).flat_map(|i| (0..est.cols()).map(move |j| (i, j))).collect();
            &all
        }
    };
    let rows: Vec<Vec<String>> = selected
        .iter()
        .map(|&(i, j)| {
            vec![
                i.to_string(),
                j.to_string(),
                format_float(est.md.get(i, j)),
                format_float(field.s.get(i, j)),
                format_float(iv.lo.get(i, j)),
                format_float(iv.hi.get(i, j)),
            ]
        })
        .collect();
    io::write_rows_csv(&args.output, "i,j,md,s,lo,hi", &rows)?;
    mb.record_output(&args.output)?;
    mb.write(&args.output)?;
    Ok(())
}

/// Shared interval construction with the degenerate-`s` fallback half-width
/// derived from the fitted diagnostics.
fn fallback_intervals(
    obs: &MaskedObservations,
    est: &DebiasedEstimate,
    field: &VarianceField,
    level: f64,
) -> Result<(mcuq_core::uq::IntervalField, usize), CmdError> {
    let r = est.rank();
    let kappa = {
        let smax = est.svd.sigma[0];
        let smin = est.svd.sigma[r - 1];
        if smin > 0.0 {
            smax / smin
        } else {
            1.0
        }
    };
    let mu = incoherence(&est.svd.u, &est.svd.v, r).map_err(anyhow::Error::new)?;
    let l_hat = l_hat_proxy(obs, est);
    let halfwidth = entrywise_bound(est, l_hat, mu, r, kappa, est.p_used);
    let out = intervals_with_fallback(&est.md, field, level, halfwidth, DEGENERATE_S_FACTOR)
        .map_err(anyhow::Error::new)?;
    Ok(out)
}

fn resolve_threads(flag: Option<usize>) -> usize {
    // Per the interface contract, MCUQ_THREADS overrides the flag.
    if let Ok(v) = std::env::var("MCUQ_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n > 0 {
                return n;
            }
        }
    }
    flag.filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

fn read_sim_config(path: &Path) -> Result<SimConfig, CmdError> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(CmdError::usage)?;
    let cfg: SimConfig = serde_json::from_str(&text)
        .with_context(|| format!("{}: invalid simulation config", path.display()))
        .map_err(CmdError::usage)?;
    cfg.validate().map_err(|e| CmdError::usage(anyhow::Error::new(e)))?;
    Ok(cfg)
}

/// Runs trials on a local rayon pool; results are collected in trial order,
/// so the report is identical for every thread count.
pub fn run_trials_parallel(
    cfg: &SimConfig,
    probe: (usize, usize),
    threads: usize,
) -> Vec<Result<TrialOutcome, CoreError>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool");
    pool.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|t| run_trial(cfg, t, probe))
            .collect()
    })
}

fn cmd_simulate(args: SimulateArgs, argv: Vec<String>) -> CmdResult {
    let cfg = read_sim_config(&args.config)?;
    let threads = resolve_threads(args.threads);
    let mut mb = ManifestBuilder::new(
        "simulate",
        argv,
        serde_json::to_value(&cfg).expect("config serializes"),
        Some(cfg.seed),
    );
    mb.record_input(&args.config).map_err(CmdError::usage)?;

    let outcomes = run_trials_parallel(&cfg, (0, 0), threads);
    let report = aggregate(cfg.trials, &outcomes);

    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    std::fs::write(&args.output, json + "\n")
        .with_context(|| format!("cannot write {}", args.output.display()))?;

    let z_path = args.z_out.unwrap_or_else(|| args.output.with_extension("csv"));
    let mut rows = Vec::new();
    for (t, out) in outcomes.iter().enumerate() {
        if let Ok(o) = out {
            rows.push(vec![
                t.to_string(),
                format_float(o.coverage),
                o.z_probe.map(format_float).unwrap_or_default(),
            ]);
        }
    }
    io::write_rows_csv(&z_path, "trial,coverage,z", &rows)?;

    mb.record_output(&args.output)?;
    mb.record_output(&z_path)?;
    mb.write(&args.output)?;

    let mut line = format!(
        "coverage: {:.4} ± {:.4} ({} trials, {} skipped)",
        report.mean_coverage, report.std_coverage, report.trials_completed, report.trials_skipped
    );
    if report.trials_completed < 2 {
        let _ = write!(line, " [std degenerate: single trial]");
    }
    println!("{line}");
    Ok(())
}

fn parse_entry(s: &str) -> Result<(usize, usize), CmdError> {
    let parts: Vec<_> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(CmdError::usage(anyhow!("--entry expects `i,j`")));
    }
    let i = parts[0].trim().parse().map_err(|_| CmdError::usage(anyhow!("bad entry row")))?;
    let j = parts[1].trim().parse().map_err(|_| CmdError::usage(anyhow!("bad entry column")))?;
    Ok((i, j))
}

fn cmd_distcheck(args: DistcheckArgs, argv: Vec<String>) -> CmdResult {
    let cfg = read_sim_config(&args.config)?;
    let entry = parse_entry(&args.entry)?;
    if entry.0 >= cfg.m || entry.1 >= cfg.n {
        return Err(CmdError::usage(anyhow!(
            "entry ({}, {}) outside the {}x{} grid",
            entry.0,
            entry.1,
            cfg.m,
            cfg.n
        )));
    }
    let threads = resolve_threads(args.threads);
    let mut mb = ManifestBuilder::new(
        "distcheck",
        argv,
        serde_json::json!({
            "config": serde_json::to_value(&cfg).expect("config serializes"),
            "entry": [entry.0, entry.1],
            "bins": args.bins,
        }),
        Some(cfg.seed),
    );
    mb.record_input(&args.config).map_err(CmdError::usage)?;

    let outcomes = run_trials_parallel(&cfg, entry, threads);
    let report = aggregate(cfg.trials, &outcomes);

    let hist = histogram(&report.z_samples, -4.0, 4.0, args.bins);
    let rows: Vec<Vec<String>> = hist
        .iter()
        .map(|&(lo, hi, c)| vec![format_float(lo), format_float(hi), c.to_string()])
        .collect();
    io::write_rows_csv(&args.output, "bin_left,bin_right,count", &rows)?;

    let json_path = args.json.unwrap_or_else(|| args.output.with_extension("json"));
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    std::fs::write(&json_path, json + "\n")
        .with_context(|| format!("cannot write {}", json_path.display()))?;

    mb.record_output(&args.output)?;
    mb.record_output(&json_path)?;
    mb.write(&args.output)?;

    match report.ks {
        Some(ks) => println!(
            "KS = {:.4} over {} samples ({} excluded for zero s, {} trials skipped)",
            ks,
            report.z_samples.len(),
            report.z_excluded,
            report.trials_skipped
        ),
        None => println!(
            "KS undefined: no usable samples ({} excluded for zero s, {} trials skipped)",
            report.z_excluded, report.trials_skipped
        ),
    }
    Ok(())
}

fn cmd_covmax(args: CovmaxArgs, argv: Vec<String>) -> CmdResult {
    if args.budget < 0.0 {
        return Err(CmdError::usage(anyhow!("--budget must be nonnegative")));
    }
    let mut mb = ManifestBuilder::new(
        "covmax",
        argv,
        serde_json::json!({
            "input": args.input.display().to_string(),
            "budget": args.budget,
            "truth": args.truth.as_ref().map(|p| p.display().to_string()),
            "output": args.output.display().to_string(),
        }),
        None,
    );
    mb.record_input(&args.input).map_err(CmdError::usage)?;

    let rows = io::read_interval_rows(&args.input).map_err(CmdError::usage)?;
    let prob = AllocationProblem {
        entries: rows.iter().map(|&(i, j, _, _)| (i, j)).collect(),
        centers: rows.iter().map(|&(_, _, md, _)| md).collect(),
        s: rows.iter().map(|&(_, _, _, s)| s).collect(),
        budget: args.budget,
    };
    let alloc = allocate(&prob).map_err(anyhow::Error::new)?;

    let realized = match &args.truth {
        Some(tpath) => {
            mb.record_input(tpath).map_err(CmdError::usage)?;
            let parsed = io::read_observations(tpath).map_err(CmdError::usage)?;
            let mut map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
            for (i, j, v) in parsed.entries {
                map.insert((i, j), v);
            }
            let mut hit = 0usize;
            for (k, &(i, j)) in alloc.entries.iter().enumerate() {
                let Some(&t) = map.get(&(i, j)) else {
                    return Err(CmdError::usage(anyhow!(
                        "truth file is missing entry ({i}, {j})"
                    )));
                };
                if t >= alloc.lo[k] && t <= alloc.hi[k] {
                    hit += 1;
                }
            }
            Some(hit as f64 / alloc.entries.len() as f64)
        }
        None => None,
    };

    let out_rows: Vec<Vec<String>> = alloc
        .entries
        .iter()
        .enumerate()
        .map(|(k, &(i, j))| {
            vec![
                i.to_string(),
                j.to_string(),
                format_float(alloc.lo[k]),
                format_float(alloc.hi[k]),
            ]
        })
        .collect();
    io::write_rows_csv(&args.output, "i,j,a,b", &out_rows)?;

    let json_path = args.json.unwrap_or_else(|| args.output.with_extension("json"));
    let summary = serde_json::json!({
        "expected_coverage": alloc.expected_coverage,
        "realized_coverage": realized,
        "multiplier": alloc.multiplier,
        "total_length": alloc.total_length,
        "excluded_zero_s": alloc.excluded_zero_s,
    });
    std::fs::write(&json_path, serde_json::to_string_pretty(&summary).unwrap() + "\n")
        .with_context(|| format!("cannot write {}", json_path.display()))?;

    mb.record_output(&args.output)?;
    mb.record_output(&json_path)?;
    mb.write(&args.output)?;

    match realized {
        Some(r) => println!(
            "expected coverage {:.4}, realized coverage {:.4}",
            alloc.expected_coverage, r
        ),
        None => println!("expected coverage {:.4}", alloc.expected_coverage),
    }
    Ok(())
}

impl From<CoreError> for CmdError {
    fn from(e: CoreError) -> Self {
        CmdError::from(anyhow::Error::new(e))
    }
}
