//! Experiment runners comparing the four output treatments, and the report
//! type they produce.
//!
//! Each run trains every variant, evaluates on the held-out set and records
//! error, feasibility and post-processing time. Runs fan out over a rayon pool
//! capped by the `HCR_THREADS` environment variable; each run is itself
//! single-threaded, so results do not depend on the worker count.

use std::fmt::Write as _;
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraint::FeasibleRegion;
use crate::datagen::{self, Dataset, SeriesTask, SyntheticSpec};
use crate::error::{HcrError, Result};
use crate::hyperspherical::{
    self, from_hyperspherical, normalize_direction, to_hyperspherical, AccelConfig,
    HypersphericalCoord,
};
use crate::learner::{self, LagrangianConfig, ModelParameters, TrainConfig, Variant};
use crate::linalg;

/// Predictions made and discarded before timing starts.
pub const WARMUP_PREDICTIONS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    /// Mean and population standard deviation.
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
            };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Self {
            mean,
            std: var.sqrt(),
        }
    }
}

/// Metrics of one trained model on one test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: Variant,
    /// Seed (synthetic task) or series index (time series).
    pub run: u64,
    /// MSE, or MSE over test-target variance for the time-series task.
    pub error: f64,
    /// Fraction of predictions with every constraint `<= tol_feas`.
    pub inside_ratio: f64,
    /// Fraction of predictions with every constraint `<= 0`.
    pub inside_ratio_exact: f64,
    /// Mean post-processing time in seconds; `None` when the method has none.
    pub avg_time: Option<f64>,
    pub max_time: Option<f64>,
    /// Projections that hit the sweep cap and fell back to the radial safeguard.
    pub unconverged: usize,
    /// Mean number of constraints whose crossing was computed (hyperspherical only).
    pub mean_candidates: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Variant,
    pub n_runs: usize,
    pub error: Stat,
    pub inside_ratio: Stat,
    pub inside_ratio_exact: Stat,
    pub avg_time: Option<Stat>,
    pub max_time: Option<Stat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub task: String,
    /// `"mse"` or `"relative_mse"`.
    pub metric: String,
    pub summaries: Vec<MethodSummary>,
    pub runs: Vec<RunRecord>,
    /// Number of constraints of each evaluated region.
    pub constraint_counts: Vec<usize>,
    /// Restricted candidate-set size of the hyperspherical conversion, over runs.
    pub restricted_set: Option<Stat>,
    /// Runs that were skipped, with the reason.
    pub skipped: Vec<String>,
}

fn summarize(runs: &[RunRecord]) -> Vec<MethodSummary> {
    Variant::ALL
        .iter()
        .filter_map(|&method| {
            let rs: Vec<&RunRecord> = runs.iter().filter(|r| r.method == method).collect();
            if rs.is_empty() {
                return None;
            }
            let col = |f: &dyn Fn(&RunRecord) -> f64| {
                Stat::of(&rs.iter().map(|r| f(r)).collect::<Vec<_>>())
            };
            let opt_col = |f: &dyn Fn(&RunRecord) -> Option<f64>| {
                rs.iter()
                    .map(|r| f(r))
                    .collect::<Option<Vec<f64>>>()
                    .map(|v| Stat::of(&v))
            };
            Some(MethodSummary {
                method,
                n_runs: rs.len(),
                error: col(&|r| r.error),
                inside_ratio: col(&|r| r.inside_ratio),
                inside_ratio_exact: col(&|r| r.inside_ratio_exact),
                avg_time: opt_col(&|r| r.avg_time),
                max_time: opt_col(&|r| r.max_time),
            })
        })
        .collect()
}

fn restricted_stat(runs: &[RunRecord]) -> Option<Stat> {
    let v: Vec<f64> = runs.iter().filter_map(|r| r.mean_candidates).collect();
    (!v.is_empty()).then(|| Stat::of(&v))
}

impl BenchmarkReport {
    pub fn from_runs(task: &str, metric: &str, runs: Vec<RunRecord>) -> Self {
        Self {
            task: task.to_string(),
            metric: metric.to_string(),
            summaries: summarize(&runs),
            restricted_set: restricted_stat(&runs),
            runs,
            constraint_counts: Vec::new(),
            skipped: Vec::new(),
        }
    }

    pub fn summary(&self, method: Variant) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method)
    }

    /// Recomputes every summary from the per-run records and compares.
    pub fn verify_aggregates(&self) -> bool {
        summarize(&self.runs) == self.summaries
            && restricted_stat(&self.runs) == self.restricted_set
    }

    /// Fails if a method that guarantees feasibility produced an infeasible output.
    pub fn check_guarantees(&self) -> Result<()> {
        for r in &self.runs {
            if r.method.has_postprocess() && r.inside_ratio != 1.0 {
                return Err(HcrError::FeasibilityViolated {
                    method: r.method.name().to_string(),
                    ratio: r.inside_ratio,
                });
            }
        }
        Ok(())
    }

    /// Copy with every wall-clock field cleared, for reproducibility checks.
    pub fn without_timing(&self) -> Self {
        let mut out = self.clone();
        for r in &mut out.runs {
            r.avg_time = r.avg_time.map(|_| 0.0);
            r.max_time = r.max_time.map(|_| 0.0);
        }
        for s in &mut out.summaries {
            let zero = Stat {
                mean: 0.0,
                std: 0.0,
            };
            s.avg_time = s.avg_time.map(|_| zero);
            s.max_time = s.max_time.map(|_| zero);
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let metric = if self.metric == "relative_mse" {
            "R-MSE"
        } else {
            "MSE"
        };
        let _ = writeln!(
            out,
            "{:<11} {:>21} {:>17} {:>17} {:>23} {:>23}",
            "method", metric, "inside ratio", "inside (exact)", "avg time (s)", "max time (s)"
        );
        let pm = |s: &Stat, prec: usize| format!("{:.p$} ± {:.p$}", s.mean, s.std, p = prec);
        let time = |s: &Option<Stat>| {
            s.as_ref().map_or("NA".to_string(), |s| {
                format!("{:.3e} ± {:.1e}", s.mean, s.std)
            })
        };
        for s in &self.summaries {
            let _ = writeln!(
                out,
                "{:<11} {:>21} {:>17} {:>17} {:>23} {:>23}",
                s.method.name(),
                pm(&s.error, 4),
                pm(&s.inside_ratio, 3),
                pm(&s.inside_ratio_exact, 3),
                time(&s.avg_time),
                time(&s.max_time),
            );
        }
        if let Some(r) = &self.restricted_set {
            let _ = writeln!(
                out,
                "restricted constraint set: {:.3} ± {:.3}",
                r.mean, r.std
            );
        }
        if !self.constraint_counts.is_empty() {
            let lo = self.constraint_counts.iter().min().unwrap_or(&0);
            let hi = self.constraint_counts.iter().max().unwrap_or(&0);
            let _ = writeln!(out, "constraints per region: {lo}..={hi}");
        }
        for s in &self.skipped {
            let _ = writeln!(out, "skipped: {s}");
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "method,n_runs,error_mean,error_std,inside_mean,inside_std,inside_exact_mean,inside_exact_std,avg_time_mean,avg_time_std,max_time_mean,max_time_std\n",
        );
        let na = |s: &Option<Stat>| match s {
            Some(s) => format!("{},{}", s.mean, s.std),
            None => "NA,NA".to_string(),
        };
        for s in &self.summaries {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                s.method.name(),
                s.n_runs,
                s.error.mean,
                s.error.std,
                s.inside_ratio.mean,
                s.inside_ratio.std,
                s.inside_ratio_exact.mean,
                s.inside_ratio_exact.std,
                na(&s.avg_time),
                na(&s.max_time),
            );
        }
        out
    }
}

/// Worker count: `HCR_THREADS` if set to a positive integer, else the
/// available parallelism.
pub fn worker_count() -> usize {
    std::env::var("HCR_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn fan_out<T, R, F>(items: &[T], f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .map_err(|e| HcrError::InvalidConfig(format!("thread pool: {e}")))?;
    Ok(pool.install(|| items.par_iter().map(&f).collect()))
}

/// Evaluates a trained model on `test`, timing post-processing per prediction.
pub fn evaluate(
    params: &ModelParameters,
    region: &FeasibleRegion,
    test: &Dataset,
    run: u64,
    relative: bool,
) -> Result<RunRecord> {
    let accel = AccelConfig::for_region(region);
    for x in test.inputs.iter_rows().take(WARMUP_PREDICTIONS) {
        learner::predict_with(params, region, &accel, x)?;
    }
    let mut sq_err = 0.0;
    let mut inside = 0usize;
    let mut inside_exact = 0usize;
    let mut times: Vec<Duration> = Vec::new();
    let mut unconverged = 0;
    let mut candidates = 0usize;
    for (x, y) in test.inputs.iter_rows().zip(test.targets.iter_rows()) {
        let p = learner::predict_with(params, region, &accel, x)?;
        sq_err +=
            p.y.iter()
                .zip(y)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
        inside += region.is_feasible(&p.y)? as usize;
        inside_exact += region.is_feasible_with_tol(&p.y, 0.0)? as usize;
        if let Some(t) = p.postprocess {
            times.push(t);
        }
        unconverged += (!p.converged) as usize;
        if params.variant == Variant::Hcr {
            let coord = params.hyperspherical_output(x)?;
            candidates += hyperspherical::frontier(region, coord.direction(), &accel)?.candidates;
        }
    }
    let rows = test.len().max(1) as f64;
    let mut error = sq_err / (rows * test.output_dim() as f64);
    if relative {
        let var = Stat::of(test.targets.as_slice()).std.powi(2);
        if var > 0.0 {
            error /= var;
        }
    }
    let secs: Vec<f64> = times.iter().map(Duration::as_secs_f64).collect();
    let (avg_time, max_time) = if params.variant.has_postprocess() && !secs.is_empty() {
        (
            Some(secs.iter().sum::<f64>() / secs.len() as f64),
            Some(secs.iter().cloned().fold(0.0, f64::max)),
        )
    } else {
        (None, None)
    };
    Ok(RunRecord {
        method: params.variant,
        run,
        error,
        inside_ratio: inside as f64 / rows,
        inside_ratio_exact: inside_exact as f64 / rows,
        avg_time,
        max_time,
        unconverged,
        mean_candidates: (params.variant == Variant::Hcr).then(|| candidates as f64 / rows),
    })
}

fn run_all_variants(
    train: &Dataset,
    test: &Dataset,
    region: &FeasibleRegion,
    cfg: &TrainConfig,
    lag: &LagrangianConfig,
    run: u64,
    relative: bool,
) -> Result<Vec<RunRecord>> {
    Variant::ALL
        .iter()
        .map(|&v| {
            let params = learner::train(v, train, region, cfg, Some(lag))?;
            evaluate(&params, region, test, run, relative)
        })
        .collect()
}

/// Hypersphere task, one data set and one training seed per entry of `seeds`.
pub fn run_synthetic_bench(
    spec: &SyntheticSpec,
    seeds: &[u64],
    cfg: &TrainConfig,
    lag: &LagrangianConfig,
) -> Result<BenchmarkReport> {
    spec.validate()?;
    cfg.validate()?;
    let per_seed = fan_out(seeds, |&seed| -> Result<(Vec<RunRecord>, usize)> {
        let data = datagen::gen_synthetic(&SyntheticSpec {
            seed,
            ..spec.clone()
        })?;
        let cfg = TrainConfig {
            seed,
            ..cfg.clone()
        };
        let runs = run_all_variants(
            &data.train,
            &data.test,
            &data.region,
            &cfg,
            lag,
            seed,
            false,
        )?;
        Ok((runs, data.region.len()))
    })?;
    let mut runs = Vec::new();
    let mut counts = Vec::new();
    for r in per_seed {
        let (rs, m) = r?;
        runs.extend(rs);
        counts.push(m);
    }
    let mut report = BenchmarkReport::from_runs("synthetic", "mse", runs);
    report.constraint_counts = counts;
    report.check_guarantees()?;
    Ok(report)
}

/// Default training setup for the windowed series: two dense encoder layers
/// and standardized inputs.
pub fn timeseries_train_config() -> TrainConfig {
    TrainConfig {
        standardize_inputs: true,
        encoder_layers: 2,
        ..Default::default()
    }
}

/// Per-series polytope task. Series whose region is degenerate are skipped.
pub fn run_timeseries_bench(
    series: &[SeriesTask],
    cfg: &TrainConfig,
    lag: &LagrangianConfig,
) -> Result<BenchmarkReport> {
    cfg.validate()?;
    let indexed: Vec<(usize, &SeriesTask)> = series.iter().enumerate().collect();
    let per_series = fan_out(
        &indexed,
        |&(i, task)| -> Result<std::result::Result<(Vec<RunRecord>, usize), String>> {
            let region = match datagen::build_timeseries_region(&task.train) {
                Ok(r) => r,
                Err(HcrError::DegenerateRegion(reason)) => {
                    log::warn!("series {i}: degenerate region, skipping ({reason})");
                    return Ok(Err(format!("series {i}: {reason}")));
                }
                Err(e) => return Err(e),
            };
            log::info!(
                "series {i}: m = {} constraints, n = {}",
                region.len(),
                region.dim()
            );
            let test = datagen::project_targets(&task.test, &region)?;
            let runs = run_all_variants(&task.train, &test, &region, cfg, lag, i as u64, true)?;
            Ok(Ok((runs, region.len())))
        },
    )?;
    let mut runs = Vec::new();
    let mut counts = Vec::new();
    let mut skipped = Vec::new();
    for r in per_series {
        match r? {
            Ok((rs, m)) => {
                runs.extend(rs);
                counts.push(m);
            }
            Err(reason) => skipped.push(reason),
        }
    }
    let mut report = BenchmarkReport::from_runs("timeseries", "relative_mse", runs);
    report.constraint_counts = counts;
    report.skipped = skipped;
    report.check_guarantees()?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundtripReport {
    pub points: usize,
    pub dimension: usize,
    pub constraints: usize,
    /// Largest `|from(to(y)) - y|` over sampled points.
    pub max_error: f64,
    pub mean_error: f64,
    /// Sampled points with `r = 0`, and the largest error among them.
    pub zero_radius_points: usize,
    pub zero_radius_max_error: f64,
    /// Sampled points that came out infeasible (should be zero).
    pub infeasible: usize,
}

/// Every this many samples uses `r = 0`.
pub const ROUNDTRIP_ZERO_EVERY: usize = 50;

/// Samples `(d, r)` uniformly (direction from a normalized Gaussian), maps to
/// the region, converts back and forth and records the reconstruction error.
pub fn run_roundtrip_check(
    region: &FeasibleRegion,
    n_points: usize,
    seed: u64,
) -> Result<RoundtripReport> {
    let accel = AccelConfig::for_region(region);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = region.dim();
    let mut report = RoundtripReport {
        points: n_points,
        dimension: n,
        constraints: region.len(),
        max_error: 0.0,
        mean_error: 0.0,
        zero_radius_points: 0,
        zero_radius_max_error: 0.0,
        infeasible: 0,
    };
    let mut total = 0.0;
    for i in 0..n_points {
        let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let r: f64 = if i % ROUNDTRIP_ZERO_EVERY == 0 {
            0.0
        } else {
            rand::Rng::random_range(&mut rng, 0.0..=1.0)
        };
        let coord = HypersphericalCoord::new(normalize_direction(&v), r)?;
        let y = from_hyperspherical(region, &coord, &accel)?;
        if !region.is_feasible(&y)? {
            report.infeasible += 1;
            continue;
        }
        let back = from_hyperspherical(region, &to_hyperspherical(region, &y, &accel)?, &accel)?;
        let err = linalg::dist(&back, &y);
        total += err;
        report.max_error = report.max_error.max(err);
        if r == 0.0 {
            report.zero_radius_points += 1;
            report.zero_radius_max_error = report.zero_radius_max_error.max(err);
        }
    }
    report.mean_error = total / n_points.max(1) as f64;
    Ok(report)
}
