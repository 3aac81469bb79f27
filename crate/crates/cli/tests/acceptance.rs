//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the target fails if any criterion fails.
//!
//! The full-scale synthetic run only executes with `HCR_ACCEPT_FULL=1`.

use std::process::Command;
use std::time::Instant;

use hcr_core::bench::{self, BenchmarkReport};
use hcr_core::datagen::{self, SyntheticSpec};
use hcr_core::hyperspherical::{frontier, frontier_full_scan};
use hcr_core::{
    from_hyperspherical, normalize_direction, project_polytope, to_hyperspherical, AccelConfig,
    ConstraintKind, DykstraConfig, FeasibleRegion, HypersphericalCoord, LagrangianConfig,
    TrainConfig, Variant,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn ball_768() -> FeasibleRegion {
    FeasibleRegion::new(
        vec![0.0; 768],
        vec![ConstraintKind::ball(vec![0.0; 768], 10.0)],
    )
    .unwrap()
}

fn polytope_190() -> FeasibleRegion {
    let tasks = datagen::gen_synthetic_timeseries(1, 48, 7).unwrap();
    datagen::build_timeseries_region(&tasks[0].train).unwrap()
}

fn random_coord(rng: &mut ChaCha8Rng, n: usize) -> HypersphericalCoord {
    let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    HypersphericalCoord::new(normalize_direction(&v), rng.random_range(0.0..=1.0)).unwrap()
}

/// Constraint values computed straight from the constraint data.
fn max_violation(region: &FeasibleRegion, y: &[f64]) -> f64 {
    region
        .constraints()
        .iter()
        .map(|c| match c.kind() {
            ConstraintKind::Ball { center, radius } => {
                y.iter()
                    .zip(center)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
                    - radius
            }
            ConstraintKind::Halfspace { normal, offset } => {
                normal.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() - offset
            }
            ConstraintKind::GenericConvex(_) => unreachable!(),
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn parse_field(stdout: &str, key: &str) -> Option<String> {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")).map(str::to_string))
}

fn golden_convert() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("circle.json");
    std::fs::write(
        &path,
        r#"{"origin":[0,0],"constraints":[{"kind":"ball","center":[0,0],"radius":10}]}"#,
    )
    .map_err(|e| e.to_string())?;
    let out = Command::new(env!("CARGO_BIN_EXE_hcr"))
        .args(["convert", "--region"])
        .arg(&path)
        .args(["--point", "5,0"])
        .output()
        .map_err(|e| e.to_string())?;
    let stdout = String::from_utf8_lossy(&out.stdout).to_string();
    let d = parse_field(&stdout, "d").unwrap_or_default();
    let comps: Vec<f64> = d
        .trim_matches(|c| c == '(' || c == ')')
        .split(',')
        .filter_map(|s| s.trim().parse().ok())
        .collect();
    let r: f64 = parse_field(&stdout, "r")
        .and_then(|s| s.parse().ok())
        .unwrap_or(f64::NAN);
    let s: f64 = parse_field(&stdout, "s")
        .and_then(|s| s.parse().ok())
        .unwrap_or(f64::NAN);
    let ok = out.status.success()
        && comps.len() == 2
        && (comps[0] - 1.0).abs() <= 1e-12
        && comps[1].abs() <= 1e-12
        && (r - 0.5).abs() <= 1e-12
        && (s - 10.0).abs() <= 1e-12;
    check(ok, format!("d = {d}, r = {r}, s = {s}"))
}

fn feasibility_by_construction() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut bad = Vec::new();
    for (name, region) in [
        ("ball n=768", ball_768()),
        ("polytope m=190", polytope_190()),
    ] {
        let accel = AccelConfig::for_region(&region);
        let mut infeasible = 0;
        for _ in 0..10_000 {
            let coord = random_coord(&mut rng, region.dim());
            let y = from_hyperspherical(&region, &coord, &accel).map_err(|e| e.to_string())?;
            if max_violation(&region, &y) > region.tol_feas() {
                infeasible += 1;
            }
        }
        bad.push(format!("{name}: {infeasible}/10000 infeasible"));
        if infeasible > 0 {
            return Err(bad.join(", "));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(secs < 30.0, format!("{}, {secs:.2} s", bad.join(", ")))
}

fn round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut parts = Vec::new();
    let mut worst: f64 = 0.0;
    for (name, region) in [("ball", ball_768()), ("polytope", polytope_190())] {
        let accel = AccelConfig::for_region(&region);
        let mut max_err: f64 = 0.0;
        for _ in 0..10_000 {
            let y = from_hyperspherical(&region, &random_coord(&mut rng, region.dim()), &accel)
                .map_err(|e| e.to_string())?;
            let back = from_hyperspherical(
                &region,
                &to_hyperspherical(&region, &y, &accel).map_err(|e| e.to_string())?,
                &accel,
            )
            .map_err(|e| e.to_string())?;
            let err = y
                .iter()
                .zip(&back)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            max_err = max_err.max(err);
        }
        worst = worst.max(max_err);
        parts.push(format!("{name} max error {max_err:.3e}"));
    }
    check(worst <= 1e-6, parts.join(", "))
}

/// Frontier distance over a halfspace-only region, computed directly.
fn halfspace_frontier(region: &FeasibleRegion, d: &[f64]) -> f64 {
    let o = region.origin();
    region
        .constraints()
        .iter()
        .map(|c| match c.kind() {
            ConstraintKind::Halfspace { normal, offset } => {
                let rate: f64 = normal.iter().zip(d).map(|(a, b)| a * b).sum();
                let at_o: f64 = normal.iter().zip(o).map(|(a, b)| a * b).sum();
                if rate > 0.0 {
                    (offset - at_o) / rate
                } else {
                    f64::INFINITY
                }
            }
            _ => unreachable!(),
        })
        .fold(f64::INFINITY, f64::min)
}

fn acceleration_equivalence() -> Outcome {
    let region = polytope_190();
    let accel = AccelConfig::for_region(&region);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_rel: f64 = 0.0;
    let mut total = 0usize;
    for _ in 0..1000 {
        let d = random_coord(&mut rng, region.dim()).into_parts().0;
        let fast = frontier(&region, &d, &accel).map_err(|e| e.to_string())?;
        let full = frontier_full_scan(&region, &d).map_err(|e| e.to_string())?;
        let oracle = halfspace_frontier(&region, &d);
        for s in [fast.distance, full.distance] {
            worst_rel = worst_rel.max((s - oracle).abs() / oracle);
        }
        total += fast.candidates;
    }
    let mean = total as f64 / 1000.0;
    check(
        worst_rel <= 1e-9 && mean <= 2.0,
        format!(
            "max relative gap {worst_rel:.3e}, mean restricted set {mean:.3} of {}",
            region.len()
        ),
    )
}

fn desk_spec() -> SyntheticSpec {
    SyntheticSpec {
        k: 16,
        n: 32,
        radius: 10.0,
        n_train: 200,
        n_test: 200,
        ..Default::default()
    }
}

fn desk_benchmark() -> Outcome {
    let start = Instant::now();
    let report = bench::run_synthetic_bench(
        &desk_spec(),
        &[0, 1, 2],
        &TrainConfig::default(),
        &LagrangianConfig::default(),
    )
    .map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let s = |v| report.summary(v).unwrap();
    let (hcr, proj, simple) = (s(Variant::Hcr), s(Variant::Projection), s(Variant::Simple));
    let t_hcr = hcr.avg_time.unwrap().mean;
    let t_proj = proj.avg_time.unwrap().mean;
    let a = hcr.inside_ratio.mean == 1.0 && proj.inside_ratio.mean == 1.0;
    let b = simple.inside_ratio.mean < 1.0;
    let c = t_hcr < t_proj;
    check(
        a && b && c && secs < 300.0,
        format!(
            "(a) inside hcr {:.3} projection {:.3}; (b) simple {:.3}; (c) avg time hcr {t_hcr:.3e} s < projection {t_proj:.3e} s: {c}; {secs:.1} s",
            hcr.inside_ratio.mean, proj.inside_ratio.mean, simple.inside_ratio.mean
        ),
    )
}

fn full_scale() -> Option<Outcome> {
    if std::env::var("HCR_ACCEPT_FULL").as_deref() != Ok("1") {
        return None;
    }
    let seeds: Vec<u64> = (0..10).collect();
    let report = match bench::run_synthetic_bench(
        &SyntheticSpec::default(),
        &seeds,
        &TrainConfig::default(),
        &LagrangianConfig::default(),
    ) {
        Ok(r) => r,
        Err(e) => return Some(Err(e.to_string())),
    };
    let hcr = report.summary(Variant::Hcr).unwrap();
    let simple = report.summary(Variant::Simple).unwrap();
    Some(check(
        hcr.error.mean <= simple.error.mean && hcr.inside_ratio.mean == 1.0,
        format!(
            "MSE hcr {:.4} vs simple {:.4}; inside hcr {:.3} simple {:.3}",
            hcr.error.mean, simple.error.mean, hcr.inside_ratio.mean, simple.inside_ratio.mean
        ),
    ))
}

fn constraint_count() -> Outcome {
    let m = polytope_190().len();
    check(m == 190, format!("n = 48 gives m = {m}"))
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Exact projection by enumerating active sets and keeping the closest KKT point.
fn qp_oracle(y: &[f64], hs: &[(Vec<f64>, f64)]) -> Vec<f64> {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let feasible = |x: &[f64]| hs.iter().all(|(a, b)| dot(a, x) - b <= 1e-10);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << hs.len()) {
        let active: Vec<&(Vec<f64>, f64)> = (0..hs.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| &hs[i])
            .collect();
        if active.len() > y.len() {
            continue;
        }
        let x = if active.is_empty() {
            y.to_vec()
        } else {
            let gram: Vec<Vec<f64>> = active
                .iter()
                .map(|(ai, _)| active.iter().map(|(aj, _)| dot(ai, aj)).collect())
                .collect();
            let rhs: Vec<f64> = active.iter().map(|(a, b)| dot(a, y) - b).collect();
            let Some(lambda) = solve(gram, rhs) else {
                continue;
            };
            if lambda.iter().any(|&l| l < -1e-12) {
                continue;
            }
            let mut x = y.to_vec();
            for ((a, _), l) in active.iter().zip(&lambda) {
                for (xi, ai) in x.iter_mut().zip(a) {
                    *xi -= l * ai;
                }
            }
            x
        };
        if feasible(&x) {
            let dist: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            if best.as_ref().is_none_or(|(d, _)| dist < *d) {
                best = Some((dist, x));
            }
        }
    }
    best.expect("origin is feasible, so some KKT point exists")
        .1
}

fn dykstra_vs_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let m = rng.random_range(1..=6);
        let hs: Vec<(Vec<f64>, f64)> = (0..m)
            .map(|_| {
                let a: Vec<f64> = (0..3).map(|_| StandardNormal.sample(&mut rng)).collect();
                (normalize_direction(&a), rng.random_range(0.5..1.5))
            })
            .collect();
        let y: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
        let cfg = DykstraConfig {
            max_sweeps: 100_000,
            ..Default::default()
        };
        let p = project_polytope(&y, &hs, &cfg).map_err(|e| e.to_string())?;
        let q = qp_oracle(&y, &hs);
        let gap = p
            .iter()
            .zip(&q)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        worst = worst.max(gap);
    }
    check(
        worst <= 1e-6,
        format!("max distance to oracle {worst:.3e} over 100 instances"),
    )
}

fn run_cli_bench(out: &std::path::Path, threads: &str) -> Result<BenchmarkReport, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_hcr"))
        .env("HCR_THREADS", threads)
        .args([
            "bench-synthetic",
            "--k",
            "8",
            "--n",
            "12",
            "--train",
            "60",
            "--test",
            "60",
        ])
        .args(["--seeds", "3", "--epochs", "5", "--out"])
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    if !status.status.success() {
        return Err(String::from_utf8_lossy(&status.stderr).to_string());
    }
    let text = std::fs::read_to_string(out).map_err(|e| e.to_string())?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let a = run_cli_bench(&dir.path().join("a.json"), "1")?;
    let b = run_cli_bench(&dir.path().join("b.json"), "3")?;
    let ja = a.without_timing().to_json().map_err(|e| e.to_string())?;
    let jb = b.without_timing().to_json().map_err(|e| e.to_string())?;
    check(
        ja == jb,
        format!("{} bytes each, identical: {}", ja.len(), ja == jb),
    )
}

fn main() {
    let criteria: Vec<(&str, Box<dyn Fn() -> Option<Outcome>>)> = vec![
        ("1 golden conversion", Box::new(|| Some(golden_convert()))),
        (
            "2 feasibility by construction",
            Box::new(|| Some(feasibility_by_construction())),
        ),
        ("3 round trip", Box::new(|| Some(round_trip()))),
        (
            "4 acceleration equivalence",
            Box::new(|| Some(acceleration_equivalence())),
        ),
        (
            "5 desk-scale synthetic benchmark",
            Box::new(|| Some(desk_benchmark())),
        ),
        ("6 full-scale synthetic benchmark", Box::new(full_scale)),
        ("7 constraint count", Box::new(|| Some(constraint_count()))),
        (
            "8 projection oracle",
            Box::new(|| Some(dykstra_vs_oracle())),
        ),
        ("9 determinism", Box::new(|| Some(determinism()))),
    ];
    let mut failed = 0;
    for (name, run) in &criteria {
        match run() {
            Some(Ok(detail)) => println!("PASS criterion {name}: {detail}"),
            Some(Err(detail)) => {
                failed += 1;
                println!("FAIL criterion {name}: {detail}");
            }
            None => println!("SKIP criterion {name}: set HCR_ACCEPT_FULL=1 to run"),
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
