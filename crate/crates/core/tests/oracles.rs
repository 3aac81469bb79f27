use hcr_core::bench::{self, BenchmarkReport, RunRecord};
use hcr_core::datagen::{self, SyntheticSpec};
use hcr_core::hyperspherical::frontier;
use hcr_core::{
    from_hyperspherical, normalize_direction, project, to_hyperspherical, AccelConfig,
    ConstraintKind, FeasibleRegion, HypersphericalCoord, LagrangianConfig, TrainConfig, Variant,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;

fn polytope() -> &'static FeasibleRegion {
    static REGION: OnceLock<FeasibleRegion> = OnceLock::new();
    REGION.get_or_init(|| {
        let tasks = datagen::gen_synthetic_timeseries(1, 48, 11).unwrap();
        datagen::build_timeseries_region(&tasks[0].train).unwrap()
    })
}

fn value(kind: &ConstraintKind, y: &[f64]) -> f64 {
    match kind {
        ConstraintKind::Ball { center, radius } => {
            y.iter()
                .zip(center)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
                - radius
        }
        ConstraintKind::Halfspace { normal, offset } => {
            normal.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() - offset
        }
        ConstraintKind::GenericConvex(_) => unreachable!(),
    }
}

/// Crossing along a ray found by plain bisection on every constraint.
fn bisection_frontier(region: &FeasibleRegion, d: &[f64]) -> f64 {
    let o = region.origin();
    let at = |t: f64| -> Vec<f64> { o.iter().zip(d).map(|(o, d)| o + t * d).collect() };
    region
        .constraints()
        .iter()
        .map(|c| {
            let g = |t: f64| value(c.kind(), &at(t));
            let mut hi = 1.0;
            while g(hi) <= 0.0 {
                hi *= 2.0;
                if hi > 1e9 {
                    return f64::INFINITY;
                }
            }
            let mut lo = 0.0;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if g(mid) <= 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        })
        .fold(f64::INFINITY, f64::min)
}

fn mixed_region(seed: u64) -> FeasibleRegion {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 4;
    let mut kinds = vec![ConstraintKind::ball(vec![0.5; n], 3.0)];
    for _ in 0..6 {
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        kinds.push(ConstraintKind::halfspace(a, rng.random_range(0.5..2.0)));
    }
    FeasibleRegion::new(vec![0.0; n], kinds).unwrap()
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    normalize_direction(&v)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn violated_set_matches_brute_force(v in prop::collection::vec(-3.0f64..3.0, 48), scale in 0.0f64..4.0) {
        let region = polytope();
        let y: Vec<f64> = region.origin().iter().zip(&v).map(|(o, v)| o + scale * v).collect();
        let expected: Vec<usize> = region
            .constraints()
            .iter()
            .enumerate()
            .filter(|(_, c)| value(c.kind(), &y) > region.tol_feas())
            .map(|(i, _)| i)
            .collect();
        prop_assert_eq!(region.violated_constraints(&y).unwrap(), expected);
    }

    #[test]
    fn frontier_matches_bisection_on_mixed_regions(seed in 0u64..1000, v in prop::collection::vec(-1.0f64..1.0, 4)) {
        prop_assume!(v.iter().any(|x| x.abs() > 1e-3));
        let region = mixed_region(seed);
        let d = unit(v);
        let fast = frontier(&region, &d, &AccelConfig::for_region(&region)).unwrap().distance;
        let oracle = bisection_frontier(&region, &d);
        prop_assert!((fast - oracle).abs() <= 1e-9 * oracle.max(1.0), "{fast} vs {oracle}");
    }

    #[test]
    fn polytope_round_trip(v in prop::collection::vec(-1.0f64..1.0, 48), r in 0.0f64..=1.0) {
        prop_assume!(v.iter().any(|x| x.abs() > 1e-3));
        let region = polytope();
        let accel = AccelConfig::for_region(region);
        let coord = HypersphericalCoord::new(unit(v), r).unwrap();
        let y = from_hyperspherical(region, &coord, &accel).unwrap();
        prop_assert!(region.is_feasible(&y).unwrap());
        let back = to_hyperspherical(region, &y, &accel).unwrap();
        if r > 1e-9 {
            prop_assert!((back.radius() - r).abs() <= 1e-9);
            let gap: f64 = back.direction().iter().zip(coord.direction()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            prop_assert!(gap <= 1e-9);
        }
    }
}

#[test]
fn projection_beats_random_feasible_points() {
    let region = polytope();
    let accel = AccelConfig::for_region(region);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let dist = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let samples: Vec<Vec<f64>> = (0..1000)
        .map(|_| {
            let v: Vec<f64> = (0..48).map(|_| rng.random_range(-1.0..1.0)).collect();
            let coord = HypersphericalCoord::new(unit(v), rng.random_range(0.0..=1.0)).unwrap();
            from_hyperspherical(region, &coord, &accel).unwrap()
        })
        .collect();
    for _ in 0..5 {
        let y: Vec<f64> = region
            .origin()
            .iter()
            .map(|o| o + rng.random_range(-30.0..30.0))
            .collect();
        assert!(!region.is_feasible(&y).unwrap());
        let p = project(region, &y).unwrap();
        assert!(region.is_feasible(&p).unwrap());
        let best = samples
            .iter()
            .map(|s| dist(s, &y))
            .fold(f64::INFINITY, f64::min);
        assert!(dist(&p, &y) <= best + 1e-9);
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (
        m,
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt(),
    )
}

#[test]
fn report_aggregates_match_dumped_runs() {
    let spec = SyntheticSpec {
        k: 4,
        n: 6,
        n_train: 40,
        n_test: 40,
        ..Default::default()
    };
    let cfg = TrainConfig {
        epochs: 4,
        hidden: 8,
        ..Default::default()
    };
    let report =
        bench::run_synthetic_bench(&spec, &[3, 4, 5], &cfg, &LagrangianConfig::default()).unwrap();
    let dumped: BenchmarkReport = serde_json::from_str(&report.to_json().unwrap()).unwrap();
    assert_eq!(dumped, report);
    for method in Variant::ALL {
        let runs: Vec<&RunRecord> = dumped.runs.iter().filter(|r| r.method == method).collect();
        let s = dumped.summary(method).unwrap();
        assert_eq!(s.n_runs, 3);
        let (m, sd) = mean_std(&runs.iter().map(|r| r.error).collect::<Vec<_>>());
        assert!((s.error.mean - m).abs() <= 1e-12 && (s.error.std - sd).abs() <= 1e-12);
        let (m, _) = mean_std(&runs.iter().map(|r| r.inside_ratio).collect::<Vec<_>>());
        assert!((s.inside_ratio.mean - m).abs() <= 1e-12);
        if method.has_postprocess() {
            let (m, _) = mean_std(&runs.iter().map(|r| r.avg_time.unwrap()).collect::<Vec<_>>());
            assert!((s.avg_time.unwrap().mean - m).abs() <= 1e-15);
        } else {
            assert!(s.avg_time.is_none());
        }
    }
    assert!(dumped.verify_aggregates());
}

#[test]
fn timeseries_bench_reports_restricted_set_within_bounds() {
    let series = datagen::gen_synthetic_timeseries(2, 12, 1).unwrap();
    let cfg = TrainConfig {
        epochs: 3,
        hidden: 8,
        ..bench::timeseries_train_config()
    };
    let report = bench::run_timeseries_bench(&series, &cfg, &LagrangianConfig::default()).unwrap();
    assert_eq!(report.constraint_counts, vec![4 * 12 - 2; 2]);
    let r = report.restricted_set.unwrap();
    assert!(r.mean >= 1.0 && r.mean <= 46.0);
    for v in [Variant::Hcr, Variant::Projection] {
        assert_eq!(report.summary(v).unwrap().inside_ratio.mean, 1.0);
    }
    assert_eq!(report.metric, "relative_mse");
}
