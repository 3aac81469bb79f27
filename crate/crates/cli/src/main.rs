use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hcr_core::bench::{self, BenchmarkReport};
use hcr_core::datagen::{self, SeriesTask, TimeSeriesSpec};
use hcr_core::hyperspherical::frontier;
use hcr_core::{
    load_region, to_hyperspherical, AccelConfig, HcrError, LagrangianConfig, Result, SyntheticSpec,
    TrainConfig,
};

#[derive(Parser)]
#[command(
    name = "hcr",
    version,
    about = "Hyperspherical constrained outputs: benchmarks and conversion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run all four methods on the hypersphere task.
    BenchSynthetic(SyntheticArgs),
    /// Run all four methods on per-series polytope tasks.
    BenchTimeseries(TimeseriesArgs),
    /// Sample (d, r) pairs on a region and check the round-trip error.
    Roundtrip(RoundtripArgs),
    /// Convert one point to hyperspherical coordinates.
    Convert(ConvertArgs),
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long, default_value_t = 128)]
    hidden: usize,
    /// Dual ascent step for the penalty baseline.
    #[arg(long, default_value_t = 0.01)]
    dual_step: f64,
}

#[derive(Args)]
struct OutputArgs {
    /// Write the full report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the summary rows as CSV.
    #[arg(long)]
    out_csv: Option<PathBuf>,
}

#[derive(Args)]
struct SyntheticArgs {
    #[arg(long, default_value_t = 128)]
    k: usize,
    #[arg(long, default_value_t = 768)]
    n: usize,
    #[arg(long, default_value_t = 10.0)]
    radius: f64,
    #[arg(long, default_value_t = 500)]
    train: usize,
    #[arg(long, default_value_t = 1000)]
    test: usize,
    /// Number of seeds (0..seeds).
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    #[command(flatten)]
    training: TrainArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct TimeseriesArgs {
    /// Directory of CSV files, one series per file.
    #[arg(
        long,
        conflicts_with = "synthetic",
        required_unless_present = "synthetic"
    )]
    series_dir: Option<PathBuf>,
    /// CSV column holding the values (default: first column).
    #[arg(long, requires = "series_dir")]
    column: Option<String>,
    /// Accept empty CSV files and skip them.
    #[arg(long)]
    allow_empty: bool,
    /// Use generated random-walk series.
    #[arg(long)]
    synthetic: bool,
    /// Window length, used for both input and output.
    #[arg(long, default_value_t = 48)]
    n: usize,
    /// Maximum number of series.
    #[arg(long, default_value_t = 30)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    training: TrainArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct RoundtripArgs {
    #[arg(long)]
    region: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    points: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ConvertArgs {
    #[arg(long)]
    region: PathBuf,
    /// Comma-separated coordinates.
    #[arg(long, allow_hyphen_values = true)]
    point: String,
}

fn train_config(args: &TrainArgs, base: TrainConfig) -> TrainConfig {
    TrainConfig {
        epochs: args.epochs,
        learning_rate: args.lr,
        batch_size: args.batch,
        hidden: args.hidden,
        ..base
    }
}

fn lagrangian_config(args: &TrainArgs) -> LagrangianConfig {
    LagrangianConfig {
        step_size: args.dual_step,
        ..Default::default()
    }
}

fn emit(report: &BenchmarkReport, out: &OutputArgs) -> Result<()> {
    print!("{}", report.to_table());
    if let Some(path) = &out.out {
        fs::write(path, report.to_json()?)?;
        log::info!("wrote {}", path.display());
    }
    if let Some(path) = &out.out_csv {
        fs::write(path, report.to_csv())?;
        log::info!("wrote {}", path.display());
    }
    Ok(())
}

fn bench_synthetic(args: SyntheticArgs) -> Result<()> {
    let spec = SyntheticSpec {
        k: args.k,
        n: args.n,
        radius: args.radius,
        n_train: args.train,
        n_test: args.test,
        ..Default::default()
    };
    let seeds: Vec<u64> = (0..args.seeds).collect();
    let cfg = train_config(&args.training, TrainConfig::default());
    let report =
        bench::run_synthetic_bench(&spec, &seeds, &cfg, &lagrangian_config(&args.training))?;
    emit(&report, &args.output)
}

fn load_series_dir(
    dir: &Path,
    column: Option<&str>,
    allow_empty: bool,
    n: usize,
    count: usize,
) -> Result<Vec<SeriesTask>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")))
        .collect();
    files.sort();
    let frac = TimeSeriesSpec::default().train_fraction;
    let mut tasks = Vec::new();
    for path in files {
        if tasks.len() == count {
            break;
        }
        let values = datagen::load_csv_series(&path, column, allow_empty).map_err(|e| match e {
            HcrError::Parse { line, reason } => HcrError::Parse {
                line,
                reason: format!("{}: {reason}", path.display()),
            },
            other => other,
        })?;
        if values.is_empty() {
            log::warn!("{}: empty, skipping", path.display());
            continue;
        }
        match datagen::window_series(&values, n, frac) {
            Ok(task) => tasks.push(task),
            Err(HcrError::InvalidConfig(reason)) => {
                log::warn!("{}: {reason}, skipping", path.display())
            }
            Err(e) => return Err(e),
        }
    }
    if tasks.is_empty() {
        return Err(HcrError::InvalidConfig(format!(
            "no usable series in {}",
            dir.display()
        )));
    }
    Ok(tasks)
}

fn bench_timeseries(args: TimeseriesArgs) -> Result<()> {
    let series = match &args.series_dir {
        Some(dir) => load_series_dir(
            dir,
            args.column.as_deref(),
            args.allow_empty,
            args.n,
            args.count,
        )?,
        None => datagen::gen_synthetic_timeseries(args.count, args.n, args.seed)?,
    };
    let cfg = train_config(&args.training, bench::timeseries_train_config());
    let report = bench::run_timeseries_bench(&series, &cfg, &lagrangian_config(&args.training))?;
    emit(&report, &args.output)
}

fn roundtrip(args: RoundtripArgs) -> Result<()> {
    let region = load_region(&args.region)?;
    let report = bench::run_roundtrip_check(&region, args.points, args.seed)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!(
            "points:      {} (n = {}, m = {})",
            report.points, report.dimension, report.constraints
        );
        println!("max error:   {:e}", report.max_error);
        println!("mean error:  {:e}", report.mean_error);
        println!(
            "r = 0:       {} points, max error {:e}",
            report.zero_radius_points, report.zero_radius_max_error
        );
        println!("infeasible:  {}", report.infeasible);
    }
    Ok(())
}

fn parse_point(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim().parse::<f64>().map_err(|e| HcrError::Parse {
                line: 1,
                reason: format!("point component {s:?}: {e}"),
            })
        })
        .collect()
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
    format!("({})", parts.join(", "))
}

fn convert(args: ConvertArgs) -> Result<()> {
    let region = load_region(&args.region)?;
    let y = parse_point(&args.point)?;
    let accel = AccelConfig::for_region(&region);
    let coord = to_hyperspherical(&region, &y, &accel)?;
    let f = frontier(&region, coord.direction(), &accel)?;
    println!("d = {}", fmt_vec(coord.direction()));
    println!("r = {}", coord.radius());
    println!("s = {}", f.distance);
    println!("frontier constraint = {}", f.index);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::BenchSynthetic(a) => bench_synthetic(a),
        Command::BenchTimeseries(a) => bench_timeseries(a),
        Command::Roundtrip(a) => roundtrip(a),
        Command::Convert(a) => convert(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let cat = e.category();
            eprintln!("error[{}]: {e}", cat.name());
            ExitCode::from(cat.exit_code() as u8)
        }
    }
}
