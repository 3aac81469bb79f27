//! Dataset generation: the hypersphere regression task, synthetic time series
//! with a max-deviation polytope, and CSV ingestion for external series.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::constraint::{ConstraintKind, FeasibleRegion, DEFAULT_STRICT_MARGIN, DEFAULT_TOL_FEAS};
use crate::error::{HcrError, Result};
use crate::linalg::Matrix;
use crate::projection::{self, DykstraConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Matrix,
    pub targets: Matrix,
    pub feasible: Vec<bool>,
}

const DATASET_MAGIC: &[u8; 4] = b"HCRD";
const DATASET_VERSION: u32 = 1;

impl Dataset {
    pub fn new(inputs: Matrix, targets: Matrix, feasible: Vec<bool>) -> Result<Self> {
        if inputs.rows() != targets.rows() || feasible.len() != inputs.rows() {
            return Err(HcrError::ShapeMismatch(format!(
                "{} inputs, {} targets, {} flags",
                inputs.rows(),
                targets.rows(),
                feasible.len()
            )));
        }
        if !inputs.is_finite() || !targets.is_finite() {
            return Err(HcrError::InvalidConfig(
                "dataset contains non-finite entries".into(),
            ));
        }
        Ok(Self {
            inputs,
            targets,
            feasible,
        })
    }

    /// Flags every row against `region`.
    pub fn with_region_flags(
        inputs: Matrix,
        targets: Matrix,
        region: &FeasibleRegion,
    ) -> Result<Self> {
        let feasible = targets
            .iter_rows()
            .map(|y| region.is_feasible(y))
            .collect::<Result<Vec<_>>>()?;
        Self::new(inputs, targets, feasible)
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.targets.cols()
    }

    pub fn feasible_ratio(&self) -> f64 {
        if self.feasible.is_empty() {
            return 1.0;
        }
        self.feasible.iter().filter(|&&f| f).count() as f64 / self.feasible.len() as f64
    }

    /// Binary cache layout (little endian):
    /// `"HCRD"`, `u32` version, `u64` rows, `u64` input dim, `u64` output dim,
    /// inputs row-major as `f64`, targets row-major as `f64`, one `u8` flag per row.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(DATASET_MAGIC)?;
        w.write_all(&DATASET_VERSION.to_le_bytes())?;
        for v in [self.len(), self.input_dim(), self.output_dim()] {
            w.write_all(&(v as u64).to_le_bytes())?;
        }
        for v in self.inputs.as_slice().iter().chain(self.targets.as_slice()) {
            w.write_all(&v.to_le_bytes())?;
        }
        let flags: Vec<u8> = self.feasible.iter().map(|&f| f as u8).collect();
        w.write_all(&flags)?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let bad = |reason: &str| HcrError::Parse {
            line: 0,
            reason: reason.to_string(),
        };
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != DATASET_MAGIC {
            return Err(bad("not a dataset cache file"));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        if u32::from_le_bytes(b4) != DATASET_VERSION {
            return Err(bad("unsupported dataset cache version"));
        }
        let mut b8 = [0u8; 8];
        let mut dims = [0usize; 3];
        for d in &mut dims {
            r.read_exact(&mut b8)?;
            *d = u64::from_le_bytes(b8) as usize;
        }
        let [rows, k, n] = dims;
        let mut read_f64s = |count: usize| -> Result<Vec<f64>> {
            let mut out = Vec::with_capacity(count);
            for _ in 0..count {
                r.read_exact(&mut b8)?;
                out.push(f64::from_le_bytes(b8));
            }
            Ok(out)
        };
        let inputs = Matrix::from_vec(rows, k, read_f64s(rows * k)?);
        let targets = Matrix::from_vec(rows, n, read_f64s(rows * n)?);
        let mut flags = vec![0u8; rows];
        r.read_exact(&mut flags)?;
        Self::new(inputs, targets, flags.into_iter().map(|f| f != 0).collect())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = fs::File::create(path)?;
        self.write_binary(std::io::BufWriter::new(file))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = fs::File::open(path)?;
        Self::read_binary(std::io::BufReader::new(file))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub k: usize,
    pub n: usize,
    pub radius: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
    pub train_range: (f64, f64),
    pub test_range: (f64, f64),
    pub weight_range: (f64, f64),
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            k: 128,
            n: 768,
            radius: 10.0,
            n_train: 500,
            n_test: 1000,
            seed: 0,
            train_range: (-0.8, 0.8),
            test_range: (-1.0, 1.0),
            weight_range: (-10.0, 10.0),
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let ordered = |(lo, hi): (f64, f64)| lo < hi;
        if !(self.radius > 0.0) {
            return Err(HcrError::InvalidConfig("radius must be positive".into()));
        }
        if self.k == 0 || self.n == 0 {
            return Err(HcrError::InvalidConfig("k and n must be positive".into()));
        }
        if !ordered(self.train_range) || !ordered(self.test_range) || !ordered(self.weight_range) {
            return Err(HcrError::InvalidConfig(
                "sampling ranges must be ordered".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub train: Dataset,
    pub test: Dataset,
    pub region: FeasibleRegion,
    /// Normalized `n x k` weight matrix, each row summing to one.
    pub weights: Matrix,
}

fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, (lo, hi): (f64, f64)) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.random_range(lo..hi)).collect();
    Matrix::from_vec(rows, cols, data)
}

/// Hypersphere regression task: `y = R * W x`, projected strictly inside the
/// ball of radius `R` centred at zero.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut weights = Matrix::zeros(spec.n, spec.k);
    for j in 0..spec.n {
        let row = loop {
            let row: Vec<f64> = (0..spec.k)
                .map(|_| rng.random_range(spec.weight_range.0..spec.weight_range.1))
                .collect();
            let sum: f64 = row.iter().sum();
            if sum.abs() > 1e-9 {
                break row.into_iter().map(|w| w / sum).collect::<Vec<_>>();
            }
        };
        weights.row_mut(j).copy_from_slice(&row);
    }
    let center = vec![0.0; spec.n];
    let region = FeasibleRegion::new(
        center.clone(),
        vec![ConstraintKind::ball(center.clone(), spec.radius)],
    )?;
    let mut make = |rows: usize, range: (f64, f64)| -> Result<Dataset> {
        let inputs = uniform_matrix(&mut rng, rows, spec.k, range);
        let mut targets = Matrix::zeros(rows, spec.n);
        for i in 0..rows {
            let raw: Vec<f64> = weights
                .mul_vec(inputs.row(i))
                .into_iter()
                .map(|v| spec.radius * v)
                .collect();
            let y = projection::project_ball(&raw, &center, spec.radius, region.strict_margin());
            targets.row_mut(i).copy_from_slice(&y);
        }
        Dataset::with_region_flags(inputs, targets, &region)
    };
    let train = make(spec.n_train, spec.train_range)?;
    let test = make(spec.n_test, spec.test_range)?;
    Ok(SyntheticData {
        train,
        test,
        region,
        weights,
    })
}

/// Bounds of a max-deviation polytope, derived from training windows.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub max_deviation: f64,
}

impl TimeSeriesBounds {
    pub fn from_targets(targets: &Matrix) -> Result<Self> {
        let n = targets.cols();
        if n < 2 {
            return Err(HcrError::InvalidConfig(
                "window size must be at least 2".into(),
            ));
        }
        if targets.rows() == 0 {
            return Err(HcrError::DegenerateRegion("no training windows".into()));
        }
        let mut lower = vec![f64::INFINITY; n];
        let mut upper = vec![f64::NEG_INFINITY; n];
        let mut max_deviation: f64 = 0.0;
        for row in targets.iter_rows() {
            for (i, &v) in row.iter().enumerate() {
                lower[i] = lower[i].min(v);
                upper[i] = upper[i].max(v);
            }
            for w in row.windows(2) {
                max_deviation = max_deviation.max((w[1] - w[0]).abs());
            }
        }
        if let Some(i) = (0..n).find(|&i| !(upper[i] > lower[i])) {
            return Err(HcrError::DegenerateRegion(format!(
                "upper and lower bound coincide at position {i}"
            )));
        }
        if !(max_deviation > 0.0) {
            return Err(HcrError::DegenerateRegion(
                "maximum deviation is zero".into(),
            ));
        }
        Ok(Self {
            lower,
            upper,
            max_deviation,
        })
    }

    /// `(normal, offset)` pairs: per-position upper and lower bounds, then the two
    /// deviation constraints for each consecutive pair. `4n - 2` in total.
    pub fn halfspaces(&self) -> Vec<(Vec<f64>, f64)> {
        let n = self.lower.len();
        let mut out = Vec::with_capacity(4 * n - 2);
        for i in 0..n {
            let mut up = vec![0.0; n];
            up[i] = 1.0;
            out.push((up, self.upper[i]));
            let mut low = vec![0.0; n];
            low[i] = -1.0;
            out.push((low, -self.lower[i]));
        }
        for i in 0..n - 1 {
            let mut fwd = vec![0.0; n];
            fwd[i] = 1.0;
            fwd[i + 1] = -1.0;
            out.push((fwd, self.max_deviation));
            let mut back = vec![0.0; n];
            back[i] = -1.0;
            back[i + 1] = 1.0;
            out.push((back, self.max_deviation));
        }
        out
    }
}

/// Max-deviation polytope around the per-position mean of the training targets.
pub fn build_timeseries_region(train: &Dataset) -> Result<FeasibleRegion> {
    let bounds = TimeSeriesBounds::from_targets(&train.targets)?;
    let halfspaces = bounds.halfspaces();
    let n = train.output_dim();
    let rows = train.len() as f64;
    let mut origin = vec![0.0; n];
    for row in train.targets.iter_rows() {
        for (o, v) in origin.iter_mut().zip(row) {
            *o += v;
        }
    }
    origin.iter_mut().for_each(|o| *o /= rows);

    let strictly_inside = |p: &[f64]| {
        halfspaces
            .iter()
            .all(|(a, b)| crate::linalg::dot(a, p) - b < 0.0)
    };
    if !strictly_inside(&origin) {
        let range = bounds
            .upper
            .iter()
            .zip(&bounds.lower)
            .map(|(u, l)| u - l)
            .fold(bounds.max_deviation, f64::min);
        let margin = DEFAULT_STRICT_MARGIN.max(1e-6 * range);
        let shrunk: Vec<(Vec<f64>, f64)> = halfspaces
            .iter()
            .map(|(a, b)| (a.clone(), b - margin * crate::linalg::norm(a)))
            .collect();
        let cfg = DykstraConfig {
            max_sweeps: 10_000,
            ..Default::default()
        };
        origin = match projection::project_polytope(&origin, &shrunk, &cfg) {
            Ok(p) | Err(HcrError::NotConverged { best: p, .. }) => p,
            Err(e) => return Err(e),
        };
        if !strictly_inside(&origin) {
            return Err(HcrError::DegenerateRegion(
                "could not find a strictly interior origin".into(),
            ));
        }
    }
    FeasibleRegion::with_options(
        origin,
        halfspaces
            .into_iter()
            .map(|(a, b)| ConstraintKind::halfspace(a, b))
            .collect(),
        DEFAULT_STRICT_MARGIN,
        DEFAULT_TOL_FEAS,
    )
}

/// Shape of the synthetic random-walk series.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesSpec {
    pub length: usize,
    pub level: f64,
    /// Increments are drawn uniformly from `[-step, step]`.
    pub step: f64,
    /// Amplitude of a 24-sample seasonal component.
    pub seasonal_amplitude: f64,
    pub train_fraction: f64,
}

impl Default for TimeSeriesSpec {
    fn default() -> Self {
        Self {
            length: 480,
            level: 10.0,
            step: 1.0,
            seasonal_amplitude: 2.0,
            train_fraction: 0.2,
        }
    }
}

pub const SEASON_PERIOD: f64 = 24.0;

impl TimeSeriesSpec {
    /// Upper bound on `|v[t+1] - v[t]|` for generated series.
    pub fn deviation_bound(&self) -> f64 {
        self.step + 2.0 * self.seasonal_amplitude * (std::f64::consts::PI / SEASON_PERIOD).sin()
    }
}

/// A series split into chronological train and test window pairs.
#[derive(Debug, Clone)]
pub struct SeriesTask {
    pub train: Dataset,
    pub test: Dataset,
}

pub fn random_walk(spec: &TimeSeriesSpec, rng: &mut impl Rng) -> Vec<f64> {
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let mut level = spec.level;
    (0..spec.length)
        .map(|t| {
            if t > 0 {
                level += rng.random_range(-spec.step..=spec.step);
            }
            level
                + spec.seasonal_amplitude
                    * (std::f64::consts::TAU * t as f64 / SEASON_PERIOD + phase).sin()
        })
        .collect()
}

/// Sliding `(input k = n, output n)` windows with stride one; the first
/// `train_fraction` of the windows form the training set.
pub fn window_series(series: &[f64], n: usize, train_fraction: f64) -> Result<SeriesTask> {
    if n < 2 {
        return Err(HcrError::InvalidConfig(
            "window size must be at least 2".into(),
        ));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(HcrError::InvalidConfig(
            "train_fraction must lie in (0, 1)".into(),
        ));
    }
    if series.len() < 2 * n + 1 {
        return Err(HcrError::InvalidConfig(format!(
            "series of length {} is too short for windows of size {n}",
            series.len()
        )));
    }
    let windows = series.len() - 2 * n + 1;
    let n_train = ((windows as f64 * train_fraction).round() as usize).clamp(1, windows - 1);
    let split = |range: std::ops::Range<usize>| {
        let mut inputs = Vec::with_capacity(range.len() * n);
        let mut targets = Vec::with_capacity(range.len() * n);
        for w in range.clone() {
            inputs.extend_from_slice(&series[w..w + n]);
            targets.extend_from_slice(&series[w + n..w + 2 * n]);
        }
        Dataset::new(
            Matrix::from_vec(range.len(), n, inputs),
            Matrix::from_vec(range.len(), n, targets),
            vec![true; range.len()],
        )
    };
    Ok(SeriesTask {
        train: split(0..n_train)?,
        test: split(n_train..windows)?,
    })
}

/// `n_series` random-walk series of length `10 n`, windowed with `k = n`.
pub fn gen_synthetic_timeseries(n_series: usize, n: usize, seed: u64) -> Result<Vec<SeriesTask>> {
    let spec = TimeSeriesSpec {
        length: 10 * n,
        ..Default::default()
    };
    gen_synthetic_timeseries_with(n_series, n, seed, &spec)
}

pub fn gen_synthetic_timeseries_with(
    n_series: usize,
    n: usize,
    seed: u64,
    spec: &TimeSeriesSpec,
) -> Result<Vec<SeriesTask>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_series)
        .map(|_| window_series(&random_walk(spec, &mut rng), n, spec.train_fraction))
        .collect()
}

/// Projects test targets onto `region` and refreshes the feasibility flags.
pub fn project_targets(data: &Dataset, region: &FeasibleRegion) -> Result<Dataset> {
    let mut targets = data.targets.clone();
    for i in 0..targets.rows() {
        let (p, _) = projection::project_lenient(region, data.targets.row(i))?;
        targets.row_mut(i).copy_from_slice(&p);
    }
    Dataset::with_region_flags(data.inputs.clone(), targets, region)
}

/// Reads one series from a CSV file.
///
/// With `column = None` the file has no header and the first field of each row
/// is used; otherwise the header row names the column. Line numbers in errors
/// are 1-based.
pub fn load_csv_series(
    path: impl AsRef<Path>,
    column: Option<&str>,
    allow_empty: bool,
) -> Result<Vec<f64>> {
    let file = fs::File::open(path)?;
    parse_csv_series(file, column, allow_empty)
}

pub fn parse_csv_series<R: Read>(
    reader: R,
    column: Option<&str>,
    allow_empty: bool,
) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(column.is_some())
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let col_idx = match column {
        Some(name) => {
            let headers = rdr.headers().map_err(|e| csv_error(e, 1))?;
            match headers.iter().position(|h| h == name) {
                Some(i) => i,
                None if headers.is_empty() && allow_empty => return Ok(Vec::new()),
                None => {
                    return Err(HcrError::Parse {
                        line: 1,
                        reason: format!("column {name:?} not found"),
                    })
                }
            }
        }
        None => 0,
    };
    let mut values = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(e, 0))?;
        let line = record.position().map_or(0, |p| p.line());
        let cell = record.get(col_idx).ok_or_else(|| HcrError::Parse {
            line,
            reason: format!("missing column {col_idx}"),
        })?;
        let v: f64 = cell.parse().map_err(|_| HcrError::Parse {
            line,
            reason: format!("{cell:?} is not a number"),
        })?;
        if !v.is_finite() {
            return Err(HcrError::Parse {
                line,
                reason: format!("{cell:?} is not finite"),
            });
        }
        values.push(v);
    }
    if values.is_empty() && !allow_empty {
        return Err(HcrError::Parse {
            line: 1,
            reason: "no values".into(),
        });
    }
    Ok(values)
}

fn csv_error(e: csv::Error, fallback_line: u64) -> HcrError {
    let line = e.position().map_or(fallback_line, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => HcrError::Io(io),
        other => HcrError::Parse {
            line,
            reason: format!("{other:?}"),
        },
    }
}
