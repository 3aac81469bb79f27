//! A small dense network with the four output treatments compared in the
//! benchmarks: plain regression, penalty (Lagrangian) training, inference-time
//! projection, and hyperspherical prediction.

mod adam;
pub mod checkpoint;
pub mod network;

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constraint::FeasibleRegion;
use crate::datagen::Dataset;
use crate::error::{HcrError, Result};
use crate::hyperspherical::{
    from_hyperspherical, normalize_direction, to_hyperspherical, AccelConfig, HypersphericalCoord,
    DIRECTION_EPS,
};
use crate::projection;

pub use adam::Adam;
pub use network::{sigmoid, Activation, Dense, Scaler};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Simple,
    Lagrangian,
    Projection,
    Hcr,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Simple,
        Variant::Lagrangian,
        Variant::Projection,
        Variant::Hcr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Simple => "simple",
            Variant::Lagrangian => "lagrangian",
            Variant::Projection => "projection",
            Variant::Hcr => "hcr",
        }
    }

    /// Whether inference includes a timed post-processing step.
    pub fn has_postprocess(self) -> bool {
        matches!(self, Variant::Projection | Variant::Hcr)
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub standardize_targets: bool,
    pub standardize_inputs: bool,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub hidden: usize,
    pub encoder_layers: usize,
    pub activation: Activation,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 32,
            learning_rate: 1e-3,
            seed: 0,
            standardize_targets: true,
            standardize_inputs: false,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            hidden: 128,
            encoder_layers: 1,
            activation: Activation::Tanh,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.hidden == 0 || self.encoder_layers == 0
        {
            return Err(HcrError::InvalidConfig(
                "epochs, batch_size, hidden and encoder_layers must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0) {
            return Err(HcrError::InvalidConfig(
                "learning rate must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagrangianConfig {
    /// Initial multipliers, one per constraint. Empty means all zero.
    pub multipliers: Vec<f64>,
    pub step_size: f64,
    /// Dual ascent runs after every `update_period` epochs.
    pub update_period: usize,
}

impl Default for LagrangianConfig {
    fn default() -> Self {
        Self {
            multipliers: Vec::new(),
            step_size: 0.01,
            update_period: 1,
        }
    }
}

/// Trained weights plus everything needed to map raw head outputs back to the
/// output space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParameters {
    pub variant: Variant,
    pub activation: Activation,
    pub encoder: Vec<Dense>,
    /// Regression head, or the direction head for [`Variant::Hcr`].
    pub head: Dense,
    pub radius_head: Option<Dense>,
    pub input_scaler: Option<Scaler>,
    pub target_scaler: Option<Scaler>,
}

impl ModelParameters {
    /// Freshly initialized parameters for input dim `k` and output dim `n`.
    pub fn init(
        variant: Variant,
        k: usize,
        n: usize,
        cfg: &TrainConfig,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let mut encoder = Vec::with_capacity(cfg.encoder_layers);
        let mut width = k;
        for _ in 0..cfg.encoder_layers {
            encoder.push(Dense::glorot(width, cfg.hidden, rng));
            width = cfg.hidden;
        }
        let head = Dense::glorot(width, n, rng);
        let radius_head = (variant == Variant::Hcr).then(|| Dense::glorot(width, 1, rng));
        Self {
            variant,
            activation: cfg.activation,
            encoder,
            head,
            radius_head,
            input_scaler: None,
            target_scaler: None,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.first().map_or(self.head.in_dim, |l| l.in_dim)
    }

    pub fn output_dim(&self) -> usize {
        self.head.out_dim
    }

    pub fn hidden_dims(&self) -> Vec<usize> {
        self.encoder.iter().map(|l| l.out_dim).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.encoder.iter().all(Dense::is_finite)
            && self.head.is_finite()
            && self.radius_head.as_ref().is_none_or(Dense::is_finite)
    }

    /// Checks that layer shapes chain and the variant has the right heads.
    pub fn validate(&self) -> Result<()> {
        let mismatch = |m: String| Err(HcrError::ShapeMismatch(m));
        let mut width = self.input_dim();
        for (i, l) in self
            .encoder
            .iter()
            .chain(std::iter::once(&self.head))
            .chain(self.radius_head.iter())
            .enumerate()
        {
            if l.weights.len() != l.in_dim * l.out_dim || l.bias.len() != l.out_dim {
                return mismatch(format!("layer {i} buffers do not match its shape"));
            }
        }
        for (i, l) in self.encoder.iter().enumerate() {
            if l.in_dim != width {
                return mismatch(format!(
                    "encoder layer {i} expects {} inputs, got {width}",
                    l.in_dim
                ));
            }
            width = l.out_dim;
        }
        if self.head.in_dim != width {
            return mismatch("head width does not match encoder".into());
        }
        match (&self.radius_head, self.variant) {
            (Some(r), Variant::Hcr) if r.in_dim == width && r.out_dim == 1 => {}
            (None, v) if v != Variant::Hcr => {}
            _ => return mismatch("radius head present iff variant is hcr, with one output".into()),
        }
        if let Some(s) = &self.input_scaler {
            if s.mean.len() != self.input_dim() || s.std.len() != self.input_dim() {
                return mismatch("input scaler dimension".into());
            }
        }
        if let Some(s) = &self.target_scaler {
            if s.mean.len() != self.output_dim() || s.std.len() != self.output_dim() {
                return mismatch("target scaler dimension".into());
            }
        }
        if !self.is_finite() {
            return Err(HcrError::InvalidConfig(
                "parameters contain non-finite values".into(),
            ));
        }
        Ok(())
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for l in &mut self.encoder {
            out.extend(l.slices_mut());
        }
        out.extend(self.head.slices_mut());
        if let Some(r) = &mut self.radius_head {
            out.extend(r.slices_mut());
        }
        out
    }

    /// Activations of every encoder layer; element 0 is the (scaled) input.
    fn encode(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.encoder.len() + 1);
        acts.push(match &self.input_scaler {
            Some(s) => s.transform(x),
            None => x.to_vec(),
        });
        for l in &self.encoder {
            let mut h = l.forward(acts.last().expect("input activation"));
            h.iter_mut().for_each(|v| *v = self.activation.apply(*v));
            acts.push(h);
        }
        acts
    }

    fn heads(&self, hidden: &[f64]) -> (Vec<f64>, Option<f64>) {
        let out = self.head.forward(hidden);
        let radius = self.radius_head.as_ref().map(|r| r.forward(hidden)[0]);
        (out, radius)
    }

    /// Euclidean head output (de-standardized) for the regression variants.
    pub fn raw_output(&self, x: &[f64]) -> Vec<f64> {
        let acts = self.encode(x);
        let (out, _) = self.heads(acts.last().expect("hidden"));
        match &self.target_scaler {
            Some(s) => s.inverse(&out),
            None => out,
        }
    }

    /// Hyperspherical prediction `(normalize(d_head), sigmoid(r_head))`.
    pub fn hyperspherical_output(&self, x: &[f64]) -> Result<HypersphericalCoord> {
        let acts = self.encode(x);
        let (dir, radius) = self.heads(acts.last().expect("hidden"));
        let radius = radius.ok_or_else(|| {
            HcrError::Unsupported(format!("{} model has no radius head", self.variant))
        })?;
        HypersphericalCoord::new(normalize_direction(&dir), sigmoid(radius))
    }
}

/// Parameter gradients with the same layout as [`ModelParameters`].
struct Gradients {
    encoder: Vec<Dense>,
    head: Dense,
    radius_head: Option<Dense>,
}

impl Gradients {
    fn zeros(p: &ModelParameters) -> Self {
        Self {
            encoder: p.encoder.iter().map(Dense::zeros_like).collect(),
            head: p.head.zeros_like(),
            radius_head: p.radius_head.as_ref().map(Dense::zeros_like),
        }
    }

    fn reset(&mut self) {
        for l in self
            .encoder
            .iter_mut()
            .chain(std::iter::once(&mut self.head))
            .chain(self.radius_head.iter_mut())
        {
            l.weights.iter_mut().for_each(|v| *v = 0.0);
            l.bias.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for l in self
            .encoder
            .iter()
            .chain(std::iter::once(&self.head))
            .chain(self.radius_head.iter())
        {
            out.push(&l.weights);
            out.push(&l.bias);
        }
        out
    }
}

fn param_shapes(p: &ModelParameters) -> Vec<usize> {
    let mut out = Vec::new();
    for l in p
        .encoder
        .iter()
        .chain(std::iter::once(&p.head))
        .chain(p.radius_head.iter())
    {
        out.push(l.weights.len());
        out.push(l.bias.len());
    }
    out
}

/// Backpropagates head gradients through the encoder.
fn backward(
    p: &ModelParameters,
    acts: &[Vec<f64>],
    d_out: &[f64],
    d_radius: Option<f64>,
    grads: &mut Gradients,
) {
    let hidden = acts.last().expect("hidden");
    let mut delta = vec![0.0; hidden.len()];
    p.head
        .backward(hidden, d_out, &mut grads.head, Some(&mut delta));
    if let (Some(r), Some(gr), Some(dr)) = (&p.radius_head, &mut grads.radius_head, d_radius) {
        r.backward(hidden, &[dr], gr, Some(&mut delta));
    }
    for (l, layer) in p.encoder.iter().enumerate().rev() {
        let out = &acts[l + 1];
        for (d, a) in delta.iter_mut().zip(out) {
            *d *= p.activation.derivative_from_output(*a);
        }
        let input = &acts[l];
        if l == 0 {
            layer.backward(input, &delta, &mut grads.encoder[l], None);
        } else {
            let mut prev = vec![0.0; input.len()];
            layer.backward(input, &delta, &mut grads.encoder[l], Some(&mut prev));
            delta = prev;
        }
    }
}

/// Training result with per-epoch mean loss and final multipliers (Lagrangian only).
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParameters,
    pub loss_history: Vec<f64>,
    pub multipliers: Option<Vec<f64>>,
}

pub fn train(
    variant: Variant,
    data: &Dataset,
    region: &FeasibleRegion,
    cfg: &TrainConfig,
    lag: Option<&LagrangianConfig>,
) -> Result<ModelParameters> {
    fit(variant, data, region, cfg, lag).map(|o| o.params)
}

/// Mini-batch Adam on the MSE loss, deterministic for a given seed.
///
/// The hyperspherical variant is trained against `(d, r)` targets with loss
/// `mean((d_hat - d)^2) + (r_hat - r)^2`. The Lagrangian variant adds
/// `sum_i lambda_i * mean(max(0, c_i(y_hat)))` and raises each multiplier by
/// `step * mean violation` every `update_period` epochs.
pub fn fit(
    variant: Variant,
    data: &Dataset,
    region: &FeasibleRegion,
    cfg: &TrainConfig,
    lag: Option<&LagrangianConfig>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(HcrError::InvalidConfig("empty training set".into()));
    }
    let (k, n) = (data.input_dim(), data.output_dim());
    if region.dim() != n {
        return Err(HcrError::ShapeMismatch(format!(
            "region has dimension {}, targets have {n}",
            region.dim()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = ModelParameters::init(variant, k, n, cfg, &mut rng);
    if cfg.standardize_inputs {
        params.input_scaler = Some(Scaler::fit(&data.inputs));
    }
    if cfg.standardize_targets && variant != Variant::Hcr {
        params.target_scaler = Some(Scaler::fit(&data.targets));
    }

    let accel = AccelConfig::for_region(region);
    let targets: Vec<(Vec<f64>, f64)> = if variant == Variant::Hcr {
        let infeasible = data
            .targets
            .iter_rows()
            .map(|y| region.is_feasible(y))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .filter(|f| !f)
            .count();
        if infeasible > 0 {
            return Err(HcrError::InfeasibleTargets { count: infeasible });
        }
        data.targets
            .iter_rows()
            .map(|y| to_hyperspherical(region, y, &accel).map(HypersphericalCoord::into_parts))
            .collect::<Result<_>>()?
    } else {
        data.targets
            .iter_rows()
            .map(|y| {
                let t = match &params.target_scaler {
                    Some(s) => s.transform(y),
                    None => y.to_vec(),
                };
                (t, 0.0)
            })
            .collect()
    };

    let mut multipliers = match (variant, lag) {
        (Variant::Lagrangian, Some(l)) if !l.multipliers.is_empty() => {
            if l.multipliers.len() != region.len() || l.multipliers.iter().any(|v| !(*v >= 0.0)) {
                return Err(HcrError::InvalidConfig(
                    "need one non-negative multiplier per constraint".into(),
                ));
            }
            l.multipliers.clone()
        }
        _ => vec![0.0; region.len()],
    };
    let lag_cfg = lag.cloned().unwrap_or_default();
    if variant == Variant::Lagrangian && lag_cfg.update_period == 0 {
        return Err(HcrError::InvalidConfig(
            "update_period must be positive".into(),
        ));
    }

    let mut adam = Adam::new(
        cfg.learning_rate,
        cfg.beta1,
        cfg.beta2,
        cfg.epsilon,
        &param_shapes(&params),
    );
    let mut grads = Gradients::zeros(&params);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut d_out = vec![0.0; n];

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grads.reset();
            let scale = 1.0 / batch.len() as f64;
            for &j in batch {
                let acts = params.encode(data.inputs.row(j));
                let (out, radius) = params.heads(acts.last().expect("hidden"));
                let (target, target_r) = &targets[j];
                let d_radius = match variant {
                    Variant::Hcr => {
                        let norm = crate::linalg::norm(&out);
                        let d_hat = normalize_direction(&out);
                        let r_hat = sigmoid(radius.expect("radius head"));
                        let mut sq = 0.0;
                        let mut g_dot_d = 0.0;
                        for ((g, dh), dt) in d_out.iter_mut().zip(&d_hat).zip(target) {
                            let e = dh - dt;
                            sq += e * e;
                            *g = 2.0 * e * scale / n as f64;
                            g_dot_d += *g * dh;
                        }
                        // Jacobian of v / |v| is (I - d d^T) / |v|
                        if norm > DIRECTION_EPS {
                            for (g, dh) in d_out.iter_mut().zip(&d_hat) {
                                *g = (*g - dh * g_dot_d) / norm;
                            }
                        } else {
                            d_out.iter_mut().for_each(|g| *g = 0.0);
                        }
                        let er = r_hat - target_r;
                        epoch_loss += sq / n as f64 + er * er;
                        Some(2.0 * er * r_hat * (1.0 - r_hat) * scale)
                    }
                    _ => {
                        let mut sq = 0.0;
                        for ((g, o), t) in d_out.iter_mut().zip(&out).zip(target) {
                            let e = o - t;
                            sq += e * e;
                            *g = 2.0 * e * scale / n as f64;
                        }
                        epoch_loss += sq / n as f64;
                        if variant == Variant::Lagrangian && multipliers.iter().any(|&l| l > 0.0) {
                            epoch_loss += penalty_gradient(
                                &params,
                                region,
                                &out,
                                &multipliers,
                                scale,
                                &mut d_out,
                            );
                        }
                        None
                    }
                };
                backward(&params, &acts, &d_out, d_radius, &mut grads);
            }
            adam.step(&mut params.slices_mut(), &grads.slices());
        }
        let mean_loss = epoch_loss / data.len() as f64;
        if !mean_loss.is_finite() || !params.is_finite() {
            return Err(HcrError::NonFiniteLoss { epoch });
        }
        history.push(mean_loss);

        if variant == Variant::Lagrangian && (epoch + 1) % lag_cfg.update_period == 0 {
            let mut total = vec![0.0; region.len()];
            for x in data.inputs.iter_rows() {
                let y = params.raw_output(x);
                for (t, c) in total.iter_mut().zip(region.constraints()) {
                    *t += c.value(&y).max(0.0);
                }
            }
            for (l, t) in multipliers.iter_mut().zip(total) {
                *l = (*l + lag_cfg.step_size * t / data.len() as f64).max(0.0);
            }
        }
    }

    Ok(TrainOutcome {
        params,
        loss_history: history,
        multipliers: (variant == Variant::Lagrangian).then_some(multipliers),
    })
}

/// Adds the penalty gradient (w.r.t. the standardized head output) into
/// `d_out` and returns this sample's penalty value.
fn penalty_gradient(
    params: &ModelParameters,
    region: &FeasibleRegion,
    out: &[f64],
    multipliers: &[f64],
    scale: f64,
    d_out: &mut [f64],
) -> f64 {
    let y = match &params.target_scaler {
        Some(s) => s.inverse(out),
        None => out.to_vec(),
    };
    let mut penalty = 0.0;
    for (c, &lambda) in region.constraints().iter().zip(multipliers) {
        if lambda <= 0.0 {
            continue;
        }
        let v = c.value(&y);
        if v <= 0.0 {
            continue;
        }
        penalty += lambda * v;
        let g = c.gradient(&y);
        for (i, (d, gi)) in d_out.iter_mut().zip(g).enumerate() {
            let dy = params.target_scaler.as_ref().map_or(1.0, |s| s.std[i]);
            *d += lambda * gi * dy * scale;
        }
    }
    penalty
}

/// One inference, with the wall-clock cost of the post-processing step
/// (`None` for variants that have none).
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub y: Vec<f64>,
    pub postprocess: Option<Duration>,
    /// Whether the projection solver converged; always true for other variants.
    pub converged: bool,
}

pub fn predict(params: &ModelParameters, region: &FeasibleRegion, x: &[f64]) -> Result<Prediction> {
    predict_with(params, region, &AccelConfig::for_region(region), x)
}

pub fn predict_with(
    params: &ModelParameters,
    region: &FeasibleRegion,
    accel: &AccelConfig,
    x: &[f64],
) -> Result<Prediction> {
    if x.len() != params.input_dim() {
        return Err(HcrError::ShapeMismatch(format!(
            "model expects {} inputs, got {}",
            params.input_dim(),
            x.len()
        )));
    }
    if region.dim() != params.output_dim() {
        return Err(HcrError::ShapeMismatch(format!(
            "model emits {} outputs, region has dimension {}",
            params.output_dim(),
            region.dim()
        )));
    }
    match params.variant {
        Variant::Simple | Variant::Lagrangian => Ok(Prediction {
            y: params.raw_output(x),
            postprocess: None,
            converged: true,
        }),
        Variant::Projection => {
            let raw = params.raw_output(x);
            let start = Instant::now();
            let (y, converged) = projection::project_lenient(region, &raw)?;
            let elapsed = start.elapsed();
            Ok(Prediction {
                y,
                postprocess: Some(elapsed),
                converged,
            })
        }
        Variant::Hcr => {
            let acts = params.encode(x);
            let (dir, radius) = params.heads(acts.last().expect("hidden"));
            let radius =
                radius.ok_or_else(|| HcrError::ShapeMismatch("missing radius head".into()))?;
            // head activations are part of the model; only the conversion back is timed
            let coord = HypersphericalCoord::new(normalize_direction(&dir), sigmoid(radius))?;
            let start = Instant::now();
            let y = from_hyperspherical(region, &coord, accel)?;
            let elapsed = start.elapsed();
            Ok(Prediction {
                y,
                postprocess: Some(elapsed),
                converged: true,
            })
        }
    }
}
