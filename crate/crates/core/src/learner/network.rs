use rand::Rng;
use serde::{Deserialize, Serialize};

/// Fully connected layer, weights stored `out x in` row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    /// Glorot-uniform weights, zero bias.
    pub fn glorot(in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let weights = (0..in_dim * out_dim)
            .map(|_| rng.random_range(-limit..limit))
            .collect();
        Self {
            in_dim,
            out_dim,
            weights,
            bias: vec![0.0; out_dim],
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            in_dim: self.in_dim,
            out_dim: self.out_dim,
            weights: vec![0.0; self.weights.len()],
            bias: vec![0.0; self.bias.len()],
        }
    }

    pub fn forward_into(&self, x: &[f64], out: &mut [f64]) {
        for ((o, row), b) in out
            .iter_mut()
            .zip(self.weights.chunks_exact(self.in_dim))
            .zip(&self.bias)
        {
            *o = b + crate::linalg::dot(row, x);
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.out_dim];
        self.forward_into(x, &mut out);
        out
    }

    /// Accumulates `delta x input^T` into `grad` and adds `W^T delta` into `back`.
    pub fn backward(
        &self,
        input: &[f64],
        delta: &[f64],
        grad: &mut Dense,
        back: Option<&mut [f64]>,
    ) {
        for ((row, g), d) in grad
            .weights
            .chunks_exact_mut(self.in_dim)
            .zip(grad.bias.iter_mut())
            .zip(delta)
        {
            *g += d;
            if *d != 0.0 {
                for (gw, x) in row.iter_mut().zip(input) {
                    *gw += d * x;
                }
            }
        }
        if let Some(back) = back {
            for (row, d) in self.weights.chunks_exact(self.in_dim).zip(delta) {
                if *d != 0.0 {
                    for (b, w) in back.iter_mut().zip(row) {
                        *b += d * w;
                    }
                }
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|v| v.is_finite())
    }

    pub(crate) fn slices_mut(&mut self) -> [&mut [f64]; 2] {
        [&mut self.weights, &mut self.bias]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Tanh => v.tanh(),
            Activation::Identity => v,
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    pub fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Identity => 1.0,
        }
    }
}

/// Per-column affine standardization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    pub fn fit(data: &crate::linalg::Matrix) -> Self {
        let rows = data.rows().max(1) as f64;
        let cols = data.cols();
        let mut mean = vec![0.0; cols];
        for r in data.iter_rows() {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= rows);
        let mut var = vec![0.0; cols];
        for r in data.iter_rows() {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / rows).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    pub fn inverse(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| v * s + m)
            .collect()
    }
}

/// Logistic function, kept strictly inside `(0, 1)`.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    let s = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    s.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn sigmoid_is_strictly_inside_unit_interval() {
        for x in [-1e4, -40.0, -1.0, 0.0, 1.0, 40.0, 1e4] {
            let s = sigmoid(x);
            assert!(s > 0.0 && s < 1.0, "{x} -> {s}");
        }
        assert_eq!(sigmoid(0.0), 0.5);
    }

    #[test]
    fn dense_gradient_matches_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let layer = Dense::glorot(3, 2, &mut rng);
        let x = [0.3, -0.4, 0.9];
        let upstream = [1.5, -0.5];
        // L = upstream . (W x + b)
        let loss = |l: &Dense| crate::linalg::dot(&upstream, &l.forward(&x));
        let mut grad = layer.zeros_like();
        let mut back = vec![0.0; 3];
        layer.backward(&x, &upstream, &mut grad, Some(&mut back));
        for i in 0..layer.weights.len() {
            let mut p = layer.clone();
            p.weights[i] += 1e-6;
            let mut m = layer.clone();
            m.weights[i] -= 1e-6;
            let fd = (loss(&p) - loss(&m)) / 2e-6;
            assert!((fd - grad.weights[i]).abs() < 1e-8);
        }
        for j in 0..3 {
            let mut xp = x;
            xp[j] += 1e-6;
            let mut xm = x;
            xm[j] -= 1e-6;
            let fd = (crate::linalg::dot(&upstream, &layer.forward(&xp))
                - crate::linalg::dot(&upstream, &layer.forward(&xm)))
                / 2e-6;
            assert!((fd - back[j]).abs() < 1e-8);
        }
    }

    #[test]
    fn scaler_round_trip_and_constant_columns() {
        let m = crate::linalg::Matrix::from_rows(&[vec![1.0, 5.0], vec![3.0, 5.0]]);
        let s = Scaler::fit(&m);
        assert_eq!(s.mean, vec![2.0, 5.0]);
        assert_eq!(s.std, vec![1.0, 1.0]);
        assert_eq!(s.transform(&[3.0, 5.0]), vec![1.0, 0.0]);
        assert_eq!(s.inverse(&[1.0, 0.0]), vec![3.0, 5.0]);
    }
}
