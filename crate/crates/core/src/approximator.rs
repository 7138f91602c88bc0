//! Dense ReLU networks with hand-written reverse-mode gradients, Adam, and the
//! tanh-squashed Gaussian policy head.
//!
//! Batches are row-major: a batch of `n` inputs of width `d` is an `n x d`
//! matrix.

use ndarray::{Array1, Array2, Axis, Zip};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// `in x out`
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

/// Fully connected network: ReLU on hidden layers, linear output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Per-layer parameter gradients, same shapes as [`Mlp::layers`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<Dense>,
}

/// Activations recorded by [`Mlp::forward_cached`].
#[derive(Debug, Clone)]
pub struct MlpCache {
    /// Input to each layer.
    inputs: Vec<Array2<f64>>,
}

impl Mlp {
    /// Layer widths `sizes[0] -> ... -> sizes[last]`. Weights and biases are
    /// drawn uniformly from `+-1/sqrt(fan_in)`; the output layer is further
    /// scaled by `out_scale`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], out_scale: f64, rng: &mut R) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Config(format!("invalid network widths {sizes:?}")));
        }
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let (fin, fout) = (sizes[i], sizes[i + 1]);
                let mut bound = 1.0 / (fin as f64).sqrt();
                if i + 1 == n {
                    bound *= out_scale;
                }
                let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
                Dense {
                    w: Array2::from_shape_simple_fn((fin, fout), || dist.sample(rng)),
                    b: Array1::from_shape_simple_fn(fout, || dist.sample(rng)),
                }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").w.ncols()
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1].iter().map(|l| l.w.ncols()).collect()
    }

    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        let n = self.layers.len();
        let mut h = x.clone();
        for (i, l) in self.layers.iter().enumerate() {
            h = h.dot(&l.w) + &l.b;
            if i + 1 < n {
                h.mapv_inplace(|v| v.max(0.0));
            }
        }
        h
    }

    pub fn forward_cached(&self, x: &Array2<f64>) -> (Array2<f64>, MlpCache) {
        let n = self.layers.len();
        let mut inputs = Vec::with_capacity(n);
        let mut h = x.clone();
        for (i, l) in self.layers.iter().enumerate() {
            let z = h.dot(&l.w) + &l.b;
            inputs.push(h);
            h = z;
            if i + 1 < n {
                h.mapv_inplace(|v| v.max(0.0));
            }
        }
        (h, MlpCache { inputs })
    }

    /// Back-propagates `grad_out` (d loss / d output). Returns parameter
    /// gradients and d loss / d input.
    pub fn backward(&self, cache: &MlpCache, grad_out: &Array2<f64>) -> (MlpGrads, Array2<f64>) {
        let n = self.layers.len();
        let mut grads = Vec::with_capacity(n);
        let mut g = grad_out.clone();
        for i in (0..n).rev() {
            let input = &cache.inputs[i];
            let l = &self.layers[i];
            grads.push(Dense {
                w: input.t().dot(&g),
                b: g.sum_axis(Axis(0)),
            });
            let mut gin = g.dot(&l.w.t());
            if i > 0 {
                // input to layer i is relu of the previous pre-activation,
                // so it is positive exactly where the relu passed gradient
                Zip::from(&mut gin).and(input).for_each(|gv, &a| {
                    if a <= 0.0 {
                        *gv = 0.0;
                    }
                });
            }
            g = gin;
        }
        grads.reverse();
        (MlpGrads { layers: grads }, g)
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend(l.w.iter());
            out.extend(l.b.iter());
        }
        out
    }

    pub fn set_flat_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.num_params() {
            return Err(Error::Usage(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                p.len()
            )));
        }
        let mut it = p.iter();
        for l in &mut self.layers {
            l.w.iter_mut().chain(l.b.iter_mut()).for_each(|v| *v = *it.next().expect("length checked"));
        }
        Ok(())
    }

    /// Polyak averaging `self <- tau * source + (1 - tau) * self`.
    pub fn soft_update_from(&mut self, source: &Mlp, tau: f64) {
        for (t, s) in self.layers.iter_mut().zip(&source.layers) {
            Zip::from(&mut t.w).and(&s.w).for_each(|a, &b| *a = tau * b + (1.0 - tau) * *a);
            Zip::from(&mut t.b).and(&s.b).for_each(|a, &b| *a = tau * b + (1.0 - tau) * *a);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w.iter().chain(l.b.iter()).all(|v| v.is_finite()))
    }
}

impl MlpGrads {
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend(l.w.iter());
            out.extend(l.b.iter());
        }
        out
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w.iter().chain(l.b.iter()).all(|v| v.is_finite()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    m: Vec<Dense>,
    v: Vec<Dense>,
}

impl Adam {
    pub fn new(net: &Mlp, lr: f64) -> Self {
        let zeros: Vec<Dense> = net
            .layers
            .iter()
            .map(|l| Dense {
                w: Array2::zeros(l.w.raw_dim()),
                b: Array1::zeros(l.b.raw_dim()),
            })
            .collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// One descent step. Fails without touching `net` if a gradient is not
    /// finite.
    pub fn step(&mut self, net: &mut Mlp, grads: &MlpGrads) -> Result<()> {
        if !grads.all_finite() {
            return Err(Error::Numerical("non-finite gradient".into()));
        }
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.t.min(i32::MAX as u64) as i32);
        let c2 = 1.0 - b2.powi(self.t.min(i32::MAX as u64) as i32);
        let lr = self.lr;
        let eps = self.eps;
        let upd = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        for ((l, g), (m, v)) in net
            .layers
            .iter_mut()
            .zip(&grads.layers)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            Zip::from(&mut l.w)
                .and(&g.w)
                .and(&mut m.w)
                .and(&mut v.w)
                .for_each(|p, &g, m, v| upd(p, g, m, v));
            Zip::from(&mut l.b)
                .and(&g.b)
                .and(&mut m.b)
                .and(&mut v.b)
                .for_each(|p, &g, m, v| upd(p, g, m, v));
        }
        Ok(())
    }
}

/// Numerically stable `ln(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `ln(1 - tanh(u)^2)` without cancellation for large `|u|`.
pub fn log_one_minus_tanh_sq(u: f64) -> f64 {
    2.0 * (std::f64::consts::LN_2 - u - softplus(-2.0 * u))
}

/// Output of the squashed Gaussian head for a batch, with the quantities
/// needed to back-propagate through the reparameterized sample.
#[derive(Debug, Clone)]
pub struct SquashedSample {
    /// `tanh(mu + sigma * noise)`, `n x A`
    pub action: Array2<f64>,
    /// Per-row log density of `action`.
    pub log_prob: Array1<f64>,
    pub mean: Array2<f64>,
    pub log_std: Array2<f64>,
    pub noise: Array2<f64>,
    /// Whether the raw log-std was inside the clamp range.
    pub log_std_free: Array2<bool>,
}

/// Splits a head output `[mean | raw_log_std]` and applies the
/// reparameterized tanh-Gaussian with the given standard-normal `noise`.
pub fn squashed_gaussian(head: &Array2<f64>, noise: &Array2<f64>) -> SquashedSample {
    let a_dim = head.ncols() / 2;
    let mean = head.slice(ndarray::s![.., ..a_dim]).to_owned();
    let raw = head.slice(ndarray::s![.., a_dim..]);
    let log_std = raw.mapv(|v| v.clamp(LOG_STD_MIN, LOG_STD_MAX));
    let log_std_free = raw.mapv(|v| (LOG_STD_MIN..=LOG_STD_MAX).contains(&v));
    let pre = &mean + &(log_std.mapv(f64::exp) * noise);
    let action = pre.mapv(f64::tanh);
    let mut log_prob = Array1::zeros(head.nrows());
    for r in 0..head.nrows() {
        let mut lp = 0.0;
        for d in 0..a_dim {
            let e = noise[[r, d]];
            lp += -0.5 * e * e - log_std[[r, d]] - HALF_LN_2PI - log_one_minus_tanh_sq(pre[[r, d]]);
        }
        log_prob[r] = lp;
    }
    SquashedSample {
        action,
        log_prob,
        mean,
        log_std,
        noise: noise.clone(),
        log_std_free,
    }
}

pub fn standard_normal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(rng))
}

/// Gradient with respect to the head output `[mean | raw_log_std]` of
/// `sum_r (c_lp[r] * log_prob[r] + sum_d c_a[r, d] * action[r, d])`, holding
/// the noise fixed.
pub fn squashed_gaussian_backward(
    s: &SquashedSample,
    c_lp: &Array1<f64>,
    c_a: &Array2<f64>,
) -> Array2<f64> {
    let (n, a_dim) = s.action.dim();
    let mut g = Array2::zeros((n, 2 * a_dim));
    for r in 0..n {
        for d in 0..a_dim {
            let a = s.action[[r, d]];
            let sigma_e = s.log_std[[r, d]].exp() * s.noise[[r, d]];
            let da_dpre = 1.0 - a * a;
            // d log_prob / d pre = 2 tanh(pre)
            let d_pre = c_lp[r] * 2.0 * a + c_a[[r, d]] * da_dpre;
            g[[r, d]] = d_pre;
            if s.log_std_free[[r, d]] {
                g[[r, a_dim + d]] = -c_lp[r] + d_pre * sigma_e;
            }
        }
    }
    g
}

/// Mean squared error `mean((pred - target)^2)` over a column and its
/// gradient with respect to `pred`.
pub fn mse(pred: &Array2<f64>, target: &Array1<f64>) -> (f64, Array2<f64>) {
    let n = pred.nrows() as f64;
    let diff = &pred.column(0) - target;
    let loss = diff.mapv(|d| d * d).sum() / n;
    let grad = (diff * (2.0 / n)).insert_axis(Axis(1));
    (loss, grad)
}
