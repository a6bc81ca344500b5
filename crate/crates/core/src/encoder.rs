//! Multi-view encoders and view fusion.
//!
//! Every view owns one temporal convolution (depthwise, "same" zero padding)
//! with a view-specific kernel width, followed by a linear channel mix
//! `D → d` and `tanh`. Views never share weights.

use ndarray::{s, Array1, Array2, Array3, ArrayView2, ArrayView3, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, shape_err, Result};

/// Kernel widths assigned to views in order, cycling when `V` exceeds the list.
pub const KERNEL_WIDTHS: [usize; 4] = [3, 5, 9, 15];

pub(crate) fn flat3(a: &Array3<f64>) -> ArrayView2<'_, f64> {
    let (n, t, d) = a.dim();
    a.view()
        .into_shape_with_order((n * t, d))
        .expect("tensor in standard layout")
}

pub(crate) fn unflat3(a: Array2<f64>, n: usize, t: usize) -> Array3<f64> {
    let d = a.ncols();
    let a = if a.is_standard_layout() {
        a
    } else {
        a.as_standard_layout().into_owned()
    };
    a.into_shape_with_order((n, t, d)).expect("row count matches n*t")
}

fn uniform_fill<R: Rng>(rng: &mut R, shape: (usize, usize), bound: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn(shape, || rng.random_range(-bound..bound))
}

/// Affine map applied row-wise: `y = x W + b`, with `W` stored `in × out`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Linear {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weight: Array2::zeros((input, output)),
            bias: Array1::zeros(output),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            weight: Array2::eye(dim),
            bias: Array1::zeros(dim),
        }
    }

    /// Fan-in scaled uniform initialization `U(-1/√in, 1/√in)`.
    pub fn init<R: Rng>(input: usize, output: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (input as f64).sqrt();
        let weight = uniform_fill(rng, (input, output), bound);
        let bias = Array1::from_shape_simple_fn(output, || rng.random_range(-bound..bound));
        Self { weight, bias }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        x.dot(&self.weight) + &self.bias
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    pub fn backward(&self, x: ArrayView2<f64>, d_out: ArrayView2<f64>, grad: &mut Linear) -> Array2<f64> {
        grad.weight += &x.t().dot(&d_out);
        grad.bias += &d_out.sum_axis(Axis(0));
        d_out.dot(&self.weight.t())
    }

    pub fn apply3(&self, x: &Array3<f64>) -> Array3<f64> {
        let (n, t, _) = x.dim();
        unflat3(self.forward(flat3(x)), n, t)
    }
}

/// Parameters of one view's encoder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewEncoder {
    /// Depthwise temporal kernel, `k × D`.
    pub kernel: Array2<f64>,
    pub conv_bias: Array1<f64>,
    pub mix: Linear,
}

/// Intermediate activations kept for the backward pass.
#[derive(Clone, Debug)]
pub struct EncoderCache {
    pub conv: Array3<f64>,
    pub out: Array3<f64>,
}

impl ViewEncoder {
    pub fn init<R: Rng>(width: usize, variates: usize, embed_dim: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (width as f64).sqrt();
        Self {
            kernel: uniform_fill(rng, (width, variates), bound),
            conv_bias: Array1::from_shape_simple_fn(variates, || rng.random_range(-bound..bound)),
            mix: Linear::init(variates, embed_dim, rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            kernel: Array2::zeros(self.kernel.raw_dim()),
            conv_bias: Array1::zeros(self.conv_bias.len()),
            mix: Linear::zeros(self.mix.input_dim(), self.mix.output_dim()),
        }
    }

    pub fn width(&self) -> usize {
        self.kernel.nrows()
    }

    pub fn variates(&self) -> usize {
        self.kernel.ncols()
    }

    fn convolve(&self, x: ArrayView3<f64>) -> Array3<f64> {
        let (n, t, d) = x.dim();
        let k = self.width();
        let pad = (k - 1) / 2;
        let mut h = Array3::<f64>::zeros((n, t, d));
        for i in 0..n {
            for step in 0..t {
                for c in 0..d {
                    let mut acc = self.conv_bias[c];
                    for tap in 0..k {
                        let src = step + tap;
                        if src < pad || src - pad >= t {
                            continue;
                        }
                        acc += self.kernel[[tap, c]] * x[[i, src - pad, c]];
                    }
                    h[[i, step, c]] = acc;
                }
            }
        }
        h
    }

    pub fn forward(&self, x: ArrayView3<f64>) -> Result<EncoderCache> {
        let (n, t, d) = x.dim();
        if d != self.variates() {
            return Err(shape_err(format!("input has D={d}, encoder expects D={}", self.variates())));
        }
        let conv = self.convolve(x);
        let z = self.mix.forward(flat3(&conv)).mapv_into(f64::tanh);
        Ok(EncoderCache {
            conv,
            out: unflat3(z, n, t),
        })
    }

    /// Accumulates gradients into `grad`; returns `dL/dx` when requested.
    pub fn backward(
        &self,
        x: ArrayView3<f64>,
        cache: &EncoderCache,
        d_out: &Array3<f64>,
        grad: &mut ViewEncoder,
        need_input_grad: bool,
    ) -> Option<Array3<f64>> {
        let (n, t, d) = x.dim();
        let mut d_z = flat3(d_out).to_owned();
        ndarray::Zip::from(&mut d_z)
            .and(flat3(&cache.out))
            .for_each(|g, &f| *g *= 1.0 - f * f);
        let d_conv = unflat3(self.mix.backward(flat3(&cache.conv), d_z.view(), &mut grad.mix), n, t);
        let k = self.width();
        let pad = (k - 1) / 2;
        let mut d_x = need_input_grad.then(|| Array3::<f64>::zeros((n, t, d)));
        for i in 0..n {
            for step in 0..t {
                for c in 0..d {
                    let g = d_conv[[i, step, c]];
                    grad.conv_bias[c] += g;
                    for tap in 0..k {
                        let src = step + tap;
                        if src < pad || src - pad >= t {
                            continue;
                        }
                        grad.kernel[[tap, c]] += g * x[[i, src - pad, c]];
                        if let Some(dx) = d_x.as_mut() {
                            dx[[i, src - pad, c]] += g * self.kernel[[tap, c]];
                        }
                    }
                }
            }
        }
        d_x
    }
}

/// The `V` independent view encoders.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    pub views: Vec<ViewEncoder>,
}

impl EncoderParams {
    pub fn init<R: Rng>(n_views: usize, variates: usize, embed_dim: usize, rng: &mut R) -> Self {
        let views = (0..n_views)
            .map(|v| ViewEncoder::init(KERNEL_WIDTHS[v % KERNEL_WIDTHS.len()], variates, embed_dim, rng))
            .collect();
        Self { views }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            views: self.views.iter().map(ViewEncoder::zeros_like).collect(),
        }
    }

    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    pub fn embed_dim(&self) -> usize {
        self.views.first().map_or(0, |v| v.mix.output_dim())
    }
}

/// `F^(v) = f_v(X)` for every view; each output is `N × T × d`.
pub fn encode_views(x: ArrayView3<f64>, params: &EncoderParams) -> Result<Vec<Array3<f64>>> {
    params
        .views
        .iter()
        .map(|enc| enc.forward(x).map(|c| c.out))
        .collect()
}

/// Temporal mean of the view average: `N × d`.
pub fn fuse_views(views: &[Array3<f64>]) -> Result<Array2<f64>> {
    let first = views.first().ok_or_else(|| arg_err("fuse_views needs at least one view"))?;
    let dim = first.dim();
    if views.iter().any(|v| v.dim() != dim) {
        return Err(shape_err("all views must share one shape"));
    }
    let (n, t, d) = dim;
    let mut fused = Array2::<f64>::zeros((n, d));
    for view in views {
        fused += &view.sum_axis(Axis(1));
    }
    fused /= (views.len() * t) as f64;
    Ok(fused)
}

/// Gradient of [`fuse_views`] w.r.t. any single view (identical for all views).
pub fn fuse_backward(d_fused: &Array2<f64>, n_views: usize, t: usize) -> Array3<f64> {
    let (n, d) = d_fused.dim();
    let scale = 1.0 / (n_views * t) as f64;
    let mut out = Array3::<f64>::zeros((n, t, d));
    for step in 0..t {
        out.slice_mut(s![.., step, ..]).assign(&(d_fused * scale));
    }
    out
}
