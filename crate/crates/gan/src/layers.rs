//! Layer kinds and their forward/backward kernels.
//!
//! A batch is a `features × batch` matrix, one sample per column. Image
//! features are stored channel-major (`c·S² + i·S + j`), which is exactly
//! the column-major layout of an `S² × C` matrix; the convolution kernels
//! rely on this.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DMatrixView};

use crate::error::GanError;

/// Convolution kernel size, stride and padding are fixed at 4, 2 and 1:
/// every convolution halves the side, every transposed convolution
/// doubles it.
pub const KERNEL: usize = 4;
pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Relu,
    LeakyRelu(f64),
    Tanh,
    Sigmoid,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::LeakyRelu(a) => {
                if x > 0.0 {
                    x
                } else {
                    a * x
                }
            }
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
        }
    }

    /// Derivative expressed through the input `x` and output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => (x > 0.0) as u8 as f64,
            Activation::LeakyRelu(a) => {
                if x > 0.0 {
                    1.0
                } else {
                    a
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::Relu => f.write_str("relu"),
            Activation::LeakyRelu(a) => write!(f, "leaky_relu:{a}"),
            Activation::Tanh => f.write_str("tanh"),
            Activation::Sigmoid => f.write_str("sigmoid"),
        }
    }
}

impl FromStr for Activation {
    type Err = GanError;
    fn from_str(s: &str) -> Result<Self, GanError> {
        let bad = || GanError::Architecture(format!("unknown activation {s:?}"));
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            _ => {
                let slope = s.strip_prefix("leaky_relu:").ok_or_else(bad)?;
                let a: f64 = slope.parse().map_err(|_| bad())?;
                Ok(Activation::LeakyRelu(a))
            }
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Layer {
    Dense { inputs: usize, outputs: usize },
    /// `in_channels × size²` → `out_channels × (size/2)²`.
    Conv { in_channels: usize, out_channels: usize, size: usize },
    /// `in_channels × size²` → `out_channels × (2·size)²`.
    ConvTranspose { in_channels: usize, out_channels: usize, size: usize },
    /// Normalises each channel over batch and `spatial` positions.
    BatchNorm { channels: usize, spatial: usize },
    Activation(Activation),
}

impl Layer {
    pub fn input_size(&self) -> Option<usize> {
        match *self {
            Layer::Dense { inputs, .. } => Some(inputs),
            Layer::Conv { in_channels, size, .. } | Layer::ConvTranspose { in_channels, size, .. } => {
                Some(in_channels * size * size)
            }
            Layer::BatchNorm { channels, spatial } => Some(channels * spatial),
            Layer::Activation(_) => None,
        }
    }

    pub fn output_size(&self, input: usize) -> usize {
        match *self {
            Layer::Dense { outputs, .. } => outputs,
            Layer::Conv { out_channels, size, .. } => out_channels * (size / 2) * (size / 2),
            Layer::ConvTranspose { out_channels, size, .. } => out_channels * 4 * size * size,
            Layer::BatchNorm { .. } | Layer::Activation(_) => input,
        }
    }

    pub fn param_count(&self) -> usize {
        match *self {
            Layer::Dense { inputs, outputs } => inputs * outputs + outputs,
            Layer::Conv { in_channels, out_channels, .. }
            | Layer::ConvTranspose { in_channels, out_channels, .. } => {
                in_channels * out_channels * KERNEL * KERNEL + out_channels
            }
            Layer::BatchNorm { channels, .. } => 2 * channels,
            Layer::Activation(_) => 0,
        }
    }

    /// Non-trainable buffers: running mean and variance for batch-norm.
    pub fn state_count(&self) -> usize {
        match *self {
            Layer::BatchNorm { channels, .. } => 2 * channels,
            _ => 0,
        }
    }

    /// Number of leading parameters that are weights (the rest are biases
    /// or shifts) and the fan-in used to scale their initialisation.
    pub fn weight_init(&self) -> Option<(usize, usize)> {
        match *self {
            Layer::Dense { inputs, outputs } => Some((inputs * outputs, inputs)),
            Layer::Conv { in_channels, out_channels, .. } => {
                Some((in_channels * out_channels * KERNEL * KERNEL, in_channels * KERNEL * KERNEL))
            }
            // Each output pixel of a stride-2 transposed convolution sees
            // a quarter of the kernel taps.
            Layer::ConvTranspose { in_channels, out_channels, .. } => Some((
                in_channels * out_channels * KERNEL * KERNEL,
                in_channels * KERNEL * KERNEL / 4,
            )),
            Layer::BatchNorm { .. } | Layer::Activation(_) => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Dense { .. } => "dense",
            Layer::Conv { .. } => "conv",
            Layer::ConvTranspose { .. } => "conv_transpose",
            Layer::BatchNorm { .. } => "batch_norm",
            Layer::Activation(_) => "activation",
        }
    }
}

/// Values a layer keeps from its forward pass for the backward pass.
#[derive(Debug, Clone)]
pub(crate) enum Cache {
    Input(DMatrix<f64>),
    Activation { input: DMatrix<f64>, output: DMatrix<f64> },
    /// Im2col patches of the whole batch, stacked per sample.
    Patches(DMatrix<f64>),
    Transposed { input: DMatrix<f64> },
    BatchNorm { normalized: DMatrix<f64>, inv_std: Vec<f64>, mean: Vec<f64>, var: Vec<f64> },
    Frozen { inv_std: Vec<f64> },
}

/// Whether batch-norm uses batch statistics or its running averages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

fn matrix_view(p: &[f64], rows: usize, cols: usize) -> DMatrixView<'_, f64> {
    DMatrixView::from_slice(&p[..rows * cols], rows, cols)
}

/// Rows are output positions `(oi, oj)` of a stride-2 convolution on a
/// `size × size` image, columns are taps `(c, ki, kj)`.
fn im2col(image: &[f64], channels: usize, size: usize, out: &mut DMatrix<f64>, row0: usize) {
    let half = size / 2;
    for c in 0..channels {
        let plane = &image[c * size * size..(c + 1) * size * size];
        for ki in 0..KERNEL {
            for kj in 0..KERNEL {
                let col = c * KERNEL * KERNEL + ki * KERNEL + kj;
                for oi in 0..half {
                    let i = (2 * oi + ki) as isize - 1;
                    for oj in 0..half {
                        let j = (2 * oj + kj) as isize - 1;
                        let v = if i >= 0 && j >= 0 && (i as usize) < size && (j as usize) < size {
                            plane[i as usize * size + j as usize]
                        } else {
                            0.0
                        };
                        out[(row0 + oi * half + oj, col)] = v;
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters patch rows back onto the image.
fn col2im(cols: &DMatrix<f64>, row0: usize, channels: usize, size: usize, image: &mut [f64]) {
    let half = size / 2;
    for c in 0..channels {
        for ki in 0..KERNEL {
            for kj in 0..KERNEL {
                let col = c * KERNEL * KERNEL + ki * KERNEL + kj;
                for oi in 0..half {
                    let i = (2 * oi + ki) as isize - 1;
                    if i < 0 || i as usize >= size {
                        continue;
                    }
                    for oj in 0..half {
                        let j = (2 * oj + kj) as isize - 1;
                        if j < 0 || j as usize >= size {
                            continue;
                        }
                        image[c * size * size + i as usize * size + j as usize] +=
                            cols[(row0 + oi * half + oj, col)];
                    }
                }
            }
        }
    }
}

impl Layer {
    pub(crate) fn forward(
        &self,
        params: &[f64],
        state: &[f64],
        x: DMatrix<f64>,
        mode: Mode,
    ) -> (DMatrix<f64>, Cache) {
        let batch = x.ncols();
        match *self {
            Layer::Dense { inputs, outputs } => {
                let w = matrix_view(params, outputs, inputs);
                let b = &params[inputs * outputs..];
                let mut y = w * &x;
                for mut col in y.column_iter_mut() {
                    col.iter_mut().zip(b).for_each(|(v, bi)| *v += bi);
                }
                (y, Cache::Input(x))
            }
            Layer::Conv { in_channels, out_channels, size } => {
                let pos = (size / 2) * (size / 2);
                let taps = in_channels * KERNEL * KERNEL;
                let k = matrix_view(params, taps, out_channels);
                let bias = &params[taps * out_channels..];
                let mut patches = DMatrix::zeros(batch * pos, taps);
                for s in 0..batch {
                    let f = x.nrows();
                    im2col(&x.as_slice()[s * f..(s + 1) * f], in_channels, size, &mut patches, s * pos);
                }
                let out = &patches * k;
                let mut y = DMatrix::zeros(out_channels * pos, batch);
                for s in 0..batch {
                    for co in 0..out_channels {
                        for p in 0..pos {
                            y[(co * pos + p, s)] = out[(s * pos + p, co)] + bias[co];
                        }
                    }
                }
                (y, Cache::Patches(patches))
            }
            Layer::ConvTranspose { in_channels, out_channels, size } => {
                let pos = size * size;
                let big = 2 * size;
                let taps = out_channels * KERNEL * KERNEL;
                let k = matrix_view(params, taps, in_channels);
                let bias = &params[taps * in_channels..];
                let mut y = DMatrix::zeros(out_channels * big * big, batch);
                for s in 0..batch {
                    let f = x.nrows();
                    let xs = matrix_view(&x.as_slice()[s * f..(s + 1) * f], pos, in_channels);
                    let cols = xs * k.transpose();
                    let mut image = vec![0.0; out_channels * big * big];
                    col2im(&cols, 0, out_channels, big, &mut image);
                    for co in 0..out_channels {
                        for p in 0..big * big {
                            y[(co * big * big + p, s)] = image[co * big * big + p] + bias[co];
                        }
                    }
                }
                (y, Cache::Transposed { input: x })
            }
            Layer::BatchNorm { channels, spatial } => {
                let (gamma, beta) = params.split_at(channels);
                let mut y = x.clone();
                match mode {
                    Mode::Train => {
                        let m = (batch * spatial) as f64;
                        let mut mean = vec![0.0; channels];
                        let mut var = vec![0.0; channels];
                        let mut inv_std = vec![0.0; channels];
                        for c in 0..channels {
                            let rows = c * spatial..(c + 1) * spatial;
                            let mu = x.rows(rows.start, spatial).sum() / m;
                            let v = x.rows(rows.start, spatial).iter().map(|v| (v - mu).powi(2)).sum::<f64>() / m;
                            mean[c] = mu;
                            var[c] = v;
                            inv_std[c] = 1.0 / (v + BN_EPS).sqrt();
                        }
                        let mut normalized = x;
                        for s in 0..batch {
                            for c in 0..channels {
                                for r in c * spatial..(c + 1) * spatial {
                                    let xh = (normalized[(r, s)] - mean[c]) * inv_std[c];
                                    normalized[(r, s)] = xh;
                                    y[(r, s)] = gamma[c] * xh + beta[c];
                                }
                            }
                        }
                        (y, Cache::BatchNorm { normalized, inv_std, mean, var })
                    }
                    Mode::Eval => {
                        let (run_mean, run_var) = state.split_at(channels);
                        let inv_std: Vec<f64> = run_var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
                        for s in 0..batch {
                            for c in 0..channels {
                                for r in c * spatial..(c + 1) * spatial {
                                    y[(r, s)] = gamma[c] * (x[(r, s)] - run_mean[c]) * inv_std[c] + beta[c];
                                }
                            }
                        }
                        (y, Cache::Frozen { inv_std })
                    }
                }
            }
            Layer::Activation(a) => {
                let y = x.map(|v| a.apply(v));
                (y.clone(), Cache::Activation { input: x, output: y })
            }
        }
    }

    /// Accumulates parameter gradients into `grad` and returns the gradient
    /// with respect to the layer input.
    pub(crate) fn backward(
        &self,
        params: &[f64],
        cache: &Cache,
        dy: DMatrix<f64>,
        grad: &mut [f64],
    ) -> DMatrix<f64> {
        let batch = dy.ncols();
        match (*self, cache) {
            (Layer::Dense { inputs, outputs }, Cache::Input(x)) => {
                let w = matrix_view(params, outputs, inputs);
                let dw = &dy * x.transpose();
                grad[..inputs * outputs].iter_mut().zip(dw.iter()).for_each(|(g, d)| *g += d);
                for (r, g) in grad[inputs * outputs..].iter_mut().enumerate() {
                    *g += dy.row(r).sum();
                }
                w.transpose() * dy
            }
            (Layer::Conv { in_channels, out_channels, size }, Cache::Patches(patches)) => {
                let pos = (size / 2) * (size / 2);
                let taps = in_channels * KERNEL * KERNEL;
                let k = matrix_view(params, taps, out_channels);
                let mut dout = DMatrix::zeros(batch * pos, out_channels);
                for s in 0..batch {
                    for co in 0..out_channels {
                        for p in 0..pos {
                            dout[(s * pos + p, co)] = dy[(co * pos + p, s)];
                        }
                    }
                }
                let dk = patches.transpose() * &dout;
                grad[..taps * out_channels].iter_mut().zip(dk.iter()).for_each(|(g, d)| *g += d);
                for co in 0..out_channels {
                    grad[taps * out_channels + co] += dout.column(co).sum();
                }
                let dpatches = dout * k.transpose();
                let mut dx = DMatrix::zeros(in_channels * size * size, batch);
                for s in 0..batch {
                    let f = dx.nrows();
                    col2im(&dpatches, s * pos, in_channels, size, &mut dx.as_mut_slice()[s * f..(s + 1) * f]);
                }
                dx
            }
            (Layer::ConvTranspose { in_channels, out_channels, size }, Cache::Transposed { input }) => {
                let pos = size * size;
                let big = 2 * size;
                let taps = out_channels * KERNEL * KERNEL;
                let k = matrix_view(params, taps, in_channels);
                let mut dk = DMatrix::zeros(taps, in_channels);
                let mut dx = DMatrix::zeros(in_channels * pos, batch);
                let mut dcols = DMatrix::zeros(pos, taps);
                for s in 0..batch {
                    let f = dy.nrows();
                    im2col(&dy.as_slice()[s * f..(s + 1) * f], out_channels, big, &mut dcols, 0);
                    let f = input.nrows();
                    let xs = matrix_view(&input.as_slice()[s * f..(s + 1) * f], pos, in_channels);
                    dk += dcols.transpose() * xs;
                    let dxs = &dcols * k;
                    dx.column_mut(s).copy_from_slice(dxs.as_slice());
                }
                grad[..taps * in_channels].iter_mut().zip(dk.iter()).for_each(|(g, d)| *g += d);
                for co in 0..out_channels {
                    grad[taps * in_channels + co] += dy.rows(co * big * big, big * big).sum();
                }
                dx
            }
            (Layer::BatchNorm { channels, spatial }, Cache::BatchNorm { normalized, inv_std, .. }) => {
                let gamma = &params[..channels];
                let m = (batch * spatial) as f64;
                let mut dx = DMatrix::zeros(dy.nrows(), batch);
                for c in 0..channels {
                    let mut sum_dy = 0.0;
                    let mut sum_dy_xh = 0.0;
                    for s in 0..batch {
                        for r in c * spatial..(c + 1) * spatial {
                            sum_dy += dy[(r, s)];
                            sum_dy_xh += dy[(r, s)] * normalized[(r, s)];
                        }
                    }
                    grad[c] += sum_dy_xh;
                    grad[channels + c] += sum_dy;
                    let scale = gamma[c] * inv_std[c] / m;
                    for s in 0..batch {
                        for r in c * spatial..(c + 1) * spatial {
                            dx[(r, s)] =
                                scale * (m * dy[(r, s)] - sum_dy - normalized[(r, s)] * sum_dy_xh);
                        }
                    }
                }
                dx
            }
            (Layer::BatchNorm { channels, spatial }, Cache::Frozen { inv_std }) => {
                // Eval mode is affine; only the input gradient is needed when
                // differentiating a frozen network.
                let gamma = &params[..channels];
                let mut dx = dy;
                for s in 0..batch {
                    for c in 0..channels {
                        for r in c * spatial..(c + 1) * spatial {
                            dx[(r, s)] *= gamma[c] * inv_std[c];
                        }
                    }
                }
                dx
            }
            (Layer::Activation(a), Cache::Activation { input, output }) => {
                let mut dx = dy;
                for ((d, &x), &y) in dx.iter_mut().zip(input.iter()).zip(output.iter()) {
                    *d *= a.derivative(x, y);
                }
                dx
            }
            (layer, _) => unreachable!("cache does not belong to a {} layer", layer.kind()),
        }
    }

    /// Folds this batch's statistics into the running averages.
    pub(crate) fn update_running(&self, cache: &Cache, batch: usize, state: &mut [f64]) {
        if let (Layer::BatchNorm { channels, spatial }, Cache::BatchNorm { mean, var, .. }) = (self, cache) {
            let m = (batch * spatial) as f64;
            let unbiased = if m > 1.0 { m / (m - 1.0) } else { 1.0 };
            let (run_mean, run_var) = state.split_at_mut(*channels);
            for c in 0..*channels {
                run_mean[c] = (1.0 - BN_MOMENTUM) * run_mean[c] + BN_MOMENTUM * mean[c];
                run_var[c] = (1.0 - BN_MOMENTUM) * run_var[c] + BN_MOMENTUM * var[c] * unbiased;
            }
        }
    }
}
