//! A feed-forward stack of layers over a flat parameter vector.

use std::ops::Range;

use nalgebra::DMatrix;

use crate::error::{GanError, Result};
use crate::layers::{Cache, Layer, Mode};

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
    input_size: usize,
    output_size: usize,
    param_ranges: Vec<Range<usize>>,
    state_ranges: Vec<Range<usize>>,
}

/// Forward-pass record consumed by [`Network::backward`].
#[derive(Debug, Clone)]
pub struct Tape {
    caches: Vec<Cache>,
    batch: usize,
}

impl Network {
    /// Checks that consecutive layer sizes agree.
    pub fn new(input_size: usize, layers: Vec<Layer>) -> Result<Self> {
        let mut size = input_size;
        let mut param_ranges = Vec::with_capacity(layers.len());
        let mut state_ranges = Vec::with_capacity(layers.len());
        let (mut p, mut s) = (0, 0);
        for (k, layer) in layers.iter().enumerate() {
            if let Some(expected) = layer.input_size() {
                if expected != size {
                    return Err(GanError::Architecture(format!(
                        "layer {k} ({}) expects {expected} inputs, previous layer gives {size}",
                        layer.kind()
                    )));
                }
            }
            if let Layer::Conv { size: side, .. } | Layer::ConvTranspose { size: side, .. } = layer {
                if *side == 0 || (matches!(layer, Layer::Conv { .. }) && side % 2 != 0) {
                    return Err(GanError::Architecture(format!("layer {k}: bad image side {side}")));
                }
            }
            size = layer.output_size(size);
            param_ranges.push(p..p + layer.param_count());
            state_ranges.push(s..s + layer.state_count());
            p += layer.param_count();
            s += layer.state_count();
        }
        Ok(Network {
            layers,
            input_size,
            output_size: size,
            param_ranges,
            state_ranges,
        })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn output_size(&self) -> usize {
        self.output_size
    }

    pub fn param_count(&self) -> usize {
        self.param_ranges.last().map_or(0, |r| r.end)
    }

    pub fn state_count(&self) -> usize {
        self.state_ranges.last().map_or(0, |r| r.end)
    }

    pub fn param_range(&self, layer: usize) -> Range<usize> {
        self.param_ranges[layer].clone()
    }

    pub fn state_range(&self, layer: usize) -> Range<usize> {
        self.state_ranges[layer].clone()
    }

    /// Initial state: running means 0, running variances 1.
    pub fn initial_state(&self) -> Vec<f64> {
        let mut state = vec![0.0; self.state_count()];
        for (layer, r) in self.layers.iter().zip(&self.state_ranges) {
            if let Layer::BatchNorm { channels, .. } = layer {
                state[r.start + channels..r.end].fill(1.0);
            }
        }
        state
    }

    pub fn forward(&self, params: &[f64], state: &[f64], x: DMatrix<f64>, mode: Mode) -> (DMatrix<f64>, Tape) {
        debug_assert_eq!(x.nrows(), self.input_size);
        let batch = x.ncols();
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut h = x;
        for (k, layer) in self.layers.iter().enumerate() {
            let (y, cache) = layer.forward(&params[self.param_range(k)], &state[self.state_range(k)], h, mode);
            caches.push(cache);
            h = y;
        }
        (h, Tape { caches, batch })
    }

    /// Adds `∂L/∂params` into `grad` given `dout = ∂L/∂output`; returns
    /// `∂L/∂input`.
    pub fn backward(&self, params: &[f64], tape: &Tape, dout: DMatrix<f64>, grad: &mut [f64]) -> DMatrix<f64> {
        let mut d = dout;
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let r = self.param_range(k);
            d = layer.backward(&params[r.clone()], &tape.caches[k], d, &mut grad[r]);
        }
        d
    }

    pub fn update_running(&self, tape: &Tape, state: &mut [f64]) {
        for (k, layer) in self.layers.iter().enumerate() {
            layer.update_running(&tape.caches[k], tape.batch, &mut state[self.state_range(k)]);
        }
    }
}
