use corrgan_core::rng::{self, stream, CorrRng};
use corrgan_core::RawMatrix;
use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use crate::arch::ArchitectureDescriptor;
use crate::error::{GanError, Result};
use crate::layers::{sigmoid, Layer, Mode};
use crate::network::{Network, Tape};

/// Logits are clamped to this magnitude before the sigmoid so that the
/// reported probability stays strictly inside (0, 1).
const LOGIT_CLAMP: f64 = 36.0;

/// Generator and discriminator parameters plus the generator's batch-norm
/// running statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct GanModel {
    arch: ArchitectureDescriptor,
    generator: Network,
    discriminator: Network,
    pub(crate) generator_params: Vec<f64>,
    pub(crate) discriminator_params: Vec<f64>,
    pub(crate) generator_state: Vec<f64>,
    pub(crate) step: u64,
    pub(crate) seed: u64,
}

/// A named, contiguous block of one of the model's vectors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub name: String,
    pub len: usize,
}

fn blocks(prefix: &str, net: &Network, state: bool) -> Vec<Block> {
    net.layers()
        .iter()
        .enumerate()
        .filter_map(|(k, layer)| {
            let len = if state { net.state_range(k).len() } else { net.param_range(k).len() };
            (len > 0).then(|| Block {
                name: format!("{prefix}.{k}.{}{}", layer.kind(), if state { ".running" } else { "" }),
                len,
            })
        })
        .collect()
}

pub fn init_model(arch: &ArchitectureDescriptor, seed: u64) -> Result<GanModel> {
    let generator = arch.generator()?;
    let discriminator = arch.discriminator()?;
    let mut rng = rng::seeded(seed, stream::INIT);
    let generator_params = init_params(&generator, &mut rng);
    let discriminator_params = init_params(&discriminator, &mut rng);
    Ok(GanModel {
        arch: arch.clone(),
        generator_state: generator.initial_state(),
        generator,
        discriminator,
        generator_params,
        discriminator_params,
        step: 0,
        seed,
    })
}

/// Weights `N(0, 1/fan_in)`, biases and shifts 0, batch-norm scales 1.
fn init_params(net: &Network, rng: &mut CorrRng) -> Vec<f64> {
    let mut p = vec![0.0; net.param_count()];
    for (k, layer) in net.layers().iter().enumerate() {
        let r = net.param_range(k);
        if let Some((weights, fan_in)) = layer.weight_init() {
            let scale = 1.0 / (fan_in as f64).sqrt();
            for w in &mut p[r.start..r.start + weights] {
                let z: f64 = StandardNormal.sample(rng);
                *w = z * scale;
            }
        }
        if let Layer::BatchNorm { channels, .. } = layer {
            p[r.start..r.start + channels].fill(1.0);
        }
    }
    p
}

/// `count` latent vectors, one per column, drawn sample by sample.
pub fn latent_batch(rng: &mut CorrRng, latent_dim: usize, count: usize) -> DMatrix<f64> {
    let v: Vec<f64> = (0..latent_dim * count).map(|_| StandardNormal.sample(rng)).collect();
    DMatrix::from_vec(latent_dim, count, v)
}

/// Row-major flattening, the layout of generator outputs.
pub fn flatten(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

/// Training batch from matrices: one row-major flattened matrix per column.
pub fn matrix_batch<'a>(n: usize, matrices: impl IntoIterator<Item = &'a DMatrix<f64>>) -> DMatrix<f64> {
    let cols: Vec<f64> = matrices.into_iter().flat_map(flatten).collect();
    let count = cols.len() / (n * n);
    DMatrix::from_vec(n * n, count, cols)
}

fn to_raw(n: usize, column: &[f64]) -> Result<RawMatrix> {
    Ok(RawMatrix::new(DMatrix::from_row_slice(n, n, column))?)
}

/// Binary cross-entropy on logits, `max(x, 0) - x·y + ln(1 + e^{-|x|})`.
pub fn bce_with_logits(x: f64, y: f64) -> f64 {
    x.max(0.0) - x * y + (-x.abs()).exp().ln_1p()
}

#[derive(Debug, Clone, Copy)]
pub enum LossSpec<'a> {
    /// `BCE(D(real), real_label) + BCE(D(G(z)), 0)`, batch means, with
    /// respect to the discriminator.
    Discriminator {
        real: &'a DMatrix<f64>,
        latent: &'a DMatrix<f64>,
        real_label: f64,
    },
    /// Non-saturating generator loss `BCE(D(G(z)), 1)` with respect to the
    /// generator.
    Generator { latent: &'a DMatrix<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub loss: f64,
    /// Zero-length when the loss does not depend on the generator.
    pub generator: Vec<f64>,
    pub discriminator: Vec<f64>,
    pub d_real_mean: Option<f64>,
    pub d_fake_mean: f64,
}

impl GanModel {
    pub fn arch(&self) -> &ArchitectureDescriptor {
        &self.arch
    }

    pub fn generator_network(&self) -> &Network {
        &self.generator
    }

    pub fn discriminator_network(&self) -> &Network {
        &self.discriminator
    }

    pub fn generator_params(&self) -> &[f64] {
        &self.generator_params
    }

    pub fn discriminator_params(&self) -> &[f64] {
        &self.discriminator_params
    }

    pub fn generator_params_mut(&mut self) -> &mut [f64] {
        &mut self.generator_params
    }

    pub fn discriminator_params_mut(&mut self) -> &mut [f64] {
        &mut self.discriminator_params
    }

    pub fn generator_state(&self) -> &[f64] {
        &self.generator_state
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn param_count(&self) -> usize {
        self.generator_params.len() + self.discriminator_params.len()
    }

    /// Blocks in storage order: generator parameters, discriminator
    /// parameters, generator running statistics.
    pub fn blocks(&self) -> Vec<Block> {
        let mut b = blocks("generator", &self.generator, false);
        b.extend(blocks("discriminator", &self.discriminator, false));
        b.extend(blocks("generator", &self.generator, true));
        b
    }

    pub(crate) fn from_parts(
        arch: ArchitectureDescriptor,
        generator_params: Vec<f64>,
        discriminator_params: Vec<f64>,
        generator_state: Vec<f64>,
        step: u64,
        seed: u64,
    ) -> Result<Self> {
        let generator = arch.generator()?;
        let discriminator = arch.discriminator()?;
        if generator_params.len() != generator.param_count()
            || discriminator_params.len() != discriminator.param_count()
            || generator_state.len() != generator.state_count()
        {
            return Err(GanError::Shape("parameter counts do not match the architecture".into()));
        }
        if generator_params.iter().chain(&discriminator_params).chain(&generator_state).any(|x| !x.is_finite()) {
            return Err(GanError::Shape("non-finite parameter".into()));
        }
        Ok(GanModel {
            arch,
            generator,
            discriminator,
            generator_params,
            discriminator_params,
            generator_state,
            step,
            seed,
        })
    }

    pub(crate) fn generate_batch(&self, latent: DMatrix<f64>, mode: Mode) -> (DMatrix<f64>, Tape) {
        self.generator.forward(&self.generator_params, &self.generator_state, latent, mode)
    }

    pub(crate) fn logits(&self, batch: DMatrix<f64>) -> (DMatrix<f64>, Tape) {
        self.discriminator.forward(&self.discriminator_params, &[], batch, Mode::Train)
    }

    pub(crate) fn update_running(&mut self, tape: &Tape) {
        self.generator.update_running(tape, &mut self.generator_state);
    }

    /// Exact gradient of `loss`. Returns the generator forward tape so the
    /// caller can fold its batch statistics into the running averages.
    pub(crate) fn gradient_with_tape(&self, loss: &LossSpec) -> (Gradient, Tape) {
        let mut d_grad = vec![0.0; self.discriminator.param_count()];
        match *loss {
            LossSpec::Discriminator { real, latent, real_label } => {
                let (fake, g_tape) = self.generate_batch(latent.clone(), Mode::Train);
                let (real_logits, real_tape) = self.logits(real.clone());
                let (fake_logits, fake_tape) = self.logits(fake);
                let nr = real_logits.ncols() as f64;
                let nf = fake_logits.ncols() as f64;
                let loss = real_logits.iter().map(|&x| bce_with_logits(x, real_label)).sum::<f64>() / nr
                    + fake_logits.iter().map(|&x| bce_with_logits(x, 0.0)).sum::<f64>() / nf;
                let d_real = real_logits.map(|x| (sigmoid(x) - real_label) / nr);
                let d_fake = fake_logits.map(|x| sigmoid(x) / nf);
                self.discriminator.backward(&self.discriminator_params, &real_tape, d_real, &mut d_grad);
                self.discriminator.backward(&self.discriminator_params, &fake_tape, d_fake, &mut d_grad);
                let grad = Gradient {
                    loss,
                    generator: Vec::new(),
                    discriminator: d_grad,
                    d_real_mean: Some(real_logits.iter().map(|&x| sigmoid(x)).sum::<f64>() / nr),
                    d_fake_mean: fake_logits.iter().map(|&x| sigmoid(x)).sum::<f64>() / nf,
                };
                (grad, g_tape)
            }
            LossSpec::Generator { latent } => {
                let (fake, g_tape) = self.generate_batch(latent.clone(), Mode::Train);
                let (logits, d_tape) = self.logits(fake);
                let nf = logits.ncols() as f64;
                let loss = logits.iter().map(|&x| bce_with_logits(x, 1.0)).sum::<f64>() / nf;
                let dlogits = logits.map(|x| (sigmoid(x) - 1.0) / nf);
                let dfake = self.discriminator.backward(&self.discriminator_params, &d_tape, dlogits, &mut d_grad);
                let mut g_grad = vec![0.0; self.generator.param_count()];
                self.generator.backward(&self.generator_params, &g_tape, dfake, &mut g_grad);
                let grad = Gradient {
                    loss,
                    generator: g_grad,
                    discriminator: Vec::new(),
                    d_real_mean: None,
                    d_fake_mean: logits.iter().map(|&x| sigmoid(x)).sum::<f64>() / nf,
                };
                (grad, g_tape)
            }
        }
    }
}

/// Exact reverse-mode gradient of `loss`. Batch-norm layers use batch
/// statistics, as during training.
pub fn backward(model: &GanModel, loss: &LossSpec) -> Gradient {
    model.gradient_with_tape(loss).0
}

/// Loss value only, with the same forward semantics as [`backward`].
pub fn loss_value(model: &GanModel, loss: &LossSpec) -> f64 {
    backward(model, loss).loss
}

/// One generated matrix. Batch-norm uses its frozen running statistics.
pub fn generator_forward(model: &GanModel, z: &[f64]) -> Result<RawMatrix> {
    let latent = model.arch.latent_dim;
    if z.len() != latent {
        return Err(GanError::Shape(format!("latent vector has length {}, expected {latent}", z.len())));
    }
    let (out, _) = model.generate_batch(DMatrix::from_column_slice(latent, 1, z), Mode::Eval);
    to_raw(model.arch.n, out.as_slice())
}

/// Probability that `m` comes from the training data.
pub fn discriminator_forward(model: &GanModel, m: &RawMatrix) -> Result<f64> {
    let n = model.arch.n;
    if m.n() != n {
        return Err(GanError::Shape(format!("expected {n}x{n} input, got {}x{}", m.n(), m.n())));
    }
    let (logit, _) = model.logits(matrix_batch(n, [m.values()]));
    Ok(sigmoid(logit[(0, 0)].clamp(-LOGIT_CLAMP, LOGIT_CLAMP)))
}

const GENERATE_CHUNK: usize = 256;

/// `count` samples from latent draws on the generation stream of `seed`.
pub fn generate(model: &GanModel, count: usize, seed: u64) -> Result<Vec<RawMatrix>> {
    let n = model.arch.n;
    let mut rng = rng::seeded(seed, stream::GENERATE);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let take = GENERATE_CHUNK.min(count - out.len());
        let z = latent_batch(&mut rng, model.arch.latent_dim, take);
        let (batch, _) = model.generate_batch(z, Mode::Eval);
        for col in batch.column_iter() {
            out.push(to_raw(n, col.as_slice())?);
        }
    }
    Ok(out)
}
