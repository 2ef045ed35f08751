//! Central-difference gradient checks shared by the gradient tests and the
//! acceptance suite. Every check returns the worst relative error seen, or
//! the first parameter that exceeds the tolerance.

#![allow(dead_code)]

use corrgan_core::rng;
use corrgan_gan::model::latent_batch;
use corrgan_gan::{backward, init_model, loss_value, Activation, ArchitectureDescriptor, GanModel, Layer, LossSpec, Mode, Network};
use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;

pub const STEP: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-4;
/// Gradients smaller than this are compared absolutely: central
/// differences cannot resolve them relative to their own size.
pub const FLOOR: f64 = 1e-5;

pub type Check = Result<f64, String>;

pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

fn central(mut f: impl FnMut(f64) -> f64, x: f64) -> f64 {
    (f(x + STEP) - f(x - STEP)) / (2.0 * STEP)
}

#[derive(Clone, Copy)]
pub enum Which {
    Generator,
    Discriminator,
}

fn params_mut(m: &mut GanModel, which: Which) -> &mut [f64] {
    match which {
        Which::Generator => m.generator_params_mut(),
        Which::Discriminator => m.discriminator_params_mut(),
    }
}

pub fn check_model(model: &GanModel, loss: LossSpec, which: Which, indices: &[usize]) -> Check {
    let grad = backward(model, &loss);
    let analytic = match which {
        Which::Generator => grad.generator,
        Which::Discriminator => grad.discriminator,
    };
    let mut worst: f64 = 0.0;
    let mut m = model.clone();
    for &i in indices {
        let orig = params_mut(&mut m, which)[i];
        let numeric = central(
            |v| {
                params_mut(&mut m, which)[i] = v;
                loss_value(&m, &loss)
            },
            orig,
        );
        params_mut(&mut m, which)[i] = orig;
        let e = rel_error(analytic[i], numeric);
        if e > REL_TOL {
            return Err(format!("parameter {i}: analytic {} numeric {numeric} (rel {e:e})", analytic[i]));
        }
        worst = worst.max(e);
    }
    Ok(worst)
}

fn real_batch(n: usize, count: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng::seeded(seed, 900);
    DMatrix::from_fn(n * n, count, |_, _| r.random_range(-0.9..0.9))
}

/// Every generator and discriminator parameter of a small dense model
/// with batch-norm, for both real labels and the generator loss.
pub fn dense_full_parameter() -> Check {
    let mut arch = ArchitectureDescriptor::dense(3, 8, vec![32, 32], vec![32, 32]);
    arch.batch_norm = true;
    let model = init_model(&arch, 3).map_err(|e| e.to_string())?;
    let mut r = rng::seeded(3, 901);
    let z = latent_batch(&mut r, 8, 6);
    let real = real_batch(3, 6, 3);
    let all_d: Vec<usize> = (0..model.discriminator_params().len()).collect();
    let all_g: Vec<usize> = (0..model.generator_params().len()).collect();
    let mut worst: f64 = 0.0;
    for label in [1.0, 0.9] {
        let loss = LossSpec::Discriminator { real: &real, latent: &z, real_label: label };
        worst = worst.max(check_model(&model, loss, Which::Discriminator, &all_d)?);
    }
    worst = worst.max(check_model(&model, LossSpec::Generator { latent: &z }, Which::Generator, &all_g)?);
    Ok(worst)
}

/// 200 random parameters of each network of the convolutional model.
/// Smooth activations keep the finite differences away from kinks.
pub fn conv_subsampled() -> Check {
    let mut arch = ArchitectureDescriptor::conv(32, 8);
    arch.generator_activation = Activation::Tanh;
    arch.discriminator_activation = Activation::Tanh;
    let model = init_model(&arch, 5).map_err(|e| e.to_string())?;
    let mut r = rng::seeded(5, 902);
    let z = latent_batch(&mut r, 8, 3);
    let real = real_batch(32, 3, 5);
    let g = sample(&mut r, model.generator_params().len(), 200).into_vec();
    let d = sample(&mut r, model.discriminator_params().len(), 200).into_vec();
    let loss = LossSpec::Discriminator { real: &real, latent: &z, real_label: 1.0 };
    let wd = check_model(&model, loss, Which::Discriminator, &d)?;
    let wg = check_model(&model, LossSpec::Generator { latent: &z }, Which::Generator, &g)?;
    Ok(wd.max(wg))
}

/// Parameter and input gradients of a bare network under the loss
/// `Σ w ⊙ output` with fixed random weights `w`.
pub fn check_network(net: &Network, batch: usize, seed: u64) -> Check {
    let mut r = rng::seeded(seed, 903);
    let mut params: Vec<f64> = (0..net.param_count()).map(|_| r.random_range(-0.5..0.5)).collect();
    let state = net.initial_state();
    let x = DMatrix::from_fn(net.input_size(), batch, |_, _| r.random_range(-1.0..1.0));
    let w = DMatrix::from_fn(net.output_size(), batch, |_, _| r.random_range(-1.0..1.0));
    let loss = |p: &[f64], x: &DMatrix<f64>| net.forward(p, &state, x.clone(), Mode::Train).0.dot(&w);

    let (_, tape) = net.forward(&params, &state, x.clone(), Mode::Train);
    let mut grad = vec![0.0; params.len()];
    let dx = net.backward(&params, &tape, w.clone(), &mut grad);

    let mut worst: f64 = 0.0;
    for i in 0..params.len() {
        let orig = params[i];
        let numeric = central(
            |v| {
                params[i] = v;
                loss(&params, &x)
            },
            orig,
        );
        params[i] = orig;
        let e = rel_error(grad[i], numeric);
        if e > REL_TOL {
            return Err(format!("param {i}: {} vs {numeric}", grad[i]));
        }
        worst = worst.max(e);
    }
    let mut xp = x.clone();
    for i in 0..x.len() {
        let orig = xp[i];
        let numeric = central(
            |v| {
                xp[i] = v;
                loss(&params, &xp)
            },
            orig,
        );
        xp[i] = orig;
        let e = rel_error(dx[i], numeric);
        if e > REL_TOL {
            return Err(format!("input {i}: {} vs {numeric}", dx[i]));
        }
        worst = worst.max(e);
    }
    Ok(worst)
}

/// One small network per layer type and activation.
pub fn layer_cases() -> Vec<(&'static str, usize, Vec<Layer>)> {
    vec![
        ("dense", 5, vec![Layer::Dense { inputs: 5, outputs: 4 }]),
        ("tanh", 4, vec![Layer::Dense { inputs: 4, outputs: 4 }, Layer::Activation(Activation::Tanh)]),
        ("sigmoid", 4, vec![Layer::Dense { inputs: 4, outputs: 4 }, Layer::Activation(Activation::Sigmoid)]),
        ("leaky_relu", 4, vec![Layer::Dense { inputs: 4, outputs: 6 }, Layer::Activation(Activation::LeakyRelu(0.2))]),
        ("relu", 4, vec![Layer::Dense { inputs: 4, outputs: 6 }, Layer::Activation(Activation::Relu)]),
        ("batch_norm", 4, vec![Layer::Dense { inputs: 4, outputs: 6 }, Layer::BatchNorm { channels: 6, spatial: 1 }]),
        ("conv", 2 * 8 * 8, vec![Layer::Conv { in_channels: 2, out_channels: 3, size: 8 }]),
        ("conv_transpose", 3 * 4 * 4, vec![Layer::ConvTranspose { in_channels: 3, out_channels: 2, size: 4 }]),
        (
            "conv_transpose+batch_norm+tanh",
            2 * 4 * 4,
            vec![
                Layer::ConvTranspose { in_channels: 2, out_channels: 3, size: 4 },
                Layer::BatchNorm { channels: 3, spatial: 64 },
                Layer::Activation(Activation::Tanh),
            ],
        ),
    ]
}

pub fn every_layer() -> Vec<(&'static str, Check)> {
    layer_cases()
        .into_iter()
        .enumerate()
        .map(|(k, (name, input, layers))| {
            let check = Network::new(input, layers)
                .map_err(|e| e.to_string())
                .and_then(|net| check_network(&net, 5, k as u64));
            (name, check)
        })
        .collect()
}
