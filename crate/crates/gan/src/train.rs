use std::path::PathBuf;
use std::time::Instant;

use corrgan_core::canonical::canonicalize;
use corrgan_core::rng::{self, stream};
use corrgan_core::CorrelationMatrix;
use nalgebra::DMatrix;
use rand::seq::SliceRandom;

use crate::arch::ArchitectureDescriptor;
use crate::checkpoint::save_checkpoint;
use crate::error::{GanError, Result};
use crate::model::{init_model, latent_batch, matrix_batch, GanModel, LossSpec};

pub const SMOOTHED_REAL_LABEL: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub generator_lr: f64,
    pub discriminator_lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Real label 0.9 instead of 1 in the discriminator loss.
    pub label_smoothing: bool,
    /// Write a checkpoint every this many steps (requires `checkpoint_dir`).
    pub checkpoint_every: Option<u64>,
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            generator_lr: 2e-4,
            discriminator_lr: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            epochs: 50,
            seed: 0,
            label_smoothing: false,
            checkpoint_every: None,
            checkpoint_dir: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(GanError::Config(m));
        if self.batch_size < 2 {
            return bad(format!("batch_size must be >= 2, got {}", self.batch_size));
        }
        for (name, lr) in [("generator_lr", self.generator_lr), ("discriminator_lr", self.discriminator_lr)] {
            if !(lr > 0.0 && lr.is_finite()) {
                return bad(format!("{name} must be positive, got {lr}"));
            }
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return bad(format!("{name} must lie in [0, 1), got {b}"));
            }
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1".into());
        }
        if self.checkpoint_every == Some(0) {
            return bad("checkpoint_every must be >= 1".into());
        }
        if self.checkpoint_every.is_some() && self.checkpoint_dir.is_none() {
            return bad("checkpoint_every needs checkpoint_dir".into());
        }
        Ok(())
    }

    pub fn real_label(&self) -> f64 {
        if self.label_smoothing {
            SMOOTHED_REAL_LABEL
        } else {
            1.0
        }
    }
}

/// Adaptive-moment optimiser over a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(len: usize, lr: f64, beta1: f64, beta2: f64) -> Self {
        Adam { lr, beta1, beta2, eps: 1e-8, m: vec![0.0; len], v: vec![0.0; len], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }
}

/// Per-step losses and discriminator outputs, plus wall-clock per epoch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub d_loss: Vec<f64>,
    pub g_loss: Vec<f64>,
    pub d_real: Vec<f64>,
    pub d_fake: Vec<f64>,
    pub epoch_seconds: Vec<f64>,
}

impl TrainingLog {
    pub fn steps(&self) -> usize {
        self.d_loss.len()
    }

    /// `step,d_loss,g_loss,d_real,d_fake` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,d_loss,g_loss,d_real,d_fake\n");
        for k in 0..self.steps() {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                k + 1,
                self.d_loss[k],
                self.g_loss[k],
                self.d_real[k],
                self.d_fake[k]
            ));
        }
        s
    }

    /// Wall-clock times are excluded: they are the only non-deterministic
    /// part of a run.
    pub fn same_trajectory(&self, other: &TrainingLog) -> bool {
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        bits(&self.d_loss) == bits(&other.d_loss)
            && bits(&self.g_loss) == bits(&other.g_loss)
            && bits(&self.d_real) == bits(&other.d_real)
            && bits(&self.d_fake) == bits(&other.d_fake)
    }
}

fn check_dataset(dataset: &[CorrelationMatrix], n: usize) -> Result<()> {
    if dataset.is_empty() {
        return Err(GanError::Config("training set is empty".into()));
    }
    for (k, m) in dataset.iter().enumerate() {
        if m.n() != n {
            return Err(GanError::Shape(format!("matrix {k} is {}x{}, architecture expects {n}x{n}", m.n(), m.n())));
        }
        if canonicalize(m) != *m {
            return Err(GanError::Config(format!("matrix {k} is not in canonical order")));
        }
    }
    Ok(())
}

fn diagnostic(model: &GanModel, cfg: &TrainConfig, which: &'static str) -> GanError {
    let checkpoint = cfg.checkpoint_dir.as_ref().and_then(|dir| {
        let path = dir.join(format!("diagnostic_step_{:08}.ckpt", model.step()));
        save_checkpoint(model, &path).ok().map(|_| path)
    });
    GanError::NonFiniteLoss { step: model.step() + 1, which, checkpoint }
}

/// Alternating discriminator and generator updates over shuffled epochs.
/// Fully determined by `(dataset, arch, cfg)`.
pub fn train(dataset: &[CorrelationMatrix], arch: &ArchitectureDescriptor, cfg: &TrainConfig) -> Result<(GanModel, TrainingLog)> {
    cfg.validate()?;
    check_dataset(dataset, arch.n)?;
    let mut model = init_model(arch, cfg.seed)?;
    let data = matrix_batch(arch.n, dataset.iter().map(|m| m.values()));
    let mut rng = rng::seeded(cfg.seed, stream::TRAIN);
    let mut adam_d = Adam::new(model.discriminator_params.len(), cfg.discriminator_lr, cfg.beta1, cfg.beta2);
    let mut adam_g = Adam::new(model.generator_params.len(), cfg.generator_lr, cfg.beta1, cfg.beta2);
    let steps_per_epoch = (dataset.len() / cfg.batch_size).max(1);
    let batch = cfg.batch_size.min(dataset.len());
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut log = TrainingLog::default();

    for epoch in 0..cfg.epochs {
        let start = Instant::now();
        order.shuffle(&mut rng);
        for s in 0..steps_per_epoch {
            let idx = &order[s * batch..(s + 1) * batch];
            let real = DMatrix::from_fn(data.nrows(), batch, |r, c| data[(r, idx[c])]);
            let z = latent_batch(&mut rng, arch.latent_dim, batch);
            let (dg, _) = model.gradient_with_tape(&LossSpec::Discriminator {
                real: &real,
                latent: &z,
                real_label: cfg.real_label(),
            });
            if !dg.loss.is_finite() {
                return Err(diagnostic(&model, cfg, "discriminator"));
            }
            adam_d.step(&mut model.discriminator_params, &dg.discriminator);

            let z = latent_batch(&mut rng, arch.latent_dim, batch);
            let (gg, tape) = model.gradient_with_tape(&LossSpec::Generator { latent: &z });
            if !gg.loss.is_finite() {
                return Err(diagnostic(&model, cfg, "generator"));
            }
            adam_g.step(&mut model.generator_params, &gg.generator);
            model.update_running(&tape);
            model.step += 1;

            log.d_loss.push(dg.loss);
            log.g_loss.push(gg.loss);
            log.d_real.push(dg.d_real_mean.unwrap_or(f64::NAN));
            log.d_fake.push(dg.d_fake_mean);

            if let (Some(every), Some(dir)) = (cfg.checkpoint_every, &cfg.checkpoint_dir) {
                if model.step % every == 0 {
                    save_checkpoint(&model, &dir.join(format!("step_{:08}.ckpt", model.step)))?;
                }
            }
        }
        log.epoch_seconds.push(start.elapsed().as_secs_f64());
        let last = log.steps() - 1;
        log::info!(
            "epoch {}/{}: d_loss={:.4} g_loss={:.4} D(real)={:.3} D(fake)={:.3}",
            epoch + 1,
            cfg.epochs,
            log.d_loss[last],
            log.g_loss[last],
            log.d_real[last],
            log.d_fake[last]
        );
    }
    Ok((model, log))
}
