use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{GanError, Result};
use crate::layers::{Activation, Layer};
use crate::network::Network;

/// Smallest side accepted by the convolutional variant.
pub const MIN_CONV_N: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Dense,
    Conv,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Dense => "dense",
            Variant::Conv => "conv",
        })
    }
}

impl FromStr for Variant {
    type Err = GanError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(Variant::Dense),
            "conv" => Ok(Variant::Conv),
            other => Err(GanError::Architecture(format!("unknown variant {other:?}"))),
        }
    }
}

/// Shape of both networks.
///
/// Dense: `generator_widths` / `discriminator_widths` are hidden-layer
/// widths. Conv: `generator_widths[k]` is the channel count entering the
/// k-th transposed convolution (the first comes from a dense projection of
/// the latent vector), `discriminator_widths[k]` the output channels of the
/// k-th strided convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchitectureDescriptor {
    pub variant: Variant,
    pub n: usize,
    pub latent_dim: usize,
    pub generator_widths: Vec<usize>,
    pub discriminator_widths: Vec<usize>,
    pub generator_activation: Activation,
    pub discriminator_activation: Activation,
    /// Batch-norm after every hidden generator layer.
    pub batch_norm: bool,
}

impl ArchitectureDescriptor {
    pub fn dense(n: usize, latent_dim: usize, generator_widths: Vec<usize>, discriminator_widths: Vec<usize>) -> Self {
        ArchitectureDescriptor {
            variant: Variant::Dense,
            n,
            latent_dim,
            generator_widths,
            discriminator_widths,
            generator_activation: Activation::Relu,
            discriminator_activation: Activation::LeakyRelu(0.2),
            batch_norm: false,
        }
    }

    /// DCGAN-style plan with two up/down-sampling stages.
    pub fn conv(n: usize, latent_dim: usize) -> Self {
        ArchitectureDescriptor {
            variant: Variant::Conv,
            n,
            latent_dim,
            generator_widths: vec![64, 32],
            discriminator_widths: vec![32, 64],
            generator_activation: Activation::Relu,
            discriminator_activation: Activation::LeakyRelu(0.2),
            batch_norm: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(GanError::Architecture(m));
        if self.n < 2 {
            return bad(format!("n must be >= 2, got {}", self.n));
        }
        if self.latent_dim == 0 {
            return bad("latent_dim must be >= 1".into());
        }
        if self.generator_widths.iter().chain(&self.discriminator_widths).any(|&w| w == 0) {
            return bad("layer widths must be positive".into());
        }
        if self.variant == Variant::Conv {
            if self.generator_widths.is_empty() || self.discriminator_widths.is_empty() {
                return bad("conv variant needs at least one stage per network".into());
            }
            let stages = self.generator_widths.len().max(self.discriminator_widths.len());
            let step = 1usize << stages;
            if self.n < MIN_CONV_N || self.n % step != 0 {
                return bad(format!(
                    "conv variant needs n >= {MIN_CONV_N} and a multiple of {step}, got {}",
                    self.n
                ));
            }
        }
        Ok(())
    }

    pub fn generator_layers(&self) -> Vec<Layer> {
        let act = Layer::Activation(self.generator_activation);
        let mut layers = Vec::new();
        match self.variant {
            Variant::Dense => {
                let mut prev = self.latent_dim;
                for &w in &self.generator_widths {
                    layers.push(Layer::Dense { inputs: prev, outputs: w });
                    if self.batch_norm {
                        layers.push(Layer::BatchNorm { channels: w, spatial: 1 });
                    }
                    layers.push(act);
                    prev = w;
                }
                layers.push(Layer::Dense { inputs: prev, outputs: self.n * self.n });
            }
            Variant::Conv => {
                let stages = self.generator_widths.len();
                let mut size = self.n >> stages;
                let first = self.generator_widths[0];
                layers.push(Layer::Dense { inputs: self.latent_dim, outputs: first * size * size });
                if self.batch_norm {
                    layers.push(Layer::BatchNorm { channels: first, spatial: size * size });
                }
                layers.push(act);
                for (k, &c) in self.generator_widths.iter().enumerate() {
                    let out = self.generator_widths.get(k + 1).copied().unwrap_or(1);
                    layers.push(Layer::ConvTranspose { in_channels: c, out_channels: out, size });
                    size *= 2;
                    if k + 1 < stages {
                        if self.batch_norm {
                            layers.push(Layer::BatchNorm { channels: out, spatial: size * size });
                        }
                        layers.push(act);
                    }
                }
            }
        }
        layers.push(Layer::Activation(Activation::Tanh));
        layers
    }

    /// Ends in a single logit; the sigmoid is applied by the caller.
    pub fn discriminator_layers(&self) -> Vec<Layer> {
        let act = Layer::Activation(self.discriminator_activation);
        let mut layers = Vec::new();
        match self.variant {
            Variant::Dense => {
                let mut prev = self.n * self.n;
                for &w in &self.discriminator_widths {
                    layers.push(Layer::Dense { inputs: prev, outputs: w });
                    layers.push(act);
                    prev = w;
                }
                layers.push(Layer::Dense { inputs: prev, outputs: 1 });
            }
            Variant::Conv => {
                let (mut channels, mut size) = (1, self.n);
                for &c in &self.discriminator_widths {
                    layers.push(Layer::Conv { in_channels: channels, out_channels: c, size });
                    layers.push(act);
                    channels = c;
                    size /= 2;
                }
                layers.push(Layer::Dense { inputs: channels * size * size, outputs: 1 });
            }
        }
        layers
    }

    pub fn generator(&self) -> Result<Network> {
        self.validate()?;
        let net = Network::new(self.latent_dim, self.generator_layers())?;
        debug_assert_eq!(net.output_size(), self.n * self.n);
        Ok(net)
    }

    pub fn discriminator(&self) -> Result<Network> {
        self.validate()?;
        let net = Network::new(self.n * self.n, self.discriminator_layers())?;
        debug_assert_eq!(net.output_size(), 1);
        Ok(net)
    }

    pub fn to_lines(&self) -> String {
        let join = |w: &[usize]| w.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        format!(
            "variant={}\nn={}\nlatent_dim={}\ngenerator_widths={}\ndiscriminator_widths={}\n\
             generator_activation={}\ndiscriminator_activation={}\nbatch_norm={}\n",
            self.variant,
            self.n,
            self.latent_dim,
            join(&self.generator_widths),
            join(&self.discriminator_widths),
            self.generator_activation,
            self.discriminator_activation,
            self.batch_norm
        )
    }

    pub fn from_fields(fields: &HashMap<String, String>) -> Result<Self> {
        let get = |k: &str| {
            fields
                .get(k)
                .map(String::as_str)
                .ok_or_else(|| GanError::Architecture(format!("missing field {k}")))
        };
        let num = |k: &str| -> Result<usize> {
            get(k)?.parse().map_err(|_| GanError::Architecture(format!("bad integer in {k}")))
        };
        let widths = |k: &str| -> Result<Vec<usize>> {
            let s = get(k)?;
            if s.is_empty() {
                return Ok(Vec::new());
            }
            s.split(',')
                .map(|w| w.parse().map_err(|_| GanError::Architecture(format!("bad width in {k}"))))
                .collect()
        };
        let arch = ArchitectureDescriptor {
            variant: get("variant")?.parse()?,
            n: num("n")?,
            latent_dim: num("latent_dim")?,
            generator_widths: widths("generator_widths")?,
            discriminator_widths: widths("discriminator_widths")?,
            generator_activation: get("generator_activation")?.parse()?,
            discriminator_activation: get("discriminator_activation")?.parse()?,
            batch_norm: get("batch_norm")?
                .parse()
                .map_err(|_| GanError::Architecture("bad batch_norm flag".into()))?,
        };
        arch.validate()?;
        Ok(arch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fields(text: &str) -> HashMap<String, String> {
        text.lines()
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    #[test]
    fn descriptor_text_round_trip() {
        for arch in [ArchitectureDescriptor::dense(3, 8, vec![32, 32], vec![16]), ArchitectureDescriptor::conv(32, 16)] {
            assert_eq!(ArchitectureDescriptor::from_fields(&fields(&arch.to_lines())).unwrap(), arch);
        }
    }

    #[test]
    fn conv_shapes() {
        let arch = ArchitectureDescriptor::conv(32, 16);
        assert_eq!(arch.generator().unwrap().output_size(), 32 * 32);
        assert_eq!(arch.discriminator().unwrap().output_size(), 1);
    }

    #[test]
    fn conv_rejects_small_or_misaligned_sides() {
        for n in [20, 28, 34] {
            assert!(ArchitectureDescriptor::conv(n, 8).validate().is_err(), "n={n}");
        }
        assert!(ArchitectureDescriptor::conv(36, 8).validate().is_ok());
    }
}
