//! Weight-shared (siamese) stack of KPCA convolution layers.
//!
//! Both temporal images go through the same fitted layers. Each layer is fit
//! on patches pooled from both current feature maps at freshly sampled pixel
//! positions, then both maps are projected to produce the next layer's input.
//! Spatial size is preserved by reflect padding.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelConfig;
use crate::kpca::{fit, KpcaModel};
use crate::raster::patches::{check_window, fill_patch, pool_pairs};
use crate::raster::{patches_at, sample_positions, Raster};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerConfig {
    /// Odd window side `w`.
    pub window: usize,
    /// Number of retained components `p`.
    pub components: usize,
    pub kernel: KernelConfig,
    /// Number of sampled pixel positions `n` (each contributes two patches).
    pub samples: usize,
}

impl LayerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "layer window must be odd and at least 3, got {}",
                self.window
            )));
        }
        if self.components == 0 {
            return Err(Error::Config("layer needs at least one component".into()));
        }
        if self.samples < self.components {
            return Err(Error::Config(format!(
                "samples ({}) must be at least components ({})",
                self.samples, self.components
            )));
        }
        self.kernel.validate()
    }
}

impl Default for LayerConfig {
    fn default() -> Self {
        Self {
            window: 5,
            components: 8,
            kernel: KernelConfig::rbf(),
            samples: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub config: LayerConfig,
    pub model: KpcaModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiameseNet {
    pub layers: Vec<Layer>,
    pub seed: u64,
    pub input_channels: usize,
}

/// Applies one fitted layer to every pixel of `input`.
pub fn convolve(model: &KpcaModel, input: &Raster, window: usize) -> Result<Raster> {
    check_window(input, window, window)?;
    model.check_patch_dim(window * window * input.channels())?;
    let (h, w) = (input.height(), input.width());
    let k = model.components();
    let rows: Vec<Vec<f64>> = (0..h)
        .into_par_iter()
        .map_init(
            || (vec![0.0; model.patch_dim()], model.scratch()),
            |(patch, scratch), row| {
                let mut out = vec![0.0; w * k];
                for (col, feat) in out.chunks_exact_mut(k).enumerate() {
                    fill_patch(input, window, window, row, col, patch);
                    model.project_into(patch, scratch, feat);
                }
                out
            },
        )
        .collect();
    Raster::from_pixels(h, w, k, &rows.concat())
}

fn check_configs(configs: &[LayerConfig]) -> Result<()> {
    configs.iter().try_for_each(LayerConfig::validate)
}

/// Layer-wise training; also returns both streams' final feature maps.
pub fn train_network_with_features(
    t1: &Raster,
    t2: &Raster,
    configs: &[LayerConfig],
    seed: u64,
) -> Result<(SiameseNet, Raster, Raster)> {
    if !t1.same_shape(t2) {
        return Err(Error::Shape(format!(
            "temporal rasters differ: {:?} vs {:?}",
            t1.shape(),
            t2.shape()
        )));
    }
    check_configs(configs)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut f1, mut f2) = (t1.clone(), t2.clone());
    let mut layers = Vec::with_capacity(configs.len());
    for cfg in configs {
        let positions = sample_positions(f1.pixels(), cfg.samples, &mut rng)?;
        let p1 = patches_at(&f1, cfg.window, cfg.window, &positions)?;
        let p2 = patches_at(&f2, cfg.window, cfg.window, &positions)?;
        let idx: Vec<usize> = (0..positions.len()).collect();
        let train = pool_pairs(&p1, &p2, &idx);
        let kernel = cfg.kernel.resolve(&train)?;
        let model = fit(&train, &kernel, cfg.components)?;
        let (n1, n2) = rayon::join(
            || convolve(&model, &f1, cfg.window),
            || convolve(&model, &f2, cfg.window),
        );
        f1 = n1?;
        f2 = n2?;
        layers.push(Layer { config: *cfg, model });
    }
    let net = SiameseNet {
        layers,
        seed,
        input_channels: t1.channels(),
    };
    Ok((net, f1, f2))
}

pub fn train_network(t1: &Raster, t2: &Raster, configs: &[LayerConfig], seed: u64) -> Result<SiameseNet> {
    train_network_with_features(t1, t2, configs, seed).map(|(net, _, _)| net)
}

impl SiameseNet {
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn output_channels(&self) -> usize {
        self.layers
            .last()
            .map_or(self.input_channels, |l| l.model.components())
    }

    /// Eigenvalues paired with the output channels; unit weights when the
    /// network has no layers.
    pub fn output_weights(&self) -> Vec<f64> {
        match self.layers.last() {
            Some(l) => l.model.eigenvalues().to_vec(),
            None => vec![1.0; self.input_channels],
        }
    }

    /// Runs one image through every layer.
    pub fn forward(&self, input: &Raster) -> Result<Raster> {
        if input.channels() != self.input_channels {
            return Err(Error::Shape(format!(
                "network expects {} input bands, got {}",
                self.input_channels,
                input.channels()
            )));
        }
        let mut f = input.clone();
        for layer in &self.layers {
            f = convolve(&layer.model, &f, layer.config.window)?;
        }
        Ok(f)
    }
}

pub fn forward(net: &SiameseNet, input: &Raster) -> Result<Raster> {
    net.forward(input)
}

#[derive(Debug, Serialize, Deserialize)]
struct LayerEntry {
    window: usize,
    components: usize,
    samples: usize,
    kernel: KernelConfig,
    model: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct NetManifest {
    seed: u64,
    input_channels: usize,
    layers: Vec<LayerEntry>,
}

impl SiameseNet {
    /// Writes `net.json` plus `layer_<i>.json` for each layer into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut entries = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let name = format!("layer_{}.json", i + 1);
            layer.model.save(&dir.join(&name))?;
            entries.push(LayerEntry {
                window: layer.config.window,
                components: layer.config.components,
                samples: layer.config.samples,
                kernel: layer.config.kernel,
                model: name,
            });
        }
        let manifest = NetManifest {
            seed: self.seed,
            input_channels: self.input_channels,
            layers: entries,
        };
        let path = dir.join("net.json");
        fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("net.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: NetManifest = serde_json::from_str(&text)?;
        let mut layers = Vec::with_capacity(manifest.layers.len());
        for entry in manifest.layers {
            let model = KpcaModel::load(&dir.join(&entry.model))?;
            layers.push(Layer {
                config: LayerConfig {
                    window: entry.window,
                    components: entry.components,
                    kernel: entry.kernel,
                    samples: entry.samples,
                },
                model,
            });
        }
        Ok(Self {
            layers,
            seed: manifest.seed,
            input_channels: manifest.input_channels,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn textured(h: usize, w: usize, c: usize, phase: f64) -> Raster {
        let data = (0..h * w * c)
            .map(|i| ((i as f64) * 0.37 + phase).sin() + ((i / w) as f64 * 0.21).cos())
            .collect();
        Raster::new(h, w, c, data).unwrap()
    }

    fn linear_layer(p: usize, n: usize) -> LayerConfig {
        LayerConfig {
            window: 3,
            components: p,
            kernel: KernelConfig::linear(),
            samples: n,
        }
    }

    #[test]
    fn identical_inputs_give_identical_features() {
        let img = textured(8, 9, 2, 0.0);
        let (net, f1, f2) =
            train_network_with_features(&img, &img, &[linear_layer(1, 20)], 3).unwrap();
        assert_eq!(f1, f2);
        assert_eq!(f1.shape(), (8, 9, 1));
        assert_eq!(net.forward(&img).unwrap(), f1);
    }

    #[test]
    fn forward_reproduces_training_maps() {
        let a = textured(10, 10, 2, 0.0);
        let b = textured(10, 10, 2, 0.4);
        let cfg = LayerConfig {
            window: 3,
            components: 3,
            kernel: KernelConfig::rbf(),
            samples: 30,
        };
        let (net, f1, f2) = train_network_with_features(&a, &b, &[cfg, cfg], 11).unwrap();
        assert_eq!(net.forward(&a).unwrap(), f1);
        assert_eq!(net.forward(&b).unwrap(), f2);
        assert_eq!(net.output_channels(), 3);
    }

    #[test]
    fn constant_image_gives_constant_features() {
        let a = textured(7, 7, 1, 0.0);
        let b = textured(7, 7, 1, 1.0);
        let net = train_network(&a, &b, &[linear_layer(2, 15)], 5).unwrap();
        let flat = Raster::new(7, 7, 1, vec![0.25; 49]).unwrap();
        let f = net.forward(&flat).unwrap();
        for c in 0..f.channels() {
            let band = f.band(c);
            assert!(band.iter().all(|&v| (v - band[0]).abs() < 1e-12));
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let a = textured(6, 6, 1, 0.0);
        let b = textured(6, 5, 1, 0.0);
        assert!(train_network(&a, &b, &[linear_layer(1, 10)], 0).is_err());
        let even = LayerConfig { window: 4, ..linear_layer(1, 10) };
        assert!(matches!(train_network(&a, &a, &[even], 0), Err(Error::Config(_))));
        let net = train_network(&a, &a, &[linear_layer(1, 10)], 0).unwrap();
        assert!(net.forward(&textured(6, 6, 2, 0.0)).is_err());
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let a = textured(6, 6, 2, 0.0);
        let b = textured(6, 6, 2, 0.9);
        let net = train_network(&a, &b, &[linear_layer(2, 12), linear_layer(1, 12)], 8).unwrap();
        net.save(dir.path()).unwrap();
        assert_eq!(SiameseNet::load(dir.path()).unwrap(), net);
    }

    #[test]
    fn empty_network_is_identity() {
        let a = textured(4, 4, 3, 0.0);
        let net = train_network(&a, &a, &[], 0).unwrap();
        assert_eq!(net.forward(&a).unwrap(), a);
        assert_eq!(net.output_weights(), vec![1.0; 3]);
    }
}
