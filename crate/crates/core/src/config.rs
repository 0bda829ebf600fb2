//! Run configuration, read from a single JSON file.
//!
//! Hyper-parameters use their conventional short names: `n` sampled pixel
//! positions per layer, `p` components per layer, `w` window side and `L`
//! network depth. Relative paths resolve against the config file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelConfig;
use crate::network::LayerConfig;
use crate::segment::Segmentation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Binary,
    Multiclass,
}

/// How change classes are separated in multi-class mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Eigenvalue-weighted direction over all feature channels.
    #[default]
    Wfd,
    /// Joint k-means on raw difference vectors.
    M1,
    /// Joint k-means on eigenvalue-scaled difference vectors.
    M2,
    /// Direction of the two largest-eigenvalue channels.
    M3,
    /// Unweighted direction over all channels.
    M4,
}

fn default_n() -> usize {
    200
}
fn default_p() -> usize {
    8
}
fn default_w() -> usize {
    5
}
fn default_depth() -> usize {
    3
}
fn default_k() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub t1: PathBuf,
    pub t2: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_legend: Option<PathBuf>,
    #[serde(default = "KernelConfig::rbf")]
    pub kernel: KernelConfig,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_p")]
    pub p: usize,
    #[serde(default = "default_w")]
    pub w: usize,
    #[serde(rename = "L", default = "default_depth")]
    pub depth: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub segmentation: Segmentation,
    #[serde(default = "default_k")]
    pub k_changes: usize,
    #[serde(default)]
    pub variant: Variant,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub align: bool,
    /// Explicit per-layer settings; overrides `kernel`, `n`, `p`, `w`, `L`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layers: Option<Vec<LayerConfig>>,
}

impl RunConfig {
    /// Defaults for every hyper-parameter with the given inputs.
    pub fn new(t1: impl Into<PathBuf>, t2: impl Into<PathBuf>) -> Self {
        Self {
            t1: t1.into(),
            t2: t2.into(),
            reference: None,
            reference_legend: None,
            kernel: KernelConfig::rbf(),
            n: default_n(),
            p: default_p(),
            w: default_w(),
            depth: default_depth(),
            seed: 0,
            segmentation: Segmentation::Otsu,
            k_changes: default_k(),
            variant: Variant::Wfd,
            mode: Mode::Binary,
            align: false,
            layers: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut cfg.t1);
        fix(&mut cfg.t2);
        if let Some(p) = cfg.reference.as_mut() {
            fix(p);
        }
        if let Some(p) = cfg.reference_legend.as_mut() {
            fix(p);
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Per-layer settings: the explicit list, or one shared config repeated `L` times.
    pub fn layer_configs(&self) -> Vec<LayerConfig> {
        match &self.layers {
            Some(l) => l.clone(),
            None => vec![
                LayerConfig {
                    window: self.w,
                    components: self.p,
                    kernel: self.kernel,
                    samples: self.n,
                };
                self.depth
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for layer in self.layer_configs() {
            layer.validate()?;
        }
        if self.mode == Mode::Multiclass && self.k_changes < 2 {
            return Err(Error::Config(format!(
                "multi-class mode needs k_changes >= 2, got {}",
                self.k_changes
            )));
        }
        if self.align && self.mode == Mode::Multiclass && self.k_changes > 8 {
            return Err(Error::Config("alignment supports at most 8 change classes".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_settings() {
        let cfg = RunConfig::from_json(r#"{"t1":"a.bsq","t2":"b.bsq"}"#).unwrap();
        assert_eq!((cfg.n, cfg.p, cfg.w, cfg.depth), (200, 8, 5, 3));
        assert_eq!(cfg.kernel, KernelConfig::rbf());
        assert_eq!(cfg.layer_configs().len(), 3);
        cfg.validate().unwrap();
    }

    #[test]
    fn short_symbols_in_json() {
        let cfg = RunConfig::new("a", "b");
        let json = cfg.to_json().unwrap();
        for key in ["\"n\"", "\"p\"", "\"w\"", "\"L\""] {
            assert!(json.contains(key));
        }
        assert_eq!(RunConfig::from_json(&json).unwrap(), cfg);
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let cfg = RunConfig::from_json(r#"{"t1":"a","t2":"b","w":4}"#).unwrap();
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let cfg = RunConfig::from_json(r#"{"t1":"a","t2":"b","n":3,"p":8}"#).unwrap();
        assert!(cfg.validate().is_err());
        assert!(RunConfig::from_json(r#"{"t1":"a","t2":"b","bogus":1}"#).is_err());
        let cfg = RunConfig::from_json(r#"{"t1":"a","t2":"b","mode":"multiclass","k_changes":1}"#).unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn relative_paths_resolve_against_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.json");
        fs::write(&p, r#"{"t1":"x/a.bsq","t2":"/abs/b.bsq","reference":"r.pgm"}"#).unwrap();
        let cfg = RunConfig::load(&p).unwrap();
        assert_eq!(cfg.t1, dir.path().join("x/a.bsq"));
        assert_eq!(cfg.t2, PathBuf::from("/abs/b.bsq"));
        assert_eq!(cfg.reference, Some(dir.path().join("r.pgm")));
    }
}
