//! Unsupervised change detection for co-registered multi-band image pairs.
//!
//! Both acquisitions pass through a weight-shared stack of kernel-PCA
//! convolution layers fit without labels. The per-pixel feature difference is
//! mapped to a magnitude and an eigenvalue-weighted direction: the magnitude is
//! thresholded to find changed pixels and the direction separates change types.
//!
//! ```no_run
//! use kpca_cd::{detect, generate, RunConfig, SynthSpec};
//!
//! let scene = generate(&SynthSpec::default())?;
//! let cfg = RunConfig::new("t1.bsq", "t2.bsq");
//! let det = detect(&cfg, &scene.t1, &scene.t2, Some(&scene.reference))?;
//! println!("kappa {:.3}", det.metrics.unwrap().kappa);
//! # Ok::<(), kpca_cd::Error>(())
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod change;
pub mod config;
pub mod error;
pub mod kernels;
pub mod kpca;
pub mod labelmap;
pub mod linalg;
pub mod metrics;
pub mod network;
pub mod pipeline;
pub mod raster;
pub mod segment;
pub mod synth;

pub use change::{DifferenceMap, PolarField};
pub use config::{Mode, RunConfig, Variant};
pub use error::{Error, Result};
pub use kernels::{KernelConfig, KernelKind, KernelSpec};
pub use kpca::KpcaModel;
pub use metrics::{MetricsReport, ReferenceMap};
pub use network::{LayerConfig, SiameseNet};
pub use pipeline::{baseline, detect, evaluate, Detection};
pub use raster::{PatchSet, Raster};
pub use segment::{ChangeMap, Segmentation};
pub use synth::{generate, SynthScene, SynthSpec};
