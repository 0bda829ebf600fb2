//! End-to-end runs: in-memory entry points plus file-producing commands.
//!
//! Every `run_*` function computes all results before creating the output
//! directory, so a failed run leaves nothing behind.

use std::fs;
use std::path::{Path, PathBuf};

use crate::change::{
    difference, direction_m3, direction_m4, polar, weighted_feature_direction, DifferenceMap,
    PolarField,
};
use crate::config::{Mode, RunConfig, Variant};
use crate::error::{Error, Result, StageExt};
use crate::labelmap::{read_change_map, read_reference, write_change_map, write_reference};
use crate::metrics::{binary_metrics, class_alignment, multiclass_metrics, MetricsReport, ReferenceMap};
use crate::network::{train_network_with_features, SiameseNet};
use crate::raster::{load_raster, save_raster, zscore_normalize, Raster};
use crate::segment::{binary_map, multiclass_map, multiclass_map_m1_m2, ChangeMap, Segmentation};
use crate::synth::{generate, SynthScene, SynthSpec};

/// Everything a detection run produces.
#[derive(Debug, Clone)]
pub struct Detection {
    /// `None` for the network-free baseline.
    pub net: Option<SiameseNet>,
    pub difference: DifferenceMap,
    pub polar: PolarField,
    pub map: ChangeMap,
    pub metrics: Option<MetricsReport>,
}

/// Options shared by detection and baseline beyond the network hyper-parameters.
#[derive(Debug, Clone, Copy)]
struct Decision {
    mode: Mode,
    variant: Variant,
    segmentation: Segmentation,
    k_changes: usize,
    align: bool,
    seed: u64,
}

impl From<&RunConfig> for Decision {
    fn from(c: &RunConfig) -> Self {
        Self {
            mode: c.mode,
            variant: c.variant,
            segmentation: c.segmentation,
            k_changes: c.k_changes,
            align: c.align,
            seed: c.seed,
        }
    }
}

fn normalize_pair(t1: &Raster, t2: &Raster) -> Result<(Raster, Raster)> {
    if !t1.same_shape(t2) {
        return Err(Error::Shape(format!(
            "time-1 is {:?} but time-2 is {:?}",
            t1.shape(),
            t2.shape()
        )));
    }
    Ok((zscore_normalize(t1)?, zscore_normalize(t2)?))
}

fn direction(d: &DifferenceMap, variant: Variant) -> Result<Vec<f64>> {
    match variant {
        Variant::Wfd | Variant::M1 | Variant::M2 => Ok(weighted_feature_direction(d)),
        Variant::M3 => direction_m3(d),
        Variant::M4 => Ok(direction_m4(d)),
    }
}

/// Polar mapping, segmentation and (with a reference) scoring of an existing
/// difference map, as configured by `cfg`'s mode, variant and segmentation.
pub fn classify(
    d: &DifferenceMap,
    cfg: &RunConfig,
    reference: Option<&ReferenceMap>,
) -> Result<(PolarField, ChangeMap, Option<MetricsReport>)> {
    decide(d, cfg.into(), reference)
}

fn decide(d: &DifferenceMap, opts: Decision, reference: Option<&ReferenceMap>) -> Result<(PolarField, ChangeMap, Option<MetricsReport>)> {
    let theta = direction(d, opts.variant).stage("direction")?;
    let field = polar(d, theta);
    let map = match (opts.mode, opts.variant) {
        (Mode::Binary, _) => binary_map(&field.rho, field.height, field.width, opts.segmentation, opts.seed),
        (Mode::Multiclass, Variant::M1) => multiclass_map_m1_m2(d, opts.k_changes + 1, false, opts.seed),
        (Mode::Multiclass, Variant::M2) => multiclass_map_m1_m2(d, opts.k_changes + 1, true, opts.seed),
        (Mode::Multiclass, _) => multiclass_map(&field, opts.k_changes, opts.segmentation, opts.seed),
    }
    .stage("segment")?;
    let metrics = reference
        .map(|r| evaluate(&map, r, opts.mode, opts.align))
        .transpose()
        .stage("evaluate")?;
    Ok((field, map, metrics))
}

/// Scores a map against a reference in the given mode.
pub fn evaluate(pred: &ChangeMap, reference: &ReferenceMap, mode: Mode, align: bool) -> Result<MetricsReport> {
    match mode {
        Mode::Binary => {
            let binary = ChangeMap::new(
                pred.height,
                pred.width,
                pred.labels.iter().map(|&l| u32::from(l > 0)).collect(),
                1,
            )?;
            binary_metrics(&binary, &reference.to_binary())
        }
        Mode::Multiclass if align => {
            let (aligned, _) = class_alignment(pred, reference)?;
            let mut report = multiclass_metrics(&aligned, reference)?;
            report.aligned = true;
            Ok(report)
        }
        Mode::Multiclass => multiclass_metrics(pred, reference),
    }
}

/// Full pipeline on in-memory rasters: normalize, train the siamese network,
/// difference the features and segment the polar field.
pub fn detect(cfg: &RunConfig, t1: &Raster, t2: &Raster, reference: Option<&ReferenceMap>) -> Result<Detection> {
    cfg.validate()?;
    let (n1, n2) = normalize_pair(t1, t2).stage("normalize")?;
    let (net, f1, f2) = train_network_with_features(&n1, &n2, &cfg.layer_configs(), cfg.seed).stage("train")?;
    let d = difference(&f1, &f2, &net.output_weights()).stage("difference")?;
    let (field, map, metrics) = decide(&d, cfg.into(), reference)?;
    Ok(Detection {
        net: Some(net),
        difference: d,
        polar: field,
        map,
        metrics,
    })
}

/// Change vector analysis on the normalized raw bands, no network.
pub fn baseline(cfg: &RunConfig, t1: &Raster, t2: &Raster, reference: Option<&ReferenceMap>) -> Result<Detection> {
    cfg.validate()?;
    let (n1, n2) = normalize_pair(t1, t2).stage("normalize")?;
    let d = difference(&n1, &n2, &vec![1.0; n1.channels()]).stage("difference")?;
    let (field, map, metrics) = decide(&d, cfg.into(), reference)?;
    Ok(Detection {
        net: None,
        difference: d,
        polar: field,
        map,
        metrics,
    })
}

struct Inputs {
    t1: Raster,
    t2: Raster,
    reference: Option<ReferenceMap>,
}

fn load_inputs(cfg: &RunConfig) -> Result<Inputs> {
    cfg.validate()?;
    let t1 = load_raster(&cfg.t1).stage("load")?;
    let t2 = load_raster(&cfg.t2).stage("load")?;
    let reference = cfg
        .reference
        .as_deref()
        .map(|p| read_reference(p, cfg.reference_legend.as_deref()))
        .transpose()
        .stage("load")?;
    if let Some(r) = &reference {
        if (r.height, r.width) != (t1.height(), t1.width()) {
            return Err(Error::Shape(format!(
                "reference is {}x{} but rasters are {}x{}",
                r.height,
                r.width,
                t1.height(),
                t1.width()
            )))
            .stage("load");
        }
    }
    Ok(Inputs { t1, t2, reference })
}

fn create_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}

fn write_detection(det: &Detection, out: &Path) -> Result<()> {
    create_dir(out)?;
    write_change_map(&det.map, &out.join("change_map.pgm"), &out.join("legend.json"))?;
    det.polar.write_csv(&out.join("polar.csv"))?;
    if let Some(m) = &det.metrics {
        m.write(out)?;
    }
    if let Some(net) = &det.net {
        net.save(&out.join("net"))?;
    }
    Ok(())
}

/// Loads the configured inputs, runs the full pipeline and writes
/// `change_map.pgm`, `legend.json`, `polar.csv`, `net/` and, with a
/// reference, `metrics.json` and `metrics.csv`.
pub fn run_detect(cfg: &RunConfig, out: &Path) -> Result<Detection> {
    let inputs = load_inputs(cfg)?;
    let det = detect(cfg, &inputs.t1, &inputs.t2, inputs.reference.as_ref())?;
    write_detection(&det, out).stage("write")?;
    Ok(det)
}

/// Same outputs as [`run_detect`] except `net/`.
pub fn run_baseline(cfg: &RunConfig, out: &Path) -> Result<Detection> {
    let inputs = load_inputs(cfg)?;
    let det = baseline(cfg, &inputs.t1, &inputs.t2, inputs.reference.as_ref())?;
    write_detection(&det, out).stage("write")?;
    Ok(det)
}

/// Generates a scene and writes `t1`/`t2` rasters, `reference.pgm` with its
/// legend, the spec used, and a ready-to-run `config.json`.
pub fn run_synth(spec: &SynthSpec, out: &Path) -> Result<SynthScene> {
    let scene = generate(spec).stage("synth")?;
    let write = || -> Result<()> {
        create_dir(out)?;
        save_raster(&scene.t1, &out.join("t1"))?;
        save_raster(&scene.t2, &out.join("t2"))?;
        write_reference(&scene.reference, &out.join("reference.pgm"), &out.join("reference_legend.json"))?;
        let spec_path = out.join("synth.json");
        fs::write(&spec_path, serde_json::to_string_pretty(spec)?).map_err(|e| Error::io(&spec_path, e))?;
        let mut cfg = RunConfig::new("t1.bsq", "t2.bsq");
        cfg.reference = Some(PathBuf::from("reference.pgm"));
        cfg.reference_legend = Some(PathBuf::from("reference_legend.json"));
        cfg.k_changes = (spec.classes as usize).max(2);
        cfg.seed = spec.seed;
        let cfg_path = out.join("config.json");
        fs::write(&cfg_path, cfg.to_json()?).map_err(|e| Error::io(&cfg_path, e))
    };
    write().stage("write")?;
    Ok(scene)
}

/// Scores a saved change map against a saved reference and writes
/// `metrics.json` and `metrics.csv`.
pub fn run_eval(
    pred: &Path,
    pred_legend: Option<&Path>,
    reference: &Path,
    reference_legend: Option<&Path>,
    mode: Mode,
    align: bool,
    out: &Path,
) -> Result<MetricsReport> {
    let p = read_change_map(pred, pred_legend).stage("load")?;
    let r = read_reference(reference, reference_legend).stage("load")?;
    let report = evaluate(&p, &r, mode, align).stage("evaluate")?;
    let write = || -> Result<()> {
        create_dir(out)?;
        report.write(out)
    };
    write().stage("write")?;
    Ok(report)
}
