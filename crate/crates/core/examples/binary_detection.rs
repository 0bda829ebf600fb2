//! Full pipeline with the default settings: train the siamese network,
//! threshold the feature magnitude and score against the planted truth.
//!
//! cargo run --example binary_detection -- out/binary

use std::path::PathBuf;

use kpca_cd::pipeline::{run_detect, run_synth};
use kpca_cd::{RunConfig, SynthSpec};

fn main() -> kpca_cd::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "binary".into()));
    run_synth(&SynthSpec::with_layout(96, 96, 4, 3, 2), &out.join("scene"))?;
    let cfg = RunConfig::load(&out.join("scene/config.json"))?;
    println!("n={} p={} w={} L={} kernel {:?}", cfg.n, cfg.p, cfg.w, cfg.depth, cfg.kernel.kind);

    let det = run_detect(&cfg, &out.join("result"))?;
    let net = det.net.as_ref().unwrap();
    for (i, layer) in net.layers.iter().enumerate() {
        println!("layer {}: {:?}", i + 1, layer.model.kernel());
    }
    println!("changed pixels {}", det.map.changed());
    let m = det.metrics.unwrap();
    println!("kappa {:.4} oa {:.4} (tp {} fp {} fn {} tn {})", m.kappa, m.oa, m.tp, m.fp, m.fn_, m.tn);
    println!("outputs in {}", out.join("result").display());
    Ok(())
}
