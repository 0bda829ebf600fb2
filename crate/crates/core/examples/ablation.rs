//! Compare the direction mappings on the same trained features, plus change
//! vector analysis on the raw bands.

use kpca_cd::pipeline::classify;
use kpca_cd::{baseline, detect, generate, Mode, RunConfig, SynthSpec, Variant};

fn main() -> kpca_cd::Result<()> {
    let seeds = 0..3;
    let variants = [Variant::Wfd, Variant::M1, Variant::M2, Variant::M3, Variant::M4];
    println!("{:>6} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}", "scene", "wfd", "m1", "m2", "m3", "m4", "cva");
    for seed in seeds {
        let scene = generate(&SynthSpec::with_layout(96, 96, 4, 3, seed))?;
        let mut cfg = RunConfig::new("t1", "t2");
        cfg.seed = seed;
        cfg.depth = 1;
        cfg.mode = Mode::Multiclass;
        cfg.align = true;
        let det = detect(&cfg, &scene.t1, &scene.t2, None)?;
        let mut row = format!("{seed:>6}");
        for v in variants {
            cfg.variant = v;
            let (_, _, m) = classify(&det.difference, &cfg, Some(&scene.reference))?;
            row += &format!(" {:>8.4}", m.unwrap().kappa);
        }
        cfg.variant = Variant::Wfd;
        let cva = baseline(&cfg, &scene.t1, &scene.t2, Some(&scene.reference))?;
        row += &format!(" {:>8.4}", cva.metrics.unwrap().kappa);
        println!("{row}");
    }
    Ok(())
}
