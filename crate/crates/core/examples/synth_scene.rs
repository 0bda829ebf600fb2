//! Generate a planted-change scene and write it to disk.
//!
//! cargo run --example synth_scene -- out/scene 7

use std::path::PathBuf;

use kpca_cd::pipeline::run_synth;
use kpca_cd::SynthSpec;

fn main() -> kpca_cd::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "scene".into()));
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);

    let spec = SynthSpec::with_layout(96, 96, 4, 3, seed);
    let scene = run_synth(&spec, &out)?;

    let r = &scene.reference;
    let mut counts = vec![0usize; r.classes as usize + 1];
    for &l in r.labels.iter().filter(|&&l| l >= 0) {
        counts[l as usize] += 1;
    }
    println!("{}x{}x{} scene written to {}", spec.height, spec.width, spec.bands, out.display());
    println!("defined pixels {}, per label {:?}", r.defined(), counts);
    println!("over-exposed pixels {}", scene.overexposed.iter().filter(|&&o| o).count());
    for (k, s) in spec.shifts.iter().enumerate() {
        println!("class {} shift {:?}", k + 1, s);
    }
    println!("run: kpca-cd detect --config {}/config.json --out <dir>", out.display());
    Ok(())
}
