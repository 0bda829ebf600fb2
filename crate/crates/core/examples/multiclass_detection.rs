//! Separate change types by clustering the weighted feature direction of the
//! changed pixels.

use kpca_cd::{detect, generate, Mode, RunConfig, SynthSpec};

fn main() -> kpca_cd::Result<()> {
    let scene = generate(&SynthSpec::with_layout(96, 96, 4, 3, 3))?;
    let mut cfg = RunConfig::new("t1", "t2");
    cfg.depth = 1;
    cfg.mode = Mode::Multiclass;
    cfg.k_changes = 3;
    cfg.align = true;

    let det = detect(&cfg, &scene.t1, &scene.t2, Some(&scene.reference))?;

    // mean direction of each predicted class
    let mut sums = vec![(0.0, 0usize); cfg.k_changes + 1];
    for (&l, &t) in det.map.labels.iter().zip(&det.polar.theta) {
        sums[l as usize].0 += t;
        sums[l as usize].1 += 1;
    }
    for (k, (s, c)) in sums.iter().enumerate().skip(1) {
        println!("class {k}: {c} pixels, mean theta {:.3}", s / *c as f64);
    }
    let m = det.metrics.unwrap();
    println!("kappa {:.4} oa {:.4} aligned {}", m.kappa, m.oa, m.aligned);
    for (k, a) in m.per_class_accuracy.iter().enumerate() {
        if let Some(a) = a {
            println!("  label {k}: accuracy {a:.4}");
        }
    }
    Ok(())
}
