//! Otsu and two-means thresholds on a feature magnitude map.

use kpca_cd::change::{difference, feature_magnitude};
use kpca_cd::raster::zscore_normalize;
use kpca_cd::segment::{binary_map, otsu_threshold};
use kpca_cd::{evaluate, generate, Mode, Segmentation, SynthSpec};

fn main() -> kpca_cd::Result<()> {
    let scene = generate(&SynthSpec::with_layout(64, 64, 4, 2, 11))?;
    let t1 = zscore_normalize(&scene.t1)?;
    let t2 = zscore_normalize(&scene.t2)?;
    let d = difference(&t1, &t2, &vec![1.0; t1.channels()])?;
    let rho = feature_magnitude(&d);
    println!("otsu threshold {:.4}", otsu_threshold(&rho)?);
    for method in [Segmentation::Otsu, Segmentation::Kmeans] {
        let map = binary_map(&rho, d.height(), d.width(), method, 0)?;
        let m = evaluate(&map, &scene.reference, Mode::Binary, false)?;
        println!("{method:?}: {} changed, kappa {:.4}", map.changed(), m.kappa);
    }
    Ok(())
}
