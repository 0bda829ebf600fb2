//! Fit one kernel-PCA layer on pooled patches from both dates and look at the
//! resulting spectrum and feature maps.

use kpca_cd::kpca::{fit, pca_fit, pca_project};
use kpca_cd::network::convolve;
use kpca_cd::raster::{extract_patches, sample_training_patches, zscore_normalize};
use kpca_cd::{generate, KernelConfig, KernelSpec, SynthSpec};

fn main() -> kpca_cd::Result<()> {
    let scene = generate(&SynthSpec::with_layout(64, 64, 4, 3, 1))?;
    let t1 = zscore_normalize(&scene.t1)?;
    let t2 = zscore_normalize(&scene.t2)?;

    let (w, n, p) = (5, 200, 8);
    let train = sample_training_patches(&extract_patches(&t1, w, w)?, &extract_patches(&t2, w, w)?, n, 42)?;
    println!("{} training patches of dimension {}", train.count(), train.dim());

    let kernel = KernelConfig::rbf().resolve(&train)?;
    println!("kernel {kernel:?}");
    let model = fit(&train, &kernel, p)?;
    for (j, l) in model.eigenvalues().iter().enumerate() {
        println!("component {j}: lambda {l:.5}");
    }

    let features = convolve(&model, &t1, w)?;
    println!("feature map {:?}", features.shape());

    // with a linear kernel the projection is ordinary PCA
    let linear = fit(&train, &KernelSpec::Linear, 3)?;
    let bank = pca_fit(&train, 3)?;
    let a = linear.project(&train)?;
    let b = pca_project(&bank, &train)?;
    for j in 0..3 {
        let dot: f64 = a.component(j).iter().zip(b.component(j)).map(|(x, y)| x * y).sum();
        let s = dot.signum();
        let dev = a.component(j).iter().zip(b.component(j)).map(|(x, y)| (x - s * y).abs()).fold(0.0, f64::max);
        println!("linear component {j} vs PCA: max deviation {dev:.2e}");
    }
    Ok(())
}
