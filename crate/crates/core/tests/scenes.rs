use kpca_cd::change::cva_baseline;
use kpca_cd::raster::zscore_normalize;
use kpca_cd::segment::{binary_map, multiclass_map};
use kpca_cd::{evaluate, generate, Mode, Segmentation, SynthSpec};

#[test]
fn planted_magnitude_is_recovered() {
    let mut spec = SynthSpec::with_layout(64, 64, 4, 2, 11);
    spec.overexposure_fraction = 0.0;
    let scene = generate(&spec).unwrap();
    let field = cva_baseline(
        &zscore_normalize(&scene.t1).unwrap(),
        &zscore_normalize(&scene.t2).unwrap(),
    )
    .unwrap();
    for method in [Segmentation::Otsu, Segmentation::Kmeans] {
        let map = binary_map(&field.rho, 64, 64, method, 0).unwrap();
        let (mut agree, mut defined) = (0, 0);
        for (&r, &p) in scene.reference.labels.iter().zip(&map.labels) {
            if r >= 0 {
                defined += 1;
                agree += usize::from((r > 0) == (p > 0));
            }
        }
        let rate = agree as f64 / defined as f64;
        assert!(rate >= 0.99, "{method:?}: {rate}");
    }
}

#[test]
fn two_directions_become_two_classes() {
    let mut spec = SynthSpec::with_layout(64, 64, 4, 2, 12);
    // raw-band directions near 0.3 and 2.4
    spec.shifts = vec![vec![-0.25, -0.2, -0.25, -0.1], vec![0.25, 0.2, 0.15, -0.05]];
    spec.gain = vec![1.0; 4];
    spec.offset = vec![0.0; 4];
    spec.overexposure_fraction = 0.0;
    let scene = generate(&spec).unwrap();
    let field = cva_baseline(&scene.t1, &scene.t2).unwrap();
    let map = multiclass_map(&field, 2, Segmentation::Otsu, 0).unwrap();
    let m = evaluate(&map, &scene.reference, Mode::Multiclass, true).unwrap();
    for (k, acc) in m.per_class_accuracy.iter().enumerate().skip(1) {
        assert!(acc.unwrap() >= 0.95, "class {k}: {acc:?}");
    }
}
