//! Accuracy assessment of label maps, including class alignment for
//! unsupervised multi-class output.

use kpca_cd::metrics::{binary_metrics, class_alignment};
use kpca_cd::{evaluate, ChangeMap, Mode, ReferenceMap};

fn main() -> kpca_cd::Result<()> {
    // 30 changed reference pixels: 20 found, 10 missed, 10 false alarms
    let reference = ReferenceMap::new(10, 10, (0..100).map(|i| i32::from(i < 30)).collect(), 1)?;
    let pred = ChangeMap::new(10, 10, (0..100).map(|i| u32::from(i < 20 || (30..40).contains(&i))).collect(), 1)?;
    let m = binary_metrics(&pred, &reference)?;
    println!("binary: oa {:.3} pe {:.3} kappa {:.4}", m.oa, m.pe, m.kappa);
    println!("{}", m.to_json()?);

    // cluster ids 1 and 2 came out swapped; the first row is undefined
    let truth: Vec<i32> = (0..64).map(|i| if i < 8 { -1 } else { i % 3 }).collect();
    let reference = ReferenceMap::new(8, 8, truth.clone(), 2)?;
    let swapped: Vec<u32> = truth.iter().map(|&l| [0, 2, 1][l.max(0) as usize]).collect();
    let pred = ChangeMap::new(8, 8, swapped, 2)?;
    let raw = evaluate(&pred, &reference, Mode::Multiclass, false)?;
    let aligned = evaluate(&pred, &reference, Mode::Multiclass, true)?;
    let (_, mapping) = class_alignment(&pred, &reference)?;
    println!("multi-class: kappa {:.4} raw, {:.4} after relabelling {:?}", raw.kappa, aligned.kappa, mapping);
    Ok(())
}
