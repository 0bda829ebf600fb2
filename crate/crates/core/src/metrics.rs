//! Accuracy assessment of change maps against reference maps.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segment::ChangeMap;

/// Largest class count accepted by [`class_alignment`].
pub const MAX_ALIGN_CLASSES: u32 = 8;

/// Reference labels: -1 undefined, 0 non-change, `1..=classes` change classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferenceMap {
    pub height: usize,
    pub width: usize,
    pub labels: Vec<i32>,
    pub classes: u32,
}

impl ReferenceMap {
    pub fn new(height: usize, width: usize, labels: Vec<i32>, classes: u32) -> Result<Self> {
        if labels.len() != height * width {
            return Err(Error::Shape(format!(
                "{height}x{width} reference needs {} labels, got {}",
                height * width,
                labels.len()
            )));
        }
        if let Some(&l) = labels.iter().find(|&&l| l < -1 || l > classes as i32) {
            return Err(Error::InvalidParameter(format!(
                "reference label {l} outside -1..={classes}"
            )));
        }
        Ok(Self {
            height,
            width,
            labels,
            classes,
        })
    }

    pub fn defined(&self) -> usize {
        self.labels.iter().filter(|&&l| l >= 0).count()
    }

    /// Collapses change classes into a single change label.
    pub fn to_binary(&self) -> ReferenceMap {
        ReferenceMap {
            height: self.height,
            width: self.width,
            labels: self.labels.iter().map(|&l| l.min(1)).collect(),
            classes: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mode: String,
    pub defined_pixels: u64,
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    /// Misclassified pixels; `fp + fn` for binary maps.
    pub oe: u64,
    pub oa: f64,
    pub pe: f64,
    pub kappa: f64,
    /// Set when chance agreement is 1 and kappa was reported as 0.
    pub kappa_degenerate: bool,
    /// Diagonal over row sum per reference class; `None` for absent classes.
    pub per_class_accuracy: Vec<Option<f64>>,
    /// Rows are reference classes, columns predicted classes.
    pub confusion: Vec<Vec<u64>>,
    pub aligned: bool,
}

fn check_shapes(pred: &ChangeMap, reference: &ReferenceMap) -> Result<()> {
    if (pred.height, pred.width) != (reference.height, reference.width) {
        return Err(Error::Shape(format!(
            "prediction is {}x{}, reference is {}x{}",
            pred.height, pred.width, reference.height, reference.width
        )));
    }
    Ok(())
}

fn confusion(pred: &ChangeMap, reference: &ReferenceMap, classes: usize) -> Result<Vec<Vec<u64>>> {
    let mut conf = vec![vec![0u64; classes + 1]; classes + 1];
    for (&p, &r) in pred.labels.iter().zip(&reference.labels) {
        if r < 0 {
            continue;
        }
        let (p, r) = (p as usize, r as usize);
        if p > classes || r > classes {
            return Err(Error::InvalidParameter(format!(
                "label pair ({p}, {r}) outside 0..={classes}"
            )));
        }
        conf[r][p] += 1;
    }
    Ok(conf)
}

fn report_from_confusion(conf: Vec<Vec<u64>>, mode: &str) -> Result<MetricsReport> {
    let k = conf.len();
    let n: u64 = conf.iter().flatten().sum();
    if n == 0 {
        return Err(Error::InvalidParameter("reference has no defined pixels".into()));
    }
    let nf = n as f64;
    let rows: Vec<u64> = conf.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<u64> = (0..k).map(|j| conf.iter().map(|r| r[j]).sum()).collect();
    let trace: u64 = (0..k).map(|i| conf[i][i]).sum();
    let oa = trace as f64 / nf;
    let pe = rows
        .iter()
        .zip(&cols)
        .map(|(&r, &c)| r as f64 * c as f64)
        .sum::<f64>()
        / (nf * nf);
    let (kappa, kappa_degenerate) = if pe >= 1.0 {
        (0.0, true)
    } else {
        ((oa - pe) / (1.0 - pe), false)
    };
    let per_class_accuracy = (0..k)
        .map(|i| (rows[i] > 0).then(|| conf[i][i] as f64 / rows[i] as f64))
        .collect();
    // change vs non-change collapse
    let tn = conf[0][0];
    let fp: u64 = conf[0][1..].iter().sum();
    let fn_: u64 = conf[1..].iter().map(|r| r[0]).sum();
    let tp: u64 = conf[1..].iter().map(|r| r[1..].iter().sum::<u64>()).sum();
    Ok(MetricsReport {
        mode: mode.into(),
        defined_pixels: n,
        tp,
        fp,
        tn,
        fn_,
        oe: n - trace,
        oa,
        pe,
        kappa,
        kappa_degenerate,
        per_class_accuracy,
        confusion: conf,
        aligned: false,
    })
}

/// Binary statistics over the defined reference pixels.
pub fn binary_metrics(pred: &ChangeMap, reference: &ReferenceMap) -> Result<MetricsReport> {
    check_shapes(pred, reference)?;
    if pred.classes != 1 || reference.classes > 1 {
        return Err(Error::InvalidParameter(format!(
            "binary metrics need binary maps (prediction has {} classes, reference {})",
            pred.classes, reference.classes
        )));
    }
    report_from_confusion(confusion(pred, reference, 1)?, "binary")
}

/// Full (K+1)-class confusion statistics.
pub fn multiclass_metrics(pred: &ChangeMap, reference: &ReferenceMap) -> Result<MetricsReport> {
    check_shapes(pred, reference)?;
    if pred.classes != reference.classes {
        return Err(Error::InvalidParameter(format!(
            "prediction has {} change classes, reference {}",
            pred.classes, reference.classes
        )));
    }
    report_from_confusion(confusion(pred, reference, pred.classes as usize)?, "multiclass")
}

/// Renames predicted change classes (label 0 fixed) to maximize agreement with
/// the reference. Returns the relabelled map and the mapping `old -> new`
/// indexed by old label.
pub fn class_alignment(pred: &ChangeMap, reference: &ReferenceMap) -> Result<(ChangeMap, Vec<u32>)> {
    check_shapes(pred, reference)?;
    if pred.classes != reference.classes {
        return Err(Error::InvalidParameter(format!(
            "prediction has {} change classes, reference {}",
            pred.classes, reference.classes
        )));
    }
    let k = pred.classes;
    if k > MAX_ALIGN_CLASSES {
        return Err(Error::InvalidParameter(format!(
            "alignment supports at most {MAX_ALIGN_CLASSES} classes, got {k}"
        )));
    }
    let conf = confusion(pred, reference, k as usize)?;
    let score = |perm: &[u32]| -> u64 {
        perm.iter()
            .enumerate()
            .map(|(i, &to)| conf[to as usize][i + 1])
            .sum()
    };
    let mut best: Vec<u32> = (1..=k).collect();
    let mut best_score = score(&best);
    for perm in (1..=k).permutations(k as usize) {
        let s = score(&perm);
        if s > best_score {
            best_score = s;
            best = perm;
        }
    }
    let mut mapping = vec![0u32];
    mapping.extend(best);
    let labels = pred.labels.iter().map(|&l| mapping[l as usize]).collect();
    Ok((ChangeMap::new(pred.height, pred.width, labels, k)?, mapping))
}

impl MetricsReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Two-column `metric,value` CSV.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("metric,value\n");
        let _ = writeln!(s, "mode,{}", self.mode);
        let _ = writeln!(s, "defined_pixels,{}", self.defined_pixels);
        let _ = writeln!(s, "tp,{}", self.tp);
        let _ = writeln!(s, "fp,{}", self.fp);
        let _ = writeln!(s, "tn,{}", self.tn);
        let _ = writeln!(s, "fn,{}", self.fn_);
        let _ = writeln!(s, "oe,{}", self.oe);
        let _ = writeln!(s, "oa,{}", self.oa);
        let _ = writeln!(s, "pe,{}", self.pe);
        let _ = writeln!(s, "kappa,{}", self.kappa);
        let _ = writeln!(s, "kappa_degenerate,{}", self.kappa_degenerate);
        let _ = writeln!(s, "aligned,{}", self.aligned);
        for (i, a) in self.per_class_accuracy.iter().enumerate() {
            match a {
                Some(v) => writeln!(s, "per_class_accuracy_{i},{v}"),
                None => writeln!(s, "per_class_accuracy_{i},"),
            }
            .unwrap();
        }
        for (i, row) in self.confusion.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                let _ = writeln!(s, "confusion_{i}_{j},{c}");
            }
        }
        s
    }

    /// Writes `metrics.json` and `metrics.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let json = dir.join("metrics.json");
        fs::write(&json, self.to_json()?).map_err(|e| Error::io(&json, e))?;
        let csv = dir.join("metrics.csv");
        fs::write(&csv, self.to_csv()).map_err(|e| Error::io(&csv, e))
    }
}
