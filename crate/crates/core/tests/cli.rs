use std::path::Path;
use std::process::{Command, Output};

use kpca_cd::raster::write_pgm;
use kpca_cd::{MetricsReport, RunConfig, SynthSpec};

fn kpca_cd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kpca-cd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn report(dir: &Path) -> MetricsReport {
    serde_json::from_str(&std::fs::read_to_string(dir.join("metrics.json")).unwrap()).unwrap()
}

/// Writes a small scene and a quick config next to it.
fn small_scene(dir: &Path, classes: u32, seed: u64) {
    let spec = SynthSpec::with_layout(40, 40, 3, classes, seed);
    let spec_path = dir.join("spec.json");
    std::fs::write(&spec_path, serde_json::to_string(&spec).unwrap()).unwrap();
    let out = kpca_cd(&["synth", "--config", path(&spec_path), "--out", path(dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut cfg = RunConfig::load(&dir.join("config.json")).unwrap();
    cfg.n = 60;
    cfg.p = 4;
    cfg.w = 3;
    cfg.depth = 2;
    cfg.t1 = "t1.bsq".into();
    cfg.t2 = "t2.bsq".into();
    cfg.reference = Some("reference.pgm".into());
    cfg.reference_legend = Some("reference_legend.json".into());
    std::fs::write(dir.join("quick.json"), cfg.to_json().unwrap()).unwrap();
}

#[test]
fn synth_detect_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    small_scene(dir.path(), 2, 3);
    for f in ["t1.bsq", "t1.json", "t2.bsq", "reference.pgm", "reference_legend.json", "synth.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let out = dir.path().join("run");
    let res = kpca_cd(&["detect", "--config", path(&dir.path().join("quick.json")), "--out", path(&out)]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(String::from_utf8_lossy(&res.stdout).contains("kappa"));
    for f in ["change_map.pgm", "legend.json", "polar.csv", "metrics.json", "metrics.csv", "net/net.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let detected = report(&out);

    let eval = dir.path().join("eval");
    let res = kpca_cd(&[
        "eval",
        "--pred", path(&out.join("change_map.pgm")),
        "--pred-legend", path(&out.join("legend.json")),
        "--ref", path(&dir.path().join("reference.pgm")),
        "--ref-legend", path(&dir.path().join("reference_legend.json")),
        "--out", path(&eval),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(report(&eval), detected);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    small_scene(dir.path(), 2, 8);
    let cfg = dir.path().join("quick.json");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let res = kpca_cd(&["detect", "--config", path(&cfg), "--out", path(out), "--mode", "multiclass", "--align"]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    }
    for f in ["change_map.pgm", "metrics.json", "metrics.csv", "polar.csv", "net/net.json", "net/layer_1.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn baseline_outputs_match_detect_format() {
    let dir = tempfile::tempdir().unwrap();
    small_scene(dir.path(), 2, 1);
    let out = dir.path().join("cva");
    let res = kpca_cd(&["baseline", "--config", path(&dir.path().join("quick.json")), "--out", path(&out)]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    for f in ["change_map.pgm", "legend.json", "polar.csv", "metrics.json", "metrics.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert!(!out.join("net").exists());
    let eval = dir.path().join("eval");
    let res = kpca_cd(&[
        "eval",
        "--pred", path(&out.join("change_map.pgm")),
        "--ref", path(&dir.path().join("reference.pgm")),
        "--ref-legend", path(&dir.path().join("reference_legend.json")),
        "--out", path(&eval),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(report(&eval).kappa, report(&out).kappa);
}

#[test]
fn baseline_and_network_agree_on_a_single_strong_shift() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SynthSpec::with_layout(64, 64, 4, 1, 2);
    let spec_path = dir.path().join("spec.json");
    std::fs::write(&spec_path, serde_json::to_string(&spec).unwrap()).unwrap();
    assert!(kpca_cd(&["synth", "--config", path(&spec_path), "--out", path(dir.path())]).status.success());
    let cfg = dir.path().join("config.json");
    let (net, cva) = (dir.path().join("net_run"), dir.path().join("cva_run"));
    assert!(kpca_cd(&["detect", "--config", path(&cfg), "--out", path(&net)]).status.success());
    assert!(kpca_cd(&["baseline", "--config", path(&cfg), "--out", path(&cva)]).status.success());
    let a = std::fs::read(net.join("change_map.pgm")).unwrap();
    let b = std::fs::read(cva.join("change_map.pgm")).unwrap();
    assert_eq!(a.len(), b.len());
    let pixels = 64 * 64;
    let body = a.len() - pixels;
    let agree = a[body..].iter().zip(&b[body..]).filter(|(x, y)| x == y).count();
    assert!(agree as f64 >= 0.9 * pixels as f64, "agreement {agree}/{pixels}");
}

#[test]
fn identical_images_report_no_change_signal() {
    let dir = tempfile::tempdir().unwrap();
    small_scene(dir.path(), 1, 0);
    let mut cfg = RunConfig::load(&dir.path().join("quick.json")).unwrap();
    cfg.t2 = cfg.t1.clone();
    cfg.reference = None;
    cfg.reference_legend = None;
    let cfg_path = dir.path().join("same.json");
    std::fs::write(&cfg_path, cfg.to_json().unwrap()).unwrap();
    for cmd in ["detect", "baseline"] {
        let out = dir.path().join(cmd);
        let res = kpca_cd(&[cmd, "--config", path(&cfg_path), "--out", path(&out)]);
        assert_eq!(res.status.code(), Some(3), "{cmd}");
        assert!(String::from_utf8_lossy(&res.stderr).contains("no change signal"), "{cmd}");
        assert!(!out.exists(), "{cmd} left partial output");
    }
}

#[test]
fn exit_codes_and_no_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    small_scene(dir.path(), 1, 0);
    let out = dir.path().join("never");

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"t1": "t1.bsq", "t2": "t2.bsq", "w": 4}"#).unwrap();
    let res = kpca_cd(&["detect", "--config", path(&bad), "--out", path(&out)]);
    assert_eq!(res.status.code(), Some(2));

    std::fs::write(&bad, r#"{"t1": "t1.bsq", "t2": "t2.bsq", "window": 5}"#).unwrap();
    let res = kpca_cd(&["detect", "--config", path(&bad), "--out", path(&out)]);
    assert_eq!(res.status.code(), Some(2));

    std::fs::write(&bad, r#"{"t1": "missing.bsq", "t2": "t2.bsq"}"#).unwrap();
    let res = kpca_cd(&["detect", "--config", path(&bad), "--out", path(&out)]);
    assert_eq!(res.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&res.stderr).contains("load"));

    let mut cfg = RunConfig::load(&dir.path().join("quick.json")).unwrap();
    // a 3x3x3 linear patch space has at most 27 positive components
    cfg.kernel = kpca_cd::KernelConfig::linear();
    cfg.p = 30;
    cfg.n = 40;
    std::fs::write(&bad, cfg.to_json().unwrap()).unwrap();
    let res = kpca_cd(&["detect", "--config", path(&bad), "--out", path(&out)]);
    assert_eq!(res.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&res.stderr).contains("train"));

    let res = kpca_cd(&["synth", "--config", path(&dir.path().join("missing.json")), "--out", path(&out)]);
    assert_eq!(res.status.code(), Some(2));
    assert!(!out.exists());
}

fn write_gray(dir: &Path, name: &str, h: usize, w: usize, gray: &[u8]) -> String {
    let p = dir.join(name);
    write_pgm(&p, h, w, gray).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn eval_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    // 30 changed reference pixels; 20 hits, 10 misses, 10 false alarms
    let reference: Vec<u8> = (0..100).map(|i| if i < 30 { 255 } else { 0 }).collect();
    let pred: Vec<u8> = (0..100).map(|i| if i < 20 || (30..40).contains(&i) { 255 } else { 0 }).collect();
    let r = write_gray(d, "ref.pgm", 10, 10, &reference);
    let p = write_gray(d, "pred.pgm", 10, 10, &pred);
    let out = d.join("hand");
    let res = kpca_cd(&["eval", "--pred", &p, "--ref", &r, "--out", path(&out)]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let m = report(&out);
    assert_eq!((m.tp, m.tn, m.fp, m.fn_, m.oe), (20, 60, 10, 10, 20));
    assert!((m.oa - 0.8).abs() < 1e-9);
    assert!((m.kappa - 0.22 / 0.42).abs() < 1e-9);

    let out = d.join("same");
    assert!(kpca_cd(&["eval", "--pred", &r, "--ref", &r, "--out", path(&out)]).status.success());
    assert_eq!(report(&out).kappa, 1.0);

    let three: Vec<u8> = (0..64).map(|i| [0, 127, 254][i % 3]).collect();
    let swapped: Vec<u8> = three.iter().map(|&g| match g { 127 => 254, 254 => 127, g => g }).collect();
    let r = write_gray(d, "ref3.pgm", 8, 8, &three);
    let p = write_gray(d, "pred3.pgm", 8, 8, &swapped);
    let plain = d.join("plain");
    let aligned = d.join("aligned");
    assert!(kpca_cd(&["eval", "--pred", &p, "--ref", &r, "--mode", "multiclass", "--out", path(&plain)]).status.success());
    assert!(kpca_cd(&["eval", "--pred", &p, "--ref", &r, "--mode", "multiclass", "--align", "--out", path(&aligned)]).status.success());
    assert!(report(&plain).kappa < 0.5);
    let a = report(&aligned);
    assert_eq!(a.kappa, 1.0);
    assert!(a.aligned);

    let small = write_gray(d, "small.pgm", 5, 5, &[0; 25]);
    let out = d.join("mismatch");
    let res = kpca_cd(&["eval", "--pred", &small, "--ref", &r, "--out", path(&out)]);
    assert_eq!(res.status.code(), Some(3));
    assert!(!out.exists());
}
