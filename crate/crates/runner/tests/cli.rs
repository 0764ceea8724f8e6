mod common;

use std::collections::BTreeSet;

use common::{strongdamp, write_config, SMALL_SCENE};
use strongdamp_runner::manifest::{Comparison, RunManifest};

const COLLINEAR: &str = r#"
n = 8
k = 10

[scene]
eps0 = 0.5
amplitude = 1.0

[scene.box]
lower = [-8.0, -8.0]
upper = [8.0, 8.0]

[[scene.obstacles]]
center = [-4.0, 0.0]
radius = 1.0

[[scene.obstacles]]
center = [0.0, 0.0]
radius = 1.0

[[scene.obstacles]]
center = [4.0, 0.0]
radius = 1.0
"#;

fn manifest(dir: &std::path::Path) -> RunManifest {
    RunManifest::load(&dir.join("manifest.json")).unwrap()
}

#[test]
fn collinear_geometry_check_fails_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", COLLINEAR);
    let out = dir.path().join("out");
    let o = strongdamp(&["geometry-check", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    let ikawa = m.assertions.iter().find(|a| a.name == "ikawa").unwrap();
    assert!(!ikawa.passed);
    let geo: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("geometry.json")).unwrap()).unwrap();
    assert_eq!(geo["ikawa"]["all_ok"], false);
}

#[test]
fn preset_geometry_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = strongdamp(&["geometry-check", "--preset", "paper-two-disc", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let m = manifest(&out);
    assert!(m.assertions.iter().all(|a| a.passed));
    assert!((m.metric("orbit_margin").unwrap() - 6.0).abs() < 1e-12);
}

#[test]
fn unknown_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", &format!("bogus = 1\n{SMALL_SCENE}"));
    let o = strongdamp(&["spectrum", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));
}

#[test]
fn bad_flags_are_usage_errors() {
    assert_eq!(strongdamp(&["spectrum", "--frobnicate"]).status.code(), Some(1));
    assert_eq!(strongdamp(&["spectrum"]).status.code(), Some(1));
    assert_eq!(strongdamp(&["spectrum", "--preset", "nope"]).status.code(), Some(1));
}

#[test]
fn zero_damping_spectrum_records_zero_strip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SMALL_SCENE);
    let out = dir.path().join("out");
    let o =
        strongdamp(&["spectrum", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--zero-damping"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let m = manifest(&out);
    assert_eq!(m.metric("sigma0_star"), Some(0.0));
    let csv = std::fs::read_to_string(out.join("spectrum.csv")).unwrap();
    assert!(csv.starts_with("re,im\n"));
    assert_eq!(csv.lines().count(), 41);
}

#[test]
fn refined_sweep_writes_two_tables_and_a_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SMALL_SCENE);
    let out = dir.path().join("out");
    let o =
        strongdamp(&["resolvent-sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--refine"]);
    assert!(matches!(o.status.code(), Some(0) | Some(2)), "{}", String::from_utf8_lossy(&o.stderr));
    for level in ["n8-k40", "n16-k80"] {
        let csv = std::fs::read_to_string(out.join(level).join("sweep.csv")).unwrap();
        assert!(csv.starts_with("tau_re,tau_im,s_in,s_out,resnorm,normalized,flag\n"));
        assert_eq!(csv.lines().count(), 25);
    }
    let cmp: Comparison = serde_json::from_str(&std::fs::read_to_string(out.join("comparison.json")).unwrap()).unwrap();
    assert_eq!(cmp.levels, [(8, 40), (16, 80)]);
    let c = cmp.ratios.iter().find(|r| r.name == "c_star").unwrap();
    assert!((c.ratio - c.fine / c.coarse).abs() < 1e-12);
    assert_eq!(o.status.code() == Some(0), cmp.all_ok);
}

#[test]
fn outputs_are_listed_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SMALL_SCENE);
    let mut tables = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let o = strongdamp(&["smoothing", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.code() == Some(0) || o.status.code() == Some(2));
        let m = manifest(&out);
        let listed: BTreeSet<String> = m.outputs.iter().cloned().collect();
        let present: BTreeSet<String> =
            std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
        assert_eq!(listed, present);
        tables.push(["smoothing.csv", "rough_profile.csv"].map(|f| std::fs::read(out.join(f)).unwrap()));
    }
    assert_eq!(tables[0], tables[1]);
}

#[test]
fn compare_identical_manifests_gives_unit_ratios() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SMALL_SCENE);
    let out = dir.path().join("run");
    let o = strongdamp(&["spectrum", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let m = out.join("manifest.json");
    let cmp_out = dir.path().join("cmp");
    let o = strongdamp(&["compare", m.to_str().unwrap(), m.to_str().unwrap(), "--out", cmp_out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let cmp: Comparison =
        serde_json::from_str(&std::fs::read_to_string(cmp_out.join("comparison.json")).unwrap()).unwrap();
    assert!(!cmp.ratios.is_empty());
    assert!(cmp.ratios.iter().all(|r| r.ratio == 1.0 && r.passed));
}
