mod common;

use std::collections::BTreeMap;

use common::SMALL_SCENE;
use strongdamp::evolution::Forcing;
use strongdamp_runner::config::{Damping, Datum, Experiment, ExperimentConfig};
use strongdamp_runner::level::band_limited_forcing;
use strongdamp_runner::manifest::{compare_refinements, Expect, Metric, RunManifest};
use strongdamp_runner::{run, run_all, RunError};

fn small(exp: Experiment) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_toml(SMALL_SCENE).unwrap();
    cfg.experiment = Some(exp);
    cfg
}

fn usage(r: Result<(), RunError>) -> String {
    match r {
        Err(RunError::Usage(msg)) => msg,
        other => panic!("expected a usage error, got {other:?}"),
    }
}

#[test]
fn preset_is_valid_and_round_trips() {
    let mut cfg = ExperimentConfig::preset("paper-two-disc").unwrap();
    cfg.experiment = Some(Experiment::Smoothing);
    cfg.validate().unwrap();
    assert_eq!((cfg.n, cfg.k), (32, 400));
    let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(back.hash(), cfg.hash());
}

#[test]
fn validation_names_the_field() {
    let mut cfg = small(Experiment::Estimates);
    cfg.seed = None;
    assert!(usage(cfg.validate()).starts_with("seed"));

    let mut cfg = small(Experiment::Smoothing);
    cfg.smoothing.eps = 1.5;
    assert!(usage(cfg.validate()).starts_with("smoothing.eps"));

    let mut cfg = small(Experiment::Evolve);
    cfg.evolve.fit_start = 0.5;
    assert!(usage(cfg.validate()).starts_with("evolve.fit_start"));

    let mut cfg = small(Experiment::Evolve);
    cfg.seed = None;
    cfg.validate().unwrap();
    cfg.evolve.datum = Datum::Random;
    assert!(usage(cfg.validate()).starts_with("seed"));

    let mut cfg = small(Experiment::Spectrum);
    cfg.scene.eps0 = -1.0;
    assert!(usage(cfg.validate()).starts_with("scene"));

    let mut cfg = small(Experiment::Spectrum);
    cfg.experiment = None;
    assert!(usage(cfg.validate()).starts_with("experiment"));
}

#[test]
fn nested_unknown_keys_are_rejected() {
    let text = SMALL_SCENE.replace("[sweep]", "[sweep]\nwidth = 3");
    let msg = usage(ExperimentConfig::from_toml(&text).map(|_| ()));
    assert!(msg.contains("width"), "{msg}");
}

#[test]
fn forcing_is_band_limited_and_seeded() {
    let gamma_sq: Vec<f64> = (1..=40).map(|j| j as f64).collect();
    let Forcing::Exponentials(a) = band_limited_forcing(&gamma_sq, 5, 9) else { panic!() };
    let Forcing::Exponentials(b) = band_limited_forcing(&gamma_sq, 5, 9) else { panic!() };
    assert_eq!(a, b);
    assert_eq!(a.len(), 5);
    for (mu, g) in &a {
        assert!((1.0..10.0).contains(mu));
        assert!(g[10..].iter().all(|z| z.norm() == 0.0));
        assert!(g[..10].iter().any(|z| z.norm() > 0.0));
    }
}

#[test]
fn zero_damping_decay_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(Experiment::Evolve);
    cfg.damping = Damping::Zero;
    let m = run(&cfg, dir.path()).unwrap();
    assert!(m.metric("alpha_star").unwrap().abs() <= 1e-8);
    assert!(m.passed(), "{:?}", m.assertions);
}

#[test]
fn damped_decay_reports_the_strip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(Experiment::Evolve);
    let m = run(&cfg, dir.path()).unwrap();
    assert!(m.metric("alpha_star").unwrap() > 0.0);
    assert!(m.metric("sigma0_star").unwrap() > 0.0);
    let names: Vec<&str> = m.assertions.iter().map(|a| a.name.as_str()).collect();
    assert!(names.contains(&"alpha_matches_sigma0"));
}

#[test]
fn estimates_cover_every_harness() {
    let dir = tempfile::tempdir().unwrap();
    let m = run(&small(Experiment::Estimates), dir.path()).unwrap();
    for key in ["resso", "resalpha", "cor1", "cor2", "hs+1_s=0", "hs_s=0.5", "hs+1_s=1"] {
        assert!(m.metric(key).is_some_and(f64::is_finite), "{key}");
    }
    let csv = std::fs::read_to_string(dir.path().join("estimates.csv")).unwrap();
    assert!(csv.starts_with("estimate,param,ratio\n"));
}

#[test]
fn zero_damping_rough_norm_is_marked_divergent() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(Experiment::Smoothing);
    cfg.damping = Damping::Zero;
    cfg.refine = true;
    let out = run_all(&cfg, dir.path()).unwrap();
    let cmp = out.comparison.unwrap();
    let rough = cmp.ratios.iter().find(|r| r.name == "rough_norm").unwrap();
    assert_eq!(rough.expect, Expect::Divergent);
    assert!(rough.ratio > 1.0);
}

fn manifest(exp: &str, n: u32, k: usize, metrics: &[(&str, f64, Expect)]) -> RunManifest {
    let cfg = small(Experiment::Spectrum);
    RunManifest {
        experiment: exp.into(),
        version: "0".into(),
        config_hash: String::new(),
        scene_hash: "s".into(),
        n,
        k,
        h: None,
        seed: None,
        damping: Damping::Profile,
        compare: cfg.compare,
        timings: vec![],
        outputs: vec![],
        metrics: metrics
            .iter()
            .map(|&(name, value, expect)| (name.to_string(), Metric { value, expect }))
            .collect::<BTreeMap<_, _>>(),
        assertions: vec![],
    }
}

#[test]
fn comparison_thresholds() {
    let a =
        manifest("x", 8, 40, &[("c", 1.0, Expect::Stable), ("g", 1.0, Expect::Divergent), ("i", 1.0, Expect::Info)]);
    let b =
        manifest("x", 16, 80, &[("c", 1.9, Expect::Stable), ("g", 2.5, Expect::Divergent), ("i", 9.0, Expect::Info)]);
    let cmp = compare_refinements(&b, &a).unwrap();
    assert_eq!(cmp.levels, [(8, 40), (16, 80)]);
    assert_eq!(cmp.ratios.len(), 2);
    assert!(cmp.all_ok);

    let b = manifest("x", 16, 80, &[("c", 2.1, Expect::Stable), ("g", 1.5, Expect::Divergent)]);
    let cmp = compare_refinements(&a, &b).unwrap();
    assert!(cmp.ratios.iter().all(|r| !r.passed));

    let c = manifest("y", 16, 80, &[]);
    assert!(matches!(compare_refinements(&a, &c), Err(RunError::Compare(_))));
}
