//! The named experiments. Each writes its outputs into one directory and
//! returns the manifest describing them.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use faer::c64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use strongdamp::damped_operator::{spectrum, DampedOperator};
use strongdamp::evolution::{
    decay_fit, rough_datum, smoothing_ratio, smoothness_profile, trajectory, worst_case_datum, DecayFit, Propagator,
    CFL,
};
use strongdamp::geometry::{validate_ikawa, verify_uncontrolled_orbit, IkawaReport};
use strongdamp::resolvent::{check_resalpha, check_resso, lemma_harness, log_grid, random_unit, sweep, EstimateReport};
use strongdamp::Error;

use crate::config::{Damping, Datum, Experiment, ExperimentConfig};
use crate::error::{at, RunError};
use crate::level::{band_limited_forcing, build, Level};
use crate::manifest::{
    compare_refinements, write_atomic, write_json, Assertion, Comparison, Expect, Metric, RunManifest, Timing,
};

/// Largest accepted `max_j ‖S e_j - γ_j² e_j‖ / γ_j²`.
pub const BASIS_GATE: f64 = 1e-8;
/// Largest accepted relative eigenpair residual of `A`.
pub const EIGEN_GATE: f64 = 1e-8;
/// Tolerance for `α* = 0` and `σ₀* = 0` without damping.
pub const ZERO_TOL: f64 = 1e-8;
/// Relative distance allowed between `α*` and `σ₀*`.
pub const DECAY_MATCH: f64 = 0.1;

struct Run<'a> {
    cfg: &'a ExperimentConfig,
    out: &'a Path,
    outputs: Vec<String>,
    metrics: BTreeMap<String, Metric>,
    assertions: Vec<Assertion>,
    timings: Vec<Timing>,
}

impl<'a> Run<'a> {
    fn new(cfg: &'a ExperimentConfig, out: &'a Path) -> Self {
        Self { cfg, out, outputs: vec![], metrics: BTreeMap::new(), assertions: vec![], timings: vec![] }
    }

    fn metric(&mut self, name: &str, value: f64, expect: Expect) {
        self.metrics.insert(name.to_string(), Metric { value, expect });
    }

    fn assert(&mut self, name: &str, passed: bool, detail: String) {
        self.assertions.push(Assertion { name: name.to_string(), passed, detail });
    }

    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let v = f();
        self.timings.push(Timing { stage: stage.to_string(), seconds: t.elapsed().as_secs_f64() });
        v
    }

    fn file(&mut self, name: &str, body: impl FnOnce(&mut dyn Write) -> Result<(), RunError>) -> Result<(), RunError> {
        write_atomic(&self.out.join(name), body)?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), RunError> {
        write_json(&self.out.join(name), value)?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    fn finish(mut self, level: Option<&Level>) -> Result<RunManifest, RunError> {
        let cfg = self.cfg;
        if let Some(l) = level {
            let mut t: Vec<Timing> = l.timings.iter().map(|(s, v)| Timing { stage: s.clone(), seconds: *v }).collect();
            t.append(&mut self.timings);
            self.timings = t;
        }
        self.outputs.push("manifest.json".into());
        let manifest = RunManifest {
            experiment: cfg.experiment.map(|e| e.name().to_string()).unwrap_or_default(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: cfg.hash(),
            scene_hash: cfg.scene.hash(),
            n: cfg.n,
            k: cfg.k,
            h: level.map(|l| l.h),
            seed: cfg.seed,
            damping: cfg.damping,
            compare: cfg.compare.clone(),
            timings: self.timings,
            outputs: self.outputs,
            metrics: self.metrics,
            assertions: self.assertions,
        };
        write_json(&self.out.join("manifest.json"), &manifest)?;
        Ok(manifest)
    }
}

/// Runs one experiment at the configured level, writing into `out`.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<RunManifest, RunError> {
    cfg.validate()?;
    std::fs::create_dir_all(out)?;
    let exp = cfg.experiment.expect("validated");
    let mut run = Run::new(cfg, out);
    run.file("config.toml", |w| Ok(w.write_all(cfg.to_toml().as_bytes())?))?;
    if exp == Experiment::GeometryCheck {
        geometry_check(&mut run)?;
        return run.finish(None);
    }
    let level = build(&cfg.scene, cfg.n, cfg.k, cfg.damping, cfg.cache_dir.as_deref())?;
    run.metric("basis_residual", level.basis_residual, Expect::Info);
    run.assert(
        "basis_residual",
        level.basis_residual <= BASIS_GATE,
        format!("{:e} <= {BASIS_GATE:e}", level.basis_residual),
    );
    match exp {
        Experiment::GeometryCheck => unreachable!(),
        Experiment::Spectrum => spectrum_run(&mut run, &level)?,
        Experiment::ResolventSweep => sweep_run(&mut run, &level)?,
        Experiment::Estimates => estimates_run(&mut run, &level)?,
        Experiment::Evolve => evolve_run(&mut run, &level)?,
        Experiment::Smoothing => smoothing_run(&mut run, &level)?,
    }
    run.finish(Some(&level))
}

/// Outcome of a run, possibly at two refinement levels.
pub struct Outcome {
    pub manifests: Vec<RunManifest>,
    pub comparison: Option<Comparison>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.manifests.iter().all(RunManifest::passed) && self.comparison.as_ref().is_none_or(|c| c.all_ok)
    }
}

/// Runs the experiment, and with `refine` set also at `(2n, 2K)` followed by
/// the comparison. Level outputs go to `out/n{n}-k{K}`.
pub fn run_all(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, RunError> {
    if !cfg.refine {
        return Ok(Outcome { manifests: vec![run(cfg, out)?], comparison: None });
    }
    cfg.validate()?;
    let fine_cfg = cfg.refined();
    let mut manifests = Vec::new();
    for c in [cfg, &fine_cfg] {
        manifests.push(run(c, &out.join(format!("n{}-k{}", c.n, c.k)))?);
    }
    let cmp = compare_refinements(&manifests[0], &manifests[1])?;
    write_json(&out.join("comparison.json"), &cmp)?;
    Ok(Outcome { manifests, comparison: Some(cmp) })
}

#[derive(Serialize)]
struct GeometryOutput {
    ikawa: IkawaReport,
    uncontrolled_orbit: bool,
    orbit_margin: Option<f64>,
}

fn geometry_check(run: &mut Run<'_>) -> Result<(), RunError> {
    let scene = &run.cfg.scene;
    let ikawa = validate_ikawa(scene).map_err(at("ikawa"))?;
    let (orbit, margin) = match verify_uncontrolled_orbit(scene) {
        Ok((ok, m)) => (ok, Some(m)),
        Err(Error::NoTrappedRay(_)) => (false, None),
        Err(e) => return Err(at("trapped orbit")(e)),
    };
    run.metric("kappa", ikawa.kappa, Expect::Info);
    run.metric("gap", ikawa.gap, Expect::Info);
    if let Some(m) = margin {
        run.metric("orbit_margin", m, Expect::Info);
    }
    run.assert(
        "ikawa",
        ikawa.all_ok,
        format!("kappa*L ok: {}, {} triples", ikawa.kappa_l_ok, ikawa.hull_clearances.len()),
    );
    run.assert("uncontrolled_orbit", orbit, format!("margin {margin:?}"));
    run.json("geometry.json", &GeometryOutput { ikawa, uncontrolled_orbit: orbit, orbit_margin: margin })
}

fn spectrum_run(run: &mut Run<'_>, level: &Level) -> Result<(), RunError> {
    let rep = run.time("spectrum", || spectrum(&level.op)).map_err(at("spectrum"))?;
    run.file("spectrum.csv", |w| rep.write_csv(w).map_err(at("spectrum csv")))?;
    run.json("spectrum.json", &rep.summary(level.h, &level.scene_hash))?;
    run.metric("sigma0_star", rep.sigma0_star, Expect::Stable);
    run.metric("eigvec_cond", rep.eigvec_cond, Expect::Info);
    run.metric("max_residual", rep.max_residual, Expect::Info);
    run.metric("negative_count", rep.negative_count as f64, Expect::Info);
    run.assert("eigen_residual", rep.max_residual <= EIGEN_GATE, format!("{:e} <= {EIGEN_GATE:e}", rep.max_residual));
    match level.damping {
        Damping::Profile => {
            run.assert("strip", rep.sigma0_star > 0.0, format!("sigma0_star = {:e} > 0", rep.sigma0_star))
        }
        Damping::Zero => run.assert(
            "sigma0_zero",
            rep.sigma0_star.abs() <= ZERO_TOL,
            format!("|sigma0_star| = {:e} <= {ZERO_TOL:e}", rep.sigma0_star.abs()),
        ),
    }
    Ok(())
}

fn tau_window(cfg: &ExperimentConfig, op: &DampedOperator) -> (f64, f64) {
    let g = op.gamma_sq();
    let lo = cfg.sweep.tau_min.unwrap_or(g[0]);
    let hi = cfg.sweep.tau_max.unwrap_or(g[g.len() - 1] / 4.0);
    (lo, hi)
}

fn real_taus(cfg: &ExperimentConfig, op: &DampedOperator) -> Result<Vec<c64>, RunError> {
    let (lo, hi) = tau_window(cfg, op);
    if !(lo < hi) {
        return Err(RunError::Usage(format!("sweep window [{lo}, {hi}] is empty for K = {}", op.k())));
    }
    Ok(log_grid(lo, hi, cfg.sweep.samples).into_iter().map(|t| c64::new(t, 0.0)).collect())
}

fn sweep_run(run: &mut Run<'_>, level: &Level) -> Result<(), RunError> {
    let sw = &run.cfg.sweep;
    let taus = real_taus(run.cfg, &level.op)?;
    let (s_in, s_out) = (sw.s_in, sw.s_out);
    let table = run.time("sweep", || sweep(&level.op, &taus, s_in, s_out)).map_err(at("sweep"))?;
    run.file("sweep.csv", |w| table.write_csv(w).map_err(at("sweep csv")))?;
    let max_resnorm = table.max_resnorm();
    run.metric("max_resnorm", max_resnorm, Expect::Stable);
    run.metric("pole_rows", table.pole_rows() as f64, Expect::Info);
    if s_in == 0.0 && s_out == 0.0 {
        let c_star = table.c_star();
        run.metric("c_star", c_star, Expect::Stable);
        run.assert("c_star_finite", c_star.is_finite(), format!("C* = {c_star:e}"));
    }
    run.assert("no_poles", table.pole_rows() == 0, format!("{} rows flagged", table.pole_rows()));
    Ok(())
}

#[derive(Serialize)]
struct EstimateRow<'r> {
    estimate: &'r str,
    param: f64,
    ratio: f64,
}

fn write_reports(w: &mut dyn Write, reports: &[EstimateReport]) -> Result<(), RunError> {
    let mut out = csv::Writer::from_writer(w);
    for r in reports {
        for s in &r.samples {
            out.serialize(EstimateRow { estimate: &r.name, param: s.param, ratio: s.ratio })
                .map_err(|e| RunError::Io(e.into()))?;
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct EstimateMax<'r> {
    estimate: &'r str,
    max_ratio: f64,
    trials: usize,
    range: (f64, f64),
}

fn estimates_run(run: &mut Run<'_>, level: &Level) -> Result<(), RunError> {
    let cfg = run.cfg;
    let es = &cfg.estimates;
    let op = &level.op;
    let taus = real_taus(cfg, op)?;
    let seed = cfg.seed.expect("validated");
    let g = op.gamma_sq();
    let lambdas = log_grid(g[0].sqrt(), g[g.len() - 1].sqrt() / 2.0, es.lambdas);
    let mut reports = run
        .time("resolvent estimates", || -> Result<_, Error> {
            Ok(vec![check_resso(op, es.s, es.eps, &taus)?, check_resalpha(op, &taus)?])
        })
        .map_err(at("resolvent estimates"))?;
    let lemma = run
        .time("lemma harness", || lemma_harness(op, &level.psi, &lambdas, &es.s_list, es.trials, seed))
        .map_err(at("lemma harness"))?;
    reports.extend(lemma);
    run.file("estimates.csv", |w| write_reports(w, &reports))?;
    let maxima: Vec<EstimateMax<'_>> = reports
        .iter()
        .map(|r| EstimateMax { estimate: &r.name, max_ratio: r.max_ratio, trials: r.trials, range: r.range })
        .collect();
    run.json("estimates.json", &maxima)?;
    for r in &reports {
        let key = if r.name.starts_with("resso") { "resso".to_string() } else { r.name.replace(' ', "_") };
        run.metric(&key, r.max_ratio, Expect::Stable);
        run.assert(&format!("{key}_finite"), r.max_ratio.is_finite(), format!("max ratio {:e}", r.max_ratio));
    }
    Ok(())
}

#[derive(Serialize)]
struct DecaySummary {
    #[serde(flatten)]
    fit: DecayFit,
    sigma0_star: f64,
    datum: Datum,
}

fn evolve_run(run: &mut Run<'_>, level: &Level) -> Result<(), RunError> {
    let cfg = run.cfg;
    let ev = &cfg.evolve;
    let op = &level.op;
    let prop = Propagator::new(op).map_err(at("propagator"))?;
    let u0 = match ev.datum {
        Datum::WorstCase => worst_case_datum(&prop, ev.horizon).map_err(at("worst-case datum"))?,
        Datum::Random => random_unit(&mut ChaCha8Rng::seed_from_u64(cfg.seed.expect("validated")), op.k()),
        Datum::Rough => rough_datum(op, 0.0, 0.51),
    };
    let steps = (ev.horizon / ev.dt).round() as usize;
    let times: Vec<f64> = (0..=steps).map(|i| i as f64 * ev.dt).collect();
    let traj = run.time("trajectory", || trajectory(&prop, &u0, &times, &ev.s_list)).map_err(at("trajectory"))?;
    run.file("trajectory.csv", |w| traj.write_csv(w).map_err(at("trajectory csv")))?;
    let fit = decay_fit(&traj, ev.fit_start).map_err(at("decay fit"))?;
    let sigma0 = spectrum(op).map_err(at("spectrum"))?.sigma0_star;
    run.metric("alpha_star", fit.alpha_star, Expect::Stable);
    run.metric("c_star", fit.c_star, Expect::Info);
    run.metric("sigma0_star", sigma0, Expect::Info);
    let increase = traj.max_norm_increase();
    run.assert("monotone", increase <= 1e-10, format!("largest norm increase {increase:e}"));
    match level.damping {
        Damping::Profile => {
            let rel = (fit.alpha_star - sigma0).abs() / sigma0;
            run.metric("alpha_rel_err", rel, Expect::Info);
            run.assert("alpha_positive", fit.alpha_star > 0.0, format!("alpha_star = {:e}", fit.alpha_star));
            run.assert("alpha_matches_sigma0", rel <= DECAY_MATCH, format!("relative gap {rel:e} <= {DECAY_MATCH}"));
        }
        Damping::Zero => run.assert(
            "alpha_zero",
            fit.alpha_star.abs() <= ZERO_TOL,
            format!("|alpha_star| = {:e} <= {ZERO_TOL:e}", fit.alpha_star.abs()),
        ),
    }
    run.json("decay.json", &DecaySummary { fit, sigma0_star: sigma0, datum: ev.datum })
}

#[derive(Serialize)]
struct SmoothingRow {
    seed: u64,
    ratio: f64,
}

#[derive(Serialize)]
struct ProfileRow {
    t: f64,
    k: f64,
    norm: f64,
}

fn smoothing_run(run: &mut Run<'_>, level: &Level) -> Result<(), RunError> {
    let cfg = run.cfg;
    let sm = &cfg.smoothing;
    let op = &level.op;
    let prop = Propagator::new(op).map_err(at("propagator"))?;
    let g = op.gamma_sq();
    let dt = CFL / g[g.len() - 1];
    let base = cfg.seed.expect("validated");
    let seeds: Vec<u64> = (0..sm.seeds as u64).map(|i| base.wrapping_add(i)).collect();
    let ratios = run
        .time("duhamel", || {
            seeds
                .par_iter()
                .map(|&seed| {
                    let f = band_limited_forcing(g, sm.terms, seed);
                    smoothing_ratio(&prop, &f, sm.s, sm.eps, sm.horizon, dt)
                })
                .collect::<Result<Vec<f64>, Error>>()
        })
        .map_err(at("smoothing"))?;
    run.file("smoothing.csv", |w| {
        let mut out = csv::Writer::from_writer(w);
        for (&seed, &ratio) in seeds.iter().zip(&ratios) {
            out.serialize(SmoothingRow { seed, ratio }).map_err(|e| RunError::Io(e.into()))?;
        }
        out.flush()?;
        Ok(())
    })?;
    let max_ratio = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    run.metric("smoothing_max", max_ratio, Expect::Stable);
    run.metric("smoothing_mean", mean, Expect::Info);

    let v0 = rough_datum(op, sm.s, sm.rough_delta);
    let k_out = sm.s + 1.0;
    let table = smoothness_profile(&prop, &v0, sm.s, &sm.rough_times, &[k_out]).map_err(at("smoothness profile"))?;
    run.file("rough_profile.csv", |w| {
        let mut out = csv::Writer::from_writer(w);
        for (&t, row) in sm.rough_times.iter().zip(&table) {
            out.serialize(ProfileRow { t, k: k_out, norm: row[0] }).map_err(|e| RunError::Io(e.into()))?;
        }
        out.flush()?;
        Ok(())
    })?;
    let rough = table.iter().map(|r| r[0]).fold(f64::NEG_INFINITY, f64::max);
    let expect = match level.damping {
        Damping::Profile => Expect::Stable,
        Damping::Zero => Expect::Divergent,
    };
    run.metric("rough_norm", rough, expect);

    if level.damping == Damping::Profile {
        let taus = real_taus(cfg, op)?;
        let bound = run
            .time("frequency bound", || check_resso(op, sm.s, sm.eps, &taus))
            .map_err(at("frequency bound"))?
            .max_ratio;
        let limit = (1.0 + sm.quadrature_tol) * bound;
        run.metric("resso_bound", bound, Expect::Info);
        run.assert("frequency_bound_dominates", max_ratio <= limit, format!("max ratio {max_ratio:e} <= {limit:e}"));
    }
    Ok(())
}
