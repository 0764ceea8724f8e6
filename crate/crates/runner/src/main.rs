use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use strongdamp_runner::config::{Damping, Experiment, ExperimentConfig};
use strongdamp_runner::manifest::{compare_refinements, write_json, RunManifest};
use strongdamp_runner::{run_all, RunError};

/// Strongly damped Schrödinger laboratory.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ikawa hypotheses and the uncontrolled orbit.
    GeometryCheck(RunArgs),
    /// Eigenvalues of the generator and the strip width.
    Spectrum(RunArgs),
    /// Resolvent norms along the real axis.
    ResolventSweep(RunArgs),
    /// Resolvent and semiclassical estimate harnesses.
    Estimates(RunArgs),
    /// Homogeneous evolution and decay fit.
    Evolve(RunArgs),
    /// Time-domain smoothing ratios and the rough-datum control.
    Smoothing(RunArgs),
    /// Compare two manifests of the same experiment.
    Compare(CompareArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also run at twice the resolution and mode count.
    #[arg(long)]
    refine: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    preset: Option<String>,
    /// Replace the damping profile by `a ≡ 0`.
    #[arg(long)]
    zero_damping: bool,
    /// Directory for eigenbasis caches.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    coarse: PathBuf,
    fine: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn load_config(exp: Experiment, args: &RunArgs) -> Result<ExperimentConfig, RunError> {
    let mut cfg = match (&args.config, &args.preset) {
        (Some(_), Some(_)) => return Err(RunError::Usage("--config and --preset are exclusive".into())),
        (Some(path), None) => ExperimentConfig::load(path)?,
        (None, Some(name)) => ExperimentConfig::preset(name)?,
        (None, None) => return Err(RunError::Usage("one of --config or --preset is required".into())),
    };
    match cfg.experiment {
        Some(e) if e != exp => {
            return Err(RunError::Usage(format!("experiment: config names `{e}` but `{exp}` was requested")))
        }
        _ => cfg.experiment = Some(exp),
    }
    if args.refine {
        cfg.refine = true;
    }
    if args.seed.is_some() {
        cfg.seed = args.seed;
    }
    if args.zero_damping {
        cfg.damping = Damping::Zero;
    }
    if args.cache_dir.is_some() {
        cfg.cache_dir = args.cache_dir.clone();
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<bool, RunError> {
    let (exp, args) = match cli.command {
        Command::Compare(c) => {
            let a = RunManifest::load(&c.coarse)?;
            let b = RunManifest::load(&c.fine)?;
            let cmp = compare_refinements(&a, &b)?;
            for r in &cmp.ratios {
                println!("{:<24} {:>12.5e} {:>12.5e} {:>8.4} {}", r.name, r.coarse, r.fine, r.ratio, verdict(r.passed));
            }
            write_json(&c.out.join("comparison.json"), &cmp)?;
            return Ok(cmp.all_ok);
        }
        Command::GeometryCheck(a) => (Experiment::GeometryCheck, a),
        Command::Spectrum(a) => (Experiment::Spectrum, a),
        Command::ResolventSweep(a) => (Experiment::ResolventSweep, a),
        Command::Estimates(a) => (Experiment::Estimates, a),
        Command::Evolve(a) => (Experiment::Evolve, a),
        Command::Smoothing(a) => (Experiment::Smoothing, a),
    };
    let cfg = load_config(exp, &args)?;
    let outcome = run_all(&cfg, &args.out)?;
    for m in &outcome.manifests {
        println!("{} n={} K={}", m.experiment, m.n, m.k);
        for (name, metric) in &m.metrics {
            println!("  {name:<24} {:.6e}", metric.value);
        }
        for a in &m.assertions {
            println!("  {} {}: {}", verdict(a.passed), a.name, a.detail);
        }
    }
    if let Some(cmp) = &outcome.comparison {
        for r in &cmp.ratios {
            println!("  {} ratio {}: {:.4}", verdict(r.passed), r.name, r.ratio);
        }
    }
    Ok(outcome.passed())
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
