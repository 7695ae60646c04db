use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Parser;
use cstr_etsmc::SimConfig;
use cstr_etsmc_cli::scenario::{self, ScenarioName};
use cstr_etsmc_cli::{config, RunManifest};

/// Event-triggered sliding-mode control of a nonlinear CSTR.
#[derive(Debug, Parser)]
#[command(name = "cstr-etsmc", version)]
struct Args {
    /// Scenario to run; repeat for several. Defaults to the config file's scenario.
    #[arg(long, value_name = "NAME")]
    scenario: Vec<String>,
    /// TOML configuration file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output root; each scenario writes to `<out>/<scenario>/`.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Integration step.
    #[arg(long)]
    step: Option<f64>,
    /// Horizon.
    #[arg(long)]
    duration: Option<f64>,
    /// Setpoint for the `regulate` scenario.
    #[arg(long)]
    setpoint_kelvin: Option<f64>,
    /// Feed temperature anchor for regulation scenarios.
    #[arg(long)]
    tf0_kelvin: Option<f64>,
    /// Also run a time-triggered baseline.
    #[arg(long)]
    baseline: bool,
    /// Reserved; all runs are deterministic.
    #[arg(long)]
    seed: Option<u64>,
    /// Check a manifest against its files and a fresh rerun, then exit.
    #[arg(long, value_name = "MANIFEST", conflicts_with_all = ["scenario", "config", "step", "duration", "setpoint_kelvin", "tf0_kelvin", "baseline"])]
    verify: Option<PathBuf>,
}

fn base_config(args: &Args) -> Result<SimConfig> {
    let mut cfg = match &args.config {
        Some(path) => config::parse_config(path)?,
        None => SimConfig::default(),
    };
    if let Some(h) = args.step {
        cfg.h = h;
    }
    if let Some(t) = args.duration {
        cfg.t_end = t;
    }
    cfg.validate().context("invalid configuration")?;
    Ok(cfg)
}

fn report(manifest: &RunManifest) -> bool {
    let failed: Vec<_> = manifest.failed_invariants().collect();
    println!(
        "{}: {} files in {} ({} invariants, {} failed)",
        manifest.scenario,
        manifest.files.len(),
        manifest.output_dir.display(),
        manifest.invariants.len(),
        failed.len()
    );
    for c in &failed {
        eprintln!("{}: invariant {} failed: {}", manifest.scenario, c.name, c.detail);
    }
    failed.is_empty()
}

fn verify(path: &Path) -> Result<bool> {
    let v = scenario::verify_manifest(path).with_context(|| format!("verifying {}", path.display()))?;
    for f in &v.tampered {
        eprintln!("digest mismatch on disk: {f}");
    }
    for f in &v.not_reproduced {
        eprintln!("rerun differs: {f}");
    }
    if v.ok() {
        println!("{}: all digests match and the rerun is bit-identical", path.display());
    }
    Ok(v.ok())
}

fn run(args: Args) -> Result<bool> {
    if let Some(path) = &args.verify {
        return verify(path);
    }
    let base = base_config(&args)?;
    let mut names = Vec::new();
    for s in &args.scenario {
        let name: ScenarioName = s.parse()?;
        if names.contains(&name) {
            bail!("scenario {name} given twice");
        }
        names.push(name);
    }
    if names.is_empty() {
        names.push(ScenarioName::of_config(&base));
    }
    let configs = names
        .iter()
        .map(|n| n.configure(&base, args.setpoint_kelvin, args.tf0_kelvin).map(|c| (*n, c)))
        .collect::<Result<Vec<_>, _>>()?;

    let results: Vec<_> = std::thread::scope(|s| {
        let handles: Vec<_> = configs
            .iter()
            .map(|(name, cfg)| s.spawn(|| scenario::run_scenario(*name, cfg, &args.out, args.baseline)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("scenario thread panicked")).collect()
    });

    let mut all_ok = true;
    for ((name, _), res) in configs.iter().zip(results) {
        let manifest = res.with_context(|| format!("scenario {name}"))?;
        all_ok &= report(&manifest);
    }
    Ok(all_ok)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let _ = args.seed;
    match run(args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
