//! Command-line front end: configuration, orchestration and result files.
//!
//! Every subcommand writes its CSV tables, an SVG plot and `manifest.toml`
//! (the resolved configuration) under the output directory. Exit status is
//! 0 when every check passes, 1 when a check fails or a run errors, and 2
//! for an invalid configuration.

mod commands;
pub mod config;
pub mod svg;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

pub use commands::{Check, Report};
pub use config::{ConfigError, ExperimentConfig, LoadedConfig, Overrides};

use crate::diagnostics::Regime;

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "STABLE_HEAT_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "stable-heat",
    version,
    about = "Stochastic heat equation with truncated stable noise"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Semigroup defects and Lᵖ decay of the Dirichlet heat kernel.
    KernelCheck(CommonArgs),
    /// Jump-measure moments and compensation of the noise increments.
    NoiseCheck(CommonArgs),
    /// Mollified coefficients against the raw ones, Lipschitz and growth scans.
    MollifierCheck(CommonArgs),
    /// Sample paths at the configured level.
    Simulate(CommonArgs),
    /// Sup-in-time moments across mollification levels.
    Moments(CommonArgs),
    /// Temporal and spatial moduli of continuity.
    Modulus(CommonArgs),
    /// KS chain of test-function pairings across levels.
    Converge(CommonArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::KernelCheck(_) => "kernel-check",
            Command::NoiseCheck(_) => "noise-check",
            Command::MollifierCheck(_) => "mollifier-check",
            Command::Simulate(_) => "simulate",
            Command::Moments(_) => "moments",
            Command::Modulus(_) => "modulus",
            Command::Converge(_) => "converge",
        }
    }

    pub fn args(&self) -> &CommonArgs {
        match self {
            Command::KernelCheck(a)
            | Command::NoiseCheck(a)
            | Command::MollifierCheck(a)
            | Command::Simulate(a)
            | Command::Moments(a)
            | Command::Modulus(a)
            | Command::Converge(a) => a,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// TOML experiment file; built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub replicas: Option<usize>,
    #[arg(long, value_parser = parse_regime)]
    pub regime: Option<Regime>,
}

fn parse_regime(s: &str) -> Result<Regime, String> {
    match s {
        "theorem-2.4" => Ok(Regime::MeasureValued),
        "theorem-2.5" => Ok(Regime::FunctionValued),
        _ => Err(format!(
            "unknown regime {s:?}; expected theorem-2.4 or theorem-2.5"
        )),
    }
}

impl CommonArgs {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            output_dir: self.out.clone(),
            replicas: self.replicas,
            regime: self.regime,
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    subcommand: &'a str,
    master_seed: u64,
    config: &'a ExperimentConfig,
}

/// Loads, validates and applies the overrides.
pub fn load(args: &CommonArgs) -> Result<LoadedConfig, ConfigError> {
    let mut cfg = match &args.config {
        Some(path) => LoadedConfig::from_file(path)?,
        None => LoadedConfig::defaults(),
    };
    cfg.apply(&args.overrides());
    cfg.validate()?;
    Ok(cfg)
}

fn worker_count() -> Result<Option<usize>, String> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(format!("{THREADS_ENV} = {v:?} is not a positive integer")),
        },
    }
}

/// Runs one parsed command and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let cfg = match load(cli.command.args()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let threads = match worker_count() {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return 1;
        }
    };
    let report = pool.install(|| commands::execute(&cli.command, &cfg));
    let report = match report {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {} failed: {e}", cli.command.name());
            return 1;
        }
    };
    if let Err(e) = write_outputs(&cfg, cli.command.name(), &report) {
        eprintln!("error: {e}");
        return 1;
    }
    let mut failed = 0;
    for c in &report.checks {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        println!("{tag} {}: {}", c.name, c.detail);
        if !c.passed {
            failed += 1;
        }
    }
    if failed > 0 {
        let names: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect();
        eprintln!("{failed} check(s) failed: {}", names.join(", "));
        return 1;
    }
    0
}

fn write_outputs(cfg: &LoadedConfig, subcommand: &str, report: &Report) -> Result<(), String> {
    let dir: &Path = &cfg.config.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    let mut resolved = cfg.config.clone();
    resolved.noise.eps = Some(resolved.noise.resolve().eps);
    let manifest = toml::to_string(&Manifest {
        subcommand,
        master_seed: resolved.master_seed,
        config: &resolved,
    })
    .map_err(|e| format!("cannot serialize manifest: {e}"))?;
    let files = report
        .files
        .iter()
        .map(|(n, c)| (n.as_str(), c.as_str()))
        .chain(std::iter::once(("manifest.toml", manifest.as_str())));
    for (name, contents) in files {
        let path = dir.join(name);
        std::fs::write(&path, contents)
            .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    }
    Ok(())
}
