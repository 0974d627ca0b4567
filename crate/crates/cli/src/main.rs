//! Batch harness: parses an experiment config, runs one experiment and writes
//! CSV reports plus a JSON manifest.
//!
//! Exit codes: 0 when every check passes, 2 when a check fails or the
//! experiment errors, 1 on configuration or I/O errors.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use config::ExperimentConfig;
use report::{write_manifest, Manifest, Report};

#[derive(Parser)]
#[command(
    name = "flowplate",
    version,
    about = "Flow-plate generator operator laboratory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (`key = value` lines); defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding `run.out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Random seed, overriding `run.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Sequential dense kernels for reproducible sums.
    #[arg(long, global = true)]
    deterministic: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Green, flux-multiplier, dissipativity and commutator identities.
    CheckIdentities,
    /// Dirichlet map norm ratios across resolutions.
    DirichletNorm,
    /// Smallest shift certifying dissipativity.
    Calibrate,
    /// Term-by-term dissipativity identity.
    Dissipativity,
    /// Staged against monolithic resolvent solves and the large-shift estimates.
    ResolventVerify,
    /// Coercivity of the plate form over the shift list.
    Ellipticity,
    /// Dense exponential growth bound and contraction.
    GrowthBound,
    /// Time integration with energy and coupling traces.
    Simulate,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::CheckIdentities => "check-identities",
            Command::DirichletNorm => "dirichlet-norm",
            Command::Calibrate => "calibrate",
            Command::Dissipativity => "dissipativity",
            Command::ResolventVerify => "resolvent-verify",
            Command::Ellipticity => "ellipticity",
            Command::GrowthBound => "growth-bound",
            Command::Simulate => "simulate",
        }
    }

    fn run(self, cfg: &ExperimentConfig, rep: &mut Report) -> flowplate::Result<()> {
        match self {
            Command::CheckIdentities => commands::check_identities(cfg, rep),
            Command::DirichletNorm => commands::dirichlet_norm(cfg, rep),
            Command::Calibrate => commands::calibrate(cfg, rep),
            Command::Dissipativity => commands::dissipativity(cfg, rep),
            Command::ResolventVerify => commands::resolvent_verify(cfg, rep),
            Command::Ellipticity => commands::ellipticity(cfg, rep),
            Command::GrowthBound => commands::growth_bound(cfg, rep),
            Command::Simulate => commands::simulate_run(cfg, rep),
        }
    }
}

fn threads_from_env() -> Result<Option<usize>, String> {
    match std::env::var("FLOWPLATE_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(format!(
                "FLOWPLATE_THREADS must be a positive integer, got {v:?}"
            )),
        },
    }
}

fn run() -> u8 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let start = Instant::now();
    let name = cli.command.name();
    let manifest =
        |status: &'static str, error, cfg: Option<&ExperimentConfig>, deterministic, threads| {
            Manifest {
                subcommand: name,
                config: cfg
                    .map(|c| serde_json::to_value(&c.echo).unwrap_or_default())
                    .unwrap_or_default(),
                seed: cfg.map(|c| c.seed),
                deterministic,
                threads,
                status,
                error,
                elapsed_seconds: start.elapsed().as_secs_f64(),
            }
        };

    let setup = threads_from_env().and_then(|threads| {
        let mut cfg = match &cli.config {
            Some(p) => ExperimentConfig::load(p).map_err(|e| e.to_string())?,
            None => ExperimentConfig::defaults(),
        };
        if let Some(seed) = cli.seed {
            cfg.set_seed(seed);
        }
        if let Some(out) = &cli.out {
            cfg.set_out(out.clone());
        }
        Ok((cfg, threads))
    });
    let (cfg, threads) = match setup {
        Ok(s) => s,
        Err(msg) => {
            eprintln!("error: {msg}");
            if let Some(out) = &cli.out {
                let m = manifest("config_error", Some(msg), None, cli.deterministic, None);
                let _ = write_manifest(out, &m, None);
            }
            return 1;
        }
    };
    let deterministic = cli.deterministic || cfg.deterministic_sums;
    let mut rep = match flowplate::linalg::configure_parallelism(threads, deterministic)
        .map_err(|e| e.to_string())
        .and_then(|_| {
            Report::new(&cfg.out).map_err(|e| format!("cannot create {}: {e}", cfg.out.display()))
        }) {
        Ok(r) => r,
        Err(msg) => {
            eprintln!("error: {msg}");
            return 1;
        }
    };

    let (status, code, error) = match cli.command.run(&cfg, &mut rep) {
        Ok(()) if rep.all_pass() => ("pass", 0, None),
        Ok(()) => ("fail", 2, None),
        Err(e @ (flowplate::Error::Config(_) | flowplate::Error::Io(_))) => {
            ("config_error", 1, Some(e.to_string()))
        }
        Err(e) => ("error", 2, Some(e.to_string())),
    };
    let _ = rep.print_checks(&mut std::io::stdout());
    if let Some(e) = &error {
        eprintln!("error: {e}");
    }
    let m = manifest(status, error, Some(&cfg), deterministic, threads);
    if let Err(e) = write_manifest(&cfg.out, &m, Some(&rep)) {
        eprintln!("error: cannot write manifest: {e}");
        return 1;
    }
    code
}

fn main() -> ExitCode {
    ExitCode::from(run())
}
