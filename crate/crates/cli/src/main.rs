//! `pam-lab`: experiment runner for the lattice PAM laboratory.

mod config;
mod experiments;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime};

use clap::{Parser, Subcommand};

use config::{ConfigErrors, ExperimentConfig, ExperimentKind};

#[derive(Parser)]
#[command(name = "pam-lab", version, about = "Numerical experiments for the rescaled lattice parabolic Anderson model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Area-term statistics, Cauchy diagnostics and the white-noise CLT.
    NoiseDiagnostics(Flags),
    /// Cross-N laws of PAM observables.
    PamConvergence(Flags),
    /// Empirical norm of the random operator.
    OperatorNorm(Flags),
    /// Moments of discrete multiple stochastic integrals.
    ChaosMoments(Flags),
    /// Polymer kernel versus weighted random-walk marginals.
    Polymer(Flags),
    /// Shifted low spectrum of the Anderson Hamiltonian.
    Spectrum(Flags),
}

/// Flags shared by every experiment. Flags override values from `--config`.
#[derive(clap::Args, Debug)]
struct Flags {
    /// Comma-separated odd lattice sizes, e.g. `9,27,81`.
    #[arg(long = "N", value_delimiter = ',')]
    ns: Option<Vec<usize>>,
    /// Number of eigenvalues (spectrum).
    #[arg(long)]
    k: Option<usize>,
    /// Disorder samples per lattice size (Monte Carlo samples for chaos-moments).
    #[arg(long)]
    samples: Option<usize>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Final time (pam-convergence, polymer).
    #[arg(long = "T")]
    t_final: Option<f64>,
    /// Fixed time step; by default the step is chosen from the potential.
    #[arg(long)]
    dt: Option<f64>,
    /// Random-walk paths (polymer).
    #[arg(long)]
    paths: Option<usize>,
    /// TOML or JSON configuration file (`.json` is read as JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory [default: pamlab-out].
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Flags {
    fn overrides(&self) -> ExperimentConfig {
        ExperimentConfig {
            ns: self.ns.clone(),
            k: self.k,
            samples: self.samples,
            seed: self.seed,
            t_final: self.t_final,
            dt: self.dt,
            paths: self.paths,
            out: self.out.clone(),
            ..Default::default()
        }
    }
}

fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("PAMLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().map_err(|_| format!("PAMLAB_THREADS: expected a positive integer, got {v:?}"))?;
    if n == 0 {
        return Err("PAMLAB_THREADS: must be at least 1".into());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| format!("PAMLAB_THREADS: {e}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, flags) = match &cli.command {
        Command::NoiseDiagnostics(f) => (ExperimentKind::NoiseDiagnostics, f),
        Command::PamConvergence(f) => (ExperimentKind::PamConvergence, f),
        Command::OperatorNorm(f) => (ExperimentKind::OperatorNorm, f),
        Command::ChaosMoments(f) => (ExperimentKind::ChaosMoments, f),
        Command::Polymer(f) => (ExperimentKind::Polymer, f),
        Command::Spectrum(f) => (ExperimentKind::Spectrum, f),
    };
    let base = match &flags.config {
        Some(path) => match ExperimentConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("invalid configuration:\n  config: {e:#}");
                return ExitCode::from(2);
            }
        },
        None => ExperimentConfig::default(),
    };
    let resolved = match config::resolve(kind, base.overlay(flags.overrides())) {
        Ok(r) => r,
        Err(ConfigErrors(errs)) => {
            eprint!("{}", ConfigErrors(errs));
            return ExitCode::from(2);
        }
    };
    if let Err(msg) = init_threads() {
        eprintln!("invalid configuration:\n  {msg}");
        return ExitCode::from(2);
    }

    let started = SystemTime::now();
    let clock = Instant::now();
    let result = output::Sink::new(&resolved.out).and_then(|mut sink| {
        experiments::run(&resolved, &mut sink)?;
        output::write_manifest(&resolved.out, &resolved, &sink, started, clock.elapsed().as_secs_f64())?;
        Ok(sink)
    });
    match result {
        Ok(sink) => {
            println!("{}: wrote {} artifacts to {}", kind.name(), sink.artifacts.len(), resolved.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
