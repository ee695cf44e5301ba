use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mfg_core::cli_io::{self, RunConfig};
use mfg_core::Error;

const EXIT_VALIDATION: u8 = 1;
const EXIT_NOT_CONVERGED: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(
    name = "mfg",
    version,
    about = "Particle solver for mean-field games with absorbing boundaries"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a configuration and write its artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed of the config file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check parameter gates and monotonicity without solving.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Summarize a finished run directory.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => EXIT_IO,
        _ => EXIT_VALIDATION,
    }
}

fn run(config: PathBuf, out: PathBuf, seed: Option<u64>) -> Result<u8, Error> {
    let mut cfg = RunConfig::from_file(&config)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let art = cli_io::execute(&cfg)?;
    cli_io::write_outputs(&art, &out)?;
    let sol = &art.solution;
    if let Some(p1) = &sol.phase1 {
        println!(
            "phase 1: {} sweeps, converged = {}, grid pruned to {} controls",
            p1.run.reports.len(),
            p1.run.converged,
            sol.grid.len()
        );
    }
    for r in &sol.run.reports {
        println!(
            "sweep {:3}  modifications {:9}  distribution change {:.3e}",
            r.sweep, r.modifications, r.distribution_change
        );
    }
    let v = &sol.verification;
    println!(
        "verification: {} (residual {:.3e}, frozen {}, stationarity {}, greedy {}/{})",
        if v.passed() { "passed" } else { "failed" },
        v.fixed_point_residual,
        v.frozen_modifications,
        v.stationarity_modifications,
        v.greedy_violations,
        v.greedy_checked
    );
    println!(
        "final mass {:.6}; outputs in {}",
        art.final_mass(),
        out.display()
    );
    if art.converged() {
        Ok(0)
    } else {
        eprintln!("not converged after {} sweeps", sol.run.reports.len());
        Ok(EXIT_NOT_CONVERGED)
    }
}

fn validate(config: PathBuf) -> Result<u8, Error> {
    let cfg = RunConfig::from_file(&config)?;
    let outcome = cli_io::validate_config(&cfg)?;
    for c in &outcome.checks {
        println!(
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    for n in &outcome.notes {
        println!("note: {n}");
    }
    Ok(if outcome.passed() { 0 } else { EXIT_VALIDATION })
}

fn report(out: PathBuf) -> Result<u8, Error> {
    let manifest = cli_io::read_manifest(&out)?;
    println!(
        "model {}  N = {}  dt = {}  T = {}  seed = {}",
        manifest.config.model,
        manifest.config.n_particles,
        manifest.config.dt,
        manifest.config.horizon,
        manifest.config.seed
    );
    for (k, v) in &manifest.results {
        println!("{k:28} {v}");
    }
    let phase1 = out.join("phase1_iterations.csv");
    if phase1.exists() {
        let rows = cli_io::read_iterations(&phase1)?;
        println!(
            "phase 1 modifications: {}",
            rows.iter()
                .map(|r| r.modifications.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        );
    }
    let rows = cli_io::read_iterations(&out.join("iterations.csv"))?;
    println!(
        "modifications: {}",
        rows.iter()
            .map(|r| r.modifications.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    );
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out, seed } => run(config, out, seed),
        Command::Validate { config } => validate(config),
        Command::Report { out } => report(out),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
