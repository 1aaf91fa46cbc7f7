use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use symneg_core::commands::{self, Command};
use symneg_core::config::{LogBase, RunConfig};
use symneg_core::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_COMPARISON: u8 = 2;
const EXIT_NO_CONVERGENCE: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "symneg", version, about = "Negativity spectra of charge-projected random states")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed (overrides ensemble.seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core (overrides ensemble.workers and SYMNEG_WORKERS).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory (overrides outputs.directory and SYMNEG_OUT).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Units of entropic quantities.
    #[arg(long, global = true, value_parser = ["2", "e"])]
    log_base: Option<String>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Sub {
    /// Sample the ensemble and histogram the partial-transpose spectrum.
    SampleSpectrum,
    /// Tabulate the theory spectrum of the configured model.
    TheorySpectrum,
    /// Compare the sampled histogram against theory.
    Compare,
    /// Classify a grid of thermodynamic geometries.
    PhaseDiagram,
    /// Monte Carlo moments against their predictions.
    Moments,
    /// Mutual information between A1 and A2 as N_B varies.
    MutualInfo,
    /// Run the ancilla charge-measurement circuit.
    CircuitDemo,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::SampleSpectrum => Command::SampleSpectrum,
            Sub::TheorySpectrum => Command::TheorySpectrum,
            Sub::Compare => Command::Compare,
            Sub::PhaseDiagram => Command::PhaseDiagram,
            Sub::Moments => Command::Moments,
            Sub::MutualInfo => Command::MutualInfo,
            Sub::CircuitDemo => Command::CircuitDemo,
        }
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig, Error> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Invalid("--config PATH is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    cfg.apply_env()?;
    if let Some(s) = cli.seed {
        cfg.ensemble.seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.ensemble.workers = w;
    }
    if let Some(o) = &cli.out {
        cfg.outputs.directory = o.clone();
    }
    if let Some(b) = &cli.log_base {
        cfg.outputs.log_base = b.parse::<LogBase>()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn no_convergence(e: &Error) -> bool {
    match e {
        Error::NoConvergence { .. } => true,
        Error::Sample { source, .. } => no_convergence(source),
        _ => false,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let cfg = match resolve(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("symneg: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let cmd = Command::from(cli.command);
    match commands::run(cmd, &cfg) {
        Ok(outcome) => {
            let mut out = std::io::stdout().lock();
            let written: std::io::Result<()> = outcome
                .lines
                .iter()
                .cloned()
                .chain(outcome.files.iter().map(|f| format!("wrote {}", f.display())))
                .try_for_each(|l| writeln!(out, "{l}"));
            // A closed pipe (e.g. `| head`) is not a failure of the run.
            drop(written);
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_COMPARISON)
            }
        }
        Err(e) => {
            eprintln!("symneg {}: {e}", cmd.name());
            if no_convergence(&e) {
                ExitCode::from(EXIT_NO_CONVERGENCE)
            } else {
                ExitCode::from(EXIT_USAGE)
            }
        }
    }
}
