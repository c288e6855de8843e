//! `brwlab`: critical parameters, phase diagrams and survival estimates for
//! branching random walks, driven by a JSON run spec.
//!
//! Exit codes: 0 success, 2 invalid input, 3 computation error, 4 a check
//! failed (output is still written). Errors go to stderr as
//! `{"error": {"kind": ..., "message": ...}}`.

mod commands;
mod error;
mod runspec;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::CliError;
use crate::runspec::CommandName;

#[derive(Parser, Debug)]
#[command(name = "brwlab", version, about = "Branching random walk phase toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run spec (JSON).
    #[arg(long, global = true)]
    spec: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for Monte Carlo runs.
    #[arg(long, global = true, env = "BRWLAB_THREADS")]
    threads: Option<usize>,
    /// Overrides `mc.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `tol`.
    #[arg(long, global = true)]
    tol: Option<f64>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Critical parameters of one kernel (JSON).
    Params,
    /// Survival frequencies over a lambda grid (CSV).
    Simulate,
    /// Loop-rate sweep on a regular tree (CSV).
    PhaseDiagram,
    /// Phase relation between a kernel and a finite modification (JSON).
    Compare,
    /// Never-hit probabilities of two kernels that agree off the target (CSV).
    Q0Check,
}

impl Command {
    fn name(self) -> CommandName {
        match self {
            Command::Params => CommandName::Params,
            Command::Simulate => CommandName::Simulate,
            Command::PhaseDiagram => CommandName::PhaseDiagram,
            Command::Compare => CommandName::Compare,
            Command::Q0Check => CommandName::Q0Check,
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let spec_path = cli.spec.as_ref().ok_or_else(|| CliError::input("--spec PATH is required"))?;
    let text = std::fs::read_to_string(spec_path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", spec_path.display())))?;
    let base = spec_path.parent().unwrap_or(Path::new("."));
    let mut loaded = runspec::load(&text, base, cli.command.name())?;
    if let Some(seed) = cli.seed {
        loaded.spec.mc.seed = seed;
    }
    if let Some(tol) = cli.tol {
        if !(tol.is_finite() && tol > 0.0) {
            return Err(CliError::input(format!("--tol must be finite and positive, got {tol}")));
        }
        loaded.spec.tol = tol;
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::input("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::compute(format!("thread pool: {e}")))?;
    }
    let output = match cli.command {
        Command::Params => commands::params(&loaded),
        Command::Simulate => commands::simulate(&loaded),
        Command::PhaseDiagram => commands::phase_diagram(&loaded),
        Command::Compare => commands::compare(&loaded),
        Command::Q0Check => commands::q0_check(&loaded),
    }?;
    match &cli.out {
        Some(path) => std::fs::write(path, &output.body)
            .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(&output.body)
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::compute(format!("writing output: {e}")))?;
        }
    }
    if output.failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Assertion(output.failures))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code())
        }
    }
}
