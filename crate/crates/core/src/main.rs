use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use vortex_wave::harness::{execute, CommandKind, CommandOptions};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Simulate,
    Twin,
    Fixed,
    CheckKernels,
    Convergence,
}

/// Vortex-wave simulator and diagnostics.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Scenario config (TOML); optional for check-kernels.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Twin perturbation size, overriding the config.
    #[arg(long)]
    eta: Option<f64>,
    /// Refinement levels for convergence.
    #[arg(long)]
    levels: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let kind = match cli.command {
        Command::Simulate => CommandKind::Simulate,
        Command::Twin => CommandKind::Twin,
        Command::Fixed => CommandKind::Fixed,
        Command::CheckKernels => CommandKind::CheckKernels,
        Command::Convergence => CommandKind::Convergence,
    };
    let text = match cli.config.as_ref().map(fs::read_to_string).transpose() {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read config: {e}");
            return ExitCode::from(2);
        }
    };
    let outcome = execute(
        kind,
        text.as_deref(),
        &cli.out,
        CommandOptions {
            eta: cli.eta,
            levels: cli.levels,
        },
    );
    print!("{}", outcome.report);
    ExitCode::from(outcome.exit_code as u8)
}
