use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod error;

use commands::Outputs;
use config::RunConfig;
use error::{CliError, CliResult};

/// Bertrand pricing games with finite capacities.
#[derive(Parser)]
#[command(name = "bertrand", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory, created if missing.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,

    /// Base seed for stochastic simulation.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Only print warnings and errors.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Static Nash equilibrium for the configured costs.
    Static,
    /// Monopoly value and policy curves.
    Monopoly,
    /// Small-gamma corrections and their equation residuals.
    Asymptotic,
    /// Solve the coupled value equations on a grid.
    Hjb,
    /// Deterministic or stochastic capacity paths.
    Simulate,
    /// HJB policies along a quarter circle.
    ThetaSlice,
}

fn run(cli: &Cli) -> CliResult<Outputs> {
    let Some(path) = &cli.config else {
        return Err(CliError::Config("--config is required".into()));
    };
    let cfg = RunConfig::load(path)?;
    if !matches!(cli.command, Command::Simulate) {
        commands::no_seed(cli.seed)?;
    }
    match cli.command {
        Command::Static => commands::cmd_static(&cfg),
        Command::Monopoly => commands::cmd_monopoly(&cfg),
        Command::Asymptotic => commands::cmd_asymptotic(&cfg),
        Command::Hjb => commands::cmd_hjb(&cfg),
        Command::Simulate => commands::cmd_simulate(&cfg, cli.seed),
        Command::ThetaSlice => commands::cmd_theta_slice(&cfg),
    }
}

fn write_all(dir: &Path, out: &Outputs) -> CliResult<()> {
    fn io(p: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
        move |source| CliError::Io { path: p.display().to_string(), source }
    }
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    for (name, bytes) in &out.files {
        let path = dir.join(name);
        std::fs::write(&path, bytes).map_err(io(&path))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli).and_then(|out| {
        write_all(&cli.out, &out)?;
        Ok(out)
    });
    match result {
        Ok(out) => {
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            if !cli.quiet {
                for n in &out.notes {
                    eprintln!("{n}");
                }
                for (name, _) in &out.files {
                    eprintln!("wrote {}", cli.out.join(name).display());
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
