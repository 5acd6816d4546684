use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use clmlab_cli::commands::{cmd_simulate, cmd_steady, cmd_sweep, output_root};
use clmlab_cli::verify::cmd_verify;
use clmlab_cli::CliResult;

/// Nonlocal vorticity model laboratory.
#[derive(Parser)]
#[command(name = "clmlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Configuration file (TOML with dotted keys).
    config: PathBuf,
    /// Override a config key, e.g. `--set sim.dt0=0.005`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_override)]
    overrides: Vec<(String, String)>,
    /// Root for relative output directories [default: $CLMLAB_OUTPUT_ROOT or .]
    #[arg(long)]
    output_root: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a model. Exit 0 on completion, 2 on detected blow-up, 1 on error.
    Simulate(RunArgs),
    /// Solve the restricted steady problem on the rectangle.
    Steady(RunArgs),
    /// Run a verification suite and print its pass/fail table.
    Verify {
        /// One of: multipliers, ellipse, blowup, steady, forms, reconstruction, skew.
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run one simulation per value of a config key, in parallel.
    Sweep {
        config: PathBuf,
        /// Dotted key to vary, e.g. `sim.dt0`.
        #[arg(long)]
        key: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long)]
        output_root: Option<PathBuf>,
    },
}

fn parse_override(s: &str) -> Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected KEY=VALUE, got '{s}'"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

fn run(cli: Cli) -> CliResult<u8> {
    match cli.command {
        Command::Simulate(a) => {
            Ok(cmd_simulate(&a.config, &a.overrides, &output_root(a.output_root.as_deref()))?.exit_code())
        }
        Command::Steady(a) => cmd_steady(&a.config, &a.overrides, &output_root(a.output_root.as_deref())).map(|_| 0),
        Command::Verify { suite, seed } => Ok(if cmd_verify(&suite, seed)? { 0 } else { 1 }),
        Command::Sweep { config, key, values, output_root: root } => {
            cmd_sweep(&config, &key, &values, &output_root(root.as_deref()))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
