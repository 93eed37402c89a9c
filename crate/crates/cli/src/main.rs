//! `magloop`: find, continue and certify closed curves of prescribed
//! geodesic curvature on a conformal 2-sphere.

mod artifacts;
mod commands;
mod config;
mod plot;

use clap::Parser;
use commands::{run_command, CliError, Command};
use std::path::PathBuf;
use std::process::ExitCode;

/// Exit codes: 0 success, 1 other error, 2 configuration error,
/// 3 solver nonconvergence, 4 blocked continuation, 5 certification failure.
#[derive(Parser, Debug)]
#[command(name = "magloop", version, about)]
struct Cli {
    /// What to run.
    #[arg(value_enum)]
    command: Command,
    /// TOML run configuration.
    #[arg(short, long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the configuration.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Loop file for `verify` and `plot`; overrides the configuration.
    #[arg(long = "loop")]
    loop_file: Option<PathBuf>,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&cli.config)
        .map_err(|e| CliError::Other(anyhow::anyhow!("reading {}: {e}", cli.config.display())))?;
    let base = cli.config.parent().map(PathBuf::from).unwrap_or_default();
    let mut cfg = config::parse_config(&text, &base)?;
    if let Some(l) = &cli.loop_file {
        cfg.verify_loop = Some(l.clone());
        cfg.plot_loop = Some(l.clone());
    }
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| base.join("out"));
    log::info!("running {} into {}", cli.command.name(), out.display());
    run_command(cli.command, &cfg, &text, &out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(e.exit_code())
        }
    }
}
