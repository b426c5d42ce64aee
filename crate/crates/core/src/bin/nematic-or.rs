use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, Parser};
use nematic_or::cli::{run, Command};
use nematic_or::config::parse_config_with;

/// Order-reconstruction solver for the Landau-de Gennes model on squares and hexagons.
#[derive(Parser, Debug)]
#[command(name = "nematic-or", version)]
struct Args {
    /// run-scalar | run-full | saddle | sweep-square | sweep-hexagon | eigen-mu | gamma-check | emit-domain
    command: String,
    /// Flat key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (created if missing, must be empty if present).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override a configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn usage() -> String {
    Args::command().render_help().to_string()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let Some(command) = Command::parse(&args.command) else {
        eprintln!("unknown command '{}'\n\n{}", args.command, usage());
        return ExitCode::from(1);
    };
    let text = match &args.config {
        Some(p) => match std::fs::read_to_string(p) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: {}: {e}", p.display());
                return ExitCode::from(1);
            }
        },
        None => String::new(),
    };
    let cfg = match parse_config_with(&text, &args.set) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match run(command, &cfg, &args.out) {
        Ok(status) => ExitCode::from(status.exit_code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
