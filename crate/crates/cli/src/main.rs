use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lurekit_cli::commands::{self, SimulateArgs};
use lurekit_cli::config::{self, preset_config};
use lurekit_cli::{CliError, CliResult, SystemConfig};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "lurekit", version, about = "Stability certification and simulation of Lur'e systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Built-in system: example1, rotor or cnn-demo.
    #[arg(long)]
    preset: Option<String>,
    /// JSON system configuration.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Check the hypotheses and report the stability verdicts.
    Certify {
        #[command(flatten)]
        source: Source,
        /// Write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Search for a passivity certificate when the config has none.
        #[arg(long)]
        search: bool,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Simulate from an initial state and write the trajectory as CSV.
    Simulate {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,
        #[arg(long)]
        horizon: Option<f64>,
        /// CSV output; with --batch, run k goes to <stem>_k.<ext>.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Number of runs: x0 plus random states in the ball of radius |x0|.
        #[arg(long)]
        batch: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Lyapunov quantities at a single state.
    AnalyzePoint {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        x: Vec<f64>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Certification plus a simulation summary in one document.
    Report {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        search: bool,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Print the JSON configuration of a system.
    ExportConfig {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn source_config(src: &Source) -> CliResult<SystemConfig> {
    match (&src.preset, &src.config) {
        (Some(name), _) => preset_config(name),
        (None, Some(path)) => config::read(path),
        (None, None) => Err(CliError::Config("pass --preset or --config".into())),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("outputs are serializable");
    std::fs::write(path, text + "\n").map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn emit<T: Serialize>(format: Format, value: &T, text: impl FnOnce(&T) -> String) {
    match format {
        Format::Text => print!("{}", text(value)),
        Format::Json => println!("{}", serde_json::to_string_pretty(value).expect("outputs are serializable")),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Certify { source, out, seed, search, format } => {
            let cfg = source_config(&source)?.load()?;
            let o = commands::certify(&cfg, seed, search)?;
            if let Some(path) = out {
                write_json(&path, &o)?;
            }
            emit(format, &o, commands::render_certify);
        }
        Command::Simulate { source, x0, horizon, out, batch, seed, format } => {
            let cfg = source_config(&source)?.load()?;
            let args = SimulateArgs { x0: x0.as_deref(), horizon, out: out.as_deref(), batch, seed };
            let o = commands::simulate(&cfg, &args)?;
            emit(format, &o, commands::render_simulate);
        }
        Command::AnalyzePoint { source, x, format } => {
            let cfg = source_config(&source)?.load()?;
            let o = commands::analyze_point(&cfg, &x)?;
            emit(format, &o, commands::render_point);
        }
        Command::Report { source, out, seed, search, x0, horizon, format } => {
            let cfg = source_config(&source)?.load()?;
            let args = SimulateArgs { x0: x0.as_deref(), horizon, out: None, batch: None, seed };
            let o = commands::report(&cfg, seed, search, &args)?;
            if let Some(path) = out {
                write_json(&path, &o)?;
            }
            emit(format, &o, commands::render_report);
        }
        Command::ExportConfig { source, out } => {
            let cfg = source_config(&source)?;
            cfg.load()?;
            match out {
                Some(path) => std::fs::write(&path, cfg.to_json() + "\n")
                    .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
                None => println!("{}", cfg.to_json()),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
