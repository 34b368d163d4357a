//! `tiltquad`: simulation and hover stability analysis for quadcopters with
//! tilted rotors.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, ValueEnum};
use serde_json::json;

use commands::{write_json, Command, RunError};
use config::{parse_config, ConfigFile, Overrides, RunConfig};

const THREADS_VAR: &str = "TILTQUAD_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Toggle {
    On,
    Off,
}

impl Toggle {
    fn enabled(self) -> bool {
        self == Toggle::On
    }
}

#[derive(Debug, Parser)]
#[command(name = "tiltquad", version, about)]
struct Cli {
    command: Command,
    /// JSON run configuration; the built-in reference vehicle when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for artifacts; created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Apply one of the six preset layouts (1-6).
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=6))]
    preset: Option<u8>,
    #[arg(long)]
    dampers: Option<Toggle>,
    /// Propeller gyroscopic coupling, in simulation and linearization.
    #[arg(long)]
    gyro: Option<Toggle>,
}

fn fail(stage: &str, message: impl std::fmt::Display) -> ExitCode {
    eprintln!("tiltquad: {stage}: {message}");
    ExitCode::FAILURE
}

fn load(cli: &Cli) -> Result<(RunConfig, String), String> {
    let (file, source) = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            let file = parse_config(&text).map_err(|e| format!("{}: {e}", path.display()))?;
            (file, path.display().to_string())
        }
        None => (ConfigFile::reference(), "built-in reference".to_string()),
    };
    let overrides = Overrides {
        preset: cli.preset.map(usize::from),
        dampers: cli.dampers.map(Toggle::enabled),
        gyro: cli.gyro.map(Toggle::enabled),
    };
    let run = file.resolve(overrides).map_err(|e| e.to_string())?;
    Ok((run, source))
}

fn configure_threads() -> Result<Option<usize>, String> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(None);
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| format!("{THREADS_VAR} must be a positive integer, got {value:?}"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())?;
    Ok(Some(n))
}

fn execute(cli: &Cli, run: &RunConfig, source: &str, out: &Path) -> Result<serde_json::Value, (String, String)> {
    let started = Instant::now();
    let outcome = commands::run(cli.command, run, out).map_err(|e| match e {
        RunError::Core(e) => (cli.command.module().to_string(), e.to_string()),
        RunError::Io(e) => ("io".to_string(), e.to_string()),
    })?;
    let mut artifacts = outcome.artifacts;
    let metadata = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "command": cli.command.name(),
        "config_source": source,
        "resolved_config": &run.resolved,
        "threads": rayon::current_num_threads(),
        "wall_time_s": started.elapsed().as_secs_f64(),
        "artifacts": &artifacts,
    });
    artifacts.push(write_json(out, "run_metadata.json", &metadata).map_err(|e| ("io".to_string(), e.to_string()))?);
    Ok(json!({
        "command": cli.command.name(),
        "status": "ok",
        "out": out.display().to_string(),
        "artifacts": artifacts,
        "result": outcome.result,
        "resolved_config": &run.resolved,
    }))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        return fail("environment", e);
    }
    let (run, source) = match load(&cli) {
        Ok(v) => v,
        Err(e) => return fail("config", e),
    };
    if let Err(e) = std::fs::create_dir_all(&cli.out) {
        return fail("io", format!("{}: {e}", cli.out.display()));
    }
    match execute(&cli, &run, &source, &cli.out) {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
            ExitCode::SUCCESS
        }
        Err((stage, message)) => fail(&stage, message),
    }
}
