//! Command-line harness around the estimation library: simulate systems,
//! run the adaptive estimator, scan excitation windows, and tabulate error
//! fields. Every run writes its artifacts plus a `manifest.json` into the
//! output directory; runs with identical configs produce identical files.
//!
//! Exit codes: 0 success (and affirmative verdicts), 1 usage or configuration
//! error, 2 negative verdict from `pe-check`, 3 numerical failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::CliError;
use config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "rkhs-pe", version, about = "Adaptive estimation and excitation checks for uncertain ODEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the configured system and write the trajectory.
    Simulate(CommonArgs),
    /// Run the adaptive estimator and write histories plus the error field.
    Estimate(CommonArgs),
    /// Scan excitation windows over the trajectory; exit 2 if the lower
    /// excitation constant collapses relative to the upper one.
    PeCheck(CommonArgs),
    /// Tabulate |truth − fitted| on a grid, optionally from a previous run.
    Contour(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration (JSON).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory for artifacts and the manifest.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Recorded in the manifest; the pipelines themselves are deterministic.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Override a config field, e.g. --override horizon=50 or
    /// --override system.lambda=0.1 (repeatable; values parse as JSON,
    /// falling back to a bare string).
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
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

    let (args, run): (
        &CommonArgs,
        fn(&ExperimentConfig, &std::path::Path, u64) -> commands::CmdResult,
    ) = match &cli.command {
        Command::Simulate(a) => (a, commands::cmd_simulate),
        Command::Estimate(a) => (a, commands::cmd_estimate),
        Command::PeCheck(a) => (a, commands::cmd_pe_check),
        Command::Contour(a) => (a, commands::cmd_contour),
    };

    match load_config(args).and_then(|cfg| run(&cfg, &args.out, args.seed)) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(args: &CommonArgs) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| {
        CliError::Config(format!("cannot read {}: {e}", args.config.display()))
    })?;
    let mut value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", args.config.display())))?;

    for ov in &args.overrides {
        apply_override(&mut value, ov)?;
    }

    let text = serde_json::to_string(&value).expect("round-trips");
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        CliError::Config(format!(
            "{}: {} (at {})",
            args.config.display(),
            e.inner(),
            e.path()
        ))
    })
}

/// Set a dotted-path key in the config document. The value is parsed as JSON
/// so `--override pe.delta=6.28` is a number and
/// `--override centers='{"strategy":"explicit","points":[[2,2]]}'` replaces a
/// whole section; anything unparseable is taken as a bare string.
fn apply_override(doc: &mut serde_json::Value, spec: &str) -> Result<(), CliError> {
    let (path, raw) = spec.split_once('=').ok_or_else(|| {
        CliError::Config(format!("--override {spec:?}: expected KEY=VALUE"))
    })?;
    if path.is_empty() {
        return Err(CliError::Config(format!(
            "--override {spec:?}: empty key"
        )));
    }
    let value: serde_json::Value = serde_json::from_str(raw)
        .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));

    let mut node = doc;
    let parts: Vec<&str> = path.split('.').collect();
    for part in &parts[..parts.len() - 1] {
        if !node.is_object() {
            return Err(CliError::Config(format!(
                "--override {spec:?}: {part:?} is not an object field"
            )));
        }
        node = node
            .as_object_mut()
            .expect("checked")
            .entry(part.to_string())
            .or_insert(serde_json::json!({}));
    }
    match node.as_object_mut() {
        Some(map) => {
            map.insert(parts[parts.len() - 1].to_string(), value);
            Ok(())
        }
        None => Err(CliError::Config(format!(
            "--override {spec:?}: parent is not an object"
        ))),
    }
}
