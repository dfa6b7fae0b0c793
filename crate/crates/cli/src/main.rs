//! Command-line front end for the toggle-neuron brain simulator.
//!
//! Loads a run configuration, optionally preloads a long-term memory
//! snapshot and a stimulus trace, runs the sense/recall loop for a fixed
//! number of half-periods, and writes the run log plus any requested
//! artifacts (memory snapshot, adder microcode listing).
//!
//! Exit codes: 1 configuration error, 2 stimulus error, 3 snapshot error,
//! 4 runtime error.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use togglebrain_core::{Brain, Config, LtmStore, StimulusTrace};

#[derive(Parser)]
#[command(
    name = "togglebrain",
    version,
    about = "Deterministic simulator of a toggle-neuron brain"
)]
struct Args {
    /// Run configuration file (required).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Stimulus trace file; omitted means a silent environment.
    #[arg(long, value_name = "PATH")]
    stimuli: Option<PathBuf>,

    /// Number of oscillator half-periods to simulate.
    #[arg(long, value_name = "N", default_value_t = 0)]
    cycles: u64,

    /// Random seed; overrides the seed in the configuration file.
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,

    /// Long-term memory snapshot to preload before the run.
    #[arg(long, value_name = "PATH")]
    snapshot_in: Option<PathBuf>,

    /// Where to write the long-term memory snapshot after the run.
    #[arg(long, value_name = "PATH")]
    snapshot_out: Option<PathBuf>,

    /// Run-log destination; standard output when omitted.
    #[arg(long, value_name = "PATH")]
    log: Option<PathBuf>,

    /// Write the generated adder microcode to this file, then run normally.
    #[arg(long, value_name = "PATH")]
    dump_microcode: Option<PathBuf>,
}

/// Error carrying the process exit code alongside the message.
struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }

    fn stimuli(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    fn snapshot(message: impl Into<String>) -> Self {
        Self { code: 3, message: message.into() }
    }

    fn runtime(message: impl Into<String>) -> Self {
        Self { code: 4, message: message.into() }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message);
            ExitCode::from(err.code)
        }
    }
}

fn run(args: Args) -> Result<(), CliError> {
    let config_path = args
        .config
        .ok_or_else(|| CliError::config("--config is required"))?;
    let config_text = fs::read_to_string(&config_path).map_err(|e| {
        CliError::config(format!("{}: {e}", config_path.display()))
    })?;
    let mut config = Config::parse_text(&config_text)
        .map_err(|e| CliError::config(format!("{}: {e}", config_path.display())))?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }

    let store = match &args.snapshot_in {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::snapshot(format!("{}: {e}", path.display())))?;
            let store = LtmStore::load_snapshot(&text)
                .map_err(|e| CliError::snapshot(format!("{}: {e}", path.display())))?;
            if store.width() != config.attributes {
                return Err(CliError::snapshot(format!(
                    "{}: snapshot is {} attributes wide but the configuration declares {}",
                    path.display(),
                    store.width(),
                    config.attributes
                )));
            }
            store
        }
        None => LtmStore::new(config.attributes, config.capacity),
    };

    let trace = match &args.stimuli {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::stimuli(format!("{}: {e}", path.display())))?;
            StimulusTrace::parse_text(&text, config.attributes)
                .map_err(|e| CliError::stimuli(format!("{}: {e}", path.display())))?
        }
        None => StimulusTrace::default(),
    };

    let mut brain = Brain::new(config, store)
        .map_err(|e| CliError::config(format!("{}: {e}", config_path.display())))?;

    if let Some(path) = &args.dump_microcode {
        fs::write(path, brain.microcode().to_text())
            .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
    }

    let log = brain
        .run(&trace, args.cycles)
        .map_err(|e| CliError::runtime(e.to_string()))?;

    if log.capacity_misses() > 0 {
        eprintln!(
            "warning: {} image(s) dropped because long-term memory is full",
            log.capacity_misses()
        );
    }

    match &args.log {
        Some(path) => fs::write(path, log.text())
            .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?,
        None => print!("{}", log.text()),
    }

    if let Some(path) = &args.snapshot_out {
        fs::write(path, brain.ltm().save_snapshot())
            .map_err(|e| CliError::snapshot(format!("{}: {e}", path.display())))?;
    }

    Ok(())
}
