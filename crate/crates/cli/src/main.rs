use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dqubit_cli::{run, write_outputs, CliError, Experiment, RunConfig};

#[derive(Parser)]
#[command(name = "dqubit", version, about = "Detection, tomography and coherence experiments on a D3/2 Zeeman quartet")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// S1/2 detection matrix (σ± at 493 nm).
    DetmatrixS(Flags),
    /// D3/2 detection matrix (five 650 nm settings).
    DetmatrixD(Flags),
    /// Dark states of the 650 nm settings.
    Darkstates(Flags),
    /// Synthetic counts and population reconstruction.
    Tomo(Flags),
    /// Driven quartet evolution and Rabi fit.
    Rabi(Flags),
    /// Rotation preparation of the synthetic qubit and D1 → D2 transfer.
    Synthprep(Flags),
    /// STIRAP transfer d_+3/2 → d_−1/2.
    Stirap(Flags),
    /// Ramsey scan and T2* fit for one qubit.
    Ramsey(Flags),
    /// Calibrated T2* comparison of the three qubits.
    Benchmark(Flags),
}

#[derive(Args)]
struct Flags {
    /// TOML run configuration; defaults are used for missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `trials`.
    #[arg(long, allow_negative_numbers = true)]
    trials: Option<i64>,
    #[arg(long)]
    quiet: bool,
}

impl Command {
    fn split(self) -> (Experiment, Flags) {
        match self {
            Command::DetmatrixS(f) => (Experiment::DetmatrixS, f),
            Command::DetmatrixD(f) => (Experiment::DetmatrixD, f),
            Command::Darkstates(f) => (Experiment::Darkstates, f),
            Command::Tomo(f) => (Experiment::Tomo, f),
            Command::Rabi(f) => (Experiment::Rabi, f),
            Command::Synthprep(f) => (Experiment::Synthprep, f),
            Command::Stirap(f) => (Experiment::Stirap, f),
            Command::Ramsey(f) => (Experiment::Ramsey, f),
            Command::Benchmark(f) => (Experiment::Benchmark, f),
        }
    }
}

fn resolve(experiment: Experiment, flags: &Flags) -> Result<RunConfig, CliError> {
    let mut config = match &flags.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Validation {
                key: "--config".to_string(),
                message: format!("cannot read {}: {e}", path.display()),
            })?;
            RunConfig::from_toml(&text)?
        }
        None => RunConfig::default(),
    };
    match config.experiment {
        Some(e) if e != experiment => {
            return Err(CliError::Validation {
                key: "experiment".to_string(),
                message: format!("config is for `{e}` but the subcommand is `{experiment}`"),
            })
        }
        _ => config.experiment = Some(experiment),
    }
    if let Some(seed) = flags.seed {
        config.seed = seed;
    }
    if let Some(trials) = flags.trials {
        config.trials = trials;
    }
    if let Some(out) = &flags.out {
        config.output.dir = out.to_string_lossy().into_owned();
    }
    Ok(config)
}

fn main() -> ExitCode {
    let (experiment, flags) = Cli::parse().command.split();
    let result = resolve(experiment, &flags).and_then(|config| {
        let output = run(&config)?;
        let written = write_outputs(std::path::Path::new(&config.output.dir), &output)?;
        Ok((output, written))
    });
    match result {
        Ok((output, written)) => {
            for w in &output.warnings {
                eprintln!("warning: {w}");
            }
            if !flags.quiet {
                println!("{} (config {}, seed {})", output.experiment, &output.provenance.config_hash[..12], output.provenance.seed);
                for line in &output.summary {
                    println!("  {line}");
                }
                for path in &written {
                    println!("wrote {}", path.display());
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
