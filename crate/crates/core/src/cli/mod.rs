//! Command-line front end: `design`, `optimize`, `sweep`, `simulate`,
//! `analyze` and `report`.
//!
//! Exit codes: 0 success, 2 configuration, 3 IO or file format, 4 numeric
//! failure.

mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{read_stream, scan_seed, Context, OutputFormat};
pub use config::{LoadedConfig, PipelineConfig};

use crate::error::Error;
use crate::sfwm::CouplingObjective;

#[derive(Debug, Parser)]
#[command(name = "ringsource", version, about = "Microring photon-pair source design, simulation and analysis")]
pub struct Cli {
    /// JSON pipeline config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides `run.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Tag-file format for `simulate`; `csv` also adds a flat `report.csv`.
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Json)]
    pub format: OutputFormat,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum ObjectiveArg {
    MaxGeneration,
    MaxEmitted,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ring geometry, Q algebra and rates for each configured device.
    Design,
    /// Optimal external Q at fixed intrinsic Q, with a (Qi, Qe) grid.
    Optimize {
        #[arg(long, value_enum)]
        objective: Option<ObjectiveArg>,
    },
    /// Rate model on a (Qi, Qe) grid.
    Sweep,
    /// Synthetic time tags for a pair-source, HBT or Franson run.
    Simulate,
    /// Estimators over tag files.
    Analyze {
        /// Tag files (`.qtag` binary or `.csv`); defaults to `analysis.inputs`.
        files: Vec<PathBuf>,
    },
    /// Merge the reports found in the output directory.
    Report,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::TooManyEvents { .. } => 2,
        Error::Io(_) | Error::Format { .. } | Error::Json(_) | Error::Csv(_) => 3,
        _ => 4,
    }
}

pub fn execute(cli: &Cli) -> crate::Result<serde_json::Value> {
    let config = match &cli.config {
        Some(path) => LoadedConfig::load(path)?,
        None => LoadedConfig::empty(),
    };
    let seed = cli.seed.unwrap_or_else(|| config.config.run_section().seed);
    std::fs::create_dir_all(&cli.out)?;
    let ctx = Context {
        config,
        seed,
        out: cli.out.clone(),
        format: cli.format,
    };
    match &cli.command {
        Command::Design => commands::design(&ctx),
        Command::Optimize { objective } => commands::optimize(
            &ctx,
            objective.map(|o| match o {
                ObjectiveArg::MaxGeneration => CouplingObjective::MaxGeneration,
                ObjectiveArg::MaxEmitted => CouplingObjective::MaxEmitted,
            }),
        ),
        Command::Sweep => commands::sweep(&ctx),
        Command::Simulate => commands::simulate(&ctx),
        Command::Analyze { files } => commands::analyze(&ctx, files),
        Command::Report => commands::report(&ctx),
    }
}

/// Parses `std::env::args`, runs the command and returns the exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(report) => {
            use std::io::Write;
            // a closed pipe on stdout is not a failure of the command
            let _ = writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(&report).unwrap_or_default());
            0
        }
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    }
}
