use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use legrad_cli::config::{parse_sources, ConfigError, Parsed};
use legrad_cli::experiments::{run_experiment, RunError};
use legrad_cli::ingest;

#[derive(Parser)]
#[command(name = "legrad", version, about = "Variational inference with local expectation gradients")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Configuration file of KEY=VALUE lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides applied after the file.
    #[arg(value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured experiment and write its output directory.
    Run(ConfigArgs),
    /// Fixed-point gradient variance study (sets experiment=variance-study).
    VarianceStudy(ConfigArgs),
    /// Print the resolved configuration with all defaults filled in.
    PrintConfig(ConfigArgs),
    /// Summarize an IDX image/label pair, optionally writing a balanced subset.
    IngestIdx {
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, requires_all = ["out_images", "out_labels"])]
        per_class: Option<usize>,
        #[arg(long)]
        out_images: Option<PathBuf>,
        #[arg(long)]
        out_labels: Option<PathBuf>,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("reading {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Idx(#[from] legrad_core::targets::idx::IdxError),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Run(RunError::Core(legrad_core::Error::Divergence { .. })) => 3,
            _ => 1,
        }
    }
}

fn load(args: &ConfigArgs, forced: Option<&str>) -> Result<Parsed, CliError> {
    let file = match &args.config {
        Some(path) => fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.clone(),
            source,
        })?,
        None => String::new(),
    };
    let mut overrides = args.overrides.join("\n");
    if let Some(line) = forced {
        overrides.push('\n');
        overrides.push_str(line);
    }
    let parsed = parse_sources(&[&file, &overrides])?;
    for w in &parsed.warnings {
        eprintln!("warning: {w}");
    }
    Ok(parsed)
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run(args) => report(load(&args, None)?),
        Command::VarianceStudy(args) => report(load(&args, Some("experiment=variance-study"))?),
        Command::PrintConfig(args) => {
            print!("{}", load(&args, None)?.config.emit());
            Ok(())
        }
        Command::IngestIdx {
            images,
            labels,
            per_class,
            out_images,
            out_labels,
        } => {
            let (images, labels) = ingest::load(&images, &labels)?;
            print!("{}", ingest::summarize(&images, &labels));
            if let (Some(n), Some(oi), Some(ol)) = (per_class, out_images, out_labels) {
                let (sub, kept) = ingest::balanced_subset(&images, &labels, n);
                ingest::write_subset(&sub, &kept, &oi, &ol)?;
                println!("wrote {} images to {}", kept.len(), oi.display());
            }
            Ok(())
        }
    }
}

fn report(parsed: Parsed) -> Result<(), CliError> {
    let summary = run_experiment(&parsed.config)?;
    println!("output: {}", summary.dir.display());
    println!("total_f_evaluations: {}", summary.total_f_evaluations);
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
