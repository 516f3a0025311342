use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use multiphoton::pipeline::{run_command, Command, OutputFormat, PipelineConfig, PipelineError};

#[derive(Parser)]
#[command(name = "multiphoton", version, about = "Quantum-dot GHZ preparation, cavity protection and photon swap simulator")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Plan and execute the GHZ schedule
    Ghz(Common),
    /// Cat-code loss trajectories, with and without recovery
    Protect(Common),
    /// Single-dot photon swap dynamics
    Swap(Common),
    /// Long-time swap probability over (d, gamma)
    Sweep(Common),
    /// Full chain from dots to polarization photons
    Pipeline(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn load(common: &Common) -> Result<PipelineConfig, PipelineError> {
    let base = match &common.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    let mut config = base.with_env(std::env::vars())?;
    if let Some(out) = &common.out {
        config.run.out_dir = out.clone();
    }
    if let Some(seed) = common.seed {
        config.run.base_seed = seed;
    }
    if let Some(w) = common.workers {
        config.run.workers = Some(w);
    }
    if let Some(f) = common.format {
        config.run.format = match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        };
    }
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common) = match &cli.command {
        Cmd::Ghz(c) => (Command::Ghz, c),
        Cmd::Protect(c) => (Command::Protect, c),
        Cmd::Swap(c) => (Command::Swap, c),
        Cmd::Sweep(c) => (Command::Sweep, c),
        Cmd::Pipeline(c) => (Command::Pipeline, c),
    };
    match load(common).and_then(|config| run_command(command, &config)) {
        Ok(report) => {
            println!("{}", report.to_json());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
