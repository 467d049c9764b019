use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use falseconf::commands::{load_config, run_command, Command, Overrides};
use falseconf::config::OutputFormat;
use falseconf::presets::Preset;

#[derive(Parser)]
#[command(name = "falseconf", version, about = "False-confidence simulations for Gaussian means")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Per-replication posterior and valid-IM lower probabilities.
    Simulate(Common),
    /// Empirical CDFs against the uniform and false-confidence pairs.
    Diagnose(Common),
    /// CDF comparison for one of the two worked examples.
    Figure(Common),
    /// Certify the local geometry of a hypothesis' complement at a point.
    Noloco(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// example1 or example2.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long = "n-reps")]
    n_reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    /// Worker threads; outputs do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let (command, common) = match cli.command {
        Cmd::Simulate(c) => (Command::Simulate, c),
        Cmd::Diagnose(c) => (Command::Diagnose, c),
        Cmd::Figure(c) => (Command::Figure, c),
        Cmd::Noloco(c) => (Command::Noloco, c),
    };
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let preset = common.preset.as_deref().map(str::parse::<Preset>).transpose()?;
    let overrides = Overrides {
        preset,
        n_reps: common.n_reps,
        seed: common.seed,
        out: common.out,
        format: common.format,
    };
    let cfg = load_config(common.config.as_deref(), &overrides)?;
    let report = run_command(command, &cfg).with_context(|| format!("{} failed", command.name()))?;
    for path in &report.outputs {
        println!("wrote {}", path.display());
    }
    println!("wrote {}", report.manifest.display());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
