use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use smm_cli::{CliError, ExperimentConfig, Runner};

#[derive(Parser)]
#[command(name = "smm", version, about = "Learned mechanical models: data, training, evaluation and swing-up experiments")]
struct Cli {
    /// TOML experiment configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Comma-separated seed list, overriding `seeds`.
    #[arg(long, global = true, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Overwrite outputs produced by a different configuration.
    #[arg(long, global = true)]
    force: bool,
    /// Parallel jobs; each job is single-threaded.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Suppress progress output.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample training and test transitions from the true systems.
    GenData,
    /// Train every (class, size, seed) model.
    Train,
    /// Test MSE and Jacobian error of every trained model.
    Eval,
    /// Optimize swing-up trajectories on the true and learned models.
    Trajopt,
    /// Track the optimized trajectories with TVLQR on the true systems.
    Swingup,
    /// Aggregate metrics and swing-up results into tables.
    Report,
    /// Run every stage in order.
    All,
    /// Print the effective configuration as TOML.
    PrintConfig,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = cli.out {
        cfg.output_dir = out;
    }
    if let Some(seeds) = cli.seeds {
        cfg.seeds = seeds;
    }
    cfg.validate()?;
    if cli.jobs == 0 {
        return Err(CliError::Config("--jobs must be at least 1".into()));
    }
    let runner = Runner { cfg, force: cli.force, jobs: cli.jobs, quiet: cli.quiet };
    match cli.command {
        Command::GenData => runner.gen_data(),
        Command::Train => runner.train(),
        Command::Eval => runner.eval(),
        Command::Trajopt => runner.trajopt(),
        Command::Swingup => runner.swingup(),
        Command::Report => runner.report(),
        Command::All => runner.all(),
        Command::PrintConfig => {
            print!("{}", runner.cfg.to_toml());
            Ok(())
        }
    }
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
