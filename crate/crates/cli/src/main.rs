use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod error;

use error::{CliError, EXIT_OK, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "hoss", version, about = "Spike-and-slab Boltzmann machine toolkit")]
struct Cli {
    /// Cap the number of worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

/// Config sources shared by every command: a key=value file, then `--set`
/// overrides, then dedicated flags.
#[derive(Debug, Args, Clone, Default)]
pub struct ConfigArgs {
    /// key=value configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Override one configuration key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = config::parse_set)]
    pub set: Vec<(String, String)>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the color/position toy dataset.
    GenToy(commands::GenToyArgs),
    /// Train a model and write a checkpoint and CSV log.
    Train(commands::TrainArgs),
    /// Check inference and gradients against exact enumeration.
    Verify(commands::VerifyArgs),
    /// Export filters as PPM images.
    Filters(commands::FiltersArgs),
    /// Write mean-field features as CSV.
    Extract(commands::ExtractArgs),
    /// Decodability report and classifier accuracy on labeled data.
    Eval(commands::EvalArgs),
    /// Draw Gibbs samples from a checkpoint.
    Sample(commands::SampleArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::GenToy(a) => commands::gen_toy(a),
        Command::Train(a) => commands::train(a),
        Command::Verify(a) => commands::verify(a),
        Command::Filters(a) => commands::filters(a),
        Command::Extract(a) => commands::extract(a),
        Command::Eval(a) => commands::eval(a),
        Command::Sample(a) => commands::sample(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(e) => {
            eprintln!("hoss: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
