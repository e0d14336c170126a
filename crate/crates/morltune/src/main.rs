use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use morltune::commands;
use morltune::config::Overrides;
use morltune::CliError;

/// Hyperparameter optimization for a tabular multi-objective RL solver.
#[derive(Debug, Parser)]
#[command(name = "morltune", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct RunFlags {
    /// Run configuration file (TOML).
    config: PathBuf,
    #[arg(long)]
    run_id: Option<String>,
    /// Output root; the MORLTUNE_OUT environment variable takes precedence.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    optimizer_seed: Option<u64>,
    #[arg(long)]
    max_trials: Option<usize>,
    #[arg(long)]
    max_parallel_jobs: Option<usize>,
}

impl RunFlags {
    fn overrides(&self) -> Overrides {
        Overrides {
            run_id: self.run_id.clone(),
            output_dir: self.output_dir.clone(),
            optimizer: self.optimizer.clone(),
            optimizer_seed: self.optimizer_seed,
            max_trials: self.max_trials,
            max_parallel_jobs: self.max_parallel_jobs,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Search, validate the best configuration, and analyze the search memory.
    Tune(RunFlags),
    /// Validate one configuration on the validation seeds without searching.
    Validate {
        #[command(flatten)]
        run: RunFlags,
        /// JSON configuration to validate (default: the [baseline] table).
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Paired per-seed comparison of two validated runs.
    Compare {
        run_a: PathBuf,
        run_b: PathBuf,
        /// Where to write compare.csv (default: inside RUN_A).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Hyperparameter importance and correlation over a search memory.
    Analyze {
        run_dir: PathBuf,
        #[arg(long, default_value_t = 4)]
        top_k: usize,
        #[arg(long)]
        forest_seed: Option<u64>,
    },
    /// Print the exact Pareto front of an environment as JSON.
    TrueFront {
        /// Built-in environment name.
        env: Option<String>,
        #[arg(long)]
        env_file: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Tune(flags) => commands::tune(&flags.config, &flags.overrides(), &mut out).map(|_| ()),
        Command::Validate { run, params } => {
            commands::validate(&run.config, &run.overrides(), params.as_deref(), &mut out).map(|_| ())
        }
        Command::Compare { run_a, run_b, out: csv } => {
            commands::compare(&run_a, &run_b, csv.as_deref(), &mut out).map(|_| ())
        }
        Command::Analyze {
            run_dir,
            top_k,
            forest_seed,
        } => commands::analyze(&run_dir, top_k, forest_seed, &mut out).map(|_| ()),
        Command::TrueFront {
            env,
            env_file,
            out: path,
        } => commands::true_front(env.as_deref(), env_file.as_deref(), path.as_deref(), &mut out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = io::stdout().flush();
            eprintln!("morltune: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
