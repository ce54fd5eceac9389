use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use slag_glue_cli::{run_file, Experiment, Overrides, EXIT_CONFIG};

#[derive(Parser)]
#[command(name = "slag-glue", version, about = "Numerical experiments on a glued special Lagrangian neck")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// One of lagrangian_check, error_scaling, spectral_sweep, elliptic_constants,
        /// mean_curvature, solve.
        #[arg(long)]
        experiment: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG as u8 } else { 0 });
        }
    };
    let Command::Run {
        config,
        output_dir,
        seed,
        experiment,
    } = cli.command;
    let experiment = match experiment.as_deref().map(|name| Experiment::parse(name).ok_or(name)) {
        None => None,
        Some(Ok(e)) => Some(e),
        Some(Err(name)) => {
            eprintln!("error: unknown experiment {name:?}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    let overrides = Overrides {
        output_dir,
        seed,
        experiment,
    };
    ExitCode::from(run_file(&config, &overrides) as u8)
}
