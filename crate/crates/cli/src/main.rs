use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use ssf_lab::commands::output_dir;
use ssf_lab::{load_config, run, CliError, Command, Context};

/// Spectral shift function laboratory.
#[derive(Debug, Parser)]
#[command(name = "ssf-lab", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    verbose: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ssf-lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(args: &Args) -> Result<(), CliError> {
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Io(format!("thread pool: {e}")))?;
    }
    let cfg = load_config(&args.config)?;
    let ctx = Context {
        out: output_dir(args.out.as_deref(), &cfg),
        cfg: &cfg,
        verbose: args.verbose,
    };
    run(args.command, &ctx)
}
