mod bench;
mod certify;
mod run;
mod svg;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// Failures grouped by exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Exit 1: bad config, bad arguments, missing declarations.
    #[error("{0}")]
    Config(String),
    /// Exit 2: the run itself failed, or the certificate does not apply.
    #[error("{0}")]
    Solve(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Solve(_) => 2,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "palflow", version, about = "Proximal augmented Lagrangian flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate the flow and write the trajectory, a manifest and plots.
    Solve(RunArgs),
    /// Check the structural conditions and print the certificate constants.
    Certify(RunArgs),
    /// Run a benchmark suite: `examples` or `invariants`.
    Bench {
        suite: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Args, Debug, Clone, Default)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = "palflow-out")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long, value_parser = ["euler", "rk4", "rk45"])]
    pub method: Option<String>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub stop_kkt: Option<f64>,
    #[arg(long)]
    pub svg: bool,
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("PALFLOW_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("PALFLOW_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot size the thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = init_threads().and_then(|()| match cli.command {
        Command::Solve(a) => run::solve(&a),
        Command::Certify(a) => certify::certify(&a),
        Command::Bench { suite, out, seed } => bench::bench(&suite, out.as_deref(), seed.unwrap_or(0)),
    });
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = if e.code() == 1 { "error" } else { "failed" };
            eprintln!("palflow: {kind}: {e}");
            ExitCode::from(e.code())
        }
    }
}
