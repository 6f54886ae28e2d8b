use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use metastable_cli::{execute, CliError, ExperimentKind};

#[derive(Parser)]
#[command(
    name = "metastable",
    version,
    about = "Metastability experiments on diffusions and Markov chains"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Eyring-Kramers predictions and Monte Carlo transition times.
    Ek(Args),
    /// Capacities, hitting times and the capacity identity of a chain.
    Capacity(Args),
    /// Trace generator against simulated projected jump rates.
    Trace(Args),
    /// Poisson solve, variational identities and well flatness.
    Poisson(Args),
    /// Limit rates, martingale residual and excursions of a reduced chain.
    Reduce(Args),
    /// Excursion fraction of a diffusion across temperatures.
    SdeExcursion(Args),
}

#[derive(clap::Args)]
struct Args {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed, overriding `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for replica loops.
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let (kind, args) = match cli.command {
        Command::Ek(a) => (ExperimentKind::Ek, a),
        Command::Capacity(a) => (ExperimentKind::Capacity, a),
        Command::Trace(a) => (ExperimentKind::Trace, a),
        Command::Poisson(a) => (ExperimentKind::Poisson, a),
        Command::Reduce(a) => (ExperimentKind::Reduce, a),
        Command::SdeExcursion(a) => (ExperimentKind::SdeExcursion, a),
    };
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("{}", CliError::Runtime(e.to_string()));
            return ExitCode::from(4);
        }
    }
    match execute(kind, &args.config, args.out.as_deref(), args.seed) {
        Ok(summary) => {
            for c in summary.checks.iter().filter(|c| !c.pass) {
                eprintln!("check failed: {} ({})", c.name, c.rule);
            }
            println!(
                "{}: {}",
                summary.experiment,
                if summary.pass { "pass" } else { "FAIL" }
            );
            ExitCode::from(if summary.pass { 0 } else { 1 })
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
