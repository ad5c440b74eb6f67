//! psgd-lab: audit the geometry of a preconditioned-SGD experiment, run it,
//! estimate its stability, instantiate the lower-bound constructions, or
//! verify the implemented inequalities.
//!
//! Exit codes: 0 success, 1 verification failure, 2 config error,
//! 3 numeric error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use psgd_lab::error::LabError;
use psgd_lab::verify::Suite;
use psgd_lab_cli::commands;
use psgd_lab_cli::experiment_from_file;

#[derive(Parser)]
#[command(name = "psgd-lab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct CommonArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for replicate- and grid-level parallelism.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Geometry report: alignment constants, step caps, effective dimensions,
    /// admissibility flags.
    Audit(CommonArgs),
    /// Multipass PSGD trajectories with risk and bound columns.
    Run(CommonArgs),
    /// Replace-one stability and generalization gap over an (n, t) grid.
    Stability(CommonArgs),
    /// Hard-instance constructions joined with the exact risk recursion.
    Lowerbounds(CommonArgs),
    /// Run a verification suite: geometry | schedules | oracles | bounds | all.
    Verify {
        suite: String,
        /// Seed for the suites' instance generators.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                LabError::Numeric(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn apply_overrides(args: &CommonArgs) -> Result<psgd_lab_cli::Experiment, LabError> {
    let mut exp = experiment_from_file(&args.config)?;
    if let Some(seed) = args.seed {
        exp.config.seed = seed;
    }
    if let Some(out) = &args.out {
        exp.config.outputs = out.clone();
    }
    Ok(exp)
}

fn dispatch(cli: Cli) -> Result<ExitCode, LabError> {
    match cli.command {
        Command::Audit(args) => {
            let exp = apply_overrides(&args)?;
            let table = commands::audit::run(&exp)?;
            print!("{}", table.render());
            table.write(&exp.config.outputs.join("audit.csv"))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Run(args) => {
            let exp = apply_overrides(&args)?;
            let table = commands::run::run(&exp, args.jobs)?;
            table.write(&exp.config.outputs.join("run.csv"))?;
            println!(
                "wrote {} ({} checkpoints x {} replicates)",
                exp.config.outputs.join("run.csv").display(),
                exp.config.t_max / exp.config.checkpoint_stride.unwrap_or((exp.config.t_max / 16).max(1)) + 1,
                exp.config.replicates
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Stability(args) => {
            let exp = apply_overrides(&args)?;
            let table = commands::stability::run(&exp, args.jobs)?;
            table.write(&exp.config.outputs.join("stability.csv"))?;
            println!("wrote {}", exp.config.outputs.join("stability.csv").display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Lowerbounds(args) => {
            let exp = apply_overrides(&args)?;
            let (bounds, assouad) = commands::lowerbounds::run(&exp, args.jobs)?;
            bounds.write(&exp.config.outputs.join("lowerbounds.csv"))?;
            assouad.write(&exp.config.outputs.join("assouad.csv"))?;
            println!(
                "wrote {} and {}",
                exp.config.outputs.join("lowerbounds.csv").display(),
                exp.config.outputs.join("assouad.csv").display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { suite, seed } => {
            let suite = Suite::parse(&suite).ok_or_else(|| {
                LabError::Parse(format!(
                    "unknown suite {suite:?}; expected geometry | schedules | oracles | bounds | all"
                ))
            })?;
            let outcomes = commands::verify::run(suite, seed)?;
            let ok = commands::verify::print_outcomes(&outcomes);
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}
