use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use aedes_core::config::{load_config, TaskKind};
use aedes_core::parallel::Strategy;
use aedes_core::tasks::{run_task, sign_check};
use aedes_core::Error;

/// Free-boundary simulator for two-stage mosquito invasion.
#[derive(Parser)]
#[command(name = "aedes", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct TaskArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `[output] directory`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run batches on one thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the free-boundary system.
    Simulate(TaskArgs),
    /// R0 and lambda0 on an interval.
    Threshold(TaskArgs),
    /// Stationary solution on the whole line.
    Steady(TaskArgs),
    /// Spreading / vanishing classification of one run.
    Classify(TaskArgs),
    /// Bracket the sharp threshold in the expansion capability.
    MuStar(TaskArgs),
    /// Comparison-principle experiments.
    Compare(TaskArgs),
    /// Randomised check that 1 - R0 and lambda0 share a sign.
    SignCheck {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        count: usize,
        #[arg(long, default_value_t = 256)]
        resolution: usize,
        /// Write the per-draw report here as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::InvalidProfile(_)
        | Error::AsymmetricFarField { .. }
        | Error::InvalidInitialData(_)
        | Error::InvalidSolverConfig(_) => 2,
        e if e.is_numerical() => 3,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<bool, Error> {
    let (kind, args) = match cli.command {
        Command::Simulate(a) => (TaskKind::Simulate, a),
        Command::Threshold(a) => (TaskKind::Threshold, a),
        Command::Steady(a) => (TaskKind::Steady, a),
        Command::Classify(a) => (TaskKind::Classify, a),
        Command::MuStar(a) => (TaskKind::MuStar, a),
        Command::Compare(a) => (TaskKind::Compare, a),
        Command::SignCheck {
            seed,
            count,
            resolution,
            out,
        } => {
            let rep = sign_check(seed, count, 1e-4, resolution, Strategy::Parallel)?;
            let _ = writeln!(
                std::io::stdout(),
                "seed {seed}: {} draws, {} skipped near R0 = 1, {} sign mismatches",
                rep.cases.len(),
                rep.skipped,
                rep.mismatches()
            );
            if let Some(path) = out {
                std::fs::write(&path, aedes_core::output::to_json(&rep)).map_err(|e| Error::io(&path, e))?;
            }
            return Ok(rep.mismatches() == 0);
        }
    };
    let config = load_config(&args.config)?;
    let out = args
        .out
        .or_else(|| config.output.directory.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let strategy = if args.sequential {
        Strategy::Sequential
    } else {
        Strategy::Parallel
    };
    let result = run_task(kind, &config, &out, strategy)?;
    // Ignore a closed stdout (e.g. piped into `head`).
    let mut stdout = std::io::stdout().lock();
    let _ = write!(stdout, "{}", result.summary);
    for f in &result.files {
        let _ = writeln!(stdout, "wrote {}", f.display());
    }
    Ok(result.ok)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
