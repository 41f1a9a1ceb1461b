//! Command-line entry point: load an experiment configuration, validate it,
//! run the requested command, and write the result archive.
//!
//! Exit codes: 0 success, 2 validation failure (or config/subcommand
//! mismatch), 3 partial sub-task failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rwre::config::{validate, ExperimentConfig, Severity};
use rwre::runner::{run, RunError};

#[derive(Parser)]
#[command(
    name = "rwre",
    about = "Random walks in perturbative random environments: slab Green \
             operators, exit statistics, ballisticity criteria, and \
             concentration diagnostics.",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the master seed from the seed manifest.
    #[arg(long)]
    seed: Option<u64>,
    /// Fixed worker-thread count (archives are byte-identical across counts).
    #[arg(long)]
    workers: Option<usize>,
    /// Record the run as deterministic (reductions are always ordered).
    #[arg(long)]
    deterministic: bool,
    /// Output root directory (overrides the config's output.dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Validate the configuration and exit without running.
    #[arg(long)]
    check: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo exit statistics over fresh environments.
    Walk(CommonArgs),
    /// Green field of one environment (exact solve or Monte Carlo).
    Green(CommonArgs),
    /// Moment functionals, parameter schedule, and criterion verdicts.
    Criterion(CommonArgs),
    /// Concentration diagnostics for the slab drift functional.
    Concentration(CommonArgs),
    /// Criterion pipeline over a parameter grid, one CSV row per cell.
    Sweep(CommonArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Walk(_) => "walk",
            Command::Green(_) => "green",
            Command::Criterion(_) => "criterion",
            Command::Concentration(_) => "concentration",
            Command::Sweep(_) => "sweep",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Walk(a)
            | Command::Green(a)
            | Command::Criterion(a)
            | Command::Concentration(a)
            | Command::Sweep(a) => a,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = cli.command.name();
    let args = cli.command.args();

    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };
    let mut cfg = match ExperimentConfig::from_json(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: config does not parse: {e}");
            return ExitCode::from(2);
        }
    };
    if cfg.task.command_name() != name {
        eprintln!(
            "error: config declares command \"{}\" but the \"{name}\" subcommand was invoked",
            cfg.task.command_name()
        );
        return ExitCode::from(2);
    }
    if let Some(seed) = args.seed {
        cfg.seeds.master_seed = seed;
    }
    if args.deterministic {
        cfg.deterministic = true;
    }
    if let Some(out) = &args.out {
        cfg.output.dir = out.to_string_lossy().into_owned();
    }

    if args.check {
        let diags = validate(&cfg);
        for d in &diags {
            let tag = match d.severity {
                Severity::Error => "error",
                Severity::Warning => "warning",
            };
            println!("{tag}: {}: {}", d.path, d.message);
        }
        if rwre::config::has_errors(&diags) {
            return ExitCode::from(2);
        }
        println!("config ok");
        return ExitCode::SUCCESS;
    }

    let out_root = PathBuf::from(&cfg.output.dir);
    match run(&cfg, &out_root, args.workers) {
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            println!("run {} -> {}", outcome.archive.run_id, outcome.archive.dir.display());
            if outcome.partial_failures > 0 {
                eprintln!("{} sub-task(s) failed; see report.json", outcome.partial_failures);
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(RunError::Invalid(diags)) => {
            for d in &diags {
                let tag = match d.severity {
                    Severity::Error => "error",
                    Severity::Warning => "warning",
                };
                eprintln!("{tag}: {}: {}", d.path, d.message);
            }
            ExitCode::from(2)
        }
        Err(RunError::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
