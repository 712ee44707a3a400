use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use shiftmark_cli::{deterministic_json, execute, ConfigError, RunOptions, Stage};

#[derive(Parser)]
#[command(
    name = "shiftmark",
    version,
    about = "Block-hit statistics of equilibrium states on shifts of finite type"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment description (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Directory receiving the report and any CSV tables.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Override the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the replica count in the config.
    #[arg(long)]
    replicas: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Print the report as JSON on stdout (timing stripped).
    #[arg(long)]
    json: bool,
    /// Also write gap, mark, and cluster tables as CSV.
    #[arg(long)]
    csv: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Check the config and the structure of the transition system.
    Validate(RunArgs),
    /// Solve the Perron problem: pressure, eigendata, equilibrium kernel.
    Thermo(RunArgs),
    /// Survival analysis on the sub-alphabet with exact limit checks.
    Subsystem(RunArgs),
    /// Exact cluster constants against their limits.
    Clusters(RunArgs),
    /// Sample block-hit processes per depth and test the limit law.
    Simulate(RunArgs),
    /// Estimate moments of the rescaled process against analytic values.
    Moments(RunArgs),
    /// Match several copies of the system along the diagonal.
    Match(RunArgs),
    /// Run every stage.
    Full(RunArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (stage, args) = match &cli.command {
        Command::Validate(a) => (Stage::Validate, a),
        Command::Thermo(a) => (Stage::Thermo, a),
        Command::Subsystem(a) => (Stage::Subsystem, a),
        Command::Clusters(a) => (Stage::Clusters, a),
        Command::Simulate(a) => (Stage::Simulate, a),
        Command::Moments(a) => (Stage::Moments, a),
        Command::Match(a) => (Stage::Match, a),
        Command::Full(a) => (Stage::Full, a),
    };
    let options = RunOptions {
        out_dir: args.out.clone(),
        seed: args.seed,
        replicas: args.replicas,
        threads: args.threads,
        emit_csv: args.csv,
    };
    match execute(stage, &args.config, &options) {
        Ok(report) => {
            if args.json {
                println!("{}", deterministic_json(&report));
            } else {
                for check in &report.checks {
                    let state = if check.pass { "PASS" } else { "FAIL" };
                    println!("{state} {} ({})", check.name, check.detail);
                }
                let verdict = if report.pass { "pass" } else { "fail" };
                println!("{}: {verdict}", report.metadata.label);
            }
            if report.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(err) => {
            if err.downcast_ref::<ConfigError>().is_some() {
                eprintln!("{err:#}");
                ExitCode::from(2)
            } else {
                eprintln!("error: {err:#}");
                ExitCode::from(3)
            }
        }
    }
}
