use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use mvr_core::runner::{run, Command as RunCommand};
use mvr_core::scenario::load_scenario_with_overrides;

#[derive(Parser)]
#[command(
    name = "mvr",
    version,
    about = "Plans and optimizes multi-impulse transfers between circular orbits \
             under a ground-station visibility window"
)]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Scenario file (JSON).
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory; created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Extra deterministic multi-start perturbations per candidate guess.
    #[arg(long, default_value_t = 0)]
    seeds: u64,
    /// Scenario overrides, dotted.key=value (repeatable).
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum CliCommand {
    /// Build and report the plan at the starting guess, without optimizing.
    Plan(CommonArgs),
    /// Run the projected-descent optimizer and report the best plan.
    Optimize(CommonArgs),
    /// Grid the two-impulse cost over transfer time and angle.
    Scan(CommonArgs),
    /// Propagate tracking variances over window/gap passes.
    Covariance(CommonArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, args) = match &cli.command {
        CliCommand::Plan(a) => (RunCommand::Plan, a),
        CliCommand::Optimize(a) => (RunCommand::Optimize, a),
        CliCommand::Scan(a) => (RunCommand::Scan, a),
        CliCommand::Covariance(a) => (RunCommand::Covariance, a),
    };
    match execute(cmd, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cmd: RunCommand, args: &CommonArgs) -> anyhow::Result<()> {
    let scenario = load_scenario_with_overrides(&args.scenario, &args.overrides)
        .with_context(|| format!("loading scenario {}", args.scenario.display()))?;
    let summary = run(cmd, &scenario, &args.out, args.seeds)
        .with_context(|| format!("running `{}`", cmd.name()))?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}
