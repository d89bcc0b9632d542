use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use bmc_cli::{parse_scenario_with, run_scenario, Overrides, TaskKindTag};
use clap::{ArgAction, Args, Parser, Subcommand};

/// Spectral, generating-function and Monte Carlo experiments on branching
/// Markov chains. Set BMC_WORKERS to fix the number of simulation threads.
#[derive(Parser)]
#[command(name = "bmc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every task of the scenario.
    Run(Common),
    /// Analytic phase verdicts.
    Classify(Common),
    /// Spectral radius by truncation radius.
    Spectral(Common),
    /// Green and first-return coefficients, and the root of U.
    Series(Common),
    /// Monte Carlo estimators.
    Simulate(Common),
    /// Analytic and empirical minimal speed.
    Speed(Common),
    /// Phase verdicts over a grid of means.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario document (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the scenario's `out`, then `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<u64>,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    pop_cap: Option<u64>,
    #[arg(long)]
    radius: Option<u32>,
    #[arg(long)]
    tol: Option<f64>,
    /// Reject unknown keys in the scenario.
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    strict: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (only, common) = match cli.command {
        Command::Run(c) => (None, c),
        Command::Classify(c) => (Some(TaskKindTag::Classify), c),
        Command::Spectral(c) => (Some(TaskKindTag::Spectral), c),
        Command::Series(c) => (Some(TaskKindTag::Series), c),
        Command::Simulate(c) => (Some(TaskKindTag::Simulate), c),
        Command::Speed(c) => (Some(TaskKindTag::Speed), c),
        Command::Sweep(c) => (Some(TaskKindTag::Sweep), c),
    };
    match run(only, common) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(only: Option<TaskKindTag>, c: Common) -> anyhow::Result<bool> {
    let ov = Overrides {
        seed: c.seed,
        replicas: c.replicas,
        horizon: c.horizon,
        pop_cap: c.pop_cap,
        radius: c.radius,
        tol: c.tol,
    };
    let text = std::fs::read_to_string(&c.config).with_context(|| format!("reading {}", c.config.display()))?;
    let mut scenario = parse_scenario_with(&text, c.strict, &ov)?;
    if let Some(kind) = only {
        scenario = scenario.select(kind, &ov)?;
    }
    for w in &scenario.warnings {
        eprintln!("warning: {w}");
    }
    let out = c.out.or_else(|| scenario.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let report = run_scenario(&scenario, &out)?;
    for t in &report.manifest.tasks {
        match &t.error {
            None => println!("{:<10} {:<24} ok     {}", t.kind, t.id, t.files.join(" ")),
            Some(e) => println!("{:<10} {:<24} error  {e}", t.kind, t.id),
        }
    }
    println!("manifest: {}", out.join(bmc_cli::MANIFEST).display());
    Ok(!report.failed())
}
