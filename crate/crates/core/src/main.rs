//! Command-line entry point.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use higgslab::cli::commands::{self, exit_code_for_error};
use higgslab::cli::{config, load_config};

/// Environment variable providing the default output directory.
const OUT_ENV: &str = "HIGGSLAB_OUT";

#[derive(Parser)]
#[command(
    name = "higgslab",
    about = "Constrained dynamics lab for curved oscillator and Kepler systems",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Experiment configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (defaults to $HIGGSLAB_OUT).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for randomized initial data.
    #[arg(long)]
    seed: Option<u64>,
    /// Config overrides, dotted path = TOML value (repeatable).
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a system and write the trajectory.
    Simulate(CommonArgs),
    /// Integrate and measure invariant drift for the configured generators.
    Drift(CommonArgs),
    /// Push a flat oscillator trajectory through a Levi-Civita or KS map.
    Reduce(CommonArgs),
    /// Compare analytic gradients against central finite differences.
    Gradcheck(CommonArgs),
    /// Look for the earliest phase-space return (orbit closure).
    Closure(CommonArgs),
}

fn run(args: &CommonArgs, which: &str) -> Result<i32, higgslab::Error> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| {
        higgslab::Error::Invalid(format!("cannot read {}: {e}", args.config.display()))
    })?;
    let overrides: Vec<(String, String)> = args
        .overrides
        .iter()
        .map(|s| config::parse_override(s))
        .collect::<Result<_, _>>()?;
    let cfg = load_config(&text, &overrides)?;
    let out_dir = args
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .ok_or_else(|| {
            higgslab::Error::Invalid(format!("no output directory: pass --out or set {OUT_ENV}"))
        })?;
    let report = match which {
        "simulate" => commands::cmd_simulate(&cfg, &out_dir, args.seed)?,
        "drift" => commands::cmd_drift(&cfg, &out_dir, args.seed)?,
        "reduce" => commands::cmd_reduce(&cfg, &out_dir, args.seed)?,
        "gradcheck" => commands::cmd_gradcheck(&cfg, &out_dir, args.seed)?,
        "closure" => commands::cmd_closure(&cfg, &out_dir, args.seed)?,
        _ => unreachable!(),
    };
    eprintln!("{which}: {}", report.verdict);
    if which == "gradcheck" && report.verdict == "fail" {
        if let Some(worst) = report
            .gradcheck
            .iter()
            .filter(|r| !r.pass)
            .max_by(|a, b| a.max_rel_err.total_cmp(&b.max_rel_err))
        {
            eprintln!(
                "gradcheck failure: term {} rel err {:.3e} at {:?}",
                worst.term, worst.max_rel_err, worst.worst_point
            );
        }
        return Ok(5);
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, which) = match &cli.command {
        Command::Simulate(a) => (a, "simulate"),
        Command::Drift(a) => (a, "drift"),
        Command::Reduce(a) => (a, "reduce"),
        Command::Gradcheck(a) => (a, "gradcheck"),
        Command::Closure(a) => (a, "closure"),
    };
    match run(args, which) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for_error(&e) as u8)
        }
    }
}
