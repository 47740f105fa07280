use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use conefix::scenarios::{Overrides, Registry, ScenarioError, ScenarioReport};

#[derive(Parser)]
#[command(
    name = "conefix",
    version,
    about = "Run fixed-point scenarios in cone metric spaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List registered scenarios.
    List,
    /// Run one scenario, or all of them with --all.
    Run(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(required_unless_present = "all", conflicts_with = "all")]
    scenario: Option<String>,
    #[arg(long)]
    all: bool,
    /// Picard tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Last sequence index solved.
    #[arg(long)]
    horizon: Option<usize>,
    /// Grid nodes for ODE scenarios (odd).
    #[arg(long = "grid-pts")]
    grid_pts: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "conefix-out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

const EXIT_FAILED: u8 = 1;
const EXIT_INVALID: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let registry = Registry::builtin();
    match cli.command {
        Command::List => {
            for s in registry.list() {
                println!("{:<14} [{}] {}", s.name, s.anchor, s.description);
            }
            ExitCode::SUCCESS
        }
        Command::Run(args) => run(&registry, &args),
    }
}

fn run(registry: &Registry, args: &RunArgs) -> ExitCode {
    let overrides = Overrides {
        tol: args.tol,
        horizon: args.horizon,
        grid_pts: args.grid_pts,
        seed: args.seed,
    };
    let results = match &args.scenario {
        Some(name) => registry
            .prepare(name, &overrides)
            .map(|(s, cfg)| vec![s.run_with(cfg)]),
        None => registry.run_all(&overrides),
    };
    let results = match results {
        Ok(r) => r,
        Err(e) => return fail(&e),
    };
    if let Err(e) = fs::create_dir_all(&args.out) {
        eprintln!("error: cannot create {}: {e}", args.out.display());
        return ExitCode::from(EXIT_FAILED);
    }
    let mut all_pass = true;
    for result in results {
        match result {
            Ok(report) => {
                for line in report.summary_lines() {
                    println!("{line}");
                }
                let verdict = if report.verdict { "pass" } else { "fail" };
                println!("verdict {}: {verdict}", report.scenario);
                if let Err(e) = write_report(&report, &args.out, args.format) {
                    eprintln!("error: writing {} output: {e}", report.scenario);
                    all_pass = false;
                }
                all_pass &= report.verdict;
            }
            Err(e) => {
                eprintln!("error: {e}");
                all_pass = false;
            }
        }
    }
    if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAILED)
    }
}

fn fail(e: &ScenarioError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(if e.is_invalid_spec() {
        EXIT_INVALID
    } else {
        EXIT_FAILED
    })
}

fn write_report(report: &ScenarioReport, dir: &Path, format: Format) -> std::io::Result<()> {
    let body = match format {
        Format::Csv => report.to_csv(),
        Format::Json => report.to_json(),
    };
    fs::write(
        dir.join(format!("{}.{}", report.scenario, format.extension())),
        body,
    )?;
    for a in &report.artifacts {
        fs::write(
            dir.join(format!("{}_{}", report.scenario, a.suffix)),
            &a.contents,
        )?;
    }
    Ok(())
}
