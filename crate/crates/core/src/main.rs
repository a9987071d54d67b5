//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 on internal failures, 2 when a required
//! solve does not converge, 3 on configuration or parse errors.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use geosmooth::casefile::{build_generator, parse_case};
use geosmooth::drivers::{builtin_case, run_case, RunOutcome, BUILTIN_CASES};
use geosmooth::error::{Error, Result};
use geosmooth::verify;

#[derive(Parser)]
#[command(
    name = "geosmooth",
    version,
    about = "Plane-strain elastic-plastic solver with cell-based strain smoothing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an analysis case file.
    Run {
        /// Path to the case file.
        case: PathBuf,
        /// Suppress per-iteration log echo.
        #[arg(long)]
        quiet: bool,
    },
    /// Run a shipped benchmark: cylinder, biaxial, footing, tunnel,
    /// slope, or all.
    Bench {
        /// Benchmark name.
        name: String,
        /// Suppress per-iteration log echo.
        #[arg(long)]
        quiet: bool,
    },
    /// Run the built-in self-check battery.
    Verify,
    /// Write a mesh file from a built-in generator.
    Mesh {
        /// Generator name: rectangle, annulus, footing, tunnel, or slope.
        generator: String,
        /// Generator arguments as key=value pairs.
        args: Vec<String>,
        /// Output mesh file path.
        #[arg(long, short)]
        out: PathBuf,
    },
}

fn parse_kv(args: &[String]) -> Result<BTreeMap<String, f64>> {
    let mut map = BTreeMap::new();
    for arg in args {
        let (key, value) = arg
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got `{arg}`")))?;
        let value: f64 = value
            .parse()
            .map_err(|_| Error::Config(format!("`{key}` needs a numeric value, got `{value}`")))?;
        map.insert(key.to_string(), value);
    }
    Ok(map)
}

fn run_one(case: &geosmooth::casefile::CaseDefinition, echo: bool) -> Result<RunOutcome> {
    let summary = run_case(case, echo)?;
    for note in &summary.notes {
        println!("{note}");
    }
    Ok(summary.outcome)
}

fn dispatch(cli: Cli) -> Result<RunOutcome> {
    match cli.command {
        Command::Run { case, quiet } => {
            let case = parse_case(&case)?;
            run_one(&case, !quiet)
        }
        Command::Bench { name, quiet } => {
            if name == "all" {
                let mut worst = RunOutcome::Success;
                for (key, _) in BUILTIN_CASES {
                    println!("== {key} ==");
                    let case = builtin_case(key)?;
                    if run_one(&case, !quiet)? == RunOutcome::NonConvergence {
                        worst = RunOutcome::NonConvergence;
                    }
                }
                Ok(worst)
            } else {
                let case = builtin_case(&name)?;
                run_one(&case, !quiet)
            }
        }
        Command::Verify => {
            let results = verify::run_all()?;
            let mut failed = 0;
            for r in &results {
                let tag = if r.passed { "  ok  " } else { " FAIL " };
                println!("[{tag}] {}: {}", r.name, r.detail);
                failed += !r.passed as usize;
            }
            println!("{} of {} checks passed", results.len() - failed, results.len());
            if failed > 0 {
                return Err(Error::Numeric(format!("{failed} self checks failed")));
            }
            Ok(RunOutcome::Success)
        }
        Command::Mesh { generator, args, out } => {
            let mesh = build_generator(&generator, &parse_kv(&args)?)?;
            mesh.write_file(&out)?;
            println!(
                "wrote {} ({} nodes, {} elements)",
                out.display(),
                mesh.nodes.len(),
                mesh.elements.len()
            );
            Ok(RunOutcome::Success)
        }
    }
}

fn main() -> ExitCode {
    geosmooth::configure_deterministic();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(RunOutcome::Success) => ExitCode::from(0),
        Ok(RunOutcome::NonConvergence) => {
            eprintln!("finished without convergence (exit code 2)");
            ExitCode::from(2)
        }
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
