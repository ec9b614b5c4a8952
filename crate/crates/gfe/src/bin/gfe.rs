//! Benchmark command line: run refinement studies of the built-in harmonic
//! map problems and write CSV convergence tables.
//!
//! Exit codes: 0 on success, 2 when a solve fails to converge, 3 on
//! configuration errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gfe::bench::{self, FileConfig, RunConfig};
use gfe::GfeError;

#[derive(Parser)]
#[command(name = "gfe", version, about = "geodesic finite element benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem over a refinement sequence and report convergence.
    Bench(StudyArgs),
    /// Measure interpolation-only errors of a problem's reference map.
    InterpStudy(StudyArgs),
    /// List the built-in problems.
    ListProblems,
}

#[derive(Args)]
struct StudyArgs {
    /// Problem name (see list-problems).
    #[arg(long)]
    problem: Option<String>,
    /// Lagrange order of the discrete space (1 or 2).
    #[arg(long)]
    order: Option<usize>,
    /// Number of refinement levels (at least 2).
    #[arg(long)]
    levels: Option<usize>,
    /// CSV output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Quadrature degree override for the error integrals.
    #[arg(long)]
    quad_degree: Option<usize>,
    /// Seed for the randomized validation checks.
    #[arg(long)]
    seed: Option<u64>,
    /// TOML configuration file with [problem], [solver], [output] tables;
    /// explicit flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn build_run_config(args: &StudyArgs) -> Result<RunConfig, GfeError> {
    let mut config = RunConfig::new(args.problem.as_deref().unwrap_or(""));
    config.order = args.order;
    config.levels = args.levels;
    config.out = args.out.clone();
    config.quad_degree = args.quad_degree;
    config.seed = args.seed.unwrap_or(0);
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GfeError::Config(format!("read {}: {e}", path.display())))?;
        FileConfig::parse(&text)?.apply(&mut config)?;
    }
    if config.problem.is_empty() {
        return Err(GfeError::Config(
            "a problem name is required (--problem or --config)".into(),
        ));
    }
    Ok(config)
}

fn exit_code_for(err: &GfeError) -> ExitCode {
    match err {
        GfeError::NoConvergence { .. } | GfeError::LineSearchStall(_) => ExitCode::from(2),
        _ => ExitCode::from(3),
    }
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("GFE_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0u8,
                _ => 3,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    match cli.command {
        Command::ListProblems => {
            for p in bench::problem_registry() {
                println!("{:<4} {}", p.name, p.description);
            }
            ExitCode::SUCCESS
        }
        Command::Bench(args) => {
            let config = match build_run_config(&args) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(3);
                }
            };
            match bench::run(&config) {
                Ok(outcome) => {
                    print!("{}", outcome.csv);
                    if let Some(path) = &config.out {
                        eprintln!("wrote {}", path.display());
                    }
                    if outcome.all_converged {
                        ExitCode::SUCCESS
                    } else {
                        eprintln!("error: at least one level did not converge");
                        ExitCode::from(2)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    exit_code_for(&e)
                }
            }
        }
        Command::InterpStudy(args) => {
            let config = match build_run_config(&args) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(3);
                }
            };
            match bench::interpolation_study(&config) {
                Ok(outcome) => {
                    print!("{}", outcome.csv);
                    if let Some(path) = &config.out {
                        eprintln!("wrote {}", path.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    exit_code_for(&e)
                }
            }
        }
    }
}
