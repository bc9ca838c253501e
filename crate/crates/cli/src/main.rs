use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gaugeops_cli::{load_scenario, run_eta, run_evolve, run_verify, LoadError, Scenario};

/// Verification toolkit for first-order operators L + q.
#[derive(Parser)]
#[command(name = "gaugeops", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every applicable check and print a report.
    Verify {
        /// Scenario file, or `example1` / `example2`.
        scenario: String,
        /// Tolerance for the symbolic identity checks.
        #[arg(long)]
        tol: Option<f64>,
        /// Quadrature points per axis.
        #[arg(long)]
        quad_points: Option<usize>,
        /// Also write the report (without timings) to this file.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Replace the scenario's potential (an expression or `half_div`).
        #[arg(long, allow_hyphen_values = true)]
        potential: Option<String>,
    },
    /// Sample V_t psi, U_t psi and eta V_t eta^-1 psi on a grid.
    Evolve {
        scenario: String,
        #[arg(long, allow_hyphen_values = true)]
        psi: String,
        /// Comma-separated times.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        times: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
        /// Grid points per axis over the sample box.
        #[arg(long, default_value_t = 64)]
        grid: usize,
    },
    /// Solve for the gauge function on a 1-D grid.
    Eta {
        scenario: String,
        #[arg(long)]
        grid: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(source: &str) -> Result<Scenario, LoadError> {
    load_scenario(source)
}

fn fail(message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Verify { scenario, tol, quad_points, report, potential } => {
            let mut s = match load(&scenario) {
                Ok(s) => s,
                Err(e) => return fail(e),
            };
            if let Some(text) = potential {
                s = match s.with_potential(&text) {
                    Ok(s) => s,
                    Err(e) => return fail(e),
                };
            }
            if let Some(t) = tol {
                if !(t > 0.0) {
                    return fail(format!("--tol must be positive, got {t}"));
                }
                s.tolerances.identity = t;
            }
            if let Some(n) = quad_points {
                s.quad_points = n;
            }
            let result = match run_verify(&s) {
                Ok(r) => r,
                Err(e) => return fail(e),
            };
            print!("{}", result.render(true));
            if let Some(path) = report {
                if let Err(e) = std::fs::write(&path, result.render(false)) {
                    return fail(format!("cannot write {}: {e}", path.display()));
                }
            }
            ExitCode::from(result.exit_code() as u8)
        }
        Command::Evolve { scenario, psi, times, out, grid } => {
            let s = match load(&scenario) {
                Ok(s) => s,
                Err(e) => return fail(e),
            };
            let psi = match s.parse_expr(&psi) {
                Ok(p) => p,
                Err(e) => return fail(e),
            };
            match run_evolve(&s, &psi, &times, grid, &out) {
                Ok(summary) => {
                    println!("wrote {} rows to {}", summary.rows, out.display());
                    if summary.nan_rows > 0 {
                        println!("{} rows contain nan (trajectory left the evaluation box)", summary.nan_rows);
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::Eta { scenario, grid, out } => {
            let s = match load(&scenario) {
                Ok(s) => s,
                Err(e) => return fail(e),
            };
            match run_eta(&s, grid, &out) {
                Ok(summary) => {
                    println!("wrote {} rows to {}", summary.rows, out.display());
                    if let Some(err) = summary.max_discrepancy {
                        println!("max relative error against the closed form: {err:.3e}");
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
    }
}
