use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use nlcontact_cli::config::{parse_config, validate};
use nlcontact_cli::runner::run_command;

/// Solves 2D elliptic problems whose interior interface value is a weighted
/// sum of the solution on parallel lines. See docs/config.md for the run
/// configuration format.
#[derive(Parser)]
#[command(name = "nlcontact", version)]
struct Args {
    /// Run configuration file
    config: PathBuf,
    /// Override n1 and n2 with one interior node count
    #[arg(long)]
    grid: Option<usize>,
    /// Override the trace tolerance
    #[arg(long)]
    tol: Option<f64>,
    /// Override the sweep budget
    #[arg(long)]
    max_iters: Option<usize>,
    /// Override the retained sine-mode count
    #[arg(long)]
    modes: Option<usize>,
    /// Override the artifact directory
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let text = match fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read {}: {}", args.config.display(), e);
            return ExitCode::from(2);
        }
    };
    let mut config = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}", e);
            return ExitCode::from(2);
        }
    };
    if let Some(n) = args.grid {
        config.numerics.n1 = n;
        config.numerics.n2 = n;
    }
    if let Some(tol) = args.tol {
        config.numerics.trace_tol = tol;
    }
    if let Some(m) = args.max_iters {
        config.numerics.max_iters = m;
    }
    if let Some(k) = args.modes {
        config.numerics.modes = k;
    }
    if let Some(dir) = &args.out_dir {
        config.out_dir = dir.display().to_string();
    }
    if let Err(e) = validate(&config) {
        eprintln!("{}", e);
        return ExitCode::from(2);
    }
    match run_command(&config) {
        Ok(report) => {
            let ratio = report
                .q_hat
                .map(|q| format!(", ratio estimate {:.4} (bound {:.4})", q, report.q_bound))
                .unwrap_or_default();
            let error = report
                .final_abs_error
                .map(|v| format!(", final error {:.3e}", v))
                .unwrap_or_default();
            println!(
                "{}: {} iterations{}{}; artifacts in {}",
                report.mode, report.iterations, ratio, error, config.out_dir
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e);
            ExitCode::from(e.exit_code())
        }
    }
}
