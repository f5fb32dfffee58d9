//! Dispatches a validated config to the right solver and writes the
//! artifacts: report.json, iterations.csv, solution.csv.

use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use nlcontact_core::fd::{FdError, Grid, GridFunction};
use nlcontact_core::fourier::{FourierError, FourierSolution, PoissonContactProblem};
use nlcontact_core::field::{function, Negated};
use nlcontact_core::geometry::Rect;
use nlcontact_core::iterate::{run, IterateError, IterationOptions, SolveReport};
use nlcontact_core::verify::{c_norm_vs_field, cross_validate, VerifyError};
use thiserror::Error;

use crate::config::{parse_field, to_config_text, ConfigError, Mode, RunConfig};
use crate::report::{iterations_csv, solution_csv, Report, Timings, ITERATIONS_HEADER};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Solver(String),
    #[error("{0}")]
    NonContraction(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl RunError {
    /// 2 config, 3 solver or filesystem, 4 non-contraction alarm.
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) => 2,
            RunError::Solver(_) | RunError::Io(_) | RunError::Json(_) => 3,
            RunError::NonContraction(_) => 4,
        }
    }
}

fn invalid(message: String) -> RunError {
    RunError::Config(ConfigError::Invalid(message))
}

/// Grid and data faults are the user's problem statement; factorization
/// and residual faults are ours.
fn fd_error(e: FdError) -> RunError {
    match e {
        FdError::InvalidRect { .. }
        | FdError::GridTooSmall { .. }
        | FdError::InterfaceMisaligned { .. }
        | FdError::InterfaceNearBoundary { .. }
        | FdError::FullGridHasInterface
        | FdError::NotElliptic { .. }
        | FdError::NegativeReaction { .. }
        | FdError::UnalignedLine { .. }
        | FdError::LineOutsideSide { .. } => invalid(e.to_string()),
        other => RunError::Solver(other.to_string()),
    }
}

fn iterate_error(e: IterateError) -> RunError {
    match e {
        IterateError::InvalidProblem(_)
        | IterateError::GridMismatch
        | IterateError::LineNotOnGrid { .. }
        | IterateError::InitialLinesMismatch { .. }
        | IterateError::Geometry(_) => invalid(e.to_string()),
        IterateError::Fd(f) => fd_error(f),
        IterateError::NonContraction(_) => RunError::NonContraction(e.to_string()),
    }
}

fn fourier_error(e: FourierError) -> RunError {
    match e {
        FourierError::InvalidProblem(_)
        | FourierError::Eval(_)
        | FourierError::GridNotUnitSquare
        | FourierError::GridHasNoInterface => invalid(e.to_string()),
        other => RunError::Solver(other.to_string()),
    }
}

fn verify_error(e: VerifyError) -> RunError {
    match e {
        VerifyError::DiscontinuousExact { .. } | VerifyError::Eval(_) => invalid(e.to_string()),
        VerifyError::Fd(f) => fd_error(f),
        VerifyError::Fourier(f) => fourier_error(f),
        VerifyError::Iterate(i) => iterate_error(i),
    }
}

fn make_grid(config: &RunConfig) -> Result<Grid, RunError> {
    let g = &config.geometry;
    Grid::with_interface(Rect { a: g.a, b: g.b }, config.numerics.n1, config.numerics.n2, g.xi0)
        .map_err(fd_error)
}

/// The two-point Poisson problem of the fourier and cross-validate modes.
/// The config's `f` is the right side of `-div(K grad u) + k u = f`; the
/// series path solves `Laplace(u) = f`, so the source flips sign here.
fn poisson_problem(config: &RunConfig) -> Result<PoissonContactProblem, RunError> {
    let g = &config.geometry;
    let c = &config.contact;
    Ok(PoissonContactProblem {
        xi_minus: g.xi_minus[0],
        xi0: g.xi0,
        xi_plus: g.xi_plus[0],
        gamma_minus: c.beta_minus[0],
        gamma_plus: c.beta_plus[0],
        f_minus: Arc::new(Negated(parse_field(&config.minus.source)?)),
        f_plus: Arc::new(Negated(parse_field(&config.plus.source)?)),
        phi0: parse_field(&c.phi0)?,
    })
}

struct Artifacts<'a> {
    iterations: &'a str,
    solution: Option<&'a str>,
}

fn write_csvs(out_dir: &Path, artifacts: Artifacts<'_>) -> Result<(), RunError> {
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("iterations.csv"), artifacts.iterations)?;
    if let Some(sol) = artifacts.solution {
        fs::write(out_dir.join("solution.csv"), sol)?;
    }
    Ok(())
}

fn write_report(out_dir: &Path, report: &Report) -> Result<(), RunError> {
    fs::create_dir_all(out_dir)?;
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    fs::write(out_dir.join("report.json"), json)?;
    Ok(())
}

fn sweep_report(
    config: &RunConfig,
    echo: &str,
    rep: &SolveReport,
    build: Duration,
    solve: Duration,
    emit: Duration,
) -> Report {
    Report {
        mode: config.mode.to_string(),
        config_echo: echo.to_string(),
        iterations: rep.iterations,
        q_hat: rep.q_hat,
        q_bound: rep.q_bound,
        final_abs_error: rep.abs_errors.last().copied(),
        final_rel_error: rep.rel_errors.last().copied(),
        warnings: rep.warnings.clone(),
        timings: Timings {
            build_s: build.as_secs_f64(),
            solve_s: solve.as_secs_f64(),
            emit_s: emit.as_secs_f64(),
        },
    }
}

fn run_sweeps(config: &RunConfig, echo: String, out_dir: &Path) -> Result<Report, RunError> {
    let t_build = Instant::now();
    let problem = config.problem()?;
    let grid = make_grid(config)?;
    let opts = IterationOptions {
        trace_tol: config.numerics.trace_tol,
        max_iters: config.numerics.max_iters,
        interpolate_traces: config.numerics.interpolate_traces,
        ..Default::default()
    };
    let exact = config.exact_solution()?;
    let exact_ref = exact.as_ref().map(|e| e.exact_ref());
    let build = t_build.elapsed();

    let t_solve = Instant::now();
    let outcome = match run(&problem, &grid, &opts, exact_ref.as_ref()) {
        Ok(o) => o,
        Err(IterateError::NonContraction(rep)) => {
            // Leave the evidence behind: the summary and the delta history.
            let solve = t_solve.elapsed();
            let t_emit = Instant::now();
            let csv = iterations_csv(&rep);
            write_csvs(out_dir, Artifacts { iterations: &csv, solution: None })?;
            let mut report = sweep_report(config, &echo, &rep, build, solve, t_emit.elapsed());
            report
                .warnings
                .push("trace deltas grew over three consecutive sweeps; run aborted".into());
            write_report(out_dir, &report)?;
            return Err(RunError::NonContraction(format!(
                "trace deltas grew over three consecutive sweeps (after {} of them); \
                 partial artifacts in {}",
                rep.iterations,
                out_dir.display()
            )));
        }
        Err(e) => return Err(iterate_error(e)),
    };
    let solve = t_solve.elapsed();

    let t_emit = Instant::now();
    let full = outcome.solution().map_err(fd_error)?;
    let iter_csv = iterations_csv(&outcome.report);
    let sol_csv = solution_csv(&full);
    write_csvs(out_dir, Artifacts { iterations: &iter_csv, solution: Some(&sol_csv) })?;
    let report = sweep_report(config, &echo, &outcome.report, build, solve, t_emit.elapsed());
    write_report(out_dir, &report)?;
    Ok(report)
}

fn exact_errors(
    config: &RunConfig,
    u: &GridFunction,
) -> Result<(Option<f64>, Option<f64>), RunError> {
    let Some(e) = &config.exact else { return Ok((None, None)) };
    let u_minus = parse_field(&e.u_minus)?;
    let u_plus = parse_field(&e.u_plus)?;
    let xi0 = config.geometry.xi0;
    let piecewise = function(move |x1, x2| {
        let side = if x1 <= xi0 { &u_minus } else { &u_plus };
        side.eval(x1, x2).unwrap_or(f64::NAN)
    });
    let n = c_norm_vs_field(u, &*piecewise).map_err(verify_error)?;
    Ok((Some(n.abs), n.rel))
}

fn run_series(config: &RunConfig, echo: String, out_dir: &Path) -> Result<Report, RunError> {
    let t_build = Instant::now();
    let problem = poisson_problem(config)?;
    let grid = make_grid(config)?;
    let build = t_build.elapsed();

    let t_solve = Instant::now();
    let sol = FourierSolution::new(&problem, config.numerics.modes, config.numerics.panels)
        .map_err(fourier_error)?;
    let u = sol.eval_on_grid(&grid).map_err(fourier_error)?;
    let solve = t_solve.elapsed();

    let (abs, rel) = exact_errors(config, &u)?;
    let t_emit = Instant::now();
    let sol_csv = solution_csv(&u);
    write_csvs(out_dir, Artifacts { iterations: ITERATIONS_HEADER, solution: Some(&sol_csv) })?;
    let report = Report {
        mode: config.mode.to_string(),
        config_echo: echo,
        iterations: 0,
        q_hat: None,
        q_bound: config.contact.beta_minus[0] + config.contact.beta_plus[0],
        final_abs_error: abs,
        final_rel_error: rel,
        warnings: Vec::new(),
        timings: Timings {
            build_s: build.as_secs_f64(),
            solve_s: solve.as_secs_f64(),
            emit_s: t_emit.elapsed().as_secs_f64(),
        },
    };
    write_report(out_dir, &report)?;
    Ok(report)
}

fn run_cross(config: &RunConfig, echo: String, out_dir: &Path) -> Result<Report, RunError> {
    let t_build = Instant::now();
    let problem = poisson_problem(config)?;
    let grid = make_grid(config)?;
    let build = t_build.elapsed();

    let t_solve = Instant::now();
    let cv = cross_validate(&problem, config.numerics.modes, &grid).map_err(verify_error)?;
    let solve = t_solve.elapsed();

    let norm = cv.solution.max_abs();
    let t_emit = Instant::now();
    let iter_csv = iterations_csv(&cv.report);
    let sol_csv = solution_csv(&cv.solution);
    write_csvs(out_dir, Artifacts { iterations: &iter_csv, solution: Some(&sol_csv) })?;
    let report = Report {
        mode: config.mode.to_string(),
        config_echo: echo,
        iterations: cv.report.iterations,
        q_hat: cv.report.q_hat,
        q_bound: cv.report.q_bound,
        final_abs_error: Some(cv.max_diff),
        final_rel_error: if norm > 0.0 { Some(cv.max_diff / norm) } else { None },
        warnings: cv.report.warnings.clone(),
        timings: Timings {
            build_s: build.as_secs_f64(),
            solve_s: solve.as_secs_f64(),
            emit_s: t_emit.elapsed().as_secs_f64(),
        },
    };
    write_report(out_dir, &report)?;
    Ok(report)
}

/// Runs a validated config and writes report.json, iterations.csv, and
/// solution.csv into its output directory.
pub fn run_command(config: &RunConfig) -> Result<Report, RunError> {
    let echo = to_config_text(config);
    let out_dir = Path::new(&config.out_dir).to_path_buf();
    match config.mode {
        Mode::Iterate | Mode::Verify => run_sweeps(config, echo, &out_dir),
        Mode::Fourier => run_series(config, echo, &out_dir),
        Mode::CrossValidate => run_cross(config, echo, &out_dir),
    }
}
