//! Contact sweeps for the nonlocal interface condition.
//!
//! The iteration state is the interface trace `v`. One sweep solves a
//! Dirichlet problem on each subdomain with `v` as interface data, reads the
//! solution along every contact line, and recombines the line traces through
//! the contact condition into the next interface trace. With weights summing
//! to at most one the map contracts; the per-sweep trace delta is recorded so
//! the caller can see the observed ratio next to that bound.
//!
//! Both subdomain matrices depend only on the coefficients, so they are
//! assembled and factored exactly once per run.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use num_traits::Float;

use crate::fd::{
    assemble, extract_trace, solve_with, FdError, Grid, GridFunction, Side, TraceFunction,
};
use crate::field::Field;
use crate::geometry::{
    check_coordination, ContactProblem, ContactSpec, CoordinationReport, GeometryError, Violation,
};

/// Starting values for the contact lines.
#[derive(Debug, Clone)]
pub enum InitialTraces {
    /// All lines start at zero, so the first interface trace is the offset
    /// profile itself.
    Zero,
    /// All lines start at a constant value.
    Constant(f64),
    /// Explicit per-line traces, ordered like the geometry's line lists.
    Lines {
        minus: Vec<TraceFunction>,
        plus: Vec<TraceFunction>,
    },
}

#[derive(Debug, Clone)]
pub struct IterationOptions {
    pub max_iters: usize,
    /// Sweep stops once the interface trace moves by no more than this.
    pub trace_tol: f64,
    /// Relative residual target for each subdomain solve.
    pub solver_tol: f64,
    pub initial: InitialTraces,
    /// Allow contact lines between grid columns (linear interpolation).
    pub interpolate_traces: bool,
    /// Corner-consistency tolerance; violations become warnings.
    pub coordination_tol: f64,
}

impl Default for IterationOptions {
    fn default() -> Self {
        IterationOptions {
            max_iters: 100,
            trace_tol: 1e-12,
            solver_tol: 1e-11,
            initial: InitialTraces::Zero,
            interpolate_traces: false,
            coordination_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIters,
}

/// Per-run record: one delta (and, with an exact reference, one error pair)
/// per executed sweep.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub iterations: usize,
    pub deltas: Vec<f64>,
    /// Geometric mean of the trailing delta quotients, when measurable.
    pub q_hat: Option<f64>,
    /// A priori contraction bound: the contact weight sum.
    pub q_bound: f64,
    pub termination: Termination,
    pub abs_errors: Vec<f64>,
    pub rel_errors: Vec<f64>,
    pub coordination: Option<CoordinationReport>,
    pub warnings: Vec<String>,
}

/// Exact subdomain solutions for error tracking.
pub struct ExactRef<'a> {
    pub minus: &'a dyn Field,
    pub plus: &'a dyn Field,
}

/// Result of a completed run: the report plus the last sweep's solution.
pub struct IterationOutcome {
    pub report: SolveReport,
    pub minus: GridFunction,
    pub plus: GridFunction,
    /// Interface trace after the final update.
    pub trace: TraceFunction,
}

impl IterationOutcome {
    /// Whole-grid solution (interface column from the minus side).
    pub fn solution(&self) -> Result<GridFunction, FdError> {
        GridFunction::stitch(&self.minus, &self.plus)
    }
}

#[derive(Debug)]
pub enum IterateError {
    InvalidProblem(Vec<Violation>),
    /// Grid shape does not match the problem geometry.
    GridMismatch,
    /// A contact line misses every grid column and interpolation is off.
    LineNotOnGrid { x: f64 },
    InitialLinesMismatch { side: &'static str, expected: usize, got: usize },
    Fd(FdError),
    Geometry(GeometryError),
    /// The trace delta grew over several consecutive sweeps; the partial
    /// report carries the recorded history.
    NonContraction(Box<SolveReport>),
}

impl fmt::Display for IterateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IterateError::InvalidProblem(violations) => {
                write!(f, "inadmissible problem data:")?;
                for v in violations {
                    write!(f, " {};", v)?;
                }
                Ok(())
            }
            IterateError::GridMismatch => {
                write!(f, "grid does not match the problem rectangle and interface")
            }
            IterateError::LineNotOnGrid { x } => write!(
                f,
                "contact line x1 = {} is off-grid and trace interpolation is disabled",
                x
            ),
            IterateError::InitialLinesMismatch { side, expected, got } => write!(
                f,
                "{} initial traces for side {}, expected {}",
                got, side, expected
            ),
            IterateError::Fd(e) => write!(f, "subdomain solve failed: {}", e),
            IterateError::Geometry(e) => write!(f, "{}", e),
            IterateError::NonContraction(report) => write!(
                f,
                "trace deltas grew over consecutive sweeps ({} executed, last delta {:e})",
                report.iterations,
                report.deltas.last().copied().unwrap_or(f64::NAN)
            ),
        }
    }
}

impl core::error::Error for IterateError {}

impl From<FdError> for IterateError {
    fn from(e: FdError) -> Self {
        IterateError::Fd(e)
    }
}

impl From<GeometryError> for IterateError {
    fn from(e: GeometryError) -> Self {
        IterateError::Geometry(e)
    }
}

/// Applies the contact condition to a set of line traces: the weighted sum
/// plus the offset profile, sampled on the grid's `x2` nodes.
pub fn contact_update(
    minus_lines: &[TraceFunction],
    plus_lines: &[TraceFunction],
    contact: &ContactSpec,
    xi0: f64,
    grid: &Grid,
) -> Result<TraceFunction, IterateError> {
    if minus_lines.len() != contact.beta_minus.len() {
        return Err(IterateError::InitialLinesMismatch {
            side: "minus",
            expected: contact.beta_minus.len(),
            got: minus_lines.len(),
        });
    }
    if plus_lines.len() != contact.beta_plus.len() {
        return Err(IterateError::InitialLinesMismatch {
            side: "plus",
            expected: contact.beta_plus.len(),
            got: plus_lines.len(),
        });
    }
    let mut out = TraceFunction::zeros(grid, xi0);
    for (j, v) in out.values.iter_mut().enumerate() {
        let mut acc = contact
            .phi0
            .eval(xi0, grid.x2(j))
            .map_err(|e| IterateError::Fd(FdError::Eval(e)))?;
        for (line, &beta) in minus_lines.iter().zip(&contact.beta_minus) {
            acc += beta * line.values[j];
        }
        for (line, &beta) in plus_lines.iter().zip(&contact.beta_plus) {
            acc += beta * line.values[j];
        }
        *v = acc;
    }
    Ok(out)
}

/// Observed contraction ratio: geometric mean of the trailing (up to five)
/// delta quotients whose denominators are safely above roundoff.
pub fn estimate_ratio(deltas: &[f64]) -> Option<f64> {
    let floor = 100.0 * f64::EPSILON;
    let mut quotients: Vec<f64> = Vec::new();
    for w in deltas.windows(2) {
        if w[0] > floor {
            quotients.push(w[1] / w[0]);
        }
    }
    if quotients.is_empty() {
        return None;
    }
    let take = quotients.len().min(5);
    let tail = &quotients[quotients.len() - take..];
    if tail.iter().any(|&q| q <= 0.0) {
        return Some(0.0);
    }
    let log_mean = tail.iter().map(|&q| Float::ln(q)).sum::<f64>() / take as f64;
    Some(Float::exp(log_mean))
}

// Length of the increasing run at the end of the delta history.
fn trailing_increases(deltas: &[f64]) -> usize {
    let mut run = 0;
    for w in deltas.windows(2).rev() {
        if w[1] > w[0] {
            run += 1;
        } else {
            break;
        }
    }
    run
}

const ALARM_RUN: usize = 3;

struct LineSet {
    minus: Vec<f64>,
    plus: Vec<f64>,
}

/// Runs contact sweeps until the interface trace settles or the budget runs
/// out. With an exact reference, per-sweep max-norm errors are recorded over
/// all grid nodes (interface column read from the minus side).
pub fn run(
    problem: &ContactProblem,
    grid: &Grid,
    opts: &IterationOptions,
    exact: Option<&ExactRef<'_>>,
) -> Result<IterationOutcome, IterateError> {
    let violations = problem.validate();
    if !violations.is_empty() {
        return Err(IterateError::InvalidProblem(violations));
    }
    let geom = &problem.geometry;
    let xi0 = geom.xi0;
    let i0 = grid.interface_col().ok_or(IterateError::GridMismatch)?;
    if grid.column_of(xi0) != Some(i0)
        || Float::abs(grid.a - geom.rect.a) > 1e-12 * geom.rect.a
        || Float::abs(grid.b - geom.rect.b) > 1e-12 * geom.rect.b
    {
        return Err(IterateError::GridMismatch);
    }
    let lines = LineSet { minus: geom.xi_minus.clone(), plus: geom.xi_plus.clone() };
    if !opts.interpolate_traces {
        for &x in lines.minus.iter().chain(&lines.plus) {
            if grid.column_of(x).is_none() {
                return Err(IterateError::LineNotOnGrid { x });
            }
        }
    }

    let mut warnings: Vec<String> = Vec::new();
    let coordination = check_coordination(geom, &problem.contact, &problem.data, opts.coordination_tol)?;
    if !coordination.satisfied {
        warnings.push(format!(
            "contact data violates corner coordination (residuals {:e}, {:e} vs tol {:e}); \
             convergence to the discrete solution still holds but the error near the interface \
             corners will not vanish",
            coordination.residual_a0, coordination.residual_b0, coordination.tol
        ));
    }

    let sys_minus = assemble(Side::Minus, &problem.data.minus, grid)?;
    let sys_plus = assemble(Side::Plus, &problem.data.plus, grid)?;
    let lu_minus = sys_minus.factor()?;
    let lu_plus = sys_plus.factor()?;

    // Exact references sampled once; per-sweep errors are then plain norms.
    let exact_grids = match exact {
        Some(r) => Some((
            GridFunction::from_field(Side::Minus, *grid, r.minus)?,
            GridFunction::from_field(Side::Plus, *grid, r.plus)?,
        )),
        None => None,
    };
    let exact_norm = exact_grids
        .as_ref()
        .map(|(m, p)| Float::max(m.max_abs(), p.max_abs()));

    // Initial interface trace from the initial line values.
    let mut v = match &opts.initial {
        InitialTraces::Zero => {
            let zm: Vec<_> = lines.minus.iter().map(|&x| TraceFunction::zeros(grid, x)).collect();
            let zp: Vec<_> = lines.plus.iter().map(|&x| TraceFunction::zeros(grid, x)).collect();
            contact_update(&zm, &zp, &problem.contact, xi0, grid)?
        }
        InitialTraces::Constant(c) => {
            let cm: Vec<_> = lines
                .minus
                .iter()
                .map(|&x| {
                    let mut t = TraceFunction::zeros(grid, x);
                    t.values.iter_mut().for_each(|w| *w = *c);
                    t
                })
                .collect();
            let cp: Vec<_> = lines
                .plus
                .iter()
                .map(|&x| {
                    let mut t = TraceFunction::zeros(grid, x);
                    t.values.iter_mut().for_each(|w| *w = *c);
                    t
                })
                .collect();
            contact_update(&cm, &cp, &problem.contact, xi0, grid)?
        }
        InitialTraces::Lines { minus, plus } => {
            contact_update(minus, plus, &problem.contact, xi0, grid)?
        }
    };

    let mut deltas: Vec<f64> = Vec::new();
    let mut abs_errors: Vec<f64> = Vec::new();
    let mut rel_errors: Vec<f64> = Vec::new();
    let mut residual_warned = false;
    let mut termination = Termination::MaxIters;
    let mut last: Option<(GridFunction, GridFunction)> = None;

    for _sweep in 1..=opts.max_iters {
        let (um, stats_m) = solve_with(&sys_minus, &lu_minus, Some(&v), opts.solver_tol)?;
        let (up, stats_p) = solve_with(&sys_plus, &lu_plus, Some(&v), opts.solver_tol)?;
        if !residual_warned
            && (stats_m.residual > opts.solver_tol || stats_p.residual > opts.solver_tol)
        {
            warnings.push(format!(
                "subdomain solve residual {:e} exceeds the target {:e} despite refinement",
                Float::max(stats_m.residual, stats_p.residual),
                opts.solver_tol
            ));
            residual_warned = true;
        }

        if let (Some((em, ep)), Some(norm)) = (&exact_grids, exact_norm) {
            let abs = Float::max(um.max_abs_diff(em)?, up.max_abs_diff(ep)?);
            abs_errors.push(abs);
            rel_errors.push(if norm > f64::MIN_POSITIVE { abs / norm } else { abs });
        }

        let traces_m: Vec<TraceFunction> = lines
            .minus
            .iter()
            .map(|&x| extract_trace(&um, x, opts.interpolate_traces))
            .collect::<Result<_, _>>()?;
        let traces_p: Vec<TraceFunction> = lines
            .plus
            .iter()
            .map(|&x| extract_trace(&up, x, opts.interpolate_traces))
            .collect::<Result<_, _>>()?;
        let v_next = contact_update(&traces_m, &traces_p, &problem.contact, xi0, grid)?;

        deltas.push(v_next.max_abs_diff(&v)?);
        last = Some((um, up));
        v = v_next;

        if *deltas.last().expect("delta recorded") <= opts.trace_tol {
            termination = Termination::Converged;
            break;
        }
        if trailing_increases(&deltas) >= ALARM_RUN {
            let report = SolveReport {
                iterations: deltas.len(),
                q_hat: estimate_ratio(&deltas),
                q_bound: problem.contact.weight_sum(),
                deltas,
                termination: Termination::MaxIters,
                abs_errors,
                rel_errors,
                coordination: Some(coordination),
                warnings,
            };
            return Err(IterateError::NonContraction(Box::new(report)));
        }
    }

    let (minus, plus) = last.expect("at least one sweep executed");
    let report = SolveReport {
        iterations: deltas.len(),
        q_hat: estimate_ratio(&deltas),
        q_bound: problem.contact.weight_sum(),
        deltas,
        termination,
        abs_errors,
        rel_errors,
        coordination: Some(coordination),
        warnings,
    };
    Ok(IterationOutcome { report, minus, plus, trace: v })
}
