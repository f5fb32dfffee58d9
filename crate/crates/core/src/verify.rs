//! Reference problem, error norms, and cross-checks between the two solvers.
//!
//! The built-in example has variable diagonal coefficients, five contact
//! lines with equal weights, and a closed-form solution, so every part of
//! the pipeline can be measured against exact values: nodal error norms,
//! the operator's truncation defect on the exact solution, and (for
//! constant-coefficient data) the series solver against the sweep solver.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_traits::Float;

use crate::expr::EvalError;
use crate::fd::{assemble, FdError, Grid, GridFunction, Side, TraceFunction};
use crate::field::{parse_builtin, Field, FieldRef, Negated};
use crate::fourier::{FourierError, FourierSolution, PoissonContactProblem, DEFAULT_PANELS_PER_UNIT};
use crate::geometry::{ContactProblem, ContactSpec, ProblemData, Rect, SideData, SplitGeometry};
use crate::iterate::{run, ExactRef, IterateError, IterationOptions, SolveReport};

#[derive(Debug)]
pub enum VerifyError {
    /// The claimed exact solution jumps across the interface.
    DiscontinuousExact { x2: f64, jump: f64 },
    Eval(EvalError),
    Fd(FdError),
    Fourier(FourierError),
    Iterate(IterateError),
}

impl fmt::Display for VerifyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VerifyError::DiscontinuousExact { x2, jump } => write!(
                f,
                "exact solution jumps by {:e} across the interface at x2 = {}",
                jump, x2
            ),
            VerifyError::Eval(e) => write!(f, "field evaluation failed: {}", e),
            VerifyError::Fd(e) => write!(f, "{}", e),
            VerifyError::Fourier(e) => write!(f, "{}", e),
            VerifyError::Iterate(e) => write!(f, "{}", e),
        }
    }
}

impl core::error::Error for VerifyError {}

impl From<EvalError> for VerifyError {
    fn from(e: EvalError) -> Self {
        VerifyError::Eval(e)
    }
}
impl From<FdError> for VerifyError {
    fn from(e: FdError) -> Self {
        VerifyError::Fd(e)
    }
}
impl From<FourierError> for VerifyError {
    fn from(e: FourierError) -> Self {
        VerifyError::Fourier(e)
    }
}
impl From<IterateError> for VerifyError {
    fn from(e: IterateError) -> Self {
        VerifyError::Iterate(e)
    }
}

/// A two-piece exact solution with its contact value, checked for
/// continuity across the interface on construction.
pub struct ExactSolution {
    pub u_minus: FieldRef,
    pub u_plus: FieldRef,
    /// Contact value as a field of `x2`, evaluated at `(xi0, x2)`.
    pub u_gamma0: FieldRef,
    pub xi0: f64,
}

impl ExactSolution {
    /// Checks `u_minus(xi0, t) = u_plus(xi0, t) = u_gamma0(t)` at 101
    /// samples of `[0, b]` to 1e-12.
    pub fn new(
        u_minus: FieldRef,
        u_plus: FieldRef,
        u_gamma0: FieldRef,
        xi0: f64,
        b: f64,
    ) -> Result<ExactSolution, VerifyError> {
        for s in 0..=100 {
            let x2 = b * s as f64 / 100.0;
            let um = u_minus.eval(xi0, x2)?;
            let up = u_plus.eval(xi0, x2)?;
            let tr = u_gamma0.eval(xi0, x2)?;
            let jump = Float::max(Float::abs(um - up), Float::abs(um - tr));
            if !(jump <= 1e-12) {
                return Err(VerifyError::DiscontinuousExact { x2, jump });
            }
        }
        Ok(ExactSolution { u_minus, u_plus, u_gamma0, xi0 })
    }

    /// Borrowed view for the sweep solver's error tracking.
    pub fn exact_ref(&self) -> ExactRef<'_> {
        ExactRef { minus: &*self.u_minus, plus: &*self.u_plus }
    }
}

/// The built-in reference problem on the unit square, interface at 1/2:
/// diagonal coefficients `1+x1^2`, `1+x2^2` (left) and `1+2x1^2`, `1+2x2^2`
/// (right), zero outer boundary data, contact weights 1/8 on the lines
/// {3/8, 1/4, 1/8} and {5/8, 3/4}, and the offset profile chosen so that
/// `u = x1 x2 cos(pi x2/2)` / `(1-x1) x2 cos(pi x2/2)` solves the problem
/// exactly. The weight sum is 5/8.
pub fn builtin_example() -> (ContactProblem, ExactSolution) {
    let problem = ContactProblem {
        geometry: SplitGeometry {
            rect: Rect::UNIT,
            xi0: 0.5,
            xi_minus: vec![0.375, 0.25, 0.125],
            xi_plus: vec![0.625, 0.75],
        },
        contact: ContactSpec {
            beta_minus: vec![0.125; 3],
            beta_plus: vec![0.125; 2],
            phi0: parse_builtin("(21/64)*x2*cos(pi*x2/2)"),
        },
        data: ProblemData {
            minus: SideData {
                k11: parse_builtin("1+x1^2"),
                k12: parse_builtin("0"),
                k21: parse_builtin("0"),
                k22: parse_builtin("1+x2^2"),
                reaction: parse_builtin("0"),
                source: parse_builtin(
                    "(1/4)*x1*x2*(-16+pi^2*(1+x2^2))*cos(pi*x2/2)+pi*x1*(1+2*x2^2)*sin(pi*x2/2)",
                ),
                boundary: parse_builtin("0"),
            },
            plus: SideData {
                k11: parse_builtin("1+2*x1^2"),
                k12: parse_builtin("0"),
                k21: parse_builtin("0"),
                k22: parse_builtin("1+2*x2^2"),
                reaction: parse_builtin("0"),
                source: parse_builtin(
                    "4*x1*x2*cos(pi*x2/2)-(1/4)*(x1-1)*(x2*(-16+pi^2*(1+2*x2^2))*cos(pi*x2/2)+4*pi*(1+4*x2^2)*sin(pi*x2/2))",
                ),
                boundary: parse_builtin("0"),
            },
        },
    };
    let exact = ExactSolution::new(
        parse_builtin("x1*x2*cos(pi*x2/2)"),
        parse_builtin("(1-x1)*x2*cos(pi*x2/2)"),
        parse_builtin("(1/2)*x2*cos(pi*x2/2)"),
        0.5,
        1.0,
    )
    .expect("built-in exact solution is continuous");
    (problem, exact)
}

/// Uniform-norm error over interior nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CNorm {
    pub abs: f64,
    /// `abs / max|reference|`; absent when the reference norm is zero.
    pub rel: Option<f64>,
}

fn interior_max<F>(u: &GridFunction, mut diff: F) -> Result<(f64, f64), VerifyError>
where
    F: FnMut(usize, usize, f64) -> Result<(f64, f64), VerifyError>,
{
    let grid = *u.grid();
    let mut abs = 0.0f64;
    let mut norm = 0.0f64;
    for i in u.col_range() {
        if i == 0 || i == grid.n1 + 1 {
            continue;
        }
        for j in 1..=grid.n2 {
            let (d, r) = diff(i, j, u.get(i, j))?;
            abs = Float::max(abs, d);
            norm = Float::max(norm, r);
        }
    }
    Ok((abs, norm))
}

fn cnorm_from(abs: f64, norm: f64) -> CNorm {
    CNorm { abs, rel: if norm > 0.0 { Some(abs / norm) } else { None } }
}

/// Error of `u` against another grid function with the same layout.
pub fn c_norm(u: &GridFunction, reference: &GridFunction) -> Result<CNorm, VerifyError> {
    if u.side() != reference.side() || u.grid() != reference.grid() {
        return Err(VerifyError::Fd(FdError::LayoutMismatch));
    }
    let (abs, norm) = interior_max(u, |i, j, v| {
        let r = reference.get(i, j);
        Ok((Float::abs(v - r), Float::abs(r)))
    })?;
    Ok(cnorm_from(abs, norm))
}

/// Error of `u` against a field sampled at the same nodes.
pub fn c_norm_vs_field(u: &GridFunction, reference: &dyn Field) -> Result<CNorm, VerifyError> {
    let grid = *u.grid();
    let (abs, norm) = interior_max(u, |i, j, v| {
        let r = reference.eval(grid.x1(i), grid.x2(j))?;
        Ok((Float::abs(v - r), Float::abs(r)))
    })?;
    Ok(cnorm_from(abs, norm))
}

/// Largest stencil defect when the assembled operator is applied to the
/// exact nodal values, per side. Second-order data shrink this like `h^2`.
#[derive(Debug, Clone, Copy)]
pub struct OperatorResidual {
    pub minus: f64,
    pub plus: f64,
}

pub fn operator_residual(
    exact: &ExactSolution,
    problem: &ContactProblem,
    grid: &Grid,
) -> Result<OperatorResidual, VerifyError> {
    let i0 = grid
        .interface_col()
        .ok_or(VerifyError::Fd(FdError::SideUnavailable { side: Side::Minus }))?;
    let trace = TraceFunction::from_fn(grid, grid.x1(i0), |x2| {
        exact.u_gamma0.eval(exact.xi0, x2)
    })
    .map_err(VerifyError::Eval)?;
    let defect = |side: Side, data: &SideData, field: &FieldRef| -> Result<f64, VerifyError> {
        let sys = assemble(side, data, grid)?;
        let gf = GridFunction::from_field(side, *grid, &**field)?;
        let uvec = sys.restrict(&gf)?;
        let rhs = sys.rhs(Some(&trace))?;
        let au = sys.apply(&uvec)?;
        Ok(au
            .iter()
            .zip(&rhs)
            .fold(0.0f64, |m, (&a, &b)| Float::max(m, Float::abs(a - b))))
    };
    Ok(OperatorResidual {
        minus: defect(Side::Minus, &problem.data.minus, &exact.u_minus)?,
        plus: defect(Side::Plus, &problem.data.plus, &exact.u_plus)?,
    })
}

/// Outcome of running both solvers on the same constant-coefficient problem.
#[derive(Debug, Clone)]
pub struct CrossValidation {
    /// Largest nodal difference between the series and sweep solutions.
    pub max_diff: f64,
    /// Series truncation indicator for the retained modes.
    pub tail_estimate: f64,
    /// The sweep solver's per-iteration record.
    pub report: SolveReport,
    /// The sweep solver's whole-grid solution.
    pub solution: GridFunction,
}

/// Solves a two-point Poisson contact problem with both the series and the
/// sweep solver on the given grid and compares them node by node. The two
/// paths share no discretization machinery, so agreement at the expected
/// order is a strong mutual check.
pub fn cross_validate(
    problem: &PoissonContactProblem,
    k_max: usize,
    grid: &Grid,
) -> Result<CrossValidation, VerifyError> {
    let sol = FourierSolution::new(problem, k_max, DEFAULT_PANELS_PER_UNIT)?;
    let u_series = sol.eval_on_grid(grid)?;
    // The sweep solver discretizes -div(grad u) = source, the series path
    // solves Laplace(u) = f; the twin therefore carries the negated source.
    let twin = ContactProblem {
        geometry: SplitGeometry {
            rect: Rect::UNIT,
            xi0: problem.xi0,
            xi_minus: vec![problem.xi_minus],
            xi_plus: vec![problem.xi_plus],
        },
        contact: ContactSpec {
            beta_minus: vec![problem.gamma_minus],
            beta_plus: vec![problem.gamma_plus],
            phi0: problem.phi0.clone(),
        },
        data: ProblemData {
            minus: SideData::laplace(Arc::new(Negated(problem.f_minus.clone()))),
            plus: SideData::laplace(Arc::new(Negated(problem.f_plus.clone()))),
        },
    };
    let opts = IterationOptions { trace_tol: 1e-13, max_iters: 200, ..Default::default() };
    let out = run(&twin, grid, &opts, None)?;
    let full = out.solution()?;
    let max_diff = full.max_abs_diff(&u_series)?;
    Ok(CrossValidation {
        max_diff,
        tail_estimate: sol.tail_estimate(),
        report: out.report,
        solution: full,
    })
}

/// Per-sweep history in tabular form.
#[derive(Debug, Clone)]
pub struct ErrorRow {
    pub k: usize,
    pub trace_delta: f64,
    pub abs_error: Option<f64>,
    pub rel_error: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ErrorTable {
    pub grid: Grid,
    pub rows: Vec<ErrorRow>,
}

impl ErrorTable {
    pub fn from_report(report: &SolveReport, grid: &Grid) -> ErrorTable {
        let rows = report
            .deltas
            .iter()
            .enumerate()
            .map(|(idx, &d)| ErrorRow {
                k: idx + 1,
                trace_delta: d,
                abs_error: report.abs_errors.get(idx).copied(),
                rel_error: report.rel_errors.get(idx).copied(),
            })
            .collect();
        ErrorTable { grid: *grid, rows }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{constant, function};
    use crate::fourier::sinpi;

    #[test]
    fn builtin_example_is_admissible_and_consistent() {
        let (problem, exact) = builtin_example();
        assert!(problem.validate().is_empty());
        assert_eq!(problem.contact.weight_sum(), 0.625);
        // Contact value at the domain center: (1/4) cos(pi/4) = sqrt(2)/8.
        let v = exact.u_gamma0.eval(0.5, 0.5).unwrap();
        assert!((v - 0.17677669529663687).abs() < 1e-16);
        // Offset profile at the center: (21/128) cos(pi/4) = 21 sqrt(2)/256.
        let p = problem.contact.phi0.eval(0.5, 0.5).unwrap();
        assert!((p - 0.11600970628841795).abs() < 1e-16);
        // The contact identity holds pointwise: weighted line values of the
        // exact solution plus the offset reproduce the contact value.
        for s in 0..=20 {
            let x2 = s as f64 / 20.0;
            let mut rhs = problem.contact.phi0.eval(0.5, x2).unwrap();
            for (&xi, &beta) in problem
                .geometry
                .xi_minus
                .iter()
                .zip(&problem.contact.beta_minus)
            {
                rhs += beta * exact.u_minus.eval(xi, x2).unwrap();
            }
            for (&xi, &beta) in problem
                .geometry
                .xi_plus
                .iter()
                .zip(&problem.contact.beta_plus)
            {
                rhs += beta * exact.u_plus.eval(xi, x2).unwrap();
            }
            let lhs = exact.u_gamma0.eval(0.5, x2).unwrap();
            assert!((lhs - rhs).abs() < 1e-15, "identity off by {} at {}", lhs - rhs, x2);
        }
    }

    #[test]
    fn discontinuous_exact_solution_is_rejected() {
        let r = ExactSolution::new(
            function(|x1, _| x1),
            function(|x1, _| 2.0 * (1.0 - x1)),
            constant(0.5),
            0.5,
            1.0,
        );
        assert!(matches!(r, Err(VerifyError::DiscontinuousExact { .. })));
    }

    #[test]
    fn c_norm_basics() {
        let grid = Grid::with_interface(Rect::UNIT, 15, 15, 0.5).unwrap();
        let u = GridFunction::from_field(Side::Full, grid, &*function(|x1, x2| x1 * x2)).unwrap();
        let same = c_norm(&u, &u).unwrap();
        assert_eq!(same.abs, 0.0);
        assert_eq!(same.rel, Some(0.0));
        // Against the zero reference the relative error is undefined.
        let zero = GridFunction::zeros(Side::Full, grid);
        let n = c_norm(&u, &zero).unwrap();
        assert!(n.rel.is_none());
        assert!(n.abs > 0.8); // max of x1*x2 over interior nodes
        // Field sampling agrees with the grid-function path.
        let m = c_norm_vs_field(&zero, &*function(|x1, x2| x1 * x2)).unwrap();
        assert!((m.abs - n.abs).abs() < 1e-15);
    }

    #[test]
    fn operator_residual_shrinks_at_second_order() {
        let (problem, exact) = builtin_example();
        let coarse = Grid::with_interface(Rect::UNIT, 31, 31, 0.5).unwrap();
        let fine = Grid::with_interface(Rect::UNIT, 63, 63, 0.5).unwrap();
        let r1 = operator_residual(&exact, &problem, &coarse).unwrap();
        let r2 = operator_residual(&exact, &problem, &fine).unwrap();
        for (d1, d2) in [(r1.minus, r2.minus), (r1.plus, r2.plus)] {
            let order = (d1 / d2).log2();
            assert!(
                (1.8..2.2).contains(&order),
                "defect order {} ({} -> {})",
                order,
                d1,
                d2
            );
        }
    }

    #[test]
    fn operator_residual_flags_perturbed_source() {
        let (mut problem, exact) = builtin_example();
        let base = problem.data.minus.source.clone();
        problem.data.minus.source = function(move |x1, x2| {
            base.eval(x1, x2).map(|v| v + 1.0).unwrap_or(f64::NAN)
        });
        let grid = Grid::with_interface(Rect::UNIT, 31, 31, 0.5).unwrap();
        let r = operator_residual(&exact, &problem, &grid).unwrap();
        assert!((0.9..1.1).contains(&r.minus), "defect {}", r.minus);
    }

    #[test]
    fn zero_problem_has_zero_residual() {
        let problem = ContactProblem {
            geometry: SplitGeometry {
                rect: Rect::UNIT,
                xi0: 0.5,
                xi_minus: vec![0.25],
                xi_plus: vec![0.75],
            },
            contact: ContactSpec {
                beta_minus: vec![0.5],
                beta_plus: vec![0.5],
                phi0: constant(0.0),
            },
            data: ProblemData {
                minus: SideData::laplace(constant(0.0)),
                plus: SideData::laplace(constant(0.0)),
            },
        };
        let exact = ExactSolution::new(constant(0.0), constant(0.0), constant(0.0), 0.5, 1.0).unwrap();
        let grid = Grid::with_interface(Rect::UNIT, 15, 15, 0.5).unwrap();
        let r = operator_residual(&exact, &problem, &grid).unwrap();
        assert_eq!(r.minus, 0.0);
        assert_eq!(r.plus, 0.0);
    }

    #[test]
    fn solvers_agree_on_the_two_point_problem() {
        let problem = PoissonContactProblem {
            xi_minus: 0.25,
            xi0: 0.5,
            xi_plus: 0.75,
            gamma_minus: 0.5,
            gamma_plus: 0.5,
            f_minus: constant(0.0),
            f_plus: constant(0.0),
            phi0: function(|_, x2| sinpi(x2)),
        };
        let grid = Grid::with_interface(Rect::UNIT, 31, 31, 0.5).unwrap();
        let cv = cross_validate(&problem, 32, &grid).unwrap();
        assert!(cv.max_diff < 3e-3, "solvers differ by {}", cv.max_diff);
        assert!(cv.report.iterations > 1);
    }

    #[test]
    fn trivial_data_agrees_exactly() {
        let problem = PoissonContactProblem {
            xi_minus: 0.25,
            xi0: 0.5,
            xi_plus: 0.75,
            gamma_minus: 0.5,
            gamma_plus: 0.5,
            f_minus: constant(0.0),
            f_plus: constant(0.0),
            phi0: constant(0.0),
        };
        let grid = Grid::with_interface(Rect::UNIT, 15, 15, 0.5).unwrap();
        let cv = cross_validate(&problem, 8, &grid).unwrap();
        assert!(cv.max_diff <= 1e-12, "difference {}", cv.max_diff);
    }

    #[test]
    fn error_table_rows_follow_the_report() {
        let (problem, exact) = builtin_example();
        let grid = Grid::with_interface(Rect::UNIT, 15, 15, 0.5).unwrap();
        let opts = IterationOptions::default();
        let exact_ref = exact.exact_ref();
        let out = run(&problem, &grid, &opts, Some(&exact_ref)).unwrap();
        let table = ErrorTable::from_report(&out.report, &grid);
        assert_eq!(table.rows.len(), out.report.iterations);
        assert_eq!(table.rows[0].k, 1);
        assert!(table.rows[0].abs_error.is_some());
        let last = table.rows.last().unwrap();
        assert!(last.trace_delta <= opts.trace_tol);
    }
}
