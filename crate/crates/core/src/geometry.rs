//! Domain geometry and contact data for the split rectangle.
//!
//! The rectangle `(0,a) x (0,b)` is split by the vertical interface
//! `x1 = xi0` into a minus (left) and a plus (right) subdomain. The value on
//! the interface is not matched classically; it is prescribed as a weighted
//! sum of the solution on interior vertical lines `x1 = xi_i` on both sides
//! plus a given profile `phi0(x2)`.

use alloc::vec::Vec;
use core::fmt;

use num_traits::Float;

use crate::expr::EvalError;
use crate::field::{constant, FieldRef};

/// Axis-aligned rectangle `(0,a) x (0,b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub a: f64,
    pub b: f64,
}

impl Rect {
    pub const UNIT: Rect = Rect { a: 1.0, b: 1.0 };
}

/// Interface position and the interior contact lines on both sides.
///
/// `xi_minus` is ordered from the interface toward 0 (strictly decreasing);
/// `xi_plus` from the interface toward `a` (strictly increasing). Either list
/// may be empty, but not both.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitGeometry {
    pub rect: Rect,
    pub xi0: f64,
    pub xi_minus: Vec<f64>,
    pub xi_plus: Vec<f64>,
}

/// Contact weights and the interface offset profile.
///
/// Weight lists pair up with the line lists of [`SplitGeometry`]. `phi0` is
/// evaluated at `(xi0, x2)`.
#[derive(Clone)]
pub struct ContactSpec {
    pub beta_minus: Vec<f64>,
    pub beta_plus: Vec<f64>,
    pub phi0: FieldRef,
}

impl ContactSpec {
    pub fn weight_sum(&self) -> f64 {
        self.beta_minus.iter().sum::<f64>() + self.beta_plus.iter().sum::<f64>()
    }
}

/// Coefficients, reaction, source, and Dirichlet data of one subdomain, for
/// the divergence-form equation `div(K grad u) - k u = -f`.
#[derive(Clone)]
pub struct SideData {
    pub k11: FieldRef,
    pub k12: FieldRef,
    pub k21: FieldRef,
    pub k22: FieldRef,
    pub reaction: FieldRef,
    pub source: FieldRef,
    pub boundary: FieldRef,
}

impl SideData {
    /// Laplace coefficients with the given source, zero Dirichlet data.
    pub fn laplace(source: FieldRef) -> SideData {
        SideData {
            k11: constant(1.0),
            k12: constant(0.0),
            k21: constant(0.0),
            k22: constant(1.0),
            reaction: constant(0.0),
            source,
            boundary: constant(0.0),
        }
    }

    pub fn with_boundary(mut self, boundary: FieldRef) -> SideData {
        self.boundary = boundary;
        self
    }
}

/// Data for both subdomains.
#[derive(Clone)]
pub struct ProblemData {
    pub minus: SideData,
    pub plus: SideData,
}

/// A reason the geometry/contact data is inadmissible.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonPositiveSide { axis: &'static str, value: f64 },
    InterfaceOutOfRange { xi0: f64 },
    LineOutOfRange { side: &'static str, index: usize, value: f64 },
    UnorderedLines { side: &'static str, index: usize },
    NoContactLines,
    WeightCountMismatch { side: &'static str, lines: usize, weights: usize },
    NonPositiveWeight { side: &'static str, index: usize, value: f64 },
    WeightSumOutOfRange { sum: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonPositiveSide { axis, value } => {
                write!(f, "rectangle side {} = {} must be positive and finite", axis, value)
            }
            Violation::InterfaceOutOfRange { xi0 } => {
                write!(f, "interface xi0 = {} must lie strictly inside (0, a)", xi0)
            }
            Violation::LineOutOfRange { side, index, value } => write!(
                f,
                "contact line {}[{}] = {} must lie strictly between the outer boundary and the interface",
                side, index, value
            ),
            Violation::UnorderedLines { side, index } => write!(
                f,
                "contact lines {} must be strictly ordered away from the interface (violated at index {})",
                side, index
            ),
            Violation::NoContactLines => write!(f, "at least one contact line is required"),
            Violation::WeightCountMismatch { side, lines, weights } => write!(
                f,
                "side {} has {} contact lines but {} weights",
                side, lines, weights
            ),
            Violation::NonPositiveWeight { side, index, value } => {
                write!(f, "weight {}[{}] = {} must be positive and finite", side, index, value)
            }
            Violation::WeightSumOutOfRange { sum } => {
                write!(f, "weight sum {} must lie in (0, 1]", sum)
            }
        }
    }
}

/// Errors from coordination checking.
#[derive(Debug, Clone, PartialEq)]
pub enum GeometryError {
    CornerEval { corner: &'static str, source: EvalError },
}

impl fmt::Display for GeometryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeometryError::CornerEval { corner, source } => {
                write!(f, "failed to evaluate data at corner {}: {}", corner, source)
            }
        }
    }
}

impl core::error::Error for GeometryError {}

// Admits weight sums that equal 1 in real arithmetic but land one rounding
// ulp above it (e.g. gamma+ constructed as 1 - gamma-).
const WEIGHT_SUM_SLACK: f64 = 1e-12;

/// Checks admissibility of the split geometry and contact data. Returns every
/// violation found; an empty list means admissible. Total: any float input,
/// including NaN, yields a verdict rather than a panic.
pub fn validate(geom: &SplitGeometry, spec: &ContactSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    let a = geom.rect.a;
    let b = geom.rect.b;
    if !(a > 0.0) || !a.is_finite() {
        out.push(Violation::NonPositiveSide { axis: "a", value: a });
    }
    if !(b > 0.0) || !b.is_finite() {
        out.push(Violation::NonPositiveSide { axis: "b", value: b });
    }
    if !(geom.xi0 > 0.0 && geom.xi0 < a) {
        out.push(Violation::InterfaceOutOfRange { xi0: geom.xi0 });
    }

    // xi_minus runs from the interface toward 0, xi_plus toward a.
    for (i, &x) in geom.xi_minus.iter().enumerate() {
        if !(x > 0.0 && x < geom.xi0) {
            out.push(Violation::LineOutOfRange { side: "xi_minus", index: i, value: x });
        }
        if i > 0 && !(x < geom.xi_minus[i - 1]) {
            out.push(Violation::UnorderedLines { side: "xi_minus", index: i });
        }
    }
    for (i, &x) in geom.xi_plus.iter().enumerate() {
        if !(x > geom.xi0 && x < a) {
            out.push(Violation::LineOutOfRange { side: "xi_plus", index: i, value: x });
        }
        if i > 0 && !(x > geom.xi_plus[i - 1]) {
            out.push(Violation::UnorderedLines { side: "xi_plus", index: i });
        }
    }
    if geom.xi_minus.is_empty() && geom.xi_plus.is_empty() {
        out.push(Violation::NoContactLines);
    }

    if spec.beta_minus.len() != geom.xi_minus.len() {
        out.push(Violation::WeightCountMismatch {
            side: "minus",
            lines: geom.xi_minus.len(),
            weights: spec.beta_minus.len(),
        });
    }
    if spec.beta_plus.len() != geom.xi_plus.len() {
        out.push(Violation::WeightCountMismatch {
            side: "plus",
            lines: geom.xi_plus.len(),
            weights: spec.beta_plus.len(),
        });
    }
    for (side, list) in [("beta_minus", &spec.beta_minus), ("beta_plus", &spec.beta_plus)] {
        for (i, &w) in list.iter().enumerate() {
            if !(w > 0.0) || !w.is_finite() {
                out.push(Violation::NonPositiveWeight { side, index: i, value: w });
            }
        }
    }
    let sum = spec.weight_sum();
    if !(sum > 0.0 && sum <= 1.0 + WEIGHT_SUM_SLACK) {
        out.push(Violation::WeightSumOutOfRange { sum });
    }
    out
}

/// Residuals of the contact condition restricted to the two interface
/// corners, where every value is pinned by Dirichlet data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordinationReport {
    pub residual_a0: f64,
    pub residual_b0: f64,
    pub tol: f64,
    pub satisfied: bool,
}

/// Evaluates the contact condition at the corners `(xi0, 0)` and `(xi0, b)`
/// using boundary data only. A violated report is a data-consistency warning
/// for the caller, not an error.
pub fn check_coordination(
    geom: &SplitGeometry,
    spec: &ContactSpec,
    data: &ProblemData,
    tol: f64,
) -> Result<CoordinationReport, GeometryError> {
    let residual = |x2: f64, corner: &'static str| -> Result<f64, GeometryError> {
        let ev = |field: &FieldRef, x1: f64| {
            field
                .eval(x1, x2)
                .map_err(|source| GeometryError::CornerEval { corner, source })
        };
        let mut rhs = ev(&spec.phi0, geom.xi0)?;
        for (&xi, &beta) in geom.xi_minus.iter().zip(&spec.beta_minus) {
            rhs += beta * ev(&data.minus.boundary, xi)?;
        }
        for (&xi, &beta) in geom.xi_plus.iter().zip(&spec.beta_plus) {
            rhs += beta * ev(&data.plus.boundary, xi)?;
        }
        let lhs = ev(&data.minus.boundary, geom.xi0)?;
        Ok(Float::abs(lhs - rhs))
    };
    let residual_a0 = residual(0.0, "A0")?;
    let residual_b0 = residual(geom.rect.b, "B0")?;
    Ok(CoordinationReport {
        residual_a0,
        residual_b0,
        tol,
        satisfied: residual_a0 <= tol && residual_b0 <= tol,
    })
}

/// Complete problem statement for the iterative solver.
#[derive(Clone)]
pub struct ContactProblem {
    pub geometry: SplitGeometry,
    pub contact: ContactSpec,
    pub data: ProblemData,
}

impl ContactProblem {
    pub fn validate(&self) -> Vec<Violation> {
        validate(&self.geometry, &self.contact)
    }
}

/// Helper for tests and built-ins: a spec whose profile is a field handle.
pub fn contact_spec(beta_minus: Vec<f64>, beta_plus: Vec<f64>, phi0: FieldRef) -> ContactSpec {
    ContactSpec { beta_minus, beta_plus, phi0 }
}

impl fmt::Debug for ContactSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ContactSpec")
            .field("beta_minus", &self.beta_minus)
            .field("beta_plus", &self.beta_plus)
            .finish_non_exhaustive()
    }
}
