//! Separated-variables solver for the Poisson form of the contact problem on
//! the unit square.
//!
//! Both subdomains carry `Laplace(u) = f` with zero Dirichlet data on the
//! outer boundary; the interface value is prescribed nonlocally as
//! `gamma_minus * u(xi_minus, x2) + gamma_plus * u(xi_plus, x2) + phi0(x2)`.
//!
//! Expanding everything in `sin(k pi x2)` decouples the problem into scalar
//! two-point problems `a_k'' - (pi k)^2 a_k = f_k(x1)`. Each subdomain
//! profile is the sinh interpolant of its two boundary values plus a
//! Green's-kernel integral of the mode source; the contact value `Phi_k` then
//! has a closed form with a strictly positive denominator for admissible
//! weights. All hyperbolic factors are evaluated as bounded ratios in
//! subtracted-exponent form, so no intermediate ever overflows regardless of
//! the mode index.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_traits::Float;

use crate::expr::EvalError;
use crate::fd::{Grid, GridFunction, Side};
use crate::field::FieldRef;
use crate::geometry::{ContactSpec, Rect, SplitGeometry, Violation};
use crate::quad::{even_panels, nodes};

pub const DEFAULT_MODES: usize = 64;
pub const DEFAULT_PANELS_PER_UNIT: u32 = 256;

/// Two-point Poisson contact problem on the unit square: one contact line on
/// each side of the interface.
#[derive(Clone)]
pub struct PoissonContactProblem {
    pub xi_minus: f64,
    pub xi0: f64,
    pub xi_plus: f64,
    pub gamma_minus: f64,
    pub gamma_plus: f64,
    pub f_minus: FieldRef,
    pub f_plus: FieldRef,
    pub phi0: FieldRef,
}

impl PoissonContactProblem {
    /// Admissibility under the same rules as the general geometry.
    pub fn validate(&self) -> Vec<Violation> {
        let geom = SplitGeometry {
            rect: Rect::UNIT,
            xi0: self.xi0,
            xi_minus: vec![self.xi_minus],
            xi_plus: vec![self.xi_plus],
        };
        let spec = ContactSpec {
            beta_minus: vec![self.gamma_minus],
            beta_plus: vec![self.gamma_plus],
            phi0: self.phi0.clone(),
        };
        crate::geometry::validate(&geom, &spec)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FourierError {
    InvalidProblem(Vec<Violation>),
    Eval(EvalError),
    NonPositiveAlpha { alpha: f64 },
    ZeroSpan,
    SignMismatch { x: f64, span: f64 },
    OffsetExceedsSpan { x: f64, span: f64 },
    NonPositiveDenominator { k: usize, value: f64 },
    ZeroModes,
    ModeOutOfRange { k: usize, k_max: usize },
    PointOutsideDomain { x1: f64, x2: f64 },
    StencilLeavesDomain { h: f64 },
    StencilCrossesInterface { x1: f64, h: f64 },
    GridNotUnitSquare,
    GridHasNoInterface,
}

impl fmt::Display for FourierError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FourierError::InvalidProblem(violations) => {
                write!(f, "inadmissible problem data:")?;
                for v in violations {
                    write!(f, " {};", v)?;
                }
                Ok(())
            }
            FourierError::Eval(e) => write!(f, "field evaluation failed: {}", e),
            FourierError::NonPositiveAlpha { alpha } => {
                write!(f, "hyperbolic scale alpha = {} must be positive", alpha)
            }
            FourierError::ZeroSpan => write!(f, "sinh ratio with zero or non-finite span"),
            FourierError::SignMismatch { x, span } => {
                write!(f, "sinh ratio offset {} and span {} must share a sign", x, span)
            }
            FourierError::OffsetExceedsSpan { x, span } => {
                write!(f, "sinh ratio offset {} exceeds span {}", x, span)
            }
            FourierError::NonPositiveDenominator { k, value } => {
                write!(f, "contact denominator for mode {} is {} (not positive)", k, value)
            }
            FourierError::ZeroModes => write!(f, "at least one mode is required"),
            FourierError::ModeOutOfRange { k, k_max } => {
                write!(f, "mode {} outside 1..={}", k, k_max)
            }
            FourierError::PointOutsideDomain { x1, x2 } => {
                write!(f, "point ({}, {}) outside the closed unit square", x1, x2)
            }
            FourierError::StencilLeavesDomain { h } => {
                write!(f, "difference stencil with step {} leaves the open domain", h)
            }
            FourierError::StencilCrossesInterface { x1, h } => write!(
                f,
                "difference stencil at x1 = {} with step {} straddles the interface",
                x1, h
            ),
            FourierError::GridNotUnitSquare => {
                write!(f, "series evaluation requires the unit square")
            }
            FourierError::GridHasNoInterface => {
                write!(f, "series evaluation on a grid requires an interface column")
            }
        }
    }
}

impl core::error::Error for FourierError {}

impl From<EvalError> for FourierError {
    fn from(e: EvalError) -> Self {
        FourierError::Eval(e)
    }
}

/// `sin(pi t)` with exact zeros at integer `t`; the argument is reduced
/// before the trig call so large multiples stay accurate.
pub fn sinpi(t: f64) -> f64 {
    let mut w = t % 2.0;
    if w < 0.0 {
        w += 2.0;
    }
    let (sign, mut w) = if w > 1.0 { (-1.0, w - 1.0) } else { (1.0, w) };
    if w > 0.5 {
        w = 1.0 - w;
    }
    if w == 0.0 {
        return 0.0;
    }
    sign * Float::sin(core::f64::consts::PI * w)
}

/// `sinh(alpha x) / sinh(alpha span)` for `0 <= x/span <= 1`, evaluated in
/// subtracted-exponent form: the result is in `[0, 1]` and no intermediate
/// overflows for any positive `alpha`.
pub fn sinh_ratio(alpha: f64, x: f64, span: f64) -> Result<f64, FourierError> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(FourierError::NonPositiveAlpha { alpha });
    }
    if span == 0.0 || !span.is_finite() || !x.is_finite() {
        return Err(FourierError::ZeroSpan);
    }
    if x * span < 0.0 {
        return Err(FourierError::SignMismatch { x, span });
    }
    let u = alpha * Float::abs(x);
    let v = alpha * Float::abs(span);
    if Float::abs(x) > Float::abs(span) {
        return Err(FourierError::OffsetExceedsSpan { x, span });
    }
    if v == 0.0 {
        // alpha*span underflowed: the ratio degenerates to the linear one.
        return Ok((x / span).clamp(0.0, 1.0));
    }
    let ratio = Float::exp(u - v) * (Float::exp_m1(-2.0 * u) / Float::exp_m1(-2.0 * v));
    Ok(ratio.clamp(0.0, 1.0))
}

/// `sinh(alpha p) * sinh(alpha q) / sinh(alpha r)` for `p, q >= 0`,
/// `p + q <= r`, in the same overflow-free form.
pub(crate) fn sinh_prod_ratio(alpha: f64, p: f64, q: f64, r: f64) -> f64 {
    debug_assert!(p >= 0.0 && q >= 0.0 && r > 0.0 && p + q <= r * (1.0 + 1e-12));
    let ep = Float::exp_m1(-2.0 * alpha * p);
    let eq = Float::exp_m1(-2.0 * alpha * q);
    let er = -Float::exp_m1(-2.0 * alpha * r);
    if er == 0.0 {
        // alpha*r underflowed; linear limit p*q*alpha/r.
        return alpha * p * q / r;
    }
    0.5 * Float::exp(alpha * (p + q - r)) * (ep * eq / er)
}

/// Green's kernel of `d^2/dx^2 - alpha^2` on `[lo, hi]` with zero endpoint
/// values; nonpositive everywhere.
pub(crate) fn green_kernel(alpha: f64, lo: f64, hi: f64, x: f64, s: f64) -> f64 {
    let p = (Float::min(x, s) - lo).max(0.0);
    let q = (hi - Float::max(x, s)).max(0.0);
    -sinh_prod_ratio(alpha, p, q, hi - lo) / alpha
}

/// Sine-series coefficients of a field in the `x2` direction, as evaluable
/// functions of `x1` backed by quadrature.
pub struct SineCoeffs {
    field: FieldRef,
    k_max: usize,
    panels: usize,
}

pub fn sine_coeffs(
    field: FieldRef,
    k_max: usize,
    panels_per_unit: u32,
) -> Result<SineCoeffs, FourierError> {
    if k_max == 0 {
        return Err(FourierError::ZeroModes);
    }
    Ok(SineCoeffs {
        field,
        k_max,
        panels: even_panels(1.0, panels_per_unit.max(2)),
    })
}

impl SineCoeffs {
    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// `f_k(x1) = 2 * int_0^1 f(x1, t) sin(k pi t) dt`.
    pub fn eval(&self, k: usize, x1: f64) -> Result<f64, FourierError> {
        if k == 0 || k > self.k_max {
            return Err(FourierError::ModeOutOfRange { k, k_max: self.k_max });
        }
        let v = crate::quad::simpson(
            |t| {
                self.field
                    .eval(x1, t)
                    .map(|f| f * sinpi(k as f64 * t))
                    .map_err(FourierError::from)
            },
            0.0,
            1.0,
            self.panels,
        )?;
        Ok(2.0 * v)
    }
}

// Mode sources f_k at a list of x1 stations, all modes at once. One column
// sample of the field serves every mode.
fn mode_source_table(
    field: &FieldRef,
    stations: &[f64],
    k_max: usize,
    panels: usize,
) -> Result<Vec<Vec<f64>>, FourierError> {
    let t_nodes = nodes(0.0, 1.0, panels);
    let h_t = 1.0 / panels as f64;
    let w = simpson_weights(panels, h_t);
    // sin(k pi t_j) table, k major.
    let sin_t: Vec<Vec<f64>> = (1..=k_max)
        .map(|k| t_nodes.iter().map(|&t| sinpi(k as f64 * t)).collect())
        .collect();
    let mut table = vec![vec![0.0f64; stations.len()]; k_max];
    let mut col = vec![0.0f64; t_nodes.len()];
    for (i, &s) in stations.iter().enumerate() {
        for (j, &t) in t_nodes.iter().enumerate() {
            col[j] = field.eval(s, t)?;
        }
        for (k_row, sin_row) in sin_t.iter().enumerate() {
            let mut acc = 0.0;
            for j in 0..col.len() {
                acc += w[j] * col[j] * sin_row[j];
            }
            table[k_row][i] = 2.0 * acc;
        }
    }
    Ok(table)
}

fn simpson_weights(panels: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; panels + 1];
    w[0] = h / 3.0;
    w[panels] = h / 3.0;
    for (i, wi) in w.iter_mut().enumerate().take(panels).skip(1) {
        *wi = if i % 2 == 1 { 4.0 * h / 3.0 } else { 2.0 * h / 3.0 };
    }
    w
}

// One integration segment: stations, Simpson weights, and the per-mode
// source samples on it.
struct Segment {
    stations: Vec<f64>,
    weights: Vec<f64>,
    sources: Vec<Vec<f64>>,
}

impl Segment {
    fn build(
        field: &FieldRef,
        lo: f64,
        hi: f64,
        k_max: usize,
        panels_per_unit: u32,
        t_panels: usize,
    ) -> Result<Segment, FourierError> {
        let panels = even_panels(hi - lo, panels_per_unit.max(2));
        let stations = nodes(lo, hi, panels);
        let weights = simpson_weights(panels, (hi - lo) / panels as f64);
        let sources = mode_source_table(field, &stations, k_max, t_panels)?;
        Ok(Segment { stations, weights, sources })
    }

    /// `int G(x, s) f_k(s) ds` over this segment with the kernel of the span
    /// `[lo, hi]`, for mode index `kidx` (zero-based) and scale `alpha`.
    fn kernel_integral(&self, kidx: usize, alpha: f64, lo: f64, hi: f64, x: f64) -> f64 {
        let mut acc = 0.0;
        for (i, &s) in self.stations.iter().enumerate() {
            acc += self.weights[i] * green_kernel(alpha, lo, hi, x, s) * self.sources[kidx][i];
        }
        acc
    }
}

/// Truncated sine-series solution of a [`PoissonContactProblem`].
pub struct FourierSolution {
    problem: PoissonContactProblem,
    k_max: usize,
    panels_per_unit: u32,
    t_panels: usize,
    phi: Vec<f64>,
    denom: Vec<f64>,
}

impl FourierSolution {
    pub fn new(
        problem: &PoissonContactProblem,
        k_max: usize,
        panels_per_unit: u32,
    ) -> Result<FourierSolution, FourierError> {
        if k_max == 0 {
            return Err(FourierError::ZeroModes);
        }
        let violations = problem.validate();
        if !violations.is_empty() {
            return Err(FourierError::InvalidProblem(violations));
        }
        let xi0 = problem.xi0;
        let t_panels = even_panels(1.0, panels_per_unit.max(2));

        // Interface profile modes.
        let t_nodes = nodes(0.0, 1.0, t_panels);
        let w_t = simpson_weights(t_panels, 1.0 / t_panels as f64);
        let mut phi0_col = vec![0.0f64; t_nodes.len()];
        for (j, &t) in t_nodes.iter().enumerate() {
            phi0_col[j] = problem.phi0.eval(xi0, t)?;
        }

        // Source contributions to the contact values, split at the contact
        // lines so the kernel's derivative break sits on a panel boundary.
        let seg_l1 = Segment::build(&problem.f_minus, 0.0, problem.xi_minus, k_max, panels_per_unit, t_panels)?;
        let seg_l2 = Segment::build(&problem.f_minus, problem.xi_minus, xi0, k_max, panels_per_unit, t_panels)?;
        let seg_r1 = Segment::build(&problem.f_plus, xi0, problem.xi_plus, k_max, panels_per_unit, t_panels)?;
        let seg_r2 = Segment::build(&problem.f_plus, problem.xi_plus, 1.0, k_max, panels_per_unit, t_panels)?;

        let mut phi = Vec::with_capacity(k_max);
        let mut denom = Vec::with_capacity(k_max);
        for k in 1..=k_max {
            let kidx = k - 1;
            let alpha = core::f64::consts::PI * k as f64;
            let s_minus = sinh_ratio(alpha, problem.xi_minus, xi0)?;
            let s_plus = sinh_ratio(alpha, problem.xi_plus - 1.0, xi0 - 1.0)?;
            let den = 1.0 - (problem.gamma_minus * s_minus + problem.gamma_plus * s_plus);
            if !(den > 0.0) {
                return Err(FourierError::NonPositiveDenominator { k, value: den });
            }
            let mut phi0_k = 0.0;
            for (j, &t) in t_nodes.iter().enumerate() {
                phi0_k += w_t[j] * phi0_col[j] * sinpi(k as f64 * t);
            }
            phi0_k *= 2.0;

            let c_minus = seg_l1.kernel_integral(kidx, alpha, 0.0, xi0, problem.xi_minus)
                + seg_l2.kernel_integral(kidx, alpha, 0.0, xi0, problem.xi_minus);
            let c_plus = seg_r1.kernel_integral(kidx, alpha, xi0, 1.0, problem.xi_plus)
                + seg_r2.kernel_integral(kidx, alpha, xi0, 1.0, problem.xi_plus);

            phi.push((problem.gamma_minus * c_minus + problem.gamma_plus * c_plus + phi0_k) / den);
            denom.push(den);
        }
        Ok(FourierSolution {
            problem: problem.clone(),
            k_max,
            panels_per_unit,
            t_panels,
            phi,
            denom,
        })
    }

    /// Contact-value coefficients `Phi_k`, `k = 1..=k_max`.
    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    /// Contact denominators per mode (diagnostic; strictly positive).
    pub fn denominators(&self) -> &[f64] {
        &self.denom
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// Crude bound on the dropped tail: the last retained contact coefficient
    /// times coth of the decay exponent to the nearer outer boundary.
    pub fn tail_estimate(&self) -> f64 {
        let alpha = core::f64::consts::PI * self.k_max as f64;
        let margin = Float::min(self.problem.xi0, 1.0 - self.problem.xi0);
        let coth = 1.0 / Float::tanh(alpha * margin);
        Float::abs(self.phi[self.k_max - 1]) * coth
    }

    /// Mode profile `a_k(x1)` for the side containing `x1`, with the source
    /// part integrated fresh (panel boundaries at `x1`).
    fn mode_profile(&self, segments: &[Segment; 2], lo: f64, hi: f64, x1: f64, kidx: usize)
        -> Result<f64, FourierError>
    {
        let alpha = core::f64::consts::PI * (kidx + 1) as f64;
        let trace_part = if hi == self.problem.xi0 {
            // minus side: profile rises from 0 at x1=0 to Phi at the interface
            self.phi[kidx] * sinh_ratio(alpha, x1 - lo, hi - lo)?
        } else {
            // plus side: from Phi at the interface down to 0 at x1=1
            self.phi[kidx] * sinh_ratio(alpha, x1 - hi, lo - hi)?
        };
        let source_part = segments[0].kernel_integral(kidx, alpha, lo, hi, x1)
            + segments[1].kernel_integral(kidx, alpha, lo, hi, x1);
        Ok(trace_part + source_part)
    }

    /// Point evaluation of the truncated series on the closed unit square.
    pub fn eval(&self, x1: f64, x2: f64) -> Result<f64, FourierError> {
        if !(0.0..=1.0).contains(&x1) || !(0.0..=1.0).contains(&x2) {
            return Err(FourierError::PointOutsideDomain { x1, x2 });
        }
        if x2 == 0.0 || x2 == 1.0 || x1 == 0.0 || x1 == 1.0 {
            return Ok(0.0);
        }
        let xi0 = self.problem.xi0;
        if x1 == xi0 {
            let mut u = 0.0;
            for k in 1..=self.k_max {
                u += self.phi[k - 1] * sinpi(k as f64 * x2);
            }
            return Ok(u);
        }
        let (field, lo, hi) = if x1 < xi0 {
            (&self.problem.f_minus, 0.0, xi0)
        } else {
            (&self.problem.f_plus, xi0, 1.0)
        };
        let segments = [
            Segment::build(field, lo, x1, self.k_max, self.panels_per_unit, self.t_panels)?,
            Segment::build(field, x1, hi, self.k_max, self.panels_per_unit, self.t_panels)?,
        ];
        let mut u = 0.0;
        for kidx in 0..self.k_max {
            let a_k = self.mode_profile(&segments, lo, hi, x1, kidx)?;
            u += a_k * sinpi((kidx + 1) as f64 * x2);
        }
        Ok(u)
    }

    /// Series evaluation at every node of a unit-square contact grid. The
    /// integration lattice on each side refines the grid columns, so the
    /// kernel's derivative break always sits on a panel boundary.
    pub fn eval_on_grid(&self, grid: &Grid) -> Result<GridFunction, FourierError> {
        if (grid.a - 1.0).abs() > 1e-12 || (grid.b - 1.0).abs() > 1e-12 {
            return Err(FourierError::GridNotUnitSquare);
        }
        let i0 = grid.interface_col().ok_or(FourierError::GridHasNoInterface)?;
        let xi0 = self.problem.xi0;
        if (grid.x1(i0) - xi0).abs() > 1e-12 * grid.h1 {
            return Err(FourierError::GridHasNoInterface);
        }

        let mut out = GridFunction::zeros(Side::Full, *grid);
        // sin(k pi x2_j) table.
        let sin_tab: Vec<Vec<f64>> = (1..=self.k_max)
            .map(|k| {
                (0..grid.n2 + 2)
                    .map(|j| sinpi(k as f64 * grid.x2(j)))
                    .collect()
            })
            .collect();

        for (side_cols, lo, hi, field) in [
            (1..i0, 0.0, xi0, &self.problem.f_minus),
            (i0 + 1..grid.n1 + 1, xi0, 1.0, &self.problem.f_plus),
        ] {
            let cols: Vec<usize> = side_cols.collect();
            if cols.is_empty() {
                continue;
            }
            // Refinement factor: even, and at least the requested density.
            let col_panels = cols.len() + 1;
            let base = ((hi - lo) * self.panels_per_unit.max(2) as f64
                / col_panels as f64)
                .ceil() as usize;
            let r = if base.is_multiple_of(2) { base.max(2) } else { base + 1 };
            let panels = col_panels * r;
            let stations = nodes(lo, hi, panels);
            let weights = simpson_weights(panels, (hi - lo) / panels as f64);
            let sources = mode_source_table(field, &stations, self.k_max, self.t_panels)?;

            let mut a = vec![0.0f64; self.k_max];
            for (ci, &c) in cols.iter().enumerate() {
                let m = (ci + 1) * r;
                let x = stations[m];
                for kidx in 0..self.k_max {
                    let alpha = core::f64::consts::PI * (kidx + 1) as f64;
                    let trace_part = if hi == xi0 {
                        self.phi[kidx] * sinh_ratio(alpha, x - lo, hi - lo)?
                    } else {
                        self.phi[kidx] * sinh_ratio(alpha, x - hi, lo - hi)?
                    };
                    let mut src = 0.0;
                    for (i, &s) in stations.iter().enumerate() {
                        src += weights[i]
                            * green_kernel(alpha, lo, hi, x, s)
                            * sources[kidx][i];
                    }
                    a[kidx] = trace_part + src;
                }
                for j in 1..=grid.n2 {
                    let mut u = 0.0;
                    for kidx in 0..self.k_max {
                        u += a[kidx] * sin_tab[kidx][j];
                    }
                    out.set(c, j, u);
                }
            }
        }
        // Interface column: the contact values themselves.
        for j in 1..=grid.n2 {
            let mut u = 0.0;
            for kidx in 0..self.k_max {
                u += self.phi[kidx] * sin_tab[kidx][j];
            }
            out.set(i0, j, u);
        }
        Ok(out)
    }
}

/// Contact-value coefficients of the truncated series.
pub fn phi_coefficients(
    problem: &PoissonContactProblem,
    k_max: usize,
    panels_per_unit: u32,
) -> Result<Vec<f64>, FourierError> {
    FourierSolution::new(problem, k_max, panels_per_unit).map(|s| s.phi)
}

/// Point evaluation of the truncated series.
pub fn eval_solution(sol: &FourierSolution, x1: f64, x2: f64) -> Result<f64, FourierError> {
    sol.eval(x1, x2)
}

/// Five-point Laplacian defect of the series against the side's source at an
/// interior point whose stencil stays inside one subdomain.
pub fn residual_check(
    sol: &FourierSolution,
    x1: f64,
    x2: f64,
    h: f64,
) -> Result<f64, FourierError> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(FourierError::StencilLeavesDomain { h });
    }
    let inside = |v: f64| v > 0.0 && v < 1.0;
    if !(inside(x1 - h) && inside(x1 + h) && inside(x2 - h) && inside(x2 + h)) {
        return Err(FourierError::StencilLeavesDomain { h });
    }
    let xi0 = sol.problem.xi0;
    let (field, on_minus) = if x1 + h <= xi0 {
        (&sol.problem.f_minus, true)
    } else if x1 - h >= xi0 {
        (&sol.problem.f_plus, false)
    } else {
        return Err(FourierError::StencilCrossesInterface { x1, h });
    };
    let _ = on_minus;
    let um = sol.eval(x1 - h, x2)?;
    let up = sol.eval(x1 + h, x2)?;
    let vm = sol.eval(x1, x2 - h)?;
    let vp = sol.eval(x1, x2 + h)?;
    let uc = sol.eval(x1, x2)?;
    let lap = (um + up + vm + vp - 4.0 * uc) / (h * h);
    Ok(lap - field.eval(x1, x2)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{constant, function};
    use proptest::prelude::*;

    fn two_point(phi0: FieldRef, f_minus: FieldRef, f_plus: FieldRef) -> PoissonContactProblem {
        PoissonContactProblem {
            xi_minus: 0.25,
            xi0: 0.5,
            xi_plus: 0.75,
            gamma_minus: 0.5,
            gamma_plus: 0.5,
            f_minus,
            f_plus,
            phi0,
        }
    }

    #[test]
    fn sinh_ratio_endpoints() {
        assert_eq!(sinh_ratio(3.0, 0.0, 0.7).unwrap(), 0.0);
        assert_eq!(sinh_ratio(3.0, 0.7, 0.7).unwrap(), 1.0);
        assert_eq!(sinh_ratio(3.0, -0.7, -0.7).unwrap(), 1.0);
    }

    #[test]
    fn sinh_ratio_extreme_scale_matches_reference() {
        // 30-digit reference: sinh(25 pi)/sinh(50 pi)
        //   = 7.773044498987555115821163e-35.
        let v = sinh_ratio(100.0 * core::f64::consts::PI, 0.25, 0.5).unwrap();
        let reference = 7.773044498987555e-35;
        assert!((v - reference).abs() <= 1e-14 * reference);
    }

    #[test]
    fn sinh_ratio_moderate_scale_matches_direct_formula() {
        for &(alpha, x, l) in &[(2.0, 0.3, 0.9), (7.5, 0.1, 0.4), (1e-6, 0.2, 0.5)] {
            let direct = (alpha * x).sinh() / (alpha * l).sinh();
            let stable = sinh_ratio(alpha, x, l).unwrap();
            assert!((stable - direct).abs() <= 1e-14 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn sinh_ratio_rejects_bad_inputs() {
        assert!(matches!(sinh_ratio(1.0, 0.1, 0.0), Err(FourierError::ZeroSpan)));
        assert!(matches!(
            sinh_ratio(1.0, -0.1, 0.5),
            Err(FourierError::SignMismatch { .. })
        ));
        assert!(matches!(
            sinh_ratio(1.0, 0.7, 0.5),
            Err(FourierError::OffsetExceedsSpan { .. })
        ));
        assert!(matches!(
            sinh_ratio(0.0, 0.1, 0.5),
            Err(FourierError::NonPositiveAlpha { .. })
        ));
    }

    #[test]
    fn sinpi_exact_zeros_and_symmetry() {
        assert_eq!(sinpi(0.0), 0.0);
        assert_eq!(sinpi(1.0), 0.0);
        assert_eq!(sinpi(64.0), 0.0);
        assert_eq!(sinpi(-7.0), 0.0);
        assert!((sinpi(0.5) - 1.0).abs() < 1e-15);
        assert!((sinpi(1.5) + 1.0).abs() < 1e-15);
        assert!((sinpi(12.25) - (12.25f64 * core::f64::consts::PI).sin()).abs() < 1e-12);
    }

    #[test]
    fn homogeneous_contact_coefficient_matches_closed_form() {
        // 30-digit reference for phi0 = sin(pi x2), f = 0:
        //   Phi_1 = 1/(1 - sinh(pi/4)/sinh(pi/2)) = 1.606347912625538354824697.
        let p = two_point(
            function(|_, x2| (core::f64::consts::PI * x2).sin()),
            constant(0.0),
            constant(0.0),
        );
        let phi = phi_coefficients(&p, 8, 256).unwrap();
        assert!((phi[0] - 1.6063479126255384).abs() < 1e-12, "Phi_1 = {}", phi[0]);
        for (k, &v) in phi.iter().enumerate().skip(1) {
            assert!(v.abs() < 1e-10, "Phi_{} = {}", k + 1, v);
        }
    }

    #[test]
    fn homogeneous_profile_matches_closed_form() {
        let p = two_point(
            function(|_, x2| (core::f64::consts::PI * x2).sin()),
            constant(0.0),
            constant(0.0),
        );
        let sol = FourierSolution::new(&p, 8, 256).unwrap();
        // 30-digit references: Phi_1 * sinh(pi x)/sinh(pi/2) at x = 1/8, 3/8
        // and the mirrored right-side values.
        for (x1, x2, want) in [
            (0.125, 0.5, 0.2812107529370900),
            (0.375, 0.5, 1.0261993916088291),
            (0.625, 0.5, 1.0261993916088291),
            (0.875, 0.5, 0.2812107529370900),
            (0.5, 0.5, 1.6063479126255384),
        ] {
            let v = sol.eval(x1, x2).unwrap();
            assert!((v - want).abs() < 1e-10, "u({},{}) = {}, want {}", x1, x2, v, want);
        }
    }

    #[test]
    fn sourced_symmetric_case_matches_ode_oracle() {
        // Source sin(pi x2) on both sides, phi0 = 0. Symbolic two-point
        // solve gives Phi = -0.03988529543605742240563095 and the profile
        // values below (30-digit evaluation).
        let f = || function(|_, x2| (core::f64::consts::PI * x2).sin());
        let p = two_point(constant(0.0), f(), f());
        let sol = FourierSolution::new(&p, 6, 256).unwrap();
        assert!(
            (sol.phi()[0] - (-0.039885295436057422)).abs() < 2e-9,
            "Phi_1 = {}",
            sol.phi()[0]
        );
        for (x1, want) in [
            (0.125, -0.025838052972023275),
            (0.375, -0.044335970961259837),
            (0.625, -0.044335970961259837),
            (0.875, -0.025838052972023275),
        ] {
            let v = sol.eval(x1, 0.5).unwrap();
            assert!((v - want).abs() < 5e-9, "u({},0.5) = {}, want {}", x1, want, v);
        }
    }

    #[test]
    fn sourced_asymmetric_case_matches_ode_oracle() {
        // f- = x1 sin(2 pi x2), f+ = 0, phi0 = 0, gamma = (0.3, 0.45),
        // xi = (0.3, 0.55, 0.8). Symbolic mode-2 solve, 30 digits.
        let p = PoissonContactProblem {
            xi_minus: 0.3,
            xi0: 0.55,
            xi_plus: 0.8,
            gamma_minus: 0.3,
            gamma_plus: 0.45,
            f_minus: function(|x1, x2| x1 * (2.0 * core::f64::consts::PI * x2).sin()),
            f_plus: constant(0.0),
            phi0: constant(0.0),
        };
        let sol = FourierSolution::new(&p, 4, 256).unwrap();
        assert!(
            (sol.phi()[1] - (-0.0016770331266054886)).abs() < 2e-9,
            "Phi_2 = {}",
            sol.phi()[1]
        );
        // x2 = 1/4 makes sin(2 pi x2) = 1; other modes carry only dust.
        for (x1, want) in [
            (0.15, -0.0029567688348997091),
            (0.45, -0.0048773221022336995),
            (0.7, -0.00064065192212862645),
            (0.9, -0.00013351935462145178),
        ] {
            let v = sol.eval(x1, 0.25).unwrap();
            assert!((v - want).abs() < 5e-9, "u({},0.25) = {}, want {}", x1, want, v);
        }
    }

    #[test]
    fn boundary_values_are_exactly_zero() {
        let p = two_point(
            function(|_, x2| (core::f64::consts::PI * x2).sin()),
            constant(1.0),
            constant(1.0),
        );
        let sol = FourierSolution::new(&p, 8, 128).unwrap();
        for v in [
            sol.eval(0.0, 0.3).unwrap(),
            sol.eval(1.0, 0.7).unwrap(),
            sol.eval(0.4, 0.0).unwrap(),
            sol.eval(0.6, 1.0).unwrap(),
        ] {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn sine_coeffs_orthogonality() {
        let sc = sine_coeffs(
            function(|_, x2| (core::f64::consts::PI * x2).sin()),
            4,
            256,
        )
        .unwrap();
        assert!((sc.eval(1, 0.3).unwrap() - 1.0).abs() < 1e-9);
        assert!(sc.eval(2, 0.3).unwrap().abs() < 1e-9);
        let sc = sine_coeffs(
            function(|x1, x2| x1 * (2.0 * core::f64::consts::PI * x2).sin()),
            4,
            256,
        )
        .unwrap();
        assert!((sc.eval(2, 0.3).unwrap() - 0.3).abs() < 1e-9);
        assert!(matches!(
            sc.eval(9, 0.3),
            Err(FourierError::ModeOutOfRange { .. })
        ));
    }

    #[test]
    fn residual_shrinks_at_second_order() {
        let f = || function(|_, x2| (core::f64::consts::PI * x2).sin());
        let p = two_point(constant(0.0), f(), f());
        let sol = FourierSolution::new(&p, 6, 256).unwrap();
        let d1 = residual_check(&sol, 0.3, 0.4, 0.02).unwrap().abs();
        let d2 = residual_check(&sol, 0.3, 0.4, 0.01).unwrap().abs();
        let rate = d1 / d2;
        assert!((3.0..5.0).contains(&rate), "rate {} (d1 {}, d2 {})", rate, d1, d2);
    }

    #[test]
    fn residual_check_rejects_bad_stencils() {
        let p = two_point(constant(0.0), constant(0.0), constant(0.0));
        let sol = FourierSolution::new(&p, 4, 64).unwrap();
        assert!(matches!(
            residual_check(&sol, 0.3, 0.0, 0.01),
            Err(FourierError::StencilLeavesDomain { .. })
        ));
        assert!(matches!(
            residual_check(&sol, 0.5, 0.5, 0.01),
            Err(FourierError::StencilCrossesInterface { .. })
        ));
    }

    #[test]
    fn inadmissible_geometry_is_rejected() {
        let mut p = two_point(constant(0.0), constant(0.0), constant(0.0));
        p.gamma_minus = 0.7;
        p.gamma_plus = 0.7;
        assert!(matches!(
            FourierSolution::new(&p, 4, 64),
            Err(FourierError::InvalidProblem(_))
        ));
    }

    proptest! {
        // The stable ratio stays in [0,1] and never overflows across the
        // whole admissible range, including extreme mode indices.
        #[test]
        fn sinh_ratio_bounded(
            k in 1usize..=512,
            frac in 0.0f64..=1.0,
            span in 0.01f64..=0.99,
        ) {
            let alpha = core::f64::consts::PI * k as f64;
            let x = frac * span;
            let r = sinh_ratio(alpha, x, span).unwrap();
            prop_assert!((0.0..=1.0).contains(&r));
        }
    }
}
