//! Conservative finite differences for the mixed-derivative elliptic
//! operator on a uniform grid over a split rectangle.
//!
//! Diagonal coefficients are differenced in flux form with half-node
//! sampling; mixed terms use centered four-point cross stencils with the
//! coefficient taken at the neighbor node. The scheme is second order on
//! smooth data and each stencil row holds at most nine entries.
//!
//! A subdomain solve is a Dirichlet problem whose interface column enters
//! only through the right-hand side. The matrix is therefore assembled and
//! factored once per side and reused across contact sweeps; unknowns are
//! numbered fastest along `x1` inside the subdomain, which keeps the band
//! width at one subdomain column plus one.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::RangeInclusive;

use num_traits::Float;

use crate::expr::EvalError;
use crate::field::Field;
use crate::geometry::{Rect, SideData};

// Relative slack (in units of h) when matching a coordinate to a column.
const COLUMN_MATCH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum FdError {
    InvalidRect { a: f64, b: f64 },
    GridTooSmall { n1: usize, n2: usize },
    InterfaceMisaligned { xi0: f64, h1: f64 },
    InterfaceNearBoundary { i0: usize, n1: usize },
    SideUnavailable { side: Side },
    FullGridHasInterface,
    Eval(EvalError),
    NotElliptic { x1: f64, x2: f64 },
    NegativeReaction { x1: f64, x2: f64 },
    LayoutMismatch,
    TraceRequired,
    TraceLengthMismatch { expected: usize, got: usize },
    TraceOffInterface { x1: f64 },
    VectorLength { expected: usize, got: usize },
    UnalignedLine { x: f64 },
    LineOutsideSide { x: f64 },
    SingularFactor { row: usize },
}

impl fmt::Display for FdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FdError::InvalidRect { a, b } => write!(f, "invalid rectangle {} x {}", a, b),
            FdError::GridTooSmall { n1, n2 } => {
                write!(f, "grid with {} x {} interior nodes is too small", n1, n2)
            }
            FdError::InterfaceMisaligned { xi0, h1 } => write!(
                f,
                "interface at {} does not land on a column of spacing {}",
                xi0, h1
            ),
            FdError::InterfaceNearBoundary { i0, n1 } => write!(
                f,
                "interface column {} of {} leaves a subdomain without interior columns",
                i0, n1
            ),
            FdError::SideUnavailable { side } => {
                write!(f, "{:?} side requires a grid with an interface column", side)
            }
            FdError::FullGridHasInterface => {
                write!(f, "whole-rectangle assembly on a grid with an interface column")
            }
            FdError::Eval(e) => write!(f, "coefficient evaluation failed: {}", e),
            FdError::NotElliptic { x1, x2 } => {
                write!(f, "coefficients fail ellipticity near ({}, {})", x1, x2)
            }
            FdError::NegativeReaction { x1, x2 } => {
                write!(f, "negative reaction coefficient at ({}, {})", x1, x2)
            }
            FdError::LayoutMismatch => write!(f, "grid functions use different layouts"),
            FdError::TraceRequired => write!(f, "subdomain right-hand side requires a trace"),
            FdError::TraceLengthMismatch { expected, got } => {
                write!(f, "trace carries {} values, expected {}", got, expected)
            }
            FdError::TraceOffInterface { x1 } => {
                write!(f, "trace at x1 = {} does not sit on the interface column", x1)
            }
            FdError::VectorLength { expected, got } => {
                write!(f, "vector of length {}, expected {}", got, expected)
            }
            FdError::UnalignedLine { x } => {
                write!(f, "line x1 = {} is not a grid column (interpolation disabled)", x)
            }
            FdError::LineOutsideSide { x } => {
                write!(f, "line x1 = {} falls outside the stored columns", x)
            }
            FdError::SingularFactor { row } => {
                write!(f, "zero pivot at elimination step {}", row)
            }
        }
    }
}

impl core::error::Error for FdError {}

impl From<EvalError> for FdError {
    fn from(e: EvalError) -> Self {
        FdError::Eval(e)
    }
}

/// Which part of the split rectangle a grid object refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Minus,
    Plus,
    Full,
}

/// Uniform tensor grid on `(0,a) x (0,b)` with `n1 x n2` interior nodes,
/// optionally carrying an interface column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub a: f64,
    pub b: f64,
    pub n1: usize,
    pub n2: usize,
    pub h1: f64,
    pub h2: f64,
    interface: Option<usize>,
}

impl Grid {
    pub fn new(rect: Rect, n1: usize, n2: usize) -> Result<Grid, FdError> {
        if !(rect.a > 0.0) || !(rect.b > 0.0) || !rect.a.is_finite() || !rect.b.is_finite() {
            return Err(FdError::InvalidRect { a: rect.a, b: rect.b });
        }
        if n1 < 1 || n2 < 1 {
            return Err(FdError::GridTooSmall { n1, n2 });
        }
        Ok(Grid {
            a: rect.a,
            b: rect.b,
            n1,
            n2,
            h1: rect.a / (n1 + 1) as f64,
            h2: rect.b / (n2 + 1) as f64,
            interface: None,
        })
    }

    /// Grid whose column `i0` lands on the interface `xi0`; both subdomains
    /// must keep at least one interior column.
    pub fn with_interface(rect: Rect, n1: usize, n2: usize, xi0: f64) -> Result<Grid, FdError> {
        let mut g = Grid::new(rect, n1, n2)?;
        if n1 < 3 {
            return Err(FdError::GridTooSmall { n1, n2 });
        }
        let t = xi0 / g.h1;
        let r = Float::round(t);
        if Float::abs(t - r) > COLUMN_MATCH_TOL || !r.is_finite() {
            return Err(FdError::InterfaceMisaligned { xi0, h1: g.h1 });
        }
        let i0 = r as usize;
        if !(2..=n1 - 1).contains(&i0) {
            return Err(FdError::InterfaceNearBoundary { i0, n1 });
        }
        g.interface = Some(i0);
        Ok(g)
    }

    pub fn x1(&self, i: usize) -> f64 {
        if i == self.n1 + 1 {
            self.a
        } else {
            i as f64 * self.h1
        }
    }

    pub fn x2(&self, j: usize) -> f64 {
        if j == self.n2 + 1 {
            self.b
        } else {
            j as f64 * self.h2
        }
    }

    pub fn interface_col(&self) -> Option<usize> {
        self.interface
    }

    /// Column index of `x` when it lies on one, within a small relative slack.
    pub fn column_of(&self, x: f64) -> Option<usize> {
        let t = x / self.h1;
        let r = Float::round(t);
        if !r.is_finite() || Float::abs(t - r) > COLUMN_MATCH_TOL {
            return None;
        }
        if r < 0.0 || r > (self.n1 + 1) as f64 {
            return None;
        }
        Some(r as usize)
    }

    fn stored_cols(&self, side: Side) -> Result<(usize, usize), FdError> {
        match (side, self.interface) {
            (Side::Full, _) => Ok((0, self.n1 + 1)),
            (Side::Minus, Some(i0)) => Ok((0, i0)),
            (Side::Plus, Some(i0)) => Ok((i0, self.n1 + 1)),
            (_, None) => Err(FdError::SideUnavailable { side }),
        }
    }

    fn interior_cols(&self, side: Side) -> Result<(usize, usize), FdError> {
        match (side, self.interface) {
            (Side::Full, _) => Ok((1, self.n1)),
            (Side::Minus, Some(i0)) => Ok((1, i0 - 1)),
            (Side::Plus, Some(i0)) => Ok((i0 + 1, self.n1)),
            (_, None) => Err(FdError::SideUnavailable { side }),
        }
    }
}

/// Nodal values over the stored columns of one side (or the whole grid),
/// frame rows and columns included.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    side: Side,
    grid: Grid,
    col_lo: usize,
    col_hi: usize,
    values: Vec<f64>,
}

impl GridFunction {
    /// All-zero function on the stored columns of `side`. Panics if the side
    /// needs an interface column the grid does not have.
    pub fn zeros(side: Side, grid: Grid) -> GridFunction {
        let (col_lo, col_hi) = grid
            .stored_cols(side)
            .expect("side requires an interface column");
        let values = vec![0.0; (col_hi - col_lo + 1) * (grid.n2 + 2)];
        GridFunction { side, grid, col_lo, col_hi, values }
    }

    /// Samples a field at every stored node, frame included.
    pub fn from_field(side: Side, grid: Grid, field: &dyn Field) -> Result<GridFunction, FdError> {
        let mut gf = GridFunction::zeros(side, grid);
        for i in gf.col_lo..=gf.col_hi {
            for j in 0..=grid.n2 + 1 {
                let v = field.eval(grid.x1(i), grid.x2(j))?;
                gf.set(i, j, v);
            }
        }
        Ok(gf)
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn col_range(&self) -> RangeInclusive<usize> {
        self.col_lo..=self.col_hi
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i >= self.col_lo && i <= self.col_hi && j <= self.grid.n2 + 1);
        (i - self.col_lo) * (self.grid.n2 + 2) + j
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.idx(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.values[k] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, &v| Float::max(m, Float::abs(v)))
    }

    /// Max-norm difference over all stored nodes; layouts must match.
    pub fn max_abs_diff(&self, other: &GridFunction) -> Result<f64, FdError> {
        if self.side != other.side || self.grid != other.grid {
            return Err(FdError::LayoutMismatch);
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0f64, |m, (&x, &y)| Float::max(m, Float::abs(x - y))))
    }

    /// Joins two subdomain functions on the same grid into one whole-grid
    /// function; the interface column is taken from the minus side.
    pub fn stitch(minus: &GridFunction, plus: &GridFunction) -> Result<GridFunction, FdError> {
        if minus.side != Side::Minus || plus.side != Side::Plus || minus.grid != plus.grid {
            return Err(FdError::LayoutMismatch);
        }
        let grid = minus.grid;
        let mut out = GridFunction::zeros(Side::Full, grid);
        for i in minus.col_lo..=minus.col_hi {
            for j in 0..=grid.n2 + 1 {
                out.set(i, j, minus.get(i, j));
            }
        }
        for i in plus.col_lo + 1..=plus.col_hi {
            for j in 0..=grid.n2 + 1 {
                out.set(i, j, plus.get(i, j));
            }
        }
        Ok(out)
    }
}

/// Values along one vertical line, all `n2 + 2` nodes including the
/// endpoints on the horizontal boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceFunction {
    pub x1: f64,
    pub h2: f64,
    pub values: Vec<f64>,
}

impl TraceFunction {
    pub fn zeros(grid: &Grid, x1: f64) -> TraceFunction {
        TraceFunction { x1, h2: grid.h2, values: vec![0.0; grid.n2 + 2] }
    }

    pub fn from_fn<E>(
        grid: &Grid,
        x1: f64,
        mut f: impl FnMut(f64) -> Result<f64, E>,
    ) -> Result<TraceFunction, E> {
        let mut values = Vec::with_capacity(grid.n2 + 2);
        for j in 0..=grid.n2 + 1 {
            values.push(f(grid.x2(j))?);
        }
        Ok(TraceFunction { x1, h2: grid.h2, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs_diff(&self, other: &TraceFunction) -> Result<f64, FdError> {
        if self.values.len() != other.values.len() {
            return Err(FdError::TraceLengthMismatch {
                expected: self.values.len(),
                got: other.values.len(),
            });
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0f64, |m, (&x, &y)| Float::max(m, Float::abs(x - y))))
    }
}

/// Assembled subdomain (or whole-rectangle) system: sparse matrix, source
/// part of the right-hand side, interface couplings, and the Dirichlet frame.
pub struct LinearSystem {
    side: Side,
    grid: Grid,
    ncols: usize,
    col_lo: usize,
    row_ptr: Vec<usize>,
    col_ind: Vec<usize>,
    vals: Vec<f64>,
    rhs_base: Vec<f64>,
    trace_coupling: Vec<(usize, usize, f64)>,
    frame: GridFunction,
}

/// Discretizes `-div(K grad u) + k u = f` on one side with Dirichlet data on
/// the outer boundary; the interface column is left symbolic so the same
/// matrix serves every contact sweep.
pub fn assemble(side: Side, data: &SideData, grid: &Grid) -> Result<LinearSystem, FdError> {
    if side == Side::Full && grid.interface.is_some() {
        return Err(FdError::FullGridHasInterface);
    }
    let (ic_lo, ic_hi) = grid.interior_cols(side)?;
    let (sc_lo, sc_hi) = grid.stored_cols(side)?;
    let ncols = ic_hi - ic_lo + 1;
    let n2 = grid.n2;
    let n_rows = ncols * n2;
    let (h1, h2) = (grid.h1, grid.h2);

    // Node-centered mixed coefficients over stored columns; the cross
    // stencil reads them at neighbor nodes, frame included.
    let width = sc_hi - sc_lo + 1;
    let nidx = |i: usize, j: usize| (i - sc_lo) * (n2 + 2) + j;
    let mut k12 = vec![0.0; width * (n2 + 2)];
    let mut k21 = vec![0.0; width * (n2 + 2)];
    for i in sc_lo..=sc_hi {
        for j in 0..=n2 + 1 {
            let (x, y) = (grid.x1(i), grid.x2(j));
            k12[nidx(i, j)] = data.k12.eval(x, y)?;
            k21[nidx(i, j)] = data.k21.eval(x, y)?;
        }
    }

    // Half-node diagonal coefficients on the edges of the interior stencil.
    // Vertical edge e sits between columns e and e+1.
    let eidx1 = |e: usize, j: usize| (e - (ic_lo - 1)) * n2 + (j - 1);
    let mut k11e = vec![0.0; (ncols + 1) * n2];
    for e in ic_lo - 1..=ic_hi {
        let x = (e as f64 + 0.5) * h1;
        for j in 1..=n2 {
            let v = data.k11.eval(x, grid.x2(j))?;
            if !(v > 0.0) {
                return Err(FdError::NotElliptic { x1: x, x2: grid.x2(j) });
            }
            k11e[eidx1(e, j)] = v;
        }
    }
    // Horizontal edge f sits between rows f and f+1.
    let eidx2 = |i: usize, e: usize| (i - ic_lo) * (n2 + 1) + e;
    let mut k22e = vec![0.0; ncols * (n2 + 1)];
    for i in ic_lo..=ic_hi {
        let x = grid.x1(i);
        for e in 0..=n2 {
            let y = (e as f64 + 0.5) * h2;
            let v = data.k22.eval(x, y)?;
            if !(v > 0.0) {
                return Err(FdError::NotElliptic { x1: x, x2: y });
            }
            k22e[eidx2(i, e)] = v;
        }
    }

    // Node checks: reaction sign and ellipticity of the full tensor.
    let iidx = |i: usize, j: usize| (i - ic_lo) * n2 + (j - 1);
    let mut react = vec![0.0; ncols * n2];
    let mut source = vec![0.0; ncols * n2];
    for i in ic_lo..=ic_hi {
        let x = grid.x1(i);
        for j in 1..=n2 {
            let y = grid.x2(j);
            let k = data.reaction.eval(x, y)?;
            if !(k >= 0.0) {
                return Err(FdError::NegativeReaction { x1: x, x2: y });
            }
            react[iidx(i, j)] = k;
            source[iidx(i, j)] = data.source.eval(x, y)?;
            let a11 = data.k11.eval(x, y)?;
            let a22 = data.k22.eval(x, y)?;
            let off = 0.5 * (k12[nidx(i, j)] + k21[nidx(i, j)]);
            if !(a11 > 0.0) || !(a22 > 0.0) || !(a11 * a22 - off * off > 0.0) {
                return Err(FdError::NotElliptic { x1: x, x2: y });
            }
        }
    }

    // Dirichlet frame: outer boundary values on the stored columns. The
    // interface column's interior stays zero; it is filled from the trace.
    let mut frame = GridFunction::zeros(side, *grid);
    for i in sc_lo..=sc_hi {
        frame.set(i, 0, data.boundary.eval(grid.x1(i), 0.0)?);
        frame.set(i, n2 + 1, data.boundary.eval(grid.x1(i), grid.b)?);
    }
    for j in 0..=n2 + 1 {
        if sc_lo == 0 {
            frame.set(0, j, data.boundary.eval(0.0, grid.x2(j))?);
        }
        if sc_hi == grid.n1 + 1 {
            frame.set(grid.n1 + 1, j, data.boundary.eval(grid.a, grid.x2(j))?);
        }
    }

    let interface = grid.interface;
    let is_interface = |i: usize| interface == Some(i) && side != Side::Full;

    let mut row_ptr = Vec::with_capacity(n_rows + 1);
    let mut col_ind = Vec::new();
    let mut vals = Vec::new();
    let mut rhs_base = vec![0.0; n_rows];
    let mut trace_coupling = Vec::new();
    row_ptr.push(0);

    let cross = 1.0 / (4.0 * h1 * h2);
    for j in 1..=n2 {
        for i in ic_lo..=ic_hi {
            let row = (j - 1) * ncols + (i - ic_lo);
            let aw = -k11e[eidx1(i - 1, j)] / (h1 * h1);
            let ae = -k11e[eidx1(i, j)] / (h1 * h1);
            let asou = -k22e[eidx2(i, j - 1)] / (h2 * h2);
            let ano = -k22e[eidx2(i, j)] / (h2 * h2);
            let ane = -(k12[nidx(i + 1, j)] + k21[nidx(i, j + 1)]) * cross;
            let ase = (k12[nidx(i + 1, j)] + k21[nidx(i, j - 1)]) * cross;
            let anw = (k12[nidx(i - 1, j)] + k21[nidx(i, j + 1)]) * cross;
            let asw = -(k12[nidx(i - 1, j)] + k21[nidx(i, j - 1)]) * cross;
            let ac = -(aw + ae) - (asou + ano) + react[iidx(i, j)];
            rhs_base[row] += source[iidx(i, j)];

            // Neighbors in ascending row-index order of the unknowns.
            let entries = [
                (i - 1, j - 1, asw),
                (i, j - 1, asou),
                (i + 1, j - 1, ase),
                (i - 1, j, aw),
                (i, j, ac),
                (i + 1, j, ae),
                (i - 1, j + 1, anw),
                (i, j + 1, ano),
                (i + 1, j + 1, ane),
            ];
            for (ni, nj, coeff) in entries {
                if coeff == 0.0 && !(ni == i && nj == j) {
                    continue;
                }
                if nj == 0 || nj == n2 + 1 {
                    // Outer boundary row; corners of the interface column
                    // belong here too.
                    rhs_base[row] -= coeff * frame.get(ni, nj);
                } else if is_interface(ni) {
                    trace_coupling.push((row, nj, -coeff));
                } else if ni < ic_lo || ni > ic_hi {
                    rhs_base[row] -= coeff * frame.get(ni, nj);
                } else {
                    col_ind.push((nj - 1) * ncols + (ni - ic_lo));
                    vals.push(coeff);
                }
            }
            row_ptr.push(col_ind.len());
        }
    }

    // Rows were emitted in x1-fastest order but entries above were grouped
    // per stencil; re-sort each row's entries by column index.
    let mut sys = LinearSystem {
        side,
        grid: *grid,
        ncols,
        col_lo: ic_lo,
        row_ptr,
        col_ind,
        vals,
        rhs_base,
        trace_coupling,
        frame,
    };
    sys.sort_rows();
    Ok(sys)
}

impl LinearSystem {
    fn sort_rows(&mut self) {
        for r in 0..self.n_unknowns() {
            let lo = self.row_ptr[r];
            let hi = self.row_ptr[r + 1];
            // Insertion sort; rows hold at most nine entries.
            for k in lo + 1..hi {
                let (c, v) = (self.col_ind[k], self.vals[k]);
                let mut m = k;
                while m > lo && self.col_ind[m - 1] > c {
                    self.col_ind[m] = self.col_ind[m - 1];
                    self.vals[m] = self.vals[m - 1];
                    m -= 1;
                }
                self.col_ind[m] = c;
                self.vals[m] = v;
            }
        }
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n_unknowns(&self) -> usize {
        self.rhs_base.len()
    }

    /// Grid node of an unknown index.
    pub fn node_of_row(&self, row: usize) -> (usize, usize) {
        (self.col_lo + row % self.ncols, row / self.ncols + 1)
    }

    pub fn row_of_node(&self, i: usize, j: usize) -> Option<usize> {
        if j == 0 || j > self.grid.n2 || i < self.col_lo || i >= self.col_lo + self.ncols {
            return None;
        }
        Some((j - 1) * self.ncols + (i - self.col_lo))
    }

    fn check_trace(&self, trace: &TraceFunction) -> Result<(), FdError> {
        if trace.values.len() != self.grid.n2 + 2 {
            return Err(FdError::TraceLengthMismatch {
                expected: self.grid.n2 + 2,
                got: trace.values.len(),
            });
        }
        if let Some(i0) = self.grid.interface {
            let x = self.grid.x1(i0);
            if Float::abs(trace.x1 - x) > COLUMN_MATCH_TOL * self.grid.h1 {
                return Err(FdError::TraceOffInterface { x1: trace.x1 });
            }
        }
        Ok(())
    }

    /// Right-hand side for a given interface trace (required unless the
    /// system covers the whole rectangle).
    pub fn rhs(&self, trace: Option<&TraceFunction>) -> Result<Vec<f64>, FdError> {
        let mut r = self.rhs_base.clone();
        if self.side == Side::Full {
            return Ok(r);
        }
        let t = trace.ok_or(FdError::TraceRequired)?;
        self.check_trace(t)?;
        for &(row, j, c) in &self.trace_coupling {
            r[row] += c * t.values[j];
        }
        Ok(r)
    }

    /// Sparse matrix-vector product.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>, FdError> {
        if x.len() != self.n_unknowns() {
            return Err(FdError::VectorLength { expected: self.n_unknowns(), got: x.len() });
        }
        let mut y = vec![0.0; x.len()];
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.col_ind[k]];
            }
            *yr = acc;
        }
        Ok(y)
    }

    /// Interior unknowns of a grid function, in unknown order.
    pub fn restrict(&self, gf: &GridFunction) -> Result<Vec<f64>, FdError> {
        if gf.grid != self.grid
            || *gf.col_range().start() > self.col_lo
            || *gf.col_range().end() < self.col_lo + self.ncols - 1
        {
            return Err(FdError::LayoutMismatch);
        }
        Ok((0..self.n_unknowns())
            .map(|r| {
                let (i, j) = self.node_of_row(r);
                gf.get(i, j)
            })
            .collect())
    }

    /// Unknown vector joined with the Dirichlet frame and interface trace.
    pub fn embed(&self, u: &[f64], trace: Option<&TraceFunction>) -> Result<GridFunction, FdError> {
        if u.len() != self.n_unknowns() {
            return Err(FdError::VectorLength { expected: self.n_unknowns(), got: u.len() });
        }
        let mut out = self.frame.clone();
        if self.side != Side::Full {
            let t = trace.ok_or(FdError::TraceRequired)?;
            self.check_trace(t)?;
            let i0 = self.grid.interface.expect("side system has an interface");
            for j in 1..=self.grid.n2 {
                out.set(i0, j, t.values[j]);
            }
        }
        for (r, &v) in u.iter().enumerate() {
            let (i, j) = self.node_of_row(r);
            out.set(i, j, v);
        }
        Ok(out)
    }

    /// Band LU factorization of the system matrix.
    pub fn factor(&self) -> Result<BandLu, FdError> {
        let klu = self.ncols + 1;
        BandLu::from_csr(self.n_unknowns(), klu, klu, &self.row_ptr, &self.col_ind, &self.vals)
    }
}

/// Banded LU with partial pivoting, LAPACK-style storage.
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandLu {
    /// Factors a CSR matrix whose entries all satisfy `|row - col| <= kl`.
    pub fn from_csr(
        n: usize,
        kl: usize,
        ku: usize,
        row_ptr: &[usize],
        col_ind: &[usize],
        vals: &[f64],
    ) -> Result<BandLu, FdError> {
        let ldab = 2 * kl + ku + 1;
        let mut ab = vec![0.0; ldab * n];
        // Entry (i, j) lives at ab[j * ldab + kl + ku + i - j].
        for i in 0..n {
            for k in row_ptr[i]..row_ptr[i + 1] {
                let j = col_ind[k];
                debug_assert!(i.max(j) - i.min(j) <= kl.min(ku));
                ab[j * ldab + (kl + ku + i) - j] = vals[k];
            }
        }
        let mut lu = BandLu { n, kl, ku, ldab, ab, ipiv: vec![0; n] };
        lu.factor_in_place()?;
        Ok(lu)
    }

    #[inline]
    fn pos(&self, i: usize, j: usize) -> usize {
        j * self.ldab + (self.kl + self.ku + i) - j
    }

    fn factor_in_place(&mut self) -> Result<(), FdError> {
        let n = self.n;
        let kv = self.kl + self.ku;
        for j in 0..n {
            let i_hi = (j + self.kl).min(n - 1);
            let mut p = j;
            let mut pmax = Float::abs(self.ab[self.pos(j, j)]);
            for i in j + 1..=i_hi {
                let v = Float::abs(self.ab[self.pos(i, j)]);
                if v > pmax {
                    p = i;
                    pmax = v;
                }
            }
            if pmax == 0.0 {
                return Err(FdError::SingularFactor { row: j });
            }
            self.ipiv[j] = p;
            let c_hi = (j + kv).min(n - 1);
            if p != j {
                for c in j..=c_hi {
                    let (a, b) = (self.pos(j, c), self.pos(p, c));
                    self.ab.swap(a, b);
                }
            }
            let piv = self.ab[self.pos(j, j)];
            for i in j + 1..=i_hi {
                let at_ij = self.pos(i, j);
                let m = self.ab[at_ij] / piv;
                self.ab[at_ij] = m;
                if m != 0.0 {
                    for c in j + 1..=c_hi {
                        let (a, b) = (self.pos(i, c), self.pos(j, c));
                        self.ab[a] -= m * self.ab[b];
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n, "right-hand side length mismatch");
        let n = self.n;
        let kv = self.kl + self.ku;
        for j in 0..n {
            b.swap(j, self.ipiv[j]);
            let i_hi = (j + self.kl).min(n - 1);
            let bj = b[j];
            if bj != 0.0 {
                for i in j + 1..=i_hi {
                    b[i] -= self.ab[self.pos(i, j)] * bj;
                }
            }
        }
        for j in (0..n).rev() {
            let c_hi = (j + kv).min(n - 1);
            let mut s = b[j];
            for c in j + 1..=c_hi {
                s -= self.ab[self.pos(j, c)] * b[c];
            }
            b[j] = s / self.ab[self.pos(j, j)];
        }
    }
}

/// Residual-based accuracy report for a direct solve.
#[derive(Debug, Clone, Copy)]
pub struct SolveStats {
    /// Final residual relative to the right-hand side.
    pub residual: f64,
    /// Iterative refinement rounds applied.
    pub refinements: usize,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, &x| Float::max(m, Float::abs(x)))
}

/// Solves the factored system for one trace, driving the relative residual
/// below `tol` with iterative refinement where the single solve falls short.
pub fn solve_with(
    system: &LinearSystem,
    lu: &BandLu,
    trace: Option<&TraceFunction>,
    tol: f64,
) -> Result<(GridFunction, SolveStats), FdError> {
    let rhs = system.rhs(trace)?;
    let scale = Float::max(max_abs(&rhs), f64::MIN_POSITIVE);
    let mut u = rhs.clone();
    lu.solve_in_place(&mut u);
    let mut refinements = 0;
    let residual = loop {
        let au = system.apply(&u)?;
        let mut r: Vec<f64> = rhs.iter().zip(&au).map(|(&b, &a)| b - a).collect();
        let res = max_abs(&r) / scale;
        if res <= tol || refinements >= 8 {
            break res;
        }
        lu.solve_in_place(&mut r);
        for (ui, di) in u.iter_mut().zip(&r) {
            *ui += di;
        }
        refinements += 1;
    };
    let gf = system.embed(&u, trace)?;
    Ok((gf, SolveStats { residual, refinements }))
}

/// One-shot Dirichlet solve: assemble, factor, solve.
pub fn solve_dirichlet(
    side: Side,
    data: &SideData,
    grid: &Grid,
    trace: Option<&TraceFunction>,
    tol: f64,
) -> Result<(GridFunction, SolveStats), FdError> {
    let sys = assemble(side, data, grid)?;
    let lu = sys.factor()?;
    solve_with(&sys, &lu, trace, tol)
}

/// Reads the values along the vertical line `x1 = x` out of a grid function.
/// Off-column lines are linearly interpolated when `interpolate` is set and
/// rejected otherwise.
pub fn extract_trace(u: &GridFunction, x: f64, interpolate: bool) -> Result<TraceFunction, FdError> {
    let grid = *u.grid();
    let n2 = grid.n2;
    let t = x / grid.h1;
    let r = Float::round(t);
    let (lo, hi) = (*u.col_range().start(), *u.col_range().end());
    if r.is_finite() && Float::abs(t - r) <= COLUMN_MATCH_TOL {
        let c = r as usize;
        if r < lo as f64 || c > hi {
            return Err(FdError::LineOutsideSide { x });
        }
        let values = (0..=n2 + 1).map(|j| u.get(c, j)).collect();
        return Ok(TraceFunction { x1: x, h2: grid.h2, values });
    }
    if !interpolate {
        return Err(FdError::UnalignedLine { x });
    }
    let c0f = Float::floor(t);
    if c0f < lo as f64 || c0f + 1.0 > hi as f64 {
        return Err(FdError::LineOutsideSide { x });
    }
    let c0 = c0f as usize;
    let th = t - c0f;
    let values = (0..=n2 + 1)
        .map(|j| (1.0 - th) * u.get(c0, j) + th * u.get(c0 + 1, j))
        .collect();
    Ok(TraceFunction { x1: x, h2: grid.h2, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{constant, function};
    use crate::geometry::SideData;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn laplace_data(f: f64) -> SideData {
        SideData::laplace(constant(f))
    }

    #[test]
    fn single_interior_node_is_exact() {
        // -Laplace(u) = 1 on the unit square with one interior node at the
        // center: 16 u = 1 exactly.
        let grid = Grid::new(Rect::UNIT, 1, 1).unwrap();
        let (u, stats) = solve_dirichlet(Side::Full, &laplace_data(1.0), &grid, None, 1e-12).unwrap();
        assert_eq!(u.get(1, 1), 0.0625);
        assert_eq!(stats.refinements, 0);
    }

    #[test]
    fn grid_constructors_enforce_alignment() {
        let g = Grid::with_interface(Rect::UNIT, 15, 15, 0.5).unwrap();
        assert_eq!(g.interface_col(), Some(8));
        assert_eq!(g.x1(16), 1.0);
        assert_eq!(g.column_of(0.25), Some(4));
        assert_eq!(g.column_of(0.26), None);
        assert!(matches!(
            Grid::with_interface(Rect::UNIT, 15, 15, 0.33),
            Err(FdError::InterfaceMisaligned { .. })
        ));
        assert!(matches!(
            Grid::with_interface(Rect::UNIT, 15, 15, 1.0 / 16.0),
            Err(FdError::InterfaceNearBoundary { .. })
        ));
        assert!(matches!(
            Grid::new(Rect::UNIT, 0, 4),
            Err(FdError::GridTooSmall { .. })
        ));
    }

    #[test]
    fn band_lu_recovers_random_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 40usize;
        let kl = 7usize;
        // Random diagonally dominant band matrix in CSR form.
        let mut row_ptr = vec![0usize];
        let mut col_ind = Vec::new();
        let mut vals = Vec::new();
        for i in 0..n {
            let lo = i.saturating_sub(kl);
            let hi = (i + kl).min(n - 1);
            let mut diag_slot = 0;
            let mut off_sum = 0.0;
            for j in lo..=hi {
                col_ind.push(j);
                if j == i {
                    diag_slot = vals.len();
                    vals.push(0.0);
                } else {
                    let v: f64 = rng.gen_range(-1.0..1.0);
                    off_sum += v.abs();
                    vals.push(v);
                }
            }
            vals[diag_slot] = off_sum + 1.0;
            row_ptr.push(col_ind.len());
        }
        let x_true: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut b = vec![0.0; n];
        for i in 0..n {
            for k in row_ptr[i]..row_ptr[i + 1] {
                b[i] += vals[k] * x_true[col_ind[k]];
            }
        }
        let lu = BandLu::from_csr(n, kl, kl, &row_ptr, &col_ind, &vals).unwrap();
        lu.solve_in_place(&mut b);
        let err = b
            .iter()
            .zip(&x_true)
            .fold(0.0f64, |m, (&u, &x)| m.max((u - x).abs()));
        assert!(err < 1e-11, "band LU error {}", err);
    }

    // Manufactured solution with full tensor coefficients and reaction on
    // the minus side; the error should shrink at second order.
    fn mixed_data() -> (SideData, impl Fn(f64, f64) -> f64 + Copy) {
        use core::f64::consts::PI;
        let exact = |x1: f64, x2: f64| (PI * x1).sin() * (PI * x2).sin();
        let source = move |x1: f64, x2: f64| {
            let (s1, c1) = (PI * x1).sin_cos();
            let (s2, c2) = (PI * x2).sin_cos();
            let t1 = 2.0 * x1 * PI * c1 * s2 - (1.0 + x1 * x1) * PI * PI * s1 * s2;
            let t2 = 0.2 * PI * PI * c1 * c2;
            let t3 = 0.2 * PI * PI * c1 * c2;
            let t4 = 2.0 * x2 * PI * c2 * s1 - (1.0 + x2 * x2) * PI * PI * s2 * s1;
            -(t1 + t2 + t3 + t4) + exact(x1, x2)
        };
        let data = SideData {
            k11: function(|x1, _| 1.0 + x1 * x1),
            k12: constant(0.2),
            k21: constant(0.2),
            k22: function(|_, x2| 1.0 + x2 * x2),
            reaction: constant(1.0),
            source: function(source),
            boundary: function(exact),
        };
        (data, exact)
    }

    fn minus_side_error(n: usize) -> f64 {
        let (data, exact) = mixed_data();
        let grid = Grid::with_interface(Rect::UNIT, n, n, 0.5).unwrap();
        let i0 = grid.interface_col().unwrap();
        let trace = TraceFunction::from_fn(&grid, grid.x1(i0), |x2| {
            Ok::<_, FdError>(exact(0.5, x2))
        })
        .unwrap();
        let (u, stats) = solve_dirichlet(Side::Minus, &data, &grid, Some(&trace), 1e-12).unwrap();
        assert!(stats.residual <= 1e-12, "residual {}", stats.residual);
        let mut err = 0.0f64;
        for i in u.col_range() {
            for j in 0..=grid.n2 + 1 {
                err = err.max((u.get(i, j) - exact(grid.x1(i), grid.x2(j))).abs());
            }
        }
        err
    }

    #[test]
    fn manufactured_solution_converges_at_second_order() {
        let e1 = minus_side_error(31);
        let e2 = minus_side_error(63);
        let rate = e1 / e2;
        assert!(e1 < 0.01, "coarse error {}", e1);
        assert!((3.5..4.5).contains(&rate), "rate {} ({} -> {})", rate, e1, e2);
    }

    #[test]
    fn diagonal_coefficients_give_m_matrix() {
        let data = SideData {
            k11: function(|x1, _| 1.0 + x1 * x1),
            k12: constant(0.0),
            k21: constant(0.0),
            k22: function(|_, x2| 1.0 + x2 * x2),
            reaction: constant(0.0),
            source: constant(0.0),
            boundary: constant(0.0),
        };
        let grid = Grid::with_interface(Rect::UNIT, 15, 15, 0.5).unwrap();
        let sys = assemble(Side::Minus, &data, &grid).unwrap();
        for r in 0..sys.n_unknowns() {
            for k in sys.row_ptr[r]..sys.row_ptr[r + 1] {
                let v = sys.vals[k];
                if sys.col_ind[k] == r {
                    assert!(v > 0.0, "diagonal {} at row {}", v, r);
                } else {
                    assert!(v <= 0.0, "off-diagonal {} at row {}", v, r);
                }
            }
        }
    }

    #[test]
    fn assembly_rejects_inadmissible_coefficients() {
        let grid = Grid::with_interface(Rect::UNIT, 15, 15, 0.5).unwrap();
        let mut data = laplace_data(0.0);
        data.k11 = function(|x1, _| x1 - 0.2);
        assert!(matches!(
            assemble(Side::Minus, &data, &grid),
            Err(FdError::NotElliptic { .. })
        ));
        let mut data = laplace_data(0.0);
        data.reaction = constant(-1.0);
        assert!(matches!(
            assemble(Side::Minus, &data, &grid),
            Err(FdError::NegativeReaction { .. })
        ));
        let mut data = laplace_data(0.0);
        data.k12 = constant(2.0);
        data.k21 = constant(2.0);
        assert!(matches!(
            assemble(Side::Minus, &data, &grid),
            Err(FdError::NotElliptic { .. })
        ));
    }

    #[test]
    fn rhs_requires_matching_trace() {
        let grid = Grid::with_interface(Rect::UNIT, 15, 15, 0.5).unwrap();
        let sys = assemble(Side::Minus, &laplace_data(0.0), &grid).unwrap();
        assert!(matches!(sys.rhs(None), Err(FdError::TraceRequired)));
        let bad = TraceFunction { x1: 0.5, h2: grid.h2, values: vec![0.0; 3] };
        assert!(matches!(
            sys.rhs(Some(&bad)),
            Err(FdError::TraceLengthMismatch { .. })
        ));
        let off = TraceFunction::zeros(&grid, 0.25);
        assert!(matches!(
            sys.rhs(Some(&off)),
            Err(FdError::TraceOffInterface { .. })
        ));
    }

    #[test]
    fn extract_trace_reads_columns_and_interpolates() {
        let grid = Grid::with_interface(Rect::UNIT, 15, 15, 0.5).unwrap();
        // u(x1, x2) = x1 is linear, so interpolation is exact.
        let u = GridFunction::from_field(Side::Full, grid, &crate::expr::Expr::X1).unwrap();
        let t = extract_trace(&u, 0.25, false).unwrap();
        assert!(t.values.iter().all(|&v| (v - 0.25).abs() < 1e-15));
        assert!(matches!(
            extract_trace(&u, 0.26, false),
            Err(FdError::UnalignedLine { .. })
        ));
        let t = extract_trace(&u, 0.26, true).unwrap();
        assert!(t.values.iter().all(|&v| (v - 0.26).abs() < 1e-15));
        assert!(matches!(
            extract_trace(&u, 1.2, true),
            Err(FdError::LineOutsideSide { .. })
        ));
    }

    #[test]
    fn subdomain_solutions_stitch_continuously() {
        let grid = Grid::with_interface(Rect::UNIT, 15, 15, 0.5).unwrap();
        let data = laplace_data(1.0);
        // sinpi keeps the endpoints exactly zero, matching the zero
        // Dirichlet corners that the frame owns.
        let trace = TraceFunction::from_fn(&grid, 0.5, |x2| {
            Ok::<_, FdError>(crate::fourier::sinpi(x2))
        })
        .unwrap();
        let (um, _) = solve_dirichlet(Side::Minus, &data, &grid, Some(&trace), 1e-11).unwrap();
        let (up, _) = solve_dirichlet(Side::Plus, &data, &grid, Some(&trace), 1e-11).unwrap();
        let full = GridFunction::stitch(&um, &up).unwrap();
        let at_interface = extract_trace(&full, 0.5, false).unwrap();
        let d = at_interface.max_abs_diff(&trace).unwrap();
        assert!(d == 0.0, "interface column should carry the trace, diff {}", d);
        // Max principle sanity: zero boundary, positive source, values of
        // each subdomain stay between the data extremes.
        for gf in [&um, &up] {
            for i in gf.col_range() {
                for j in 0..=grid.n2 + 1 {
                    let v = gf.get(i, j);
                    assert!(v > -1e-12 && v < 1.1, "value {} out of range", v);
                }
            }
        }
    }
}
