//! Scalar fields over the rectangle: the common currency between the
//! expression language, closed-form test solutions, and the solvers.

use alloc::sync::Arc;

use crate::expr::{EvalError, Expr};

/// A scalar field `(x1, x2) -> f64`. Implementations must be immutable and
/// shareable across concurrent solves.
pub trait Field: Send + Sync {
    fn eval(&self, x1: f64, x2: f64) -> Result<f64, EvalError>;
}

/// Shared handle to a field.
pub type FieldRef = Arc<dyn Field>;

impl Field for Expr {
    fn eval(&self, x1: f64, x2: f64) -> Result<f64, EvalError> {
        Expr::eval(self, x1, x2)
    }
}

/// Constant field.
#[derive(Debug, Clone, Copy)]
pub struct Constant(pub f64);

impl Field for Constant {
    fn eval(&self, _: f64, _: f64) -> Result<f64, EvalError> {
        Ok(self.0)
    }
}

/// Field backed by a plain closure. Non-finite closure outputs are reported
/// as evaluation errors, same as for expressions.
pub struct FnField<F>(pub F);

impl<F> Field for FnField<F>
where
    F: Fn(f64, f64) -> f64 + Send + Sync,
{
    fn eval(&self, x1: f64, x2: f64) -> Result<f64, EvalError> {
        let v = (self.0)(x1, x2);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::non_finite("closure field"))
        }
    }
}

/// Pointwise negation of another field.
pub struct Negated(pub FieldRef);

impl Field for Negated {
    fn eval(&self, x1: f64, x2: f64) -> Result<f64, EvalError> {
        self.0.eval(x1, x2).map(|v| -v)
    }
}

pub fn constant(c: f64) -> FieldRef {
    Arc::new(Constant(c))
}

pub fn function<F>(f: F) -> FieldRef
where
    F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
{
    Arc::new(FnField(f))
}

/// Parses an expression into a field handle.
pub fn parse(src: &str) -> Result<FieldRef, crate::expr::ParseError> {
    Expr::parse(src).map(|e| Arc::new(e) as FieldRef)
}

/// Parses a literal expression known to be valid (used for built-in data).
pub(crate) fn parse_builtin(src: &str) -> FieldRef {
    match parse(src) {
        Ok(f) => f,
        Err(e) => panic!("invalid built-in expression `{}`: {}", src, e),
    }
}
