//! Composite Simpson quadrature over uniform panels.

use alloc::vec::Vec;

use num_traits::Float;

/// Smallest even panel count that keeps at least `per_unit` panels per unit
/// length over an interval of length `len`.
pub fn even_panels(len: f64, per_unit: u32) -> usize {
    let raw = Float::ceil(len * per_unit as f64) as usize;
    let raw = raw.max(2);
    if raw.is_multiple_of(2) {
        raw
    } else {
        raw + 1
    }
}

/// Composite Simpson rule over `[a, b]` with `panels` uniform panels
/// (`panels` must be even and >= 2). The integrand may fail; the first
/// failure aborts the sum.
pub fn simpson<E>(
    mut f: impl FnMut(f64) -> Result<f64, E>,
    a: f64,
    b: f64,
    panels: usize,
) -> Result<f64, E> {
    debug_assert!(panels >= 2 && panels.is_multiple_of(2));
    let h = (b - a) / panels as f64;
    let mut sum = f(a)? + f(b)?;
    for i in 1..panels {
        let x = a + h * i as f64;
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(x)?;
    }
    Ok(sum * h / 3.0)
}

/// Simpson sum over pre-computed samples at uniform spacing `h`
/// (`values.len()` odd and >= 3).
pub fn simpson_sum(values: &[f64], h: f64) -> f64 {
    debug_assert!(values.len() >= 3 && values.len() % 2 == 1);
    let mut sum = values[0] + values[values.len() - 1];
    for (i, &v) in values.iter().enumerate().take(values.len() - 1).skip(1) {
        sum += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    sum * h / 3.0
}

/// Nodes of the uniform quadrature lattice over `[a, b]`.
pub fn nodes(a: f64, b: f64, panels: usize) -> Vec<f64> {
    let h = (b - a) / panels as f64;
    (0..=panels).map(|i| a + h * i as f64).collect()
}
