//! Linear-time discrete Legendre transform for the coupling `g(x, y) = x·y`.
//!
//! `values[j] = max_i slopes[j]·x_i - f_i`, each candidate evaluated with a
//! single rounding (`mul_add`). Only vertices of the lower convex hull of
//! `{(x_i, f_i)}` can maximize; the hull is built with exact orientation
//! tests and the maximizing vertex is tracked with exact comparisons, so the
//! result is bit-identical to the `O(n·m)` scan while costing `O(n + m)`.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::exact::sign_of_sum;

/// Sign of the cross product `(b - a) × (c - a)`, computed exactly.
fn orientation(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> Ordering {
    // (bx-ax)(cy-ay) - (by-ay)(cx-ax), with the ax·ay terms cancelled
    sign_of_sum(
        &[(b.0, c.1), (-b.0, a.1), (-a.0, c.1), (-b.1, c.0), (b.1, a.0), (a.1, c.0)],
        &[],
    )
}

/// Exact sign of `(s·x_b - f_b) - (s·x_a - f_a)`.
fn compare_at_slope(s: f64, a: (f64, f64), b: (f64, f64)) -> Ordering {
    sign_of_sum(&[(s, b.0), (-s, a.0)], &[-b.1, a.1])
}

/// Vertices of the lower convex hull, left to right. Collinear points are dropped.
fn lower_hull(x: &[f64], f: &[f64]) -> Vec<(f64, f64)> {
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(x.len());
    for p in x.iter().copied().zip(f.iter().copied()) {
        while hull.len() >= 2 && orientation(hull[hull.len() - 2], hull[hull.len() - 1], p) != Ordering::Greater {
            hull.pop();
        }
        hull.push(p);
    }
    hull
}

/// Discrete Legendre transform: `values[j] = max_i slopes[j]·x_i - f_i`.
///
/// Requires strictly increasing `x`, finite `f`, nondecreasing `slopes`.
pub fn fenchel_conjugate_1d_fast(x: &[f64], f: &[f64], slopes: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::Precondition("need at least one sample".into()));
    }
    if x.len() != f.len() {
        return Err(Error::Dimension(format!("{} abscissae but {} values", x.len(), f.len())));
    }
    if x.iter().chain(f).chain(slopes).any(|v| !v.is_finite()) {
        return Err(Error::InvalidValue("samples and slopes must be finite".into()));
    }
    if let Some(k) = x.windows(2).position(|w| w[0] >= w[1]) {
        return Err(Error::Unsorted(format!("x is not strictly increasing at index {}", k + 1)));
    }
    if let Some(k) = slopes.windows(2).position(|w| w[0] > w[1]) {
        return Err(Error::Unsorted(format!("slopes decrease at index {}", k + 1)));
    }

    let hull = lower_hull(x, f);
    let mut k = 0;
    let mut out = Vec::with_capacity(slopes.len());
    for &s in slopes {
        // along the hull the candidates are unimodal in k and the last
        // maximizer moves right as s grows
        while k + 1 < hull.len() && compare_at_slope(s, hull[k], hull[k + 1]) != Ordering::Less {
            k += 1;
        }
        let (xk, fk) = hull[k];
        out.push(s.mul_add(xk, -fk));
    }
    Ok(out)
}
