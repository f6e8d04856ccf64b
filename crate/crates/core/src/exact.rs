//! Error-free floating-point transformations.
//!
//! Sup-transforms are evaluated with every candidate `a - b` rounded toward
//! `+∞`. Because that rounding is monotone, a maximum of rounded candidates is
//! the exact supremum rounded up, which keeps `f^g(y) + f(x) >= g(x, y)` and
//! `f^gg <= f` true bit-for-bit instead of up to an ulp.

use std::cmp::Ordering;

/// `a + b = s + e` exactly (Knuth's TwoSum). Requires no overflow.
#[inline]
pub fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

/// `a * b = p + e` exactly, via a fused multiply-add.
#[inline]
pub fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// `a - b` rounded toward `+∞`.
#[inline]
pub fn sub_up(a: f64, b: f64) -> f64 {
    let (s, e) = two_sum(a, -b);
    if e > 0.0 {
        s.next_up()
    } else {
        // `-0 - 0` would otherwise leave a negative zero
        s + 0.0
    }
}

/// Exact sign of `Σ products[k].0 * products[k].1 + Σ terms`.
///
/// Accumulates a non-overlapping expansion (Shewchuk's grow-expansion); the
/// largest nonzero component carries the sign of the exact sum.
pub fn sign_of_sum(products: &[(f64, f64)], terms: &[f64]) -> Ordering {
    let mut expansion: Vec<f64> = Vec::with_capacity(2 * products.len() + terms.len());
    for &(a, b) in products {
        let (p, e) = two_prod(a, b);
        grow(&mut expansion, e);
        grow(&mut expansion, p);
    }
    for &t in terms {
        grow(&mut expansion, t);
    }
    match expansion.iter().rev().find(|c| **c != 0.0) {
        Some(c) if *c > 0.0 => Ordering::Greater,
        Some(_) => Ordering::Less,
        None => Ordering::Equal,
    }
}

fn grow(expansion: &mut Vec<f64>, b: f64) {
    let mut q = b;
    let mut out = 0;
    for k in 0..expansion.len() {
        let (s, e) = two_sum(q, expansion[k]);
        q = s;
        if e != 0.0 {
            expansion[out] = e;
            out += 1;
        }
    }
    expansion.truncate(out);
    if q != 0.0 {
        expansion.push(q);
    }
}
