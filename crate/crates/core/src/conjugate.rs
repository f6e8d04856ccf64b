//! Discrete generalized conjugation.
//!
//! Every candidate `g(x, y) - f(x)` is rounded toward `+∞` before the max is
//! taken, so the stored `f^g(y)` is the exact supremum over the sample rounded
//! up. Consequences, exact in floating point:
//!
//! * `f(x) + f^g(y) >= g(x, y)` for every pair;
//! * `f^gg <= f` wherever `f` is finite;
//! * `(f^gg)^g = f^g`.

use rayon::prelude::*;

use crate::coupling::CouplingSample;
use crate::error::{Error, Result};
use crate::exact::sub_up;
use crate::function::{same_domain, SampledFunction};
use crate::value::ExtendedValue;

/// A conjugate together with the maximizing index for each output point.
#[derive(Clone, Debug, PartialEq)]
pub struct Conjugate {
    pub function: SampledFunction,
    /// Lowest index of the primal (for `f^g`) or dual (for `f^gg`) set that attains the sup.
    pub argmax: Vec<usize>,
}

const CHUNK: usize = 256;

/// `f^g(y_j) = max_{i : f(x_i) < ∞} g(x_i, y_j) - f(x_i)`.
pub fn g_conjugate(f: &SampledFunction, g: &CouplingSample) -> Result<Conjugate> {
    if !same_domain(f.domain(), g.a()) {
        return Err(Error::DomainMismatch(format!("{} is not sampled on the coupling's primal set", f.label())));
    }
    f.ensure_proper()?;
    let finite: Vec<(usize, f64)> = f.effective_domain().map(|i| (i, f.value(i).to_f64())).collect();
    let nb = g.b().len();

    // columns in chunks; within a chunk rows are visited in increasing order so
    // the strict `>` keeps the lowest maximizing index
    let chunks: Vec<(Vec<f64>, Vec<usize>)> = (0..nb.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(nb);
            let mut best = vec![f64::NEG_INFINITY; hi - lo];
            let mut arg = vec![0usize; hi - lo];
            for &(i, fi) in &finite {
                let row = &g.row(i)[lo..hi];
                for (k, &gij) in row.iter().enumerate() {
                    let v = sub_up(gij, fi);
                    if v > best[k] {
                        best[k] = v;
                        arg[k] = i;
                    }
                }
            }
            (best, arg)
        })
        .collect();

    let mut values = Vec::with_capacity(nb);
    let mut argmax = Vec::with_capacity(nb);
    for (best, arg) in chunks {
        values.extend(best);
        argmax.extend(arg);
    }
    let values = values.into_iter().map(ExtendedValue::finite).collect::<Result<Vec<_>>>()?;
    Ok(Conjugate { function: SampledFunction::new(g.b().clone(), format!("{}^g", f.label()), values)?, argmax })
}

/// `φ^g(x_i) = max_j g(x_i, y_j) - φ(y_j)` for a function `φ` on `B`.
pub fn conjugate_back(phi: &SampledFunction, g: &CouplingSample) -> Result<Conjugate> {
    if !same_domain(phi.domain(), g.b()) {
        return Err(Error::DomainMismatch(format!("{} is not sampled on the coupling's dual set", phi.label())));
    }
    phi.ensure_proper()?;
    let dual: Vec<Option<f64>> = phi.values().iter().map(|v| v.value()).collect();
    let rows: Vec<(f64, usize)> = (0..g.a().len())
        .into_par_iter()
        .map(|i| {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for (j, (&gij, d)) in g.row(i).iter().zip(&dual).enumerate() {
                if let Some(d) = d {
                    let v = sub_up(gij, *d);
                    if v > best {
                        best = v;
                        arg = j;
                    }
                }
            }
            (best, arg)
        })
        .collect();
    let values = rows.iter().map(|(v, _)| ExtendedValue::finite(*v)).collect::<Result<Vec<_>>>()?;
    Ok(Conjugate {
        function: SampledFunction::new(g.a().clone(), format!("{}^g", phi.label()), values)?,
        argmax: rows.into_iter().map(|(_, j)| j).collect(),
    })
}

/// `f^gg = (f^g)^g` on `A`. Satisfies `f^gg <= f` wherever `f` is finite.
pub fn g_biconjugate(f: &SampledFunction, g: &CouplingSample) -> Result<Conjugate> {
    let fg = g_conjugate(f, g)?;
    let mut bi = conjugate_back(&fg.function, g)?;
    bi.function = bi.function.with_label(format!("{}^gg", f.label()));
    Ok(bi)
}

/// `max_{(x,y) : f(x) < ∞} g(x, y) - f(x) - f_g(y)`.
///
/// Uses the same rounded candidates as [`g_conjugate`], so for the computed
/// conjugate the result is exactly 0, attained at every `(argmax(y), y)`.
pub fn young_violation(f: &SampledFunction, f_g: &SampledFunction, g: &CouplingSample) -> Result<f64> {
    if !same_domain(f.domain(), g.a()) || !same_domain(f_g.domain(), g.b()) {
        return Err(Error::DomainMismatch("f, f^g and g are not sampled on A, B, A x B".into()));
    }
    f.ensure_proper()?;
    let dual: Vec<f64> = f_g.values().iter().map(|v| v.to_f64()).collect();
    let worst = f
        .effective_domain()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|i| {
            let fi = f.value(i).to_f64();
            g.row(i).iter().zip(&dual).fold(f64::NEG_INFINITY, |m, (&gij, &d)| m.max(sub_up(gij, fi) - d))
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::{evaluate_coupling, CouplingSpec};
    use crate::function::infimum;
    use crate::grid::{build_grid, PointSet};
    use std::sync::Arc;

    fn line(lo: f64, hi: f64, n: usize) -> Arc<PointSet> {
        Arc::new(build_grid(1, &[(lo, hi, n)]).unwrap())
    }

    fn sample(d: &Arc<PointSet>, f: impl Fn(f64) -> f64) -> SampledFunction {
        SampledFunction::from_reals(d.clone(), "f", d.iter().map(|p| f(p[0])).collect()).unwrap()
    }

    #[test]
    fn norm_conjugate_is_norm_minus_inf() {
        let a = line(-2.0, 2.0, 41);
        let b = Arc::new(build_grid(2, &[(-1.0, 1.0, 11), (-1.0, 1.0, 11)]).unwrap());
        let f = sample(&a, |x| (x - 0.3).powi(2) - 1.0);
        let g = evaluate_coupling(&CouplingSpec::Norm, &a, &b).unwrap();
        let inf = infimum(&f).unwrap().value;
        let fg = g_conjugate(&f, &g).unwrap();
        for (j, y) in b.iter().enumerate() {
            let expected = (y[0] * y[0] + y[1] * y[1]).sqrt() - inf;
            assert!((fg.function.value(j).to_f64() - expected).abs() <= 1e-15);
        }
    }

    #[test]
    fn zero_coupling_conjugates() {
        let a = line(-1.0, 1.0, 9);
        let b = line(0.0, 1.0, 3);
        let f = sample(&a, |x| x * x + 0.5);
        let g = evaluate_coupling(&CouplingSpec::Zero, &a, &b).unwrap();
        let fg = g_conjugate(&f, &g).unwrap();
        assert!(fg.function.values().iter().all(|v| v.to_f64() == -0.5));
        let fgg = g_biconjugate(&f, &g).unwrap();
        assert!(fgg.function.values().iter().all(|v| v.to_f64() == 0.5));
    }

    #[test]
    fn bilinear_conjugate_of_half_square() {
        let a = line(-3.0, 3.0, 601);
        let b = line(-1.0, 1.0, 201);
        let f = sample(&a, |x| x * x / 2.0);
        let g = evaluate_coupling(&CouplingSpec::Bilinear, &a, &b).unwrap();
        let fg = g_conjugate(&f, &g).unwrap();
        let worst = b
            .iter()
            .enumerate()
            .map(|(j, y)| (fg.function.value(j).to_f64() - y[0] * y[0] / 2.0).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 1e-3, "{worst}");

        let fgg = g_biconjugate(&f, &g).unwrap();
        // on the interior |x| <= 1 the slopes in B = [-1, 1] reach every tangent
        for (i, x) in a.iter().enumerate().filter(|(_, x)| x[0].abs() <= 1.0) {
            assert!((fgg.function.value(i).to_f64() - x[0] * x[0] / 2.0).abs() <= 1e-3);
        }
    }

    #[test]
    fn infinite_points_are_skipped() {
        let a = line(0.0, 2.0, 3);
        let b = line(0.0, 1.0, 2);
        let vals = vec![ExtendedValue::PLUS_INFINITY, ExtendedValue::finite(1.0).unwrap(), ExtendedValue::finite(5.0).unwrap()];
        let f = SampledFunction::new(a.clone(), "f", vals).unwrap();
        let g = evaluate_coupling(&CouplingSpec::Norm, &a, &b).unwrap();
        let fg = g_conjugate(&f, &g).unwrap();
        assert_eq!(fg.function.value(1).to_f64(), 0.0);
        assert_eq!(fg.argmax, vec![1, 1]);
        let fgg = g_biconjugate(&f, &g).unwrap();
        // f^gg is finite everywhere, including where f is +inf
        assert_eq!(fgg.function.value(0).to_f64(), 1.0);

        let improper = SampledFunction::new(a.clone(), "f", vec![ExtendedValue::PLUS_INFINITY; 3]).unwrap();
        assert!(matches!(g_conjugate(&improper, &g), Err(Error::Improper(_))));
    }

    #[test]
    fn young_violation_shifts() {
        let a = line(-1.0, 1.0, 9);
        let b = line(-1.0, 1.0, 5);
        let f = sample(&a, |x| x * x);
        let g = evaluate_coupling(&CouplingSpec::Norm, &a, &b).unwrap();
        let fg = g_conjugate(&f, &g).unwrap().function;
        assert_eq!(young_violation(&f, &fg, &g).unwrap(), 0.0);
        // dyadic data: the shifted conjugates are exact
        let lower = fg.map_finite("fg-1", |v| v - 1.0).unwrap();
        assert_eq!(young_violation(&f, &lower, &g).unwrap(), 1.0);
        let higher = fg.map_finite("fg+5", |v| v + 5.0).unwrap();
        assert_eq!(young_violation(&f, &higher, &g).unwrap(), -5.0);
        assert!(young_violation(&f, &f, &g).is_err());
    }

    #[test]
    fn biconjugate_bounded_by_f_under_rounding() {
        // decimal data where nearest rounding would overshoot by an ulp
        let a = Arc::new(PointSet::explicit(1, vec![vec![0.0], vec![1.0]]).unwrap());
        let b = Arc::new(PointSet::explicit(1, vec![vec![0.0]]).unwrap());
        let spec = CouplingSpec::custom(crate::expr::Expression::parse("1 + x1*0.1").unwrap());
        let g = evaluate_coupling(&spec, &a, &b).unwrap();
        for fv in [0.3, 0.7, 0.1, 1.0 / 3.0, 2.0f64.sqrt()] {
            let f = SampledFunction::from_reals(a.clone(), "f", vec![fv, fv * 3.0]).unwrap();
            let fgg = g_biconjugate(&f, &g).unwrap().function;
            for i in 0..2 {
                assert!(fgg.value(i) <= f.value(i));
            }
        }
    }
}
