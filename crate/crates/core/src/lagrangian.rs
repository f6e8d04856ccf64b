//! The Lagrange-type function `L(x, y) = f(x) - g(x, y)`: minimax values and
//! saddle points, and how they relate to primal and dual solutions.

use std::sync::Arc;

use rayon::prelude::*;

use crate::conjugate::conjugate_back;
use crate::coupling::{verify_coupling, CouplingSample};
use crate::duality::Duality;
use crate::error::{Error, Result};
use crate::function::{same_domain, SampledFunction};
use crate::grid::PointSet;
use crate::tol::ToleranceConfig;
use crate::value::ExtendedValue;

/// `L` over `A × B`, row-major. Rows where `f = +∞` are `+∞` throughout.
#[derive(Clone, Debug, PartialEq)]
pub struct LagrangeSample {
    a: Arc<PointSet>,
    b: Arc<PointSet>,
    values: Vec<ExtendedValue>,
    finite_rows: Vec<usize>,
}

impl LagrangeSample {
    pub fn a(&self) -> &Arc<PointSet> {
        &self.a
    }

    pub fn b(&self) -> &Arc<PointSet> {
        &self.b
    }

    pub fn get(&self, i: usize, j: usize) -> ExtendedValue {
        self.values[i * self.b.len() + j]
    }

    pub fn row(&self, i: usize) -> &[ExtendedValue] {
        let nb = self.b.len();
        &self.values[i * nb..(i + 1) * nb]
    }

    /// Indices of `dom f`.
    pub fn finite_rows(&self) -> &[usize] {
        &self.finite_rows
    }

    /// `max_y L(x_i, y)` for each row (`+∞` outside `dom f`).
    pub fn row_maxima(&self) -> Vec<ExtendedValue> {
        (0..self.a.len()).into_par_iter().map(|i| *self.row(i).iter().max().expect("B is non-empty")).collect()
    }

    /// `min_{x ∈ dom f} L(x, y_j)` for each column.
    pub fn column_minima(&self) -> Vec<f64> {
        const CHUNK: usize = 256;
        let nb = self.b.len();
        let chunks: Vec<Vec<f64>> = (0..nb.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let lo = c * CHUNK;
                let hi = (lo + CHUNK).min(nb);
                let mut best = vec![f64::INFINITY; hi - lo];
                for &i in &self.finite_rows {
                    for (b, v) in best.iter_mut().zip(&self.row(i)[lo..hi]) {
                        *b = b.min(v.to_f64());
                    }
                }
                best
            })
            .collect();
        chunks.concat()
    }
}

pub fn lagrange_sample(f: &SampledFunction, g: &CouplingSample) -> Result<LagrangeSample> {
    if !same_domain(f.domain(), g.a()) {
        return Err(Error::DomainMismatch(format!("{} is not sampled on the coupling's primal set", f.label())));
    }
    f.ensure_proper()?;
    let nb = g.b().len();
    let rows: Vec<Vec<ExtendedValue>> = (0..g.a().len())
        .into_par_iter()
        .map(|i| match f.value(i).value() {
            Some(fi) => g.row(i).iter().map(|&gij| ExtendedValue::finite(fi - gij)).collect(),
            None => Ok(vec![ExtendedValue::PLUS_INFINITY; nb]),
        })
        .collect::<Result<_>>()?;
    Ok(LagrangeSample {
        a: g.a().clone(),
        b: g.b().clone(),
        values: rows.concat(),
        finite_rows: f.effective_domain().collect(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Minimax {
    /// `max_y min_{x ∈ dom f} L`.
    pub supinf: f64,
    /// `min_x max_y L`.
    pub infsup: f64,
    /// `infsup - supinf`.
    pub gap: f64,
    /// `|gap| <= zero_tol`.
    pub equal: bool,
}

pub fn minimax_check(l: &LagrangeSample, tol: &ToleranceConfig) -> Result<Minimax> {
    if l.finite_rows.is_empty() {
        return Err(Error::Improper("every row of L is +inf".into()));
    }
    let supinf = l.column_minima().into_iter().fold(f64::NEG_INFINITY, f64::max);
    let infsup = l.row_maxima().into_iter().min().expect("A is non-empty").to_f64();
    let gap = infsup - supinf;
    Ok(Minimax { supinf, infsup, gap, equal: gap.abs() <= tol.zero_tol })
}

/// All `(i, j)` with `L(i, j) >= max_y L(i, ·) - tol` and
/// `L(i, j) <= min_x L(·, j) + tol`, in row-major order.
pub fn find_saddle_points(l: &LagrangeSample, tol: &ToleranceConfig) -> Vec<(usize, usize)> {
    let rmax = l.row_maxima();
    let cmin = l.column_minima();
    let t = tol.zero_tol;
    l.finite_rows
        .par_iter()
        .map(|&i| {
            let top = rmax[i].to_f64();
            l.row(i)
                .iter()
                .enumerate()
                .filter(|&(j, v)| {
                    let v = v.to_f64();
                    v >= top - t && v <= cmin[j] + t
                })
                .map(|(j, _)| (i, j))
                .collect::<Vec<_>>()
        })
        .flatten_iter()
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SaddleCheck {
    pub x_index: usize,
    pub y_index: usize,
    pub x0_in_dom_f: bool,
    /// `f^g(y0) = inf f^g`.
    pub y0_dual_optimal: bool,
    /// `f^gg(x0) = f(x0)`.
    pub biconj_touch: bool,
    /// `x0` solves the primal and `y0` the dual.
    pub primal_dual_equiv: bool,
}

impl SaddleCheck {
    pub fn passes(&self) -> bool {
        self.x0_in_dom_f && self.y0_dual_optimal && self.biconj_touch
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SaddleReport {
    pub saddle_points: Vec<SaddleCheck>,
    pub supinf: f64,
    pub infsup: f64,
    pub minimax_gap: f64,
    pub member: bool,
    pub zero_slices_pass: bool,
    /// Near-minimizers of `f` and of `f^g`, within `zero_tol`.
    pub primal_solutions: Vec<usize>,
    pub dual_solutions: Vec<usize>,
    /// Every (primal solution, dual solution) pair is a saddle point.
    pub converse_holds: bool,
    /// Saddle set equals the product of the solution sets; only decided when
    /// `g` is a member with zero slices.
    pub equivalence: Option<bool>,
    pub zero_tol: f64,
}

impl SaddleReport {
    /// Every property that the hypotheses at hand entitle us to expect.
    pub fn all_checks_pass(&self) -> bool {
        let saddles = self.saddle_points.iter().all(SaddleCheck::passes);
        let minimax = self.minimax_gap >= -self.zero_tol && (!self.member || self.minimax_gap.abs() <= self.zero_tol);
        saddles && minimax && (!self.member || self.converse_holds) && self.equivalence != Some(false)
    }
}

pub fn saddle_report(f: &SampledFunction, g: &CouplingSample, tol: &ToleranceConfig) -> Result<SaddleReport> {
    let duality = Duality::new(f, g)?;
    let member = duality.membership(tol).member;
    let fgg = conjugate_back(duality.f_g(), g)?.function;
    let l = lagrange_sample(f, g)?;
    let mm = minimax_check(&l, tol)?;
    let saddles = find_saddle_points(&l, tol);
    let zero_slices_pass = verify_coupling(g, tol, false)?.zero_slices_pass;
    let t = tol.zero_tol;

    let primal_solutions: Vec<usize> =
        f.effective_domain().filter(|&i| f.value(i).to_f64() - duality.primal.value <= t).collect();
    let dual_solutions: Vec<usize> = (0..g.b().len())
        .filter(|&j| duality.f_g().value(j).to_f64() - duality.dual.value <= t)
        .collect();
    let is_dual_opt = |j: usize| duality.f_g().value(j).to_f64() - duality.dual.value <= t;
    let is_primal_opt = |i: usize| f.value(i).value().is_some_and(|v| v - duality.primal.value <= t);

    let saddle_points: Vec<SaddleCheck> = saddles
        .iter()
        .map(|&(i, j)| SaddleCheck {
            x_index: i,
            y_index: j,
            x0_in_dom_f: f.value(i).is_finite(),
            y0_dual_optimal: is_dual_opt(j),
            biconj_touch: f.value(i).value().is_some_and(|fx| (fgg.value(i).to_f64() - fx).abs() <= t),
            primal_dual_equiv: is_primal_opt(i) && is_dual_opt(j),
        })
        .collect();

    let product: Vec<(usize, usize)> =
        primal_solutions.iter().flat_map(|&i| dual_solutions.iter().map(move |&j| (i, j))).collect();
    let converse_holds = product.iter().all(|p| saddles.binary_search(p).is_ok());
    let equivalence = (member && zero_slices_pass).then(|| product == saddles);

    Ok(SaddleReport {
        saddle_points,
        supinf: mm.supinf,
        infsup: mm.infsup,
        minimax_gap: mm.gap,
        member,
        zero_slices_pass,
        primal_solutions,
        dual_solutions,
        converse_holds,
        equivalence,
        zero_tol: t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::{evaluate_coupling, CouplingSpec};
    use crate::expr::Expression;
    use crate::grid::{build_grid, restrict_to_feasible, Axis};

    fn line(lo: f64, hi: f64, n: usize) -> Arc<PointSet> {
        Arc::new(build_grid(1, &[(lo, hi, n)]).unwrap())
    }

    fn sample(d: &Arc<PointSet>, f: impl Fn(f64) -> f64) -> SampledFunction {
        SampledFunction::from_reals(d.clone(), "f", d.iter().map(|p| f(p[0])).collect()).unwrap()
    }

    fn qp() -> (SampledFunction, CouplingSample) {
        let tol = ToleranceConfig::default();
        let bounding = Arc::new(PointSet::cartesian(vec![Axis::with_step(-1.0, 4.0, 0.01).unwrap()]).unwrap());
        let h = sample(&bounding, |x| 1.0 - x);
        let a = Arc::new(restrict_to_feasible(&bounding, &[h], &tol).unwrap());
        let b = Arc::new(PointSet::cartesian(vec![Axis::with_step(0.0, 4.0, 0.01).unwrap()]).unwrap());
        let spec = CouplingSpec::Lagrangian { constraints: vec![Expression::parse("1 - x1").unwrap()] };
        let g = evaluate_coupling(&spec, &a, &b).unwrap();
        (sample(&a, |x| x * x), g)
    }

    #[test]
    fn qp_lagrangian() {
        let tol = ToleranceConfig::default();
        let (f, g) = qp();
        let l = lagrange_sample(&f, &g).unwrap();
        let i = g.a().locate(&[1.0]).unwrap();
        let j = g.b().locate(&[2.0]).unwrap();
        assert_eq!(l.get(i, j).to_f64(), 1.0);
        let mm = minimax_check(&l, &tol).unwrap();
        assert!((mm.supinf - 1.0).abs() <= 1e-9 && (mm.infsup - 1.0).abs() <= 1e-9 && mm.equal);
        assert!(find_saddle_points(&l, &tol).contains(&(i, j)));

        let r = saddle_report(&f, &g, &tol).unwrap();
        assert!(r.member && r.zero_slices_pass && r.converse_holds);
        assert_eq!(r.equivalence, Some(true));
        assert!(r.all_checks_pass());
        assert_eq!(r.primal_solutions, vec![i]);
    }

    #[test]
    fn zero_coupling_saddles_are_argmin_times_b() {
        let tol = ToleranceConfig::default();
        let a = line(-1.0, 1.0, 9);
        let b = line(0.0, 1.0, 4);
        let f = sample(&a, |x| (x - 0.25).powi(2));
        let g = evaluate_coupling(&CouplingSpec::Zero, &a, &b).unwrap();
        let l = lagrange_sample(&f, &g).unwrap();
        let argmin = a.locate(&[0.25]).unwrap();
        assert_eq!(find_saddle_points(&l, &tol), (0..4).map(|j| (argmin, j)).collect::<Vec<_>>());
        let mm = minimax_check(&l, &tol).unwrap();
        assert_eq!((mm.supinf, mm.infsup), (0.0, 0.0));
        let r = saddle_report(&f, &g, &tol).unwrap();
        assert_eq!(r.equivalence, Some(true));
        assert!(r.all_checks_pass());
    }

    #[test]
    fn norm_without_origin_has_no_zero_slices() {
        let tol = ToleranceConfig::default();
        let a = line(-1.0, 1.0, 9);
        let b = line(1.0, 2.0, 5);
        let f = sample(&a, |x| x * x);
        let g = evaluate_coupling(&CouplingSpec::Norm, &a, &b).unwrap();
        let r = saddle_report(&f, &g, &tol).unwrap();
        assert!(!r.zero_slices_pass);
        assert_eq!(r.equivalence, None);
        assert!(r.minimax_gap >= -1e-9);
    }

    #[test]
    fn infinite_rows_are_excluded() {
        let tol = ToleranceConfig::default();
        let a = line(0.0, 2.0, 3);
        let b = line(0.0, 1.0, 2);
        let vals = vec![ExtendedValue::PLUS_INFINITY, ExtendedValue::finite(1.0).unwrap(), ExtendedValue::finite(3.0).unwrap()];
        let f = SampledFunction::new(a.clone(), "f", vals).unwrap();
        let g = evaluate_coupling(&CouplingSpec::Zero, &a, &b).unwrap();
        let l = lagrange_sample(&f, &g).unwrap();
        assert!(l.get(0, 1).is_plus_infinity());
        assert_eq!(l.column_minima(), vec![1.0, 1.0]);
        assert_eq!(find_saddle_points(&l, &tol), vec![(1, 0), (1, 1)]);
    }
}
