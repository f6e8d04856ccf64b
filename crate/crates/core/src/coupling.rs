//! Coupling functions sampled over `A × B`, and the checks for (D1), (D2) and
//! zero slices.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::expr::{Bindings, Expression};
use crate::grid::PointSet;
use crate::tol::ToleranceConfig;

/// Which coupling to materialize.
#[derive(Clone, Debug, PartialEq)]
pub enum CouplingSpec {
    /// `g ≡ 0`.
    Zero,
    /// `g(x, y) = ‖y‖₂`.
    Norm,
    /// `g(x, y) = exp(‖x‖₂ - ‖y‖₂)`: positive everywhere, infimum 0 only in the limit.
    ExpGap,
    /// `g(x, y) = ⟨x, y⟩`, the classical Fenchel pairing. May be negative.
    Bilinear,
    /// `g(x, λ) = ⟨λ, -h(x)⟩` with one multiplier per constraint.
    Lagrangian { constraints: Vec<Expression> },
    /// `g(x, ω) = min_k ⟨-h(x), ω_k⟩` with `ω = (ω_0, …, ω_p)` split into `blocks = p + 1` pieces.
    MinLagrangian { constraints: Vec<Expression>, blocks: usize },
    /// Any expression in `x`, `y`, with parameters bound to `w`.
    Custom { expr: Expression, params: Vec<f64> },
    /// `factor · base`, `factor > 0`.
    Scaled { base: Box<CouplingSpec>, factor: f64 },
    /// Values supplied directly through [`CouplingSample::from_matrix`].
    Matrix,
}

impl CouplingSpec {
    pub fn custom(expr: Expression) -> Self {
        CouplingSpec::Custom { expr, params: Vec::new() }
    }

    /// Everything except the Fenchel pairing must be nonnegative.
    pub fn requires_nonnegative(&self) -> bool {
        match self {
            CouplingSpec::Bilinear => false,
            CouplingSpec::Scaled { base, .. } => base.requires_nonnegative(),
            _ => true,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CouplingSpec::Zero => "zero",
            CouplingSpec::Norm => "norm",
            CouplingSpec::ExpGap => "exp_gap",
            CouplingSpec::Bilinear => "bilinear",
            CouplingSpec::Lagrangian { .. } => "lagrangian",
            CouplingSpec::MinLagrangian { .. } => "min_lagrangian",
            CouplingSpec::Custom { .. } => "custom",
            CouplingSpec::Matrix => "matrix",
            CouplingSpec::Scaled { base, .. } => base.name(),
        }
    }

    pub fn check_dimensions(&self, a: &PointSet, b: &PointSet) -> Result<()> {
        match self {
            CouplingSpec::Bilinear if a.dimension() != b.dimension() => Err(Error::Dimension(format!(
                "bilinear coupling needs dim(A) = dim(B), got {} and {}",
                a.dimension(),
                b.dimension()
            ))),
            CouplingSpec::Lagrangian { constraints } => {
                if constraints.is_empty() {
                    return Err(Error::Precondition("lagrangian requires constraints".into()));
                }
                if b.dimension() != constraints.len() {
                    return Err(Error::Dimension(format!(
                        "lagrangian coupling with {} constraints needs dim(B) = {}, got {}",
                        constraints.len(),
                        constraints.len(),
                        b.dimension()
                    )));
                }
                Ok(())
            }
            CouplingSpec::MinLagrangian { constraints, blocks } => {
                if constraints.is_empty() {
                    return Err(Error::Precondition("min_lagrangian requires constraints".into()));
                }
                if *blocks == 0 {
                    return Err(Error::Precondition("min_lagrangian needs at least one block".into()));
                }
                let want = constraints.len() * blocks;
                if b.dimension() != want {
                    return Err(Error::Dimension(format!(
                        "min_lagrangian with {} constraints and {blocks} blocks needs dim(B) = {want}, got {}",
                        constraints.len(),
                        b.dimension()
                    )));
                }
                Ok(())
            }
            CouplingSpec::Scaled { base, factor } => {
                if !(*factor > 0.0 && factor.is_finite()) {
                    return Err(Error::InvalidValue(format!("coupling scale factor must be > 0, got {factor}")));
                }
                base.check_dimensions(a, b)
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for CouplingSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CouplingSpec::Custom { expr, .. } => write!(f, "custom({expr})"),
            CouplingSpec::Scaled { base, factor } => write!(f, "{factor:?}*{base}"),
            CouplingSpec::MinLagrangian { blocks, .. } => write!(f, "min_lagrangian(blocks={blocks})"),
            other => f.write_str(other.name()),
        }
    }
}

/// A coupling materialized as a dense `|A| × |B|` row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingSample {
    a: Arc<PointSet>,
    b: Arc<PointSet>,
    values: Vec<f64>,
    spec: CouplingSpec,
}

impl CouplingSample {
    /// Wraps precomputed values, enforcing finiteness and (unless the spec is
    /// the Fenchel pairing) nonnegativity.
    pub fn from_matrix(a: Arc<PointSet>, b: Arc<PointSet>, values: Vec<f64>, spec: CouplingSpec) -> Result<Self> {
        if values.len() != a.len() * b.len() {
            return Err(Error::Dimension(format!(
                "{} coupling values for |A| x |B| = {} x {}",
                values.len(),
                a.len(),
                b.len()
            )));
        }
        let nb = b.len();
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteCoupling { x: a.point(k / nb).to_vec(), y: b.point(k % nb).to_vec() });
        }
        if spec.requires_nonnegative() {
            if let Some(k) = values.iter().position(|&v| v < 0.0) {
                return Err(Error::NegativeCoupling {
                    value: values[k],
                    x: a.point(k / nb).to_vec(),
                    y: b.point(k % nb).to_vec(),
                });
            }
        }
        Ok(CouplingSample { a, b, values, spec })
    }

    pub fn a(&self) -> &Arc<PointSet> {
        &self.a
    }

    pub fn b(&self) -> &Arc<PointSet> {
        &self.b
    }

    pub fn spec(&self) -> &CouplingSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.b.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let nb = self.b.len();
        &self.values[i * nb..(i + 1) * nb]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.b.len())
    }

    /// `factor · g`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let spec = CouplingSpec::Scaled { base: Box::new(self.spec.clone()), factor };
        spec.check_dimensions(&self.a, &self.b)?;
        let values = self.values.iter().map(|v| factor * v).collect();
        CouplingSample::from_matrix(self.a.clone(), self.b.clone(), values, spec)
    }

    /// `max |g - other|` over `A × B`.
    pub fn sup_distance(&self, other: &CouplingSample) -> Result<f64> {
        if !crate::function::same_domain(&self.a, &other.a) || !crate::function::same_domain(&self.b, &other.b) {
            return Err(Error::DomainMismatch("couplings are sampled on different sets".into()));
        }
        Ok(self.values.iter().zip(&other.values).fold(0.0, |m: f64, (p, q)| m.max((p - q).abs())))
    }
}

fn euclidean(v: &[f64]) -> f64 {
    match v {
        [c] => c.abs(),
        _ => v.iter().map(|c| c * c).sum::<f64>().sqrt(),
    }
}

fn dot(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| a * b).sum()
}

/// `-h(x)` for each constraint at each point of `a`.
fn negated_constraints(constraints: &[Expression], a: &PointSet) -> Result<Vec<Vec<f64>>> {
    (0..a.len())
        .into_par_iter()
        .map(|i| {
            let env = Bindings::x(a.point(i));
            constraints.iter().map(|h| Ok(-h.eval_real(&env)?)).collect::<Result<Vec<f64>>>()
        })
        .collect()
}

fn fill(a: &PointSet, b: &PointSet, entry: impl Fn(usize, usize) -> Result<f64> + Sync) -> Result<Vec<f64>> {
    let nb = b.len();
    let rows: Vec<Vec<f64>> = (0..a.len())
        .into_par_iter()
        .map(|i| (0..nb).map(|j| entry(i, j)).collect::<Result<Vec<f64>>>())
        .collect::<Result<_>>()?;
    Ok(rows.concat())
}

/// Materializes `g(x_i, y_j)` for every pair.
pub fn evaluate_coupling(spec: &CouplingSpec, a: &Arc<PointSet>, b: &Arc<PointSet>) -> Result<CouplingSample> {
    spec.check_dimensions(a, b)?;
    let values = match spec {
        CouplingSpec::Zero => vec![0.0; a.len() * b.len()],
        CouplingSpec::Norm => {
            let norms: Vec<f64> = b.iter().map(euclidean).collect();
            let mut v = Vec::with_capacity(a.len() * b.len());
            for _ in 0..a.len() {
                v.extend_from_slice(&norms);
            }
            v
        }
        CouplingSpec::ExpGap => {
            let nx: Vec<f64> = a.iter().map(euclidean).collect();
            let ny: Vec<f64> = b.iter().map(euclidean).collect();
            fill(a, b, |i, j| Ok((nx[i] - ny[j]).exp()))?
        }
        CouplingSpec::Bilinear => fill(a, b, |i, j| Ok(dot(a.point(i), b.point(j))))?,
        CouplingSpec::Lagrangian { constraints } => {
            let neg_h = negated_constraints(constraints, a)?;
            fill(a, b, |i, j| Ok(dot(b.point(j), &neg_h[i])))?
        }
        CouplingSpec::MinLagrangian { constraints, blocks } => {
            let neg_h = negated_constraints(constraints, a)?;
            let m = constraints.len();
            fill(a, b, |i, j| {
                let omega = b.point(j);
                Ok((0..*blocks).map(|k| dot(&neg_h[i], &omega[k * m..(k + 1) * m])).fold(f64::INFINITY, f64::min))
            })?
        }
        CouplingSpec::Custom { expr, params } => fill(a, b, |i, j| {
            let env = Bindings { x: a.point(i), y: b.point(j), w: params, ..Bindings::default() };
            Ok(expr.eval_real(&env)?)
        })?,
        CouplingSpec::Matrix => {
            return Err(Error::Precondition("a matrix coupling has no formula to evaluate".into()));
        }
        CouplingSpec::Scaled { base, factor } => {
            let inner = evaluate_coupling(base, a, b)?;
            inner.values.iter().map(|v| factor * v).collect()
        }
    };
    CouplingSample::from_matrix(a.clone(), b.clone(), values, spec.clone())
}

/// Outcome of [`verify_coupling`]. Raw numbers are kept so callers can
/// re-decide at other tolerances.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingVerdict {
    /// `min g` over the sample.
    pub d1_inf: f64,
    /// Lowest row-major `(i, j)` attaining `d1_inf`.
    pub d1_arg: (usize, usize),
    /// `|d1_inf| <= zero_tol`.
    pub d1_pass: bool,
    pub d2_checked: bool,
    /// Largest `2 g(x, y_mid) - g(x, y_lo) - g(x, y_hi)` over axis triples of `B`, clamped at 0.
    pub d2_max_violation: f64,
    pub d2_pass: bool,
    /// Largest row minimum `max_x min_y g(x, y)`.
    pub max_row_min: f64,
    /// Every row minimum is `<= zero_tol`.
    pub zero_slices_pass: bool,
    /// The sample attains the value 0 exactly.
    pub has_zero: bool,
    pub zero_tol: f64,
    pub convexity_tol: f64,
}

impl CouplingVerdict {
    /// Lower semicontinuity holds for any function on a finite set, and
    /// convexity is only probed along the axes of `B`.
    pub const D2_NOTE: &'static str =
        "D2: l.s.c. is vacuous on a finite sample; convexity checked by second differences along B's axes only";
}

/// Checks (D1), optionally (D2) along the axes of a Cartesian `B`, and the
/// zero-slice property `min_y g(x, y) = 0` for every `x`.
pub fn verify_coupling(sample: &CouplingSample, tol: &ToleranceConfig, check_d2: bool) -> Result<CouplingVerdict> {
    let triples = if check_d2 {
        Some(sample.b.axis_triples().ok_or_else(|| {
            Error::Precondition("the (D2) check needs a Cartesian dual grid B".into())
        })?)
    } else {
        None
    };

    struct RowStats {
        min: f64,
        argmin: usize,
        d2: f64,
    }

    let stats: Vec<RowStats> = sample
        .rows()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|row| {
            let mut argmin = 0;
            for (j, &v) in row.iter().enumerate() {
                if v < row[argmin] {
                    argmin = j;
                }
            }
            let d2 = triples.as_ref().map_or(0.0, |t| {
                t.iter().fold(0.0, |m: f64, &(lo, mid, hi)| m.max(2.0 * row[mid] - row[lo] - row[hi]))
            });
            RowStats { min: row[argmin], argmin, d2 }
        })
        .collect();

    let mut best = 0;
    for (i, s) in stats.iter().enumerate() {
        if s.min < stats[best].min {
            best = i;
        }
    }
    let d1_inf = stats[best].min;
    let max_row_min = stats.iter().fold(f64::NEG_INFINITY, |m, s| m.max(s.min));
    let d2_max_violation = stats.iter().fold(0.0, |m: f64, s| m.max(s.d2));
    Ok(CouplingVerdict {
        d1_inf,
        d1_arg: (best, stats[best].argmin),
        d1_pass: d1_inf.abs() <= tol.zero_tol,
        d2_checked: check_d2,
        d2_max_violation,
        d2_pass: check_d2 && d2_max_violation <= tol.convexity_tol,
        max_row_min,
        zero_slices_pass: max_row_min <= tol.zero_tol,
        has_zero: d1_inf == 0.0,
        zero_tol: tol.zero_tol,
        convexity_tol: tol.convexity_tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    fn grid1(lo: f64, hi: f64, n: usize) -> Arc<PointSet> {
        Arc::new(build_grid(1, &[(lo, hi, n)]).unwrap())
    }

    fn expr(s: &str) -> Expression {
        Expression::parse(s).unwrap()
    }

    #[test]
    fn norm_coupling_is_euclidean() {
        let a = grid1(-1.0, 1.0, 3);
        let b = Arc::new(PointSet::explicit(2, vec![vec![3.0, 4.0], vec![0.0, 0.0]]).unwrap());
        let g = evaluate_coupling(&CouplingSpec::Norm, &a, &b).unwrap();
        for i in 0..3 {
            assert_eq!(g.get(i, 0), 5.0);
            assert_eq!(g.get(i, 1), 0.0);
        }
    }

    #[test]
    fn lagrangian_coupling_value() {
        let a = Arc::new(PointSet::explicit(1, vec![vec![2.0]]).unwrap());
        let b = Arc::new(PointSet::explicit(1, vec![vec![3.0]]).unwrap());
        let spec = CouplingSpec::Lagrangian { constraints: vec![expr("1 - x1")] };
        assert_eq!(evaluate_coupling(&spec, &a, &b).unwrap().get(0, 0), 3.0);
    }

    #[test]
    fn min_lagrangian_takes_block_minimum() {
        let a = Arc::new(PointSet::explicit(1, vec![vec![3.0]]).unwrap());
        // h(x) = 1 - x = -2; blocks ω0 = 1, ω1 = 0.5
        let b = Arc::new(PointSet::explicit(2, vec![vec![1.0, 0.5]]).unwrap());
        let spec = CouplingSpec::MinLagrangian { constraints: vec![expr("1 - x1")], blocks: 2 };
        assert_eq!(evaluate_coupling(&spec, &a, &b).unwrap().get(0, 0), 1.0);
    }

    #[test]
    fn zero_coupling_verdict() {
        let a = grid1(0.0, 1.0, 3);
        let b = grid1(0.0, 1.0, 4);
        let g = evaluate_coupling(&CouplingSpec::Zero, &a, &b).unwrap();
        assert!(g.values().iter().all(|&v| v == 0.0));
        let v = verify_coupling(&g, &ToleranceConfig::default(), true).unwrap();
        assert_eq!(v.d1_inf, 0.0);
        assert!(v.d1_pass && v.zero_slices_pass && v.has_zero && v.d2_pass);
    }

    #[test]
    fn norm_coupling_with_origin_passes_everything() {
        let a = grid1(-1.0, 1.0, 5);
        let b = Arc::new(build_grid(2, &[(-1.0, 1.0, 5), (-1.0, 1.0, 5)]).unwrap());
        let g = evaluate_coupling(&CouplingSpec::Norm, &a, &b).unwrap();
        let v = verify_coupling(&g, &ToleranceConfig::default(), true).unwrap();
        assert_eq!(v.d1_inf, 0.0);
        assert_eq!(v.d1_arg, (0, 12));
        assert!(v.d1_pass && v.has_zero && v.d2_pass && v.zero_slices_pass);
    }

    #[test]
    fn norm_coupling_away_from_origin_has_no_zero_slices() {
        let a = grid1(-1.0, 1.0, 5);
        let b = grid1(1.0, 2.0, 5);
        let g = evaluate_coupling(&CouplingSpec::Norm, &a, &b).unwrap();
        let v = verify_coupling(&g, &ToleranceConfig::default(), true).unwrap();
        assert_eq!(v.max_row_min, 1.0);
        assert!(!v.zero_slices_pass && !v.d1_pass && !v.has_zero);
    }

    #[test]
    fn concave_coupling_fails_d2() {
        let a = grid1(0.0, 1.0, 2);
        let b = grid1(-1.0, 1.0, 5);
        let g = evaluate_coupling(&CouplingSpec::custom(expr("1 - y1^2")), &a, &b).unwrap();
        let v = verify_coupling(&g, &ToleranceConfig::default(), true).unwrap();
        // 2(1 - 0.25) - 1 - 0 at the first triple, and 0.5 everywhere by symmetry
        assert_eq!(v.d2_max_violation, 0.5);
        assert!(!v.d2_pass);
    }

    #[test]
    fn negative_values_are_rejected_with_the_pair() {
        let a = grid1(0.0, 2.0, 3);
        let b = grid1(0.0, 1.0, 2);
        let spec = CouplingSpec::Lagrangian { constraints: vec![expr("1 - x1")] };
        match evaluate_coupling(&spec, &a, &b).unwrap_err() {
            Error::NegativeCoupling { x, y, value } => {
                assert_eq!((x, y, value), (vec![0.0], vec![1.0], -1.0));
            }
            other => panic!("unexpected {other}"),
        }
        // the Fenchel pairing is allowed to go negative
        assert!(evaluate_coupling(&CouplingSpec::Bilinear, &a, &grid1(-1.0, 1.0, 3)).is_ok());
    }

    #[test]
    fn dimension_rules() {
        let a = grid1(0.0, 1.0, 2);
        let b2 = Arc::new(build_grid(2, &[(0.0, 1.0, 2), (0.0, 1.0, 2)]).unwrap());
        assert!(matches!(evaluate_coupling(&CouplingSpec::Bilinear, &a, &b2), Err(Error::Dimension(_))));
        let lag = CouplingSpec::Lagrangian { constraints: vec![expr("-x1")] };
        assert!(matches!(evaluate_coupling(&lag, &a, &b2), Err(Error::Dimension(_))));
        let empty = CouplingSpec::Lagrangian { constraints: vec![] };
        assert!(matches!(evaluate_coupling(&empty, &a, &b2), Err(Error::Precondition(_))));
        let minlag = CouplingSpec::MinLagrangian { constraints: vec![expr("-x1")], blocks: 2 };
        assert!(evaluate_coupling(&minlag, &a, &b2).is_ok());
    }

    #[test]
    fn d2_needs_cartesian_b() {
        let a = grid1(0.0, 1.0, 2);
        let b = Arc::new(PointSet::explicit(1, vec![vec![0.0], vec![1.0]]).unwrap());
        let g = evaluate_coupling(&CouplingSpec::Norm, &a, &b).unwrap();
        assert!(verify_coupling(&g, &ToleranceConfig::default(), true).is_err());
        assert!(!verify_coupling(&g, &ToleranceConfig::default(), false).unwrap().d2_checked);
    }

    #[test]
    fn expression_errors_propagate() {
        let a = grid1(0.0, 1.0, 2);
        let g = evaluate_coupling(&CouplingSpec::custom(expr("log(x1) + y1")), &a, &a);
        assert!(matches!(g, Err(Error::Eval(_))));
    }
}
