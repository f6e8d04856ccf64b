//! Finite point sets standing in for the sets `A`, `B`, `C`, `K`.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::function::SampledFunction;
use crate::tol::ToleranceConfig;

/// One axis of a Cartesian grid: `count` uniformly spaced samples of `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidGrid(format!("axis bounds must be finite, got [{lo}, {hi}]")));
        }
        if count == 0 {
            return Err(Error::InvalidGrid("axis count must be >= 1".into()));
        }
        if lo > hi {
            return Err(Error::InvalidGrid(format!("lo > hi on axis [{lo}, {hi}]")));
        }
        if count == 1 && lo != hi {
            return Err(Error::InvalidGrid(format!(
                "a single-sample axis needs lo = hi, got [{lo}, {hi}]"
            )));
        }
        if count > 1 && lo == hi {
            return Err(Error::InvalidGrid(format!("{count} samples of the degenerate axis [{lo}, {hi}]")));
        }
        Ok(Axis { lo, hi, count })
    }

    /// Builds an axis from a step, requiring `(hi - lo) / step` to be an integer
    /// up to rounding.
    pub fn with_step(lo: f64, hi: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) {
            return Err(Error::InvalidGrid(format!("step must be > 0, got {step}")));
        }
        let intervals = (hi - lo) / step;
        let rounded = intervals.round();
        if rounded < 0.0 || (intervals - rounded).abs() > 1e-6 * rounded.max(1.0) {
            return Err(Error::InvalidGrid(format!(
                "step {step} does not divide [{lo}, {hi}] into whole intervals"
            )));
        }
        Axis::new(lo, hi, rounded as usize + 1)
    }

    pub fn spacing(&self) -> f64 {
        if self.count == 1 {
            0.0
        } else {
            (self.hi - self.lo) / (self.count - 1) as f64
        }
    }

    /// The `i`-th sample. Computed as a weighted average of the endpoints so
    /// that endpoints are exact and integer-valued grid points come out exact.
    pub fn coord(&self, i: usize) -> f64 {
        if self.count == 1 {
            return self.lo;
        }
        let n = (self.count - 1) as f64;
        let i_f = i as f64;
        (self.lo * (n - i_f) + self.hi * i_f) / n
    }

    /// Index of the sample nearest `v`, if it matches within rounding.
    fn locate(&self, v: f64) -> Option<usize> {
        if self.count == 1 {
            return coords_match(self.lo, v).then_some(0);
        }
        let t = ((v - self.lo) / self.spacing()).round();
        if t < 0.0 || t > (self.count - 1) as f64 {
            return None;
        }
        let i = t as usize;
        coords_match(self.coord(i), v).then_some(i)
    }
}

fn coords_match(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
}

/// How a point set was produced.
#[derive(Clone, Debug, PartialEq)]
pub enum Structure {
    /// Row-major Cartesian product of the axes (last axis varies fastest).
    Cartesian(Vec<Axis>),
    Explicit,
}

/// A finite, ordered, duplicate-free set of points of a fixed dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    dimension: usize,
    coords: Vec<f64>,
    structure: Structure,
}

impl PointSet {
    /// Cartesian grid over the given axes.
    pub fn cartesian(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidGrid("a grid needs at least one axis".into()));
        }
        let dimension = axes.len();
        let len: usize = axes.iter().map(|a| a.count).product();
        let mut coords = Vec::with_capacity(len * dimension);
        let axis_coords: Vec<Vec<f64>> =
            axes.iter().map(|a| (0..a.count).map(|i| a.coord(i)).collect()).collect();
        let mut idx = vec![0usize; dimension];
        for _ in 0..len {
            coords.extend(idx.iter().zip(&axis_coords).map(|(&i, c)| c[i]));
            for d in (0..dimension).rev() {
                idx[d] += 1;
                if idx[d] < axes[d].count {
                    break;
                }
                idx[d] = 0;
            }
        }
        Ok(PointSet { dimension, coords, structure: Structure::Cartesian(axes) })
    }

    /// Explicit list of points. Rejects empty, ragged or duplicated input.
    pub fn explicit(dimension: usize, points: Vec<Vec<f64>>) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidGrid("dimension must be positive".into()));
        }
        if points.is_empty() {
            return Err(Error::InvalidGrid("point list is empty".into()));
        }
        let mut coords = Vec::with_capacity(points.len() * dimension);
        let mut seen = HashSet::with_capacity(points.len());
        for (i, p) in points.iter().enumerate() {
            if p.len() != dimension {
                return Err(Error::Dimension(format!(
                    "point {i} has length {}, expected {dimension}",
                    p.len()
                )));
            }
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidGrid(format!("point {i} has a non-finite coordinate")));
            }
            // +0 and -0 are the same point
            let key: Vec<u64> = p.iter().map(|&c| (c + 0.0).to_bits()).collect();
            if !seen.insert(key) {
                return Err(Error::InvalidGrid(format!("duplicate point {p:?}")));
            }
            coords.extend_from_slice(p);
        }
        Ok(PointSet { dimension, coords, structure: Structure::Explicit })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dimension
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dimension..(i + 1) * self.dimension]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dimension)
    }

    pub fn structure(&self) -> &Structure {
        &self.structure
    }

    pub fn axes(&self) -> Option<&[Axis]> {
        match &self.structure {
            Structure::Cartesian(axes) => Some(axes),
            Structure::Explicit => None,
        }
    }

    pub fn is_cartesian(&self) -> bool {
        self.axes().is_some()
    }

    /// Index of `p` in the set, matching coordinates up to rounding.
    pub fn locate(&self, p: &[f64]) -> Option<usize> {
        if p.len() != self.dimension {
            return None;
        }
        match &self.structure {
            Structure::Cartesian(axes) => {
                let mut index = 0;
                for (axis, &v) in axes.iter().zip(p) {
                    index = index * axis.count + axis.locate(v)?;
                }
                Some(index)
            }
            Structure::Explicit => self
                .iter()
                .position(|q| q.iter().zip(p).all(|(&a, &b)| coords_match(a, b))),
        }
    }

    /// Index of the origin, only if it is exactly a point of the set.
    pub fn origin_index(&self) -> Option<usize> {
        self.iter().position(|q| q.iter().all(|&c| c == 0.0))
    }

    /// Strides of the Cartesian axes in row-major order.
    pub fn strides(&self) -> Option<Vec<usize>> {
        let axes = self.axes()?;
        let mut strides = vec![1; axes.len()];
        for d in (0..axes.len().saturating_sub(1)).rev() {
            strides[d] = strides[d + 1] * axes[d + 1].count;
        }
        Some(strides)
    }

    /// All index triples `(lo, mid, hi)` of consecutive samples along each axis
    /// of a Cartesian grid.
    pub fn axis_triples(&self) -> Option<Vec<(usize, usize, usize)>> {
        let axes = self.axes()?;
        let strides = self.strides()?;
        let mut triples = Vec::new();
        for mid in 0..self.len() {
            for (d, axis) in axes.iter().enumerate() {
                let pos = (mid / strides[d]) % axis.count;
                if pos > 0 && pos + 1 < axis.count {
                    triples.push((mid - strides[d], mid, mid + strides[d]));
                }
            }
        }
        Some(triples)
    }

    /// Subset preserving order, as an explicit set.
    pub fn subset(&self, indices: &[usize]) -> PointSet {
        let mut coords = Vec::with_capacity(indices.len() * self.dimension);
        for &i in indices {
            coords.extend_from_slice(self.point(i));
        }
        PointSet { dimension: self.dimension, coords, structure: Structure::Explicit }
    }

    /// The product `self × other`, ordered with `self` as the slow index.
    pub fn product(&self, other: &PointSet) -> PointSet {
        let dimension = self.dimension + other.dimension;
        let structure = match (&self.structure, &other.structure) {
            (Structure::Cartesian(a), Structure::Cartesian(b)) => {
                Structure::Cartesian(a.iter().chain(b).copied().collect())
            }
            _ => Structure::Explicit,
        };
        let mut coords = Vec::with_capacity(self.len() * other.len() * dimension);
        for p in self.iter() {
            for q in other.iter() {
                coords.extend_from_slice(p);
                coords.extend_from_slice(q);
            }
        }
        PointSet { dimension, coords, structure }
    }
}

/// Cartesian grid of the given dimension; `axes` holds `(lo, hi, count)` per axis.
pub fn build_grid(dimension: usize, axes: &[(f64, f64, usize)]) -> Result<PointSet> {
    if dimension == 0 {
        return Err(Error::InvalidGrid("dimension must be positive".into()));
    }
    if axes.len() != dimension {
        return Err(Error::Dimension(format!(
            "dimension {dimension} but {} axis ranges given",
            axes.len()
        )));
    }
    let axes = axes
        .iter()
        .map(|&(lo, hi, count)| Axis::new(lo, hi, count))
        .collect::<Result<Vec<_>>>()?;
    PointSet::cartesian(axes)
}

/// Points of `bounding` where every constraint satisfies `h_i(x) <= feasibility_tol`.
pub fn restrict_to_feasible(
    bounding: &PointSet,
    constraints: &[SampledFunction],
    tol: &ToleranceConfig,
) -> Result<PointSet> {
    for (c, h) in constraints.iter().enumerate() {
        if h.domain().as_ref() != bounding {
            return Err(Error::DomainMismatch(format!("constraint h{} is not sampled on the bounding set", c + 1)));
        }
        if h.values().iter().any(|v| v.is_plus_infinity()) {
            return Err(Error::InvalidValue(format!("constraint h{} takes the value +inf", c + 1)));
        }
    }
    let mut keep = Vec::new();
    // least infeasible point: (worst violation, constraint, point index)
    let mut least: Option<(f64, usize, usize)> = None;
    for i in 0..bounding.len() {
        let mut worst = f64::NEG_INFINITY;
        let mut worst_c = 0;
        for (c, h) in constraints.iter().enumerate() {
            let v = h.values()[i].to_f64();
            if v > worst {
                worst = v;
                worst_c = c;
            }
        }
        if worst <= tol.feasibility_tol {
            keep.push(i);
        } else if least.map_or(true, |(w, _, _)| worst < w) {
            least = Some((worst, worst_c, i));
        }
    }
    if keep.is_empty() {
        let (violation, c, i) = least.expect("non-empty bounding set");
        return Err(Error::Infeasible { constraint: c + 1, violation, point: bounding.point(i).to_vec() });
    }
    Ok(bounding.subset(&keep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn line(lo: f64, hi: f64, count: usize) -> PointSet {
        build_grid(1, &[(lo, hi, count)]).unwrap()
    }

    fn column(set: &PointSet) -> Vec<f64> {
        set.iter().map(|p| p[0]).collect()
    }

    #[test]
    fn one_dimensional_grid_is_uniform() {
        assert_eq!(column(&line(-1.0, 1.0, 5)), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    }

    #[test]
    fn two_dimensional_grid_is_row_major() {
        let g = build_grid(2, &[(0.0, 1.0, 2), (0.0, 1.0, 2)]).unwrap();
        assert_eq!(g.len(), 4);
        assert_eq!(g.point(0), &[0.0, 0.0]);
        assert_eq!(g.point(1), &[0.0, 1.0]);
        assert_eq!(g.point(3), &[1.0, 1.0]);
    }

    #[test]
    fn degenerate_axis() {
        let g = line(0.0, 0.0, 1);
        assert_eq!(g.len(), 1);
        assert_eq!(g.point(0), &[0.0]);
    }

    #[test]
    fn grid_errors() {
        assert!(build_grid(1, &[(0.0, 1.0, 0)]).is_err());
        assert!(build_grid(1, &[(1.0, 0.0, 3)]).is_err());
        assert!(build_grid(2, &[(0.0, 1.0, 3)]).is_err());
        assert!(build_grid(1, &[(0.0, 1.0, 1)]).is_err());
    }

    #[test]
    fn step_axis_and_exact_integers() {
        let a = Axis::with_step(-1.0, 4.0, 0.01).unwrap();
        assert_eq!(a.count, 501);
        assert_eq!(a.coord(200), 1.0);
        assert!(Axis::with_step(0.0, 1.0, 0.3).is_err());
        let g = PointSet::cartesian(vec![a]).unwrap();
        assert_eq!(g.locate(&[1.0]), Some(200));
        assert_eq!(g.locate(&[1.005]), None);
        assert_eq!(g.locate(&[7.0]), None);
    }

    #[test]
    fn explicit_set_validation() {
        assert!(PointSet::explicit(1, vec![]).is_err());
        assert!(PointSet::explicit(1, vec![vec![0.0], vec![-0.0]]).is_err());
        assert!(PointSet::explicit(2, vec![vec![0.0]]).is_err());
        let s = PointSet::explicit(1, vec![vec![2.0], vec![1.0]]).unwrap();
        assert_eq!(s.locate(&[1.0]), Some(1));
        assert_eq!(s.origin_index(), None);
    }

    #[test]
    fn axis_triples_cover_interior_points() {
        let g = build_grid(2, &[(0.0, 2.0, 3), (0.0, 1.0, 2)]).unwrap();
        // only the first axis has an interior sample
        assert_eq!(g.axis_triples().unwrap(), vec![(0, 2, 4), (1, 3, 5)]);
    }

    fn constraint(set: &Arc<PointSet>, h: impl Fn(f64) -> f64) -> SampledFunction {
        SampledFunction::from_reals(set.clone(), "h", set.iter().map(|p| h(p[0])).collect()).unwrap()
    }

    #[test]
    fn feasible_restriction() {
        let tol = ToleranceConfig::default();
        let set = Arc::new(line(0.0, 2.0, 5));
        let a = restrict_to_feasible(&set, &[constraint(&set, |x| 1.0 - x)], &tol).unwrap();
        assert_eq!(column(&a), vec![1.0, 1.5, 2.0]);

        let err = restrict_to_feasible(&set, &[constraint(&set, |x| x * x + 1.0)], &tol).unwrap_err();
        assert!(matches!(err, Error::Infeasible { constraint: 1, .. }));

        let set = Arc::new(PointSet::explicit(1, [-1.0, 0.0, 0.5, 1.0, 2.0].map(|x| vec![x]).to_vec()).unwrap());
        let a = restrict_to_feasible(&set, &[constraint(&set, |x| -x), constraint(&set, |x| x - 1.0)], &tol).unwrap();
        assert_eq!(column(&a), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn infeasible_error_names_worst_constraint() {
        let tol = ToleranceConfig::default();
        let set = Arc::new(line(0.0, 1.0, 3));
        // h1 is mildly violated everywhere, h2 badly
        let err = restrict_to_feasible(&set, &[constraint(&set, |_| 0.5), constraint(&set, |x| 3.0 - x)], &tol)
            .unwrap_err();
        match err {
            Error::Infeasible { constraint, violation, point } => {
                assert_eq!(constraint, 2);
                assert_eq!(violation, 2.0);
                assert_eq!(point, vec![1.0]);
            }
            other => panic!("unexpected {other}"),
        }
    }
}
