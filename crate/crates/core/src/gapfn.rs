//! Gap functions for variational inequalities over a sampled operator graph
//! and for equilibrium problems over a sampled bifunction.

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::function::SampledFunction;
use crate::grid::PointSet;
use crate::tol::ToleranceConfig;

/// Finite sample of `G_C(T) = {(v, y) : v ∈ T(y), y ∈ C}`.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorGraphSample {
    dimension: usize,
    ys: Vec<f64>,
    vs: Vec<f64>,
}

impl OperatorGraphSample {
    pub fn new(dimension: usize, pairs: Vec<(Vec<f64>, Vec<f64>)>) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::Dimension("graph dimension must be positive".into()));
        }
        let mut ys = Vec::with_capacity(pairs.len() * dimension);
        let mut vs = Vec::with_capacity(pairs.len() * dimension);
        for (k, (y, v)) in pairs.into_iter().enumerate() {
            if y.len() != dimension || v.len() != dimension {
                return Err(Error::Dimension(format!(
                    "graph pair {} has lengths ({}, {}), expected {dimension}",
                    k + 1,
                    y.len(),
                    v.len()
                )));
            }
            if y.iter().chain(&v).any(|c| !c.is_finite()) {
                return Err(Error::InvalidValue(format!("graph pair {} is not finite", k + 1)));
            }
            ys.extend(y);
            vs.extend(v);
        }
        Ok(OperatorGraphSample { dimension, ys, vs })
    }

    /// Samples a single-valued `T` at every point of `c`.
    pub fn from_fn(c: &PointSet, t: impl Fn(&[f64]) -> Result<Vec<f64>>) -> Result<Self> {
        let pairs = c.iter().map(|y| Ok((y.to_vec(), t(y)?))).collect::<Result<Vec<_>>>()?;
        OperatorGraphSample::new(c.dimension(), pairs)
    }

    /// Reads the `y_1..y_n,v_1..v_n` CSV layout.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::InvalidValue("empty operator graph CSV".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        let n = cols.len() / 2;
        let expected: Vec<String> = (1..=n).map(|i| format!("y_{i}")).chain((1..=n).map(|i| format!("v_{i}"))).collect();
        if n == 0 || cols.len() % 2 != 0 || cols != expected {
            return Err(Error::InvalidValue(format!("operator graph header must be {:?}, got {header:?}", expected.join(","))));
        }
        let mut pairs = Vec::new();
        for (line_no, line) in lines {
            let nums = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::InvalidValue(format!("line {}: {e}", line_no + 1)))?;
            if nums.len() != 2 * n {
                return Err(Error::Dimension(format!("line {}: {} fields, expected {}", line_no + 1, nums.len(), 2 * n)));
            }
            pairs.push((nums[..n].to_vec(), nums[n..].to_vec()));
        }
        OperatorGraphSample::new(n, pairs)
    }

    pub fn to_csv(&self) -> String {
        let n = self.dimension;
        let mut out: String = (1..=n).map(|i| format!("y_{i}")).chain((1..=n).map(|i| format!("v_{i}"))).collect::<Vec<_>>().join(",");
        out.push('\n');
        for k in 0..self.len() {
            let fields: Vec<String> = self.y(k).iter().chain(self.v(k)).map(|c| format!("{c:?}")).collect();
            let _ = writeln!(out, "{}", fields.join(","));
        }
        out
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.ys.len() / self.dimension
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn y(&self, k: usize) -> &[f64] {
        &self.ys[k * self.dimension..(k + 1) * self.dimension]
    }

    pub fn v(&self, k: usize) -> &[f64] {
        &self.vs[k * self.dimension..(k + 1) * self.dimension]
    }
}

fn dot_diff(v: &[f64], x: &[f64], y: &[f64]) -> f64 {
    v.iter().zip(x.iter().zip(y)).map(|(v, (x, y))| v * (x - y)).sum()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonotoneReport {
    /// `max(0, max_{a,b} -⟨v_a - v_b, y_a - y_b⟩)`.
    pub max_violation: f64,
    /// Lowest `(a, b)` attaining a positive violation.
    pub worst_pair: Option<(usize, usize)>,
}

/// Sample-level monotonicity certificate: 0 means monotone on the sample.
pub fn check_monotone(graph: &OperatorGraphSample) -> Result<MonotoneReport> {
    if graph.len() < 2 {
        return Err(Error::Precondition("monotonicity needs at least two graph pairs".into()));
    }
    let worst: Vec<(f64, usize)> = (0..graph.len())
        .into_par_iter()
        .map(|a| {
            let (ya, va) = (graph.y(a), graph.v(a));
            let mut best = (0.0, usize::MAX);
            for b in 0..graph.len() {
                let dv: Vec<f64> = va.iter().zip(graph.v(b)).map(|(p, q)| p - q).collect();
                let viol = -dot_diff(&dv, ya, graph.y(b));
                if viol > best.0 {
                    best = (viol, b);
                }
            }
            best
        })
        .collect();
    let mut report = MonotoneReport { max_violation: 0.0, worst_pair: None };
    for (a, &(viol, b)) in worst.iter().enumerate() {
        if viol > report.max_violation {
            report = MonotoneReport { max_violation: viol, worst_pair: Some((a, b)) };
        }
    }
    Ok(report)
}

/// On a finite graph `h ≥ 0` is only guaranteed at the sampled base points.
pub const VIP_NOTE: &str = "h >= 0 is guaranteed at the graph's sampled base points y_i only";

/// `h(x) = max_k ⟨v_k, x - y_k⟩` over the graph pairs.
pub fn vip_gap(graph: &OperatorGraphSample, x_grid: &Arc<PointSet>) -> Result<SampledFunction> {
    if graph.is_empty() {
        return Err(Error::Precondition("empty operator graph".into()));
    }
    if x_grid.dimension() != graph.dimension() {
        return Err(Error::Dimension(format!(
            "x grid has dimension {} but the graph has dimension {}",
            x_grid.dimension(),
            graph.dimension()
        )));
    }
    let values = (0..x_grid.len())
        .into_par_iter()
        .map(|i| {
            let x = x_grid.point(i);
            (0..graph.len()).map(|k| dot_diff(graph.v(k), x, graph.y(k))).fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    SampledFunction::from_reals(x_grid.clone(), "h", values)
}

/// `f(x_i, y_j)` over `K × K`, row-major with `x` as the slow index.
#[derive(Clone, Debug, PartialEq)]
pub struct BifunctionSample {
    k: Arc<PointSet>,
    values: Vec<f64>,
}

impl BifunctionSample {
    pub fn new(k: Arc<PointSet>, values: Vec<f64>) -> Result<Self> {
        if values.len() != k.len() * k.len() {
            return Err(Error::Dimension(format!("{} bifunction values for |K| = {}", values.len(), k.len())));
        }
        if let Some(n) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidValue(format!(
                "bifunction is not finite at x = {:?}, y = {:?}",
                k.point(n / k.len()),
                k.point(n % k.len())
            )));
        }
        Ok(BifunctionSample { k, values })
    }

    pub fn from_fn(k: Arc<PointSet>, f: impl Fn(&[f64], &[f64]) -> Result<f64> + Sync) -> Result<Self> {
        let n = k.len();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| (0..n).map(|j| f(k.point(i), k.point(j))).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        BifunctionSample::new(k, rows.concat())
    }

    pub fn k(&self) -> &Arc<PointSet> {
        &self.k
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.k.len() + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// `g_f(y) = max_{x ∈ K} f(x, y)`, on `K` (the `+∞` branch outside `K` is not materialized).
pub fn ep_gap(bf: &BifunctionSample) -> Result<SampledFunction> {
    let n = bf.k.len();
    let values = (0..n).into_par_iter().map(|j| (0..n).map(|i| bf.get(i, j)).fold(f64::NEG_INFINITY, f64::max)).collect();
    SampledFunction::from_reals(bf.k.clone(), "g_f", values)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpAssumptions {
    /// `max |f(x, x)|`.
    pub max_diag: f64,
    pub diag_zero: bool,
    /// Largest `2 f(x, y_mid) - f(x, y_lo) - f(x, y_hi)` over axis triples, clamped at 0.
    /// `None` when `K` is not Cartesian.
    pub convexity_violation: Option<f64>,
    pub convex_in_y: Option<bool>,
}

impl EpAssumptions {
    pub const SEMICONTINUITY_NOTE: &'static str =
        "upper semicontinuity in x and lower semicontinuity in y are vacuous on a finite sample";
}

pub fn check_ep_assumptions(bf: &BifunctionSample, tol: &ToleranceConfig) -> EpAssumptions {
    let n = bf.k.len();
    let max_diag = (0..n).map(|i| bf.get(i, i).abs()).fold(0.0, f64::max);
    let convexity_violation = bf.k.axis_triples().map(|triples| {
        (0..n)
            .into_par_iter()
            .map(|i| {
                triples
                    .iter()
                    .fold(0.0, |m: f64, &(lo, mid, hi)| m.max(2.0 * bf.get(i, mid) - bf.get(i, lo) - bf.get(i, hi)))
            })
            .reduce(|| 0.0, f64::max)
    });
    EpAssumptions {
        max_diag,
        diag_zero: max_diag <= tol.zero_tol,
        convexity_violation,
        convex_in_y: convexity_violation.map(|v| v <= tol.convexity_tol),
    }
}

/// Indices of the points where the gap is at most `zero_tol`, in grid order.
pub fn gap_minimize(gap: &SampledFunction, tol: &ToleranceConfig) -> Result<Vec<usize>> {
    gap.ensure_proper()?;
    Ok(gap.effective_domain().filter(|&i| gap.value(i).to_f64() <= tol.zero_tol).collect())
}
