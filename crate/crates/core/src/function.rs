//! Extended-real functions sampled on a point set.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::PointSet;
use crate::value::ExtendedValue;

/// One `ExtendedValue` per point of a shared domain.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledFunction {
    domain: Arc<PointSet>,
    values: Vec<ExtendedValue>,
    label: String,
}

/// Minimum value and the lowest index attaining it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Minimum {
    pub value: f64,
    pub index: usize,
}

impl SampledFunction {
    pub fn new(domain: Arc<PointSet>, label: impl Into<String>, values: Vec<ExtendedValue>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::Dimension(format!(
                "{} values for a domain of {} points",
                values.len(),
                domain.len()
            )));
        }
        Ok(SampledFunction { domain, values, label: label.into() })
    }

    /// Finite reals; rejects NaN/±inf.
    pub fn from_reals(domain: Arc<PointSet>, label: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let values = values.into_iter().map(ExtendedValue::finite).collect::<Result<Vec<_>>>()?;
        SampledFunction::new(domain, label, values)
    }

    /// Evaluates `f` at every point of `domain` (in parallel, order preserved).
    pub fn from_fn<F>(domain: Arc<PointSet>, label: impl Into<String>, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Result<ExtendedValue> + Sync,
    {
        let values = (0..domain.len())
            .into_par_iter()
            .map(|i| f(domain.point(i)))
            .collect::<Result<Vec<_>>>()?;
        SampledFunction::new(domain, label, values)
    }

    pub fn domain(&self) -> &Arc<PointSet> {
        &self.domain
    }

    pub fn values(&self) -> &[ExtendedValue] {
        &self.values
    }

    pub fn value(&self, i: usize) -> ExtendedValue {
        self.values[i]
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Finite somewhere.
    pub fn is_proper(&self) -> bool {
        self.values.iter().any(|v| v.is_finite())
    }

    /// Indices where the function is finite.
    pub fn effective_domain(&self) -> impl Iterator<Item = usize> + '_ {
        self.values.iter().enumerate().filter(|(_, v)| v.is_finite()).map(|(i, _)| i)
    }

    /// Applies `op` to every finite value; `+∞` stays `+∞`.
    pub fn map_finite(&self, label: impl Into<String>, op: impl Fn(f64) -> f64) -> Result<Self> {
        let values = self
            .values
            .iter()
            .map(|v| match v.value() {
                Some(x) => ExtendedValue::finite(op(x)),
                None => Ok(ExtendedValue::PLUS_INFINITY),
            })
            .collect::<Result<Vec<_>>>()?;
        SampledFunction::new(self.domain.clone(), label, values)
    }

    pub fn ensure_proper(&self) -> Result<()> {
        if self.is_proper() {
            Ok(())
        } else {
            Err(Error::Improper(self.label.clone()))
        }
    }
}

/// Minimum over the finite entries; ties go to the lowest index.
pub fn infimum(f: &SampledFunction) -> Result<Minimum> {
    let mut best: Option<Minimum> = None;
    for (index, v) in f.values.iter().enumerate() {
        if let Some(value) = v.value() {
            if best.map_or(true, |b| value < b.value) {
                best = Some(Minimum { value, index });
            }
        }
    }
    best.ok_or_else(|| Error::Improper(f.label.clone()))
}

/// `max |f - g|` over the common domain; points where both are `+∞` contribute 0.
pub fn sup_distance(f: &SampledFunction, g: &SampledFunction) -> Result<f64> {
    if !same_domain(&f.domain, &g.domain) {
        return Err(Error::DomainMismatch(format!("{} and {} live on different sets", f.label, g.label)));
    }
    let mut dist = 0.0f64;
    for (i, (a, b)) in f.values.iter().zip(&g.values).enumerate() {
        match (a.value(), b.value()) {
            (Some(x), Some(y)) => dist = dist.max((x - y).abs()),
            (None, None) => {}
            _ => {
                return Err(Error::DomainMismatch(format!(
                    "{} and {} disagree on finiteness at point {:?}",
                    f.label,
                    g.label,
                    f.domain.point(i)
                )))
            }
        }
    }
    Ok(dist)
}

pub(crate) fn same_domain(a: &Arc<PointSet>, b: &Arc<PointSet>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}
