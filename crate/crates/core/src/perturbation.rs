//! The marginal-function scheme: `h(u) = min_x φ(x, u)`, its conjugate
//! `h*(u*) = φ*(0, u*)`, and the gap function `f(x) + h*(u*)` with
//! `f = φ(·, 0)`.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exact::sub_up;
use crate::function::{infimum, SampledFunction};
use crate::grid::PointSet;
use crate::tol::ToleranceConfig;
use crate::value::ExtendedValue;

/// `φ` sampled on `X × U`, row-major with `x` as the slow index.
#[derive(Clone, Debug)]
pub struct PerturbationFunction {
    x: Arc<PointSet>,
    u: Arc<PointSet>,
    phi: SampledFunction,
}

impl PerturbationFunction {
    /// `phi` must be sampled on `x.product(u)`.
    pub fn new(x: Arc<PointSet>, u: Arc<PointSet>, phi: SampledFunction) -> Result<Self> {
        if *phi.domain().as_ref() != x.product(&u) {
            return Err(Error::DomainMismatch(format!("{} is not sampled on X x U", phi.label())));
        }
        phi.ensure_proper()?;
        Ok(PerturbationFunction { x, u, phi })
    }

    pub fn from_fn<F>(x: Arc<PointSet>, u: Arc<PointSet>, label: &str, f: F) -> Result<Self>
    where
        F: Fn(&[f64], &[f64]) -> Result<ExtendedValue> + Sync,
    {
        let d = x.dimension();
        let domain = Arc::new(x.product(&u));
        let phi = SampledFunction::from_fn(domain, label, |p| f(&p[..d], &p[d..]))?;
        PerturbationFunction::new(x, u, phi)
    }

    pub fn x(&self) -> &Arc<PointSet> {
        &self.x
    }

    pub fn u(&self) -> &Arc<PointSet> {
        &self.u
    }

    pub fn phi(&self) -> &SampledFunction {
        &self.phi
    }

    pub fn value(&self, i: usize, k: usize) -> ExtendedValue {
        self.phi.value(i * self.u.len() + k)
    }
}

#[derive(Clone, Debug)]
pub struct PerturbationReport {
    /// `h(0)`.
    pub alpha: f64,
    /// `inf h*`.
    pub beta: f64,
    pub beta_arg: Vec<f64>,
    /// `alpha + beta`.
    pub gap: f64,
    /// `max |h*(u*) - φ*(0, u*)|`.
    pub identity_violation: f64,
    /// `h**(0) = -inf h*`, never above `alpha`.
    pub h_biconjugate_at_origin: f64,
    pub h: SampledFunction,
    pub h_star: SampledFunction,
    /// `f(x) + h*(u*)` on `X × U*`.
    pub gap_function: SampledFunction,
    pub zero_tol: f64,
}

impl PerturbationReport {
    pub fn no_gap(&self) -> bool {
        self.gap.abs() <= self.zero_tol
    }
}

fn dot(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| a * b).sum()
}

/// Builds `h`, `h*`, `φ*(0, ·)` and the gap function; requires the origin to
/// be a sample point of both `U` and `U*`.
pub fn perturbation_duality_report(
    phi: &PerturbationFunction,
    u_star: &Arc<PointSet>,
    tol: &ToleranceConfig,
) -> Result<PerturbationReport> {
    let u = phi.u();
    let x = phi.x();
    if u_star.dimension() != u.dimension() {
        return Err(Error::Dimension(format!(
            "U* has dimension {} but U has dimension {}",
            u_star.dimension(),
            u.dimension()
        )));
    }
    let u0 = u.origin_index().ok_or(Error::MissingOrigin("U"))?;
    u_star.origin_index().ok_or(Error::MissingOrigin("U*"))?;

    let h_values: Vec<ExtendedValue> = (0..u.len())
        .into_par_iter()
        .map(|k| (0..x.len()).map(|i| phi.value(i, k)).min().unwrap_or(ExtendedValue::PLUS_INFINITY))
        .collect();
    let h = SampledFunction::new(u.clone(), "h", h_values)?;
    let alpha = h.value(u0).value().ok_or_else(|| Error::Improper("h(0) = inf_x φ(x, 0) is +inf".into()))?;

    let finite_h: Vec<(usize, f64)> = h.effective_domain().map(|k| (k, h.value(k).to_f64())).collect();
    let zero_x = vec![0.0; x.dimension()];
    let rows: Vec<(f64, f64)> = (0..u_star.len())
        .into_par_iter()
        .map(|s| {
            let us = u_star.point(s);
            let conj = finite_h
                .iter()
                .fold(f64::NEG_INFINITY, |m, &(k, hk)| m.max(sub_up(dot(us, u.point(k)), hk)));
            let mut joint = f64::NEG_INFINITY;
            for i in 0..x.len() {
                let px = dot(&zero_x, x.point(i));
                for k in 0..u.len() {
                    if let Some(p) = phi.value(i, k).value() {
                        joint = joint.max(sub_up(px + dot(us, u.point(k)), p));
                    }
                }
            }
            (conj, joint)
        })
        .collect();

    let identity_violation = rows.iter().fold(0.0, |m: f64, &(c, j)| m.max((c - j).abs()));
    let h_star = SampledFunction::from_reals(u_star.clone(), "h*", rows.iter().map(|r| r.0).collect())?;
    let best = infimum(&h_star)?;
    let beta = best.value;

    let f: Vec<ExtendedValue> = (0..x.len()).map(|i| phi.value(i, u0)).collect();
    let gap_domain = Arc::new(x.product(u_star));
    let ns = u_star.len();
    let gap_values = (0..x.len() * ns).map(|n| f[n / ns] + h_star.value(n % ns)).collect();
    let gap_function = SampledFunction::new(gap_domain, "g", gap_values)?;

    Ok(PerturbationReport {
        alpha,
        beta,
        beta_arg: u_star.point(best.index).to_vec(),
        gap: alpha + beta,
        identity_violation,
        h_biconjugate_at_origin: -beta,
        h,
        h_star,
        gap_function,
        zero_tol: tol.zero_tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    fn line(lo: f64, hi: f64, n: usize) -> Arc<PointSet> {
        Arc::new(build_grid(1, &[(lo, hi, n)]).unwrap())
    }

    fn real(v: f64) -> Result<ExtendedValue> {
        ExtendedValue::finite(v)
    }

    #[test]
    fn square_plus_abs() {
        let x = line(-2.0, 2.0, 41);
        let u = line(-2.0, 2.0, 41);
        let us = line(-2.0, 2.0, 41);
        let phi = PerturbationFunction::from_fn(x, u, "phi", |x, u| real(x[0] * x[0] + u[0].abs())).unwrap();
        let r = perturbation_duality_report(&phi, &us, &ToleranceConfig::default()).unwrap();
        assert_eq!(r.alpha, 0.0);
        assert_eq!(r.beta, 0.0);
        assert_eq!(r.gap, 0.0);
        assert_eq!(r.identity_violation, 0.0);
        for (s, p) in us.iter().enumerate() {
            let v = r.h_star.value(s).to_f64();
            if p[0].abs() <= 1.0 {
                assert_eq!(v, 0.0, "h*({})", p[0]);
            } else {
                assert!(v > 0.0);
            }
        }
        assert!(r.h_biconjugate_at_origin <= r.alpha);
    }

    #[test]
    fn shifted_square() {
        let x = line(-1.0, 1.0, 21);
        let u = line(-1.0, 1.0, 21);
        let us = line(-1.0, 1.0, 11);
        let phi = PerturbationFunction::from_fn(x, u, "phi", |x, u| real((x[0] - u[0]).powi(2))).unwrap();
        let r = perturbation_duality_report(&phi, &us, &ToleranceConfig::default()).unwrap();
        assert!(r.h.values().iter().all(|v| v.to_f64() == 0.0));
        assert_eq!(r.alpha, 0.0);
        assert_eq!(r.beta, 0.0);
        assert_eq!(r.beta_arg, vec![0.0]);
        assert_eq!(r.identity_violation, 0.0);
        assert!(r.no_gap());
    }

    #[test]
    fn origin_required() {
        let x = line(-1.0, 1.0, 3);
        let u = line(0.5, 1.0, 2);
        let phi = PerturbationFunction::from_fn(x.clone(), u, "phi", |_, _| real(0.0)).unwrap();
        let err = perturbation_duality_report(&phi, &line(-1.0, 1.0, 3), &ToleranceConfig::default());
        assert!(matches!(err, Err(Error::MissingOrigin("U"))));
        let u = line(-1.0, 1.0, 3);
        let phi = PerturbationFunction::from_fn(x, u, "phi", |_, _| real(0.0)).unwrap();
        let err = perturbation_duality_report(&phi, &line(0.5, 1.0, 2), &ToleranceConfig::default());
        assert!(matches!(err, Err(Error::MissingOrigin("U*"))));
    }

    #[test]
    fn infinite_values_are_skipped() {
        let x = line(-1.0, 1.0, 3);
        let u = line(-1.0, 1.0, 3);
        let phi = PerturbationFunction::from_fn(x, u, "phi", |x, u| {
            if x[0] < 0.0 {
                Ok(ExtendedValue::PLUS_INFINITY)
            } else {
                real(x[0] + u[0] * u[0])
            }
        })
        .unwrap();
        let r = perturbation_duality_report(&phi, &line(-1.0, 1.0, 5), &ToleranceConfig::default()).unwrap();
        assert_eq!(r.identity_violation, 0.0);
        assert!(r.gap_function.value(0).is_plus_infinity());
        assert!(r.gap >= 0.0);
    }
}
