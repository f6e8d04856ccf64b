//! Duality through a coupling: the gap functional `γ(x, y) = f(x) + f^g(y)`,
//! membership of `g` in the family `F_f^{A,B}`, the dual problem
//! `min_y f^g(y)`, optimality certificates and the biconjugate lemma.

use crate::conjugate::{conjugate_back, g_conjugate, Conjugate};
use crate::coupling::CouplingSample;
use crate::error::{Error, Result};
use crate::function::{infimum, Minimum, SampledFunction};
use crate::tol::ToleranceConfig;
use crate::value::ExtendedValue;

/// `f^g` is proper and `inf γ = 0`, decided at `zero_tol`.
#[derive(Clone, Debug, PartialEq)]
pub struct MembershipReport {
    /// Always true on finite samples; kept for the record.
    pub f_g_proper: bool,
    pub inf_f: f64,
    pub inf_f_g: f64,
    /// `inf f + inf f^g`; `γ` separates over `A × B`.
    pub inf_gamma: f64,
    pub member: bool,
    pub zero_tol: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DualityReport {
    pub primal_value: f64,
    pub primal_index: usize,
    pub primal_arg: Vec<f64>,
    pub dual_value: f64,
    pub dual_index: usize,
    pub dual_arg: Vec<f64>,
    /// `primal_value + dual_value`; never negative (weak duality).
    pub gap: f64,
    pub weak_duality_holds: bool,
    pub member: bool,
    pub zero_tol: f64,
}

/// Result of [`optimality_certificate`].
#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub gamma: ExtendedValue,
    /// `γ(x, y) <= zero_tol`.
    pub certified: bool,
    /// `f(x)` is within `zero_tol` of `inf f`.
    pub primal_optimal: bool,
    /// `f^g(y)` is within `zero_tol` of `inf f^g`.
    pub dual_optimal: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BiconjugateLemmaReport {
    pub member: bool,
    pub inf_f: f64,
    pub inf_f_gg: f64,
    pub inf_match: bool,
    /// Every near-minimizer of `f` is a near-minimizer of `f^gg`.
    pub argmin_transfer: bool,
    /// `f^gg <= f` wherever `f` is finite.
    pub pointwise_bound: bool,
}

/// `f`, `g` and the conjugate `f^g`, computed once and shared by the checks.
#[derive(Clone, Debug)]
pub struct Duality<'a> {
    pub f: &'a SampledFunction,
    pub g: &'a CouplingSample,
    pub conjugate: Conjugate,
    pub primal: Minimum,
    pub dual: Minimum,
}

impl<'a> Duality<'a> {
    pub fn new(f: &'a SampledFunction, g: &'a CouplingSample) -> Result<Self> {
        let conjugate = g_conjugate(f, g)?;
        let primal = infimum(f)?;
        let dual = infimum(&conjugate.function)?;
        Ok(Duality { f, g, conjugate, primal, dual })
    }

    pub fn f_g(&self) -> &SampledFunction {
        &self.conjugate.function
    }

    pub fn membership(&self, tol: &ToleranceConfig) -> MembershipReport {
        let inf_gamma = self.primal.value + self.dual.value;
        let f_g_proper = self.f_g().is_proper();
        MembershipReport {
            f_g_proper,
            inf_f: self.primal.value,
            inf_f_g: self.dual.value,
            inf_gamma,
            member: f_g_proper && inf_gamma.abs() <= tol.zero_tol,
            zero_tol: tol.zero_tol,
        }
    }

    pub fn solve(&self, tol: &ToleranceConfig) -> DualityReport {
        let gap = self.primal.value + self.dual.value;
        DualityReport {
            primal_value: self.primal.value,
            primal_index: self.primal.index,
            primal_arg: self.g.a().point(self.primal.index).to_vec(),
            dual_value: self.dual.value,
            dual_index: self.dual.index,
            dual_arg: self.g.b().point(self.dual.index).to_vec(),
            gap,
            weak_duality_holds: gap >= -tol.zero_tol,
            member: self.membership(tol).member,
            zero_tol: tol.zero_tol,
        }
    }

    /// `γ(x_i, y_j)` by index.
    pub fn gamma(&self, i: usize, j: usize) -> ExtendedValue {
        self.f.value(i) + self.f_g().value(j)
    }

    pub fn certificate_at(&self, i: usize, j: usize, tol: &ToleranceConfig) -> Certificate {
        let gamma = self.gamma(i, j);
        let fx = self.f.value(i);
        let fgy = self.f_g().value(j).to_f64();
        Certificate {
            gamma,
            certified: gamma.value().is_some_and(|v| v <= tol.zero_tol),
            primal_optimal: fx.value().is_some_and(|v| v - self.primal.value <= tol.zero_tol),
            dual_optimal: fgy - self.dual.value <= tol.zero_tol,
        }
    }

    pub fn biconjugate_lemma(&self, tol: &ToleranceConfig) -> Result<BiconjugateLemmaReport> {
        let fgg = conjugate_back(self.f_g(), self.g)?.function;
        let inf_f_gg = infimum(&fgg)?.value;
        let inf_f = self.primal.value;
        let argmin_transfer = self
            .f
            .effective_domain()
            .filter(|&i| self.f.value(i).to_f64() - inf_f <= tol.zero_tol)
            .all(|i| fgg.value(i).to_f64() - inf_f_gg <= tol.zero_tol);
        let pointwise_bound = self.f.effective_domain().all(|i| fgg.value(i) <= self.f.value(i));
        Ok(BiconjugateLemmaReport {
            member: self.membership(tol).member,
            inf_f,
            inf_f_gg,
            inf_match: (inf_f - inf_f_gg).abs() <= tol.zero_tol,
            argmin_transfer,
            pointwise_bound,
        })
    }
}

/// Computes `f^g` and decides membership in `F_f^{A,B}`.
pub fn check_family_membership(f: &SampledFunction, g: &CouplingSample, tol: &ToleranceConfig) -> Result<MembershipReport> {
    Ok(Duality::new(f, g)?.membership(tol))
}

/// Solves `(P) min f` and `(D_g) min f^g` on the grid. Non-member couplings
/// are not refused: the gap then measures the failure.
pub fn solve_primal_dual(f: &SampledFunction, g: &CouplingSample, tol: &ToleranceConfig) -> Result<DualityReport> {
    Ok(Duality::new(f, g)?.solve(tol))
}

/// Decides whether `(x, y)` is a primal–dual optimal pair via `γ(x, y) = 0`.
pub fn optimality_certificate(
    x: &[f64],
    y: &[f64],
    f: &SampledFunction,
    g: &CouplingSample,
    tol: &ToleranceConfig,
) -> Result<Certificate> {
    let i = g.a().locate(x).ok_or_else(|| Error::PointNotFound(x.to_vec()))?;
    let j = g.b().locate(y).ok_or_else(|| Error::PointNotFound(y.to_vec()))?;
    Ok(Duality::new(f, g)?.certificate_at(i, j, tol))
}

/// `inf f = inf f^gg`, and minimizers of `f` minimize `f^gg`.
pub fn check_biconjugate_lemma(f: &SampledFunction, g: &CouplingSample, tol: &ToleranceConfig) -> Result<BiconjugateLemmaReport> {
    Duality::new(f, g)?.biconjugate_lemma(tol)
}
