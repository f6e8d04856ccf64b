//! Uniform-convergence experiments: generate `(f_k, g_k) → (f, g)`, check the
//! hypotheses at every `k`, tabulate the distances and decide membership and
//! (D2) for the limit.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::conjugate::g_conjugate;
use crate::coupling::{evaluate_coupling, verify_coupling, CouplingSample, CouplingSpec};
use crate::duality::check_family_membership;
use crate::error::{Error, Result};
use crate::expr::{Bindings, Expression};
use crate::function::{sup_distance, SampledFunction};
use crate::tol::ToleranceConfig;
use crate::value::ExtendedValue;

#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    /// `f_k = f + a/k`, `g_k = g`.
    Shift { a: f64 },
    /// `f_k = f`, `g_k = (1 + b/k) g`.
    Scale { b: f64 },
    /// Expressions in `x` (and `y` for the coupling) with `w1 = k`; `None` keeps the base.
    Custom { f: Option<Expression>, g: Option<Expression> },
}

#[derive(Clone, Debug)]
pub struct SequenceExperiment {
    pub base_f: SampledFunction,
    pub base_g: CouplingSample,
    pub k_values: Vec<u64>,
    pub family: Family,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilityRow {
    pub k: u64,
    pub df: f64,
    pub dg: f64,
    pub dconj: f64,
    pub d2_pass: Option<bool>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityReport {
    pub rows: Vec<StabilityRow>,
    pub limit_member: bool,
    /// Decided only when every `g_k` passed (D2).
    pub limit_d2: Option<bool>,
    /// `dconj <= df + dg + zero_tol` at every `k`.
    pub conjugate_bound: bool,
    /// Undecided with fewer than two rows.
    pub distances_decrease: Option<bool>,
}

impl StabilityReport {
    pub fn passes(&self) -> bool {
        self.limit_member && self.limit_d2 != Some(false) && self.conjugate_bound && self.distances_decrease != Some(false)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,df,dg,dconj\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{:?},{:?},{:?}", r.k, r.df, r.dg, r.dconj);
        }
        let show = |v: Option<bool>| v.map_or("n/a".to_string(), |b| b.to_string());
        let _ = writeln!(
            out,
            "# verdict: limit_member={} limit_d2={} conjugate_bound={} distances_decrease={}",
            self.limit_member,
            show(self.limit_d2),
            self.conjugate_bound,
            show(self.distances_decrease)
        );
        out
    }
}

fn generate(exp: &SequenceExperiment, k: u64) -> Result<(SampledFunction, CouplingSample)> {
    let kf = k as f64;
    let (f, g) = (&exp.base_f, &exp.base_g);
    match &exp.family {
        Family::Shift { a } => Ok((f.map_finite(format!("f_{k}"), |v| v + a / kf)?, g.clone())),
        Family::Scale { b } => {
            let factor = 1.0 + b / kf;
            if factor <= 0.0 {
                return Err(Error::Hypothesis { k, hypothesis: "scale", detail: format!("factor 1 + b/k = {factor} is not positive") });
            }
            Ok((f.clone(), g.scaled(factor)?))
        }
        Family::Custom { f: fe, g: ge } => {
            let w = [kf];
            let fk = match fe {
                Some(e) => {
                    let values = f
                        .domain()
                        .iter()
                        .zip(f.values())
                        .map(|(x, fv)| {
                            if fv.is_plus_infinity() {
                                return Ok(ExtendedValue::PLUS_INFINITY);
                            }
                            let env = Bindings { x, w: &w, ..Bindings::default() };
                            Ok(e.evaluate(&env)?)
                        })
                        .collect::<Result<Vec<_>>>()?;
                    SampledFunction::new(f.domain().clone(), format!("f_{k}"), values)?
                }
                None => f.clone(),
            };
            let gk = match ge {
                Some(e) => evaluate_coupling(&CouplingSpec::Custom { expr: e.clone(), params: w.to_vec() }, g.a(), g.b())?,
                None => g.clone(),
            };
            Ok((fk, gk))
        }
    }
}

/// Runs the experiment; a failed hypothesis at some `k` is an [`Error::Hypothesis`].
pub fn run_stability_experiment(exp: &SequenceExperiment, tol: &ToleranceConfig) -> Result<StabilityReport> {
    if exp.k_values.is_empty() || exp.k_values.contains(&0) {
        return Err(Error::Precondition("k values must be a non-empty list of positive integers".into()));
    }
    let check_d2 = exp.base_g.b().is_cartesian();
    let base_conj = g_conjugate(&exp.base_f, &exp.base_g)?.function;

    let rows = exp
        .k_values
        .par_iter()
        .map(|&k| {
            let (fk, gk) = generate(exp, k)?;
            if !fk.is_proper() {
                return Err(Error::Hypothesis { k, hypothesis: "f_k proper", detail: "f_k is +inf everywhere".into() });
            }
            let verdict = verify_coupling(&gk, tol, check_d2)?;
            if !verdict.d1_pass {
                return Err(Error::Hypothesis { k, hypothesis: "D1", detail: format!("inf g_k = {:?}", verdict.d1_inf) });
            }
            let m = check_family_membership(&fk, &gk, tol)?;
            if !m.member {
                return Err(Error::Hypothesis { k, hypothesis: "membership", detail: format!("inf gamma = {:?}", m.inf_gamma) });
            }
            let conj = g_conjugate(&fk, &gk)?.function;
            Ok(StabilityRow {
                k,
                df: sup_distance(&fk, &exp.base_f)?,
                dg: gk.sup_distance(&exp.base_g)?,
                dconj: sup_distance(&conj, &base_conj)?,
                d2_pass: check_d2.then_some(verdict.d2_pass),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let limit_member = check_family_membership(&exp.base_f, &exp.base_g, tol)?.member;
    let limit_d2 = if check_d2 && rows.iter().all(|r| r.d2_pass == Some(true)) {
        Some(verify_coupling(&exp.base_g, tol, true)?.d2_pass)
    } else {
        None
    };
    let conjugate_bound = rows.iter().all(|r| r.dconj <= r.df + r.dg + tol.zero_tol);

    let mut ordered = rows.clone();
    ordered.sort_by_key(|r| r.k);
    let distances_decrease = (ordered.len() >= 2).then(|| {
        ordered.windows(2).all(|w| {
            let (p, q) = (&w[0], &w[1]);
            let strict = |a: f64, b: f64| b < a || (a == 0.0 && b == 0.0);
            strict(p.df, q.df) && strict(p.dg, q.dg) && strict(p.dconj, q.dconj)
        })
    });

    Ok(StabilityReport { rows, limit_member, limit_d2, conjugate_bound, distances_decrease })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Axis, PointSet};
    use std::sync::Arc;

    fn setup() -> (SampledFunction, CouplingSample) {
        let a = Arc::new(PointSet::cartesian(vec![Axis::with_step(-2.0, 2.0, 0.125).unwrap()]).unwrap());
        let b = Arc::new(PointSet::cartesian(vec![Axis::with_step(-1.0, 1.0, 0.125).unwrap()]).unwrap());
        let f = SampledFunction::from_reals(a.clone(), "f", a.iter().map(|p| p[0] * p[0]).collect()).unwrap();
        let g = evaluate_coupling(&CouplingSpec::Norm, &a, &b).unwrap();
        (f, g)
    }

    fn powers() -> Vec<u64> {
        (0..7).map(|e| 1 << e).collect()
    }

    #[test]
    fn shift_family_obeys_the_shift_rule() {
        let (f, g) = setup();
        let exp = SequenceExperiment { base_f: f, base_g: g, k_values: powers(), family: Family::Shift { a: 1.0 } };
        let r = run_stability_experiment(&exp, &ToleranceConfig::default()).unwrap();
        for row in &r.rows {
            assert_eq!(row.dconj, 1.0 / row.k as f64);
            assert_eq!(row.df, 1.0 / row.k as f64);
            assert_eq!(row.dg, 0.0);
        }
        assert!(r.limit_member && r.limit_d2 == Some(true) && r.conjugate_bound);
        assert_eq!(r.distances_decrease, Some(true));
        assert!(r.passes());
    }

    #[test]
    fn scale_family() {
        let (f, g) = setup();
        let exp = SequenceExperiment { base_f: f, base_g: g, k_values: powers(), family: Family::Scale { b: 1.0 } };
        let r = run_stability_experiment(&exp, &ToleranceConfig::default()).unwrap();
        for row in &r.rows {
            assert_eq!(row.dg, 1.0 / row.k as f64);
            assert!(row.dconj <= row.df + row.dg + 1e-12);
        }
        assert!(r.passes());
        let csv = r.to_csv();
        assert!(csv.starts_with("k,df,dg,dconj\n1,0.0,1.0,1.0\n"));
        assert!(csv.ends_with("distances_decrease=true\n"));
    }

    #[test]
    fn single_k_makes_no_convergence_claim() {
        let (f, g) = setup();
        let exp = SequenceExperiment { base_f: f, base_g: g, k_values: vec![1], family: Family::Shift { a: 1.0 } };
        let r = run_stability_experiment(&exp, &ToleranceConfig::default()).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert_eq!(r.distances_decrease, None);
    }

    #[test]
    fn failing_hypothesis_is_named() {
        let (f, g) = setup();
        let custom = Family::Custom { f: None, g: Some(Expression::parse("abs(y1) + 1/w1").unwrap()) };
        let exp = SequenceExperiment { base_f: f, base_g: g, k_values: vec![1, 2], family: custom };
        match run_stability_experiment(&exp, &ToleranceConfig::default()) {
            Err(Error::Hypothesis { k: 1, hypothesis: "D1", .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn custom_family_matches_shift() {
        let (f, g) = setup();
        let custom = Family::Custom { f: Some(Expression::parse("x1^2 + 1/w1").unwrap()), g: None };
        let exp = SequenceExperiment { base_f: f.clone(), base_g: g.clone(), k_values: powers(), family: custom };
        let shift = SequenceExperiment { base_f: f, base_g: g, k_values: powers(), family: Family::Shift { a: 1.0 } };
        let tol = ToleranceConfig::default();
        assert_eq!(run_stability_experiment(&exp, &tol).unwrap().rows, run_stability_experiment(&shift, &tol).unwrap().rows);
    }
}
