use crate::error::{Error, Result};

/// Tolerances that turn exact infima/equalities into grid-level decisions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ToleranceConfig {
    /// Threshold for "is zero" decisions (D1, membership, gaps, saddles).
    pub zero_tol: f64,
    /// Slack allowed in `h(x) <= 0` when restricting to the feasible set.
    pub feasibility_tol: f64,
    /// Slack allowed in discrete midpoint-convexity checks.
    pub convexity_tol: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        ToleranceConfig { zero_tol: 1e-9, feasibility_tol: 1e-9, convexity_tol: 1e-9 }
    }
}

impl ToleranceConfig {
    pub fn new(zero_tol: f64, feasibility_tol: f64, convexity_tol: f64) -> Result<Self> {
        let tol = ToleranceConfig { zero_tol, feasibility_tol, convexity_tol };
        tol.validate()?;
        Ok(tol)
    }

    pub fn with_zero_tol(self, zero_tol: f64) -> Result<Self> {
        ToleranceConfig { zero_tol, ..self }.validate_into()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.zero_tol > 0.0 && self.zero_tol.is_finite()) {
            return Err(Error::InvalidValue(format!("zero_tol must be > 0, got {}", self.zero_tol)));
        }
        for (name, v) in [("feasibility_tol", self.feasibility_tol), ("convexity_tol", self.convexity_tol)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidValue(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    fn validate_into(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }
}
