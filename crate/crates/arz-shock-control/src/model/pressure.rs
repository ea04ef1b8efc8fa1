//! Traffic pressure laws.
//!
//! The pressure `p(ρ)` encodes driver anticipation. Two closed-form families
//! are supported:
//!
//! * affine (Greenshields-type): `p(ρ) = a(ρ/ρ_m − 1)`, `a > 0`, `ρ_m > 0`;
//! * power law: `p(ρ) = c·ρ^θ`, `c > 0`, `θ > 0`.
//!
//! Both satisfy `p′ > 0` and strict convexity of `ρ ↦ ρ·p(ρ)` on `ρ > 0`.
//! The affine family has `p(0) = −a ≠ 0`; constructing one records a
//! diagnostic flag instead of rejecting, because evaluation never approaches
//! `ρ = 0` in the shocked regimes this toolkit studies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed-form pressure family with parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PressureFamily {
    /// `p(ρ) = a(ρ/ρ_m − 1)`.
    Affine { a: f64, rho_max: f64 },
    /// `p(ρ) = c·ρ^θ`.
    PowerLaw { c: f64, theta: f64 },
}

/// Evaluable pressure law with its admissible density range and assumption
/// diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PressureModel {
    pub family: PressureFamily,
    /// Lower edge of the admissible evaluation range, strictly positive.
    pub rho_min: f64,
    /// Upper edge of the admissible evaluation range.
    pub rho_max_range: f64,
    /// Set when the family does not vanish at `ρ = 0` (affine family).
    pub nonzero_pressure_at_vacuum: bool,
}

/// Pressure value together with its first two derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PressureEval {
    pub p: f64,
    pub dp: f64,
    pub ddp: f64,
}

impl PressureModel {
    /// Affine law `p(ρ) = a(ρ/ρ_m − 1)` on the range `(0, 2ρ_m]`.
    pub fn affine(a: f64, rho_max: f64) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "affine pressure slope a must be positive, got {a}"
            )));
        }
        if !(rho_max > 0.0) || !rho_max.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "road capacity rho_m must be positive, got {rho_max}"
            )));
        }
        Ok(Self {
            family: PressureFamily::Affine { a, rho_max },
            rho_min: f64::MIN_POSITIVE,
            rho_max_range: 2.0 * rho_max,
            nonzero_pressure_at_vacuum: true,
        })
    }

    /// Power law `p(ρ) = c·ρ^θ` on the range `(0, rho_hi]`.
    pub fn power_law(c: f64, theta: f64, rho_hi: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "power-law coefficient must be positive, got {c}"
            )));
        }
        if !(theta > 0.0) || !theta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "power-law exponent must be positive, got {theta}"
            )));
        }
        if !(rho_hi > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "evaluation range upper edge must be positive, got {rho_hi}"
            )));
        }
        Ok(Self {
            family: PressureFamily::PowerLaw { c, theta },
            rho_min: f64::MIN_POSITIVE,
            rho_max_range: rho_hi,
            nonzero_pressure_at_vacuum: false,
        })
    }

    /// Restrict the admissible evaluation range.
    pub fn with_range(mut self, rho_min: f64, rho_max: f64) -> Result<Self> {
        if !(rho_min > 0.0) || !(rho_max > rho_min) {
            return Err(Error::InvalidParameter(format!(
                "evaluation range must satisfy 0 < min < max, got [{rho_min}, {rho_max}]"
            )));
        }
        self.rho_min = rho_min;
        self.rho_max_range = rho_max;
        Ok(self)
    }

    /// Evaluate `p`, `p′`, `p″` at `ρ`.
    ///
    /// Errors when `ρ` lies outside the admissible range, naming the
    /// offending value.
    pub fn eval(&self, rho: f64) -> Result<PressureEval> {
        if !(rho > 0.0) || rho < self.rho_min || rho > self.rho_max_range || !rho.is_finite() {
            return Err(Error::OutOfRange {
                quantity: "density",
                value: rho,
                min: self.rho_min,
                max: self.rho_max_range,
            });
        }
        Ok(self.eval_unchecked(rho))
    }

    /// Evaluate without the range check (used in inner solver loops where the
    /// caller enforces positivity separately).
    pub fn eval_unchecked(&self, rho: f64) -> PressureEval {
        match self.family {
            PressureFamily::Affine { a, rho_max } => PressureEval {
                p: a * (rho / rho_max - 1.0),
                dp: a / rho_max,
                ddp: 0.0,
            },
            PressureFamily::PowerLaw { c, theta } => {
                let p = c * rho.powf(theta);
                PressureEval {
                    p,
                    dp: theta * p / rho,
                    ddp: theta * (theta - 1.0) * p / (rho * rho),
                }
            }
        }
    }

    /// Shorthand for the pressure value alone.
    pub fn p(&self, rho: f64) -> f64 {
        self.eval_unchecked(rho).p
    }

    /// Shorthand for the pressure slope alone.
    pub fn dp(&self, rho: f64) -> f64 {
        self.eval_unchecked(rho).dp
    }

    /// Check the structural assumptions by sampling: `p′(ρ) > 0` and
    /// `(ρ p(ρ))″ = 2p′ + ρp″ > 0` across the evaluation range.
    ///
    /// Returns the number of offending samples for each condition (0, 0)
    /// on a healthy model.
    pub fn assumption_violations(&self, samples: usize) -> (usize, usize) {
        let lo = self.rho_min.max(1e-12);
        let hi = self.rho_max_range;
        let n = samples.max(2);
        let mut bad_slope = 0;
        let mut bad_convexity = 0;
        for k in 0..n {
            let rho = lo + (hi - lo) * (k as f64 + 0.5) / n as f64;
            let e = self.eval_unchecked(rho);
            if !(e.dp > 0.0) {
                bad_slope += 1;
            }
            if !(2.0 * e.dp + rho * e.ddp > 0.0) {
                bad_convexity += 1;
            }
        }
        (bad_slope, bad_convexity)
    }
}

/// Evaluate `p`, `p′`, `p″` for a model at a density.
///
/// Free function mirror of [`PressureModel::eval`] for call sites that read
/// better in operator form.
pub fn eval_pressure(model: &PressureModel, rho: f64) -> Result<PressureEval> {
    model.eval(rho)
}
