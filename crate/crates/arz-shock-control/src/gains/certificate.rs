//! Machine-checkable stability certificates for synthesized gains.
//!
//! A certificate bundles everything needed to audit a feedback law without
//! re-running synthesis: the design rate, the `b` coefficients with their
//! admissible intervals, the smallest eigenvalue of the certificate matrix,
//! the Lyapunov weights at the functional rate, and a pass/fail verdict
//! with explicit reasons on failure.

use serde::{Deserialize, Serialize};

use crate::gains::constants::{lyapunov_constants, DEFAULT_C0};
use crate::gains::{
    k1_matrix, min_symmetric_eigenvalue, published_measurement_matrix, stability_matrix,
    FeedbackGains,
};
use crate::model::CharacteristicData;

/// Knobs for certificate evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificateOptions {
    /// Lyapunov coupling constant `C₀`.
    pub c0: f64,
}

impl Default for CertificateOptions {
    fn default() -> Self {
        Self { c0: DEFAULT_C0 }
    }
}

/// Constants section of a certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CertificateConstants {
    pub mu: f64,
    pub c0: f64,
    pub sigma: f64,
    pub p: [f64; 4],
    pub p_prime: [f64; 3],
    pub boundary_dissipation: [f64; 3],
    pub interface_gain_sum: f64,
    pub min_eig_mu: f64,
    pub k_diag: [f64; 3],
    pub margin_factors: [f64; 3],
    pub transit_times: [f64; 4],
    pub theta: [f64; 3],
    pub published_k1: [[f64; 3]; 3],
    pub published_measurement_matrix: [[f64; 3]; 4],
}

/// Auditable stability certificate for one feedback law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GainCertificate {
    pub gamma: f64,
    pub b: [f64; 3],
    pub intervals: [[f64; 2]; 3],
    /// Smallest eigenvalue of the certificate matrix at the design rate.
    pub min_eig: f64,
    /// `"pass"` or `"fail"`.
    pub verdict: String,
    /// Empty on pass; otherwise one entry per violated condition.
    pub reasons: Vec<String>,
    /// Lyapunov weights; absent when no functional rate was feasible.
    pub constants: Option<CertificateConstants>,
}

impl GainCertificate {
    pub fn passed(&self) -> bool {
        self.verdict == "pass"
    }
}

/// Evaluate every certificate condition for a feedback law.
///
/// Never errors: an infeasible law yields `verdict = "fail"` with the
/// violated conditions listed in `reasons`.
pub fn certify(
    data: &CharacteristicData,
    gains: &FeedbackGains,
    options: CertificateOptions,
) -> GainCertificate {
    let mut reasons = Vec::new();

    for i in 0..3 {
        let [lo, hi] = gains.intervals[i];
        let slack = 8.0 * f64::EPSILON * hi.abs().max(lo.abs());
        if gains.b[i] < lo - slack || gains.b[i] > hi + slack {
            reasons.push(format!(
                "b[{i}] = {:e} outside its admissible interval [{lo:e}, {hi:e}]",
                gains.b[i]
            ));
        }
        if gains.k_square_bounds[i] <= 0.0 {
            reasons.push(format!(
                "reflection bound for mode {i} is not positive (margin factor {})",
                gains.margin_factors[i]
            ));
        } else if gains.k_diag[i] * gains.k_diag[i] >= gains.k_square_bounds[i] {
            reasons.push(format!(
                "k[{i}]² = {:e} exceeds its bound {:e}",
                gains.k_diag[i] * gains.k_diag[i],
                gains.k_square_bounds[i]
            ));
        }
    }

    let m = stability_matrix(data, &gains.b, &gains.k_matrix(), gains.gamma);
    let min_eig = min_symmetric_eigenvalue(&m);
    if !(min_eig > 0.0) {
        reasons.push(format!(
            "certificate matrix not positive definite at the design rate (min eig {min_eig:e})"
        ));
    }

    let constants = match lyapunov_constants(data, gains, options.c0) {
        Ok(c) => {
            let k1 = k1_matrix(data);
            Some(CertificateConstants {
                mu: c.mu,
                c0: c.c0,
                sigma: c.sigma,
                p: c.p,
                p_prime: c.p_prime,
                boundary_dissipation: c.boundary_dissipation,
                interface_gain_sum: c.interface_gain_sum,
                min_eig_mu: c.min_eig_mu,
                k_diag: gains.k_diag,
                margin_factors: gains.margin_factors,
                transit_times: data.transit_times,
                theta: data.theta,
                published_k1: std::array::from_fn(|r| std::array::from_fn(|c| k1[(r, c)])),
                published_measurement_matrix: published_measurement_matrix(data),
            })
        }
        Err(e) => {
            reasons.push(format!("no feasible Lyapunov weights: {e}"));
            None
        }
    };

    GainCertificate {
        gamma: gains.gamma,
        b: gains.b,
        intervals: gains.intervals,
        min_eig,
        verdict: if reasons.is_empty() { "pass" } else { "fail" }.to_string(),
        reasons,
        constants,
    }
}
