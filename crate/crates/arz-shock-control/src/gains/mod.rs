//! Static boundary feedback synthesis.
//!
//! The control structure: three scalar boundary inputs — inlet density,
//! inlet momentum, and the right-hand side of a Robin condition
//! `z̃ − g·ρ̃ = rhs` at the outlet — are static linear functions of four
//! measurements taken at the interface: `z̃` on the free side, `z̃` on the
//! congested side, `ρ̃` on the free side, and the interface deviation
//! `δ = x_s − x_s*`.
//!
//! In characteristic coordinates the closed loop reads
//! `u_in(0) = K·u_out(interface) + b·δ` with `u_in = (u₁, u₂, u₃)` and
//! `u_out = (u₁, u₂, u₃)` traced at the interface. Synthesis proceeds in
//! characteristic space:
//!
//! 1. each `bᵢ` is picked from an admissible interval that makes the
//!    interface deviation contract at rate `γ` while keeping the boundary
//!    terms of the Lyapunov functional dissipative;
//! 2. the diagonal reflection targets `kᵢ` are bounded through margin
//!    factors `Kᵢ` so that `kᵢ² < e^{−γTᵢ}Kᵢ`;
//! 3. the certificate matrix `M(γ) = D(x_s*) − KᵀD(0)K − σD̃` must be
//!    positive definite;
//! 4. the characteristic law is realized as physical measurement gains by
//!    inverting the boundary-imposition map and the measurement map.

pub mod certificate;
pub mod constants;

use nalgebra::{Matrix3, Matrix3x4, Matrix4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::CharacteristicData;

pub use certificate::{certify, CertificateOptions, GainCertificate};
pub use constants::{lyapunov_constants, LyapunovConstants, DEFAULT_C0};

/// Robin slope used at the outlet boundary condition `z̃ − g·ρ̃ = rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutletSlope {
    /// `g = λ̃₄`. The condition then determines `u₃` alone, so the wave
    /// arriving from the interface leaves the domain without reflection.
    #[default]
    Shifted,
    /// `g = λ₄` (the plain characteristic speed). Kept for comparison: a
    /// residual reflection of the outgoing wave remains in the loop and
    /// degrades the closed-loop decay.
    Unshifted,
}

/// Choices that alter the synthesized gains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct SynthesisOptions {
    pub outlet_slope: OutletSlope,
    /// Use the published index convention in the interval endpoints (the
    /// transit factor in the denominator is mode 1's for every mode)
    /// instead of the per-mode convention.
    pub strict_published_indices: bool,
}

/// Synthesized feedback: certified characteristic-space objects plus their
/// physical realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackGains {
    /// Design contraction rate.
    pub gamma: f64,
    /// Interface-deviation injection coefficients, `bᵢ` inside its interval.
    pub b: [f64; 3],
    /// Admissible `(lo, hi)` interval for each `bᵢ` at rate `gamma`.
    pub intervals: [[f64; 2]; 3],
    /// Diagonal characteristic reflection targets.
    pub k_diag: [f64; 3],
    /// Margin factors `Kᵢ` entering the reflection bounds.
    pub margin_factors: [f64; 3],
    /// Bounds `e^{−γTᵢ}Kᵢ` on `kᵢ²`.
    pub k_square_bounds: [f64; 3],
    /// Physical measurement gains, rows = (inlet density, inlet momentum,
    /// outlet Robin rhs), columns = (z̃ free, z̃ congested, ρ̃ free, δ).
    pub physical: [[f64; 4]; 3],
    pub outlet_slope: OutletSlope,
    /// Numeric Robin slope actually used.
    pub outlet_slope_value: f64,
    pub strict_published_indices: bool,
}

impl FeedbackGains {
    /// Diagonal reflection matrix `K`.
    pub fn k_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&nalgebra::Vector3::from(self.k_diag))
    }

    /// Physical gains as a matrix.
    pub fn physical_matrix(&self) -> Matrix3x4<f64> {
        Matrix3x4::from_fn(|r, c| self.physical[r][c])
    }
}

/// Admissible interval for `b[index]` (`index` is 0-based, `< 3`) at rate
/// `gamma`.
///
/// With `eᵢ = e^{−γTᵢ}` and `Θᵢ` the interface sensitivity:
/// `Θᵢ < 0` gives `(−γeᵢ/(3Θᵢ), −γeᵢ/(3Θᵢ(1−e_ĵ)))`, `Θᵢ > 0` gives
/// `(−γeᵢ/(3Θᵢ(1−eᵢ)), −γe_ĵ/(3Θᵢ))`, where `ĵ = i` normally and `ĵ = 1`
/// under the published index convention. Either way `bᵢΘᵢ < 0` on the
/// whole interval.
pub fn b_interval(
    data: &CharacteristicData,
    index: usize,
    gamma: f64,
    strict_published_indices: bool,
) -> Result<(f64, f64)> {
    if index >= 3 {
        return Err(Error::InvalidParameter(format!(
            "feedback mode index must be 0, 1, or 2, got {index}"
        )));
    }
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "contraction rate must be positive, got {gamma}"
        )));
    }
    let theta = data.theta[index];
    if theta.abs() < 1e-300 {
        return Err(Error::DegenerateCoefficient { index });
    }
    let e_own = (-gamma * data.transit_times[index]).exp();
    let hat = if strict_published_indices { 0 } else { index };
    let e_hat = (-gamma * data.transit_times[hat]).exp();
    let (lo, hi) = if theta < 0.0 {
        (
            -gamma * e_own / (3.0 * theta),
            -gamma * e_own / (3.0 * theta * (1.0 - e_hat)),
        )
    } else {
        (
            -gamma * e_own / (3.0 * theta * (1.0 - e_own)),
            -gamma * e_hat / (3.0 * theta),
        )
    };
    if !(lo < hi) {
        return Err(Error::SynthesisContradiction {
            index,
            value: hi - lo,
        });
    }
    Ok((lo, hi))
}

/// Published form of the boundary-imposition map `K₁` from the three
/// physical inputs to the imposed characteristic values.
///
/// The upper 2×2 block equals the free-region diagonalizer; the outlet
/// entry is `λ̃₃/(λ̃₃ + λ̃₄)`, which encodes the congested slow speed with
/// its sign folded in. The realization path uses the sign-explicit variant
/// instead; see [`assemble_gains`].
pub fn k1_matrix(data: &CharacteristicData) -> Matrix3<f64> {
    k1_from_shifted(&data.lambda_tilde, data.lambda_tilde[2] + data.lambda_tilde[3])
}

/// `K₁` assembled from shifted speeds with an explicit outlet denominator.
fn k1_from_shifted(lt: &[f64; 4], outlet_denominator: f64) -> Matrix3<f64> {
    let d = lt[1] - lt[0];
    Matrix3::new(
        lt[0] * lt[1] / d,
        -lt[0] / d,
        0.0,
        -lt[0] * lt[1] / d,
        lt[1] / d,
        0.0,
        0.0,
        0.0,
        lt[2] / outlet_denominator,
    )
}

/// Numeric Robin slope for an [`OutletSlope`] choice.
pub fn outlet_slope_value(data: &CharacteristicData, slope: OutletSlope) -> f64 {
    match slope {
        OutletSlope::Shifted => data.lambda_tilde[3],
        OutletSlope::Unshifted => data.lambda[3],
    }
}

/// Measurement map `[M | e₄]`: columns `(u₁, u₂, u₃, δ)` at the interface,
/// rows the four measurements. `published` selects the published value of
/// the congested-momentum row's `u₃` entry (`−z_f*(1/λ̃₃ + 1/λ̃₄)` over the
/// closure denominator, a sign-convention artifact) instead of the
/// closure-consistent `1 − R₃`.
fn measurement_map(data: &CharacteristicData, published: bool) -> Matrix4<f64> {
    let lt = &data.lambda_tilde;
    let r = &data.closure_ratios;
    let m23 = if published {
        let denom = data.profile.rho_free - data.profile.z_free / lt[3];
        -data.profile.z_free * (1.0 / lt[2] + 1.0 / lt[3]) / denom
    } else {
        1.0 - r[2]
    };
    Matrix4::new(
        1.0, 1.0, 0.0, 0.0, //
        r[0], r[1], m23, 0.0, //
        1.0 / lt[0], 1.0 / lt[1], 0.0, 0.0, //
        0.0, 0.0, 0.0, 1.0,
    )
}

/// Published-convention measurement matrix (first three columns of
/// `[M | e₄]`), exposed for certificates.
pub fn published_measurement_matrix(data: &CharacteristicData) -> [[f64; 3]; 4] {
    let m = measurement_map(data, true);
    std::array::from_fn(|r| std::array::from_fn(|c| m[(r, c)]))
}

/// Coupling constant `σ(rate) = −(2/(rate²Δρ))·Σₖ bₖΘₖ(e^{rate·Tₖ} − 1)`,
/// positive whenever every `bₖΘₖ < 0`.
pub fn sigma_constant(data: &CharacteristicData, b: &[f64; 3], rate: f64) -> f64 {
    let sum: f64 = (0..3)
        .map(|k| b[k] * data.theta[k] * ((rate * data.transit_times[k]).exp() - 1.0))
        .sum();
    -(2.0 / (rate * rate * data.density_jump)) * sum
}

/// Certificate matrix `M(rate) = D(x_s*) − KᵀD(0)K − σ(rate)·D̃(rate)` with
///
/// * `D(x)ᵢᵢ = (−ΘᵢΔρ/bᵢ)·e^{rate·(x_s*−x)/(xᵢλᵢ)}`,
/// * `D̃ᵢᵢ = Θᵢ²Δρ²·Σⱼ e^{rate·(Tᵢ−Tⱼ)}`.
///
/// Positive definiteness of `M` at the design rate is the core certificate
/// condition.
pub fn stability_matrix(
    data: &CharacteristicData,
    b: &[f64; 3],
    k: &Matrix3<f64>,
    rate: f64,
) -> Matrix3<f64> {
    let drho = data.density_jump;
    let mut d_interface = Matrix3::zeros();
    let mut d_origin = Matrix3::zeros();
    let mut d_tilde = Matrix3::zeros();
    for i in 0..3 {
        let base = -data.theta[i] * drho / b[i];
        d_interface[(i, i)] = base;
        d_origin[(i, i)] = base * (rate * data.transit_times[i]).exp();
        let sum: f64 = (0..3)
            .map(|j| (rate * (data.transit_times[i] - data.transit_times[j])).exp())
            .sum();
        d_tilde[(i, i)] = data.theta[i] * data.theta[i] * drho * drho * sum;
    }
    d_interface - k.transpose() * d_origin * k - sigma_constant(data, b, rate) * d_tilde
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_symmetric_eigenvalue(m: &Matrix3<f64>) -> f64 {
    let sym = 0.5 * (m + m.transpose());
    sym.symmetric_eigenvalues()
        .iter()
        .fold(f64::INFINITY, |a, &e| a.min(e))
}

/// Realize a characteristic-space law `(K = diag(k), b)` as physical
/// measurement gains.
///
/// The imposition map uses the sign-explicit outlet factor
/// `λ̃₃/(λ̃₃ − g)` matching the Robin solve in the simulator, so the
/// realized characteristic loop reproduces `(K, b)` to machine precision
/// when the outlet slope is [`OutletSlope::Shifted`].
pub fn assemble_gains(
    data: &CharacteristicData,
    gamma: f64,
    k_diag: [f64; 3],
    b: [f64; 3],
    options: SynthesisOptions,
) -> Result<FeedbackGains> {
    let mut intervals = [[0.0; 2]; 3];
    for i in 0..3 {
        let (lo, hi) = b_interval(data, i, gamma, options.strict_published_indices)?;
        intervals[i] = [lo, hi];
    }
    let (margin_factors, k_square_bounds) = reflection_margins(data, gamma, &b);

    let slope = outlet_slope_value(data, options.outlet_slope);
    let outlet_denominator = data.lambda_tilde[2] - slope;
    if outlet_denominator.abs() < 1e-12 * data.lambda_tilde[2].abs().max(slope.abs()) {
        return Err(Error::RealizationSingular);
    }
    let k1 = k1_from_shifted(&data.lambda_tilde, outlet_denominator);
    let k1_inv = k1.try_inverse().ok_or(Error::RealizationSingular)?;
    let m4 = measurement_map(data, false);
    let m4_inv = m4.try_inverse().ok_or(Error::RealizationSingular)?;

    let mut kb = Matrix3x4::zeros();
    for i in 0..3 {
        kb[(i, i)] = k_diag[i];
        kb[(i, 3)] = b[i];
    }
    let physical_matrix = k1_inv * kb * m4_inv;

    // The realization must reproduce the characteristic-space law exactly.
    let check = k1 * physical_matrix * m4;
    let scale = kb.amax().max(1e-300);
    if (check - kb).amax() > 1e-9 * scale {
        return Err(Error::RealizationSingular);
    }

    let physical = std::array::from_fn(|r| std::array::from_fn(|c| physical_matrix[(r, c)]));
    Ok(FeedbackGains {
        gamma,
        b,
        intervals,
        k_diag,
        margin_factors,
        k_square_bounds,
        physical,
        outlet_slope: options.outlet_slope,
        outlet_slope_value: slope,
        strict_published_indices: options.strict_published_indices,
    })
}

/// Margin factors `Kᵢ` and reflection bounds `e^{−γTᵢ}Kᵢ` for a given `b`:
/// `Kᵢ = 1 − bᵢΘᵢ·[Σₖ (2bₖΘₖ/γ²)(e^{γTₖ}−1)]·Σⱼe^{γ(Tᵢ−Tⱼ)}`.
fn reflection_margins(
    data: &CharacteristicData,
    gamma: f64,
    b: &[f64; 3],
) -> ([f64; 3], [f64; 3]) {
    let weighted_sum: f64 = (0..3)
        .map(|k| {
            (2.0 * b[k] * data.theta[k] / (gamma * gamma))
                * ((gamma * data.transit_times[k]).exp() - 1.0)
        })
        .sum();
    let mut factors = [0.0; 3];
    let mut bounds = [0.0; 3];
    for i in 0..3 {
        let echo: f64 = (0..3)
            .map(|j| (gamma * (data.transit_times[i] - data.transit_times[j])).exp())
            .sum();
        factors[i] = 1.0 - b[i] * data.theta[i] * weighted_sum * echo;
        bounds[i] = (-gamma * data.transit_times[i]).exp() * factors[i];
    }
    (factors, bounds)
}

/// Full diagonal synthesis at rate `gamma`: midpoint `b`, reflection
/// targets `kᵢ = ½√(e^{−γTᵢ}Kᵢ)`, then physical realization.
pub fn synthesize_diagonal(
    data: &CharacteristicData,
    gamma: f64,
    options: SynthesisOptions,
) -> Result<FeedbackGains> {
    let mut b = [0.0; 3];
    for i in 0..3 {
        let (lo, hi) = b_interval(data, i, gamma, options.strict_published_indices)?;
        b[i] = 0.5 * (lo + hi);
    }
    let (factors, bounds) = reflection_margins(data, gamma, &b);
    let mut k_diag = [0.0; 3];
    for i in 0..3 {
        if !(bounds[i] > 0.0) {
            return Err(Error::SynthesisContradiction {
                index: i,
                value: factors[i],
            });
        }
        k_diag[i] = 0.5 * bounds[i].sqrt();
    }
    assemble_gains(data, gamma, k_diag, b, options)
}
