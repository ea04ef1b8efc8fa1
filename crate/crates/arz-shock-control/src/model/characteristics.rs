//! Linearization of the model around a steady shock profile.
//!
//! Everything downstream of the steady state — gain synthesis, the
//! diagonalizing change of variables, the interface closure — consumes the
//! quantities assembled here:
//!
//! * positive characteristic magnitudes `λ₁..λ₄` (the congested slow speed
//!   is stored as its magnitude, with its sign carried separately),
//! * direction signs `s = (1, 1, −1, 1)`,
//! * domain weights `x₁ = x₂ = 1`, `x₃ = −x₄ = x_s*/(L − x_s*)` that map
//!   both regions onto the common reference interval `[0, x_s*]`,
//! * shifted speeds `λ̃ᵢ = sᵢλᵢ + p(ρ*) + ρ*p′(ρ*)` (free state for
//!   `i = 1, 2`, congested for `i = 3, 4`), which satisfy
//!   `λ̃₁ = z_f*/ρ_f*` and `λ̃₃ = z_c*/ρ_c*` identically,
//! * diagonalizing maps `S₁` (free) and `S₂` (congested) from state
//!   deviations `(ρ, z)` to characteristic coordinates `u`,
//! * interface closure ratios `Rᵢ` and sensitivity coefficients `Θᵢ`.
//!
//! In characteristic coordinates `u₁, u₂` (free) and `u₃` (congested)
//! propagate away from `x = 0` of the reference interval while `u₄` enters
//! at the interface; the linearized interface condition reads
//! `u₄ = R₁u₁ + R₂u₂ − R₃u₃`. On a profile with a continuous velocity
//! offset `λ̃₁ = λ̃₃` and `R₁ = R₃ = 0`.

use crate::error::{Error, Result};
use crate::model::equilibrium::{validate_equilibrium, EquilibriumShockProfile};

/// Linearized characteristic structure of a steady shock profile.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicData {
    pub profile: EquilibriumShockProfile,
    /// Characteristic speed magnitudes, all positive: free slow/fast, then
    /// congested slow magnitude and congested fast.
    pub lambda: [f64; 4],
    /// Propagation signs `s = (1, 1, −1, 1)`.
    pub signs: [f64; 4],
    /// Domain weights mapping each region to the reference interval.
    pub weights: [f64; 4],
    /// Shifted speeds `λ̃ᵢ = sᵢλᵢ + p + ρp′` at the owning steady state.
    pub lambda_tilde: [f64; 4],
    /// Reference-interval transit times `Tᵢ = x_s*/(|xᵢ|λᵢ)`.
    pub transit_times: [f64; 4],
    /// Interface closure ratios `R₁, R₂, R₃`.
    pub closure_ratios: [f64; 3],
    /// Interface sensitivity coefficients `Θ₁, Θ₂, Θ₃` of the linearized
    /// interface motion.
    pub theta: [f64; 3],
    /// Density jump `Δρ = ρ_c* − ρ_f*`.
    pub density_jump: f64,
    /// Congested diagonalizer prefactor `κ = λ̃₃λ̃₄/(λ̃₄ − λ̃₃)`.
    pub kappa: f64,
    /// Free-region map `(ρ, z) ↦ (u₁, u₂)`, row-major.
    pub s1: [[f64; 2]; 2],
    /// Congested-region map `(ρ, z) ↦ (u₃, u₄)`, row-major.
    pub s2: [[f64; 2]; 2],
}

/// Assemble the characteristic structure of a profile.
///
/// Requires the characteristic sign pattern of a steady shock (both free
/// speeds positive, congested speeds straddling zero); the quantitative
/// consistency of the profile is *not* required, so slightly perturbed or
/// rounded profiles can still be linearized.
pub fn characteristic_data(profile: &EquilibriumShockProfile) -> Result<CharacteristicData> {
    let report = validate_equilibrium(profile)?;
    if !report.free_signs_ok {
        return Err(Error::RegimeSigns {
            regime: "free",
            lambda_slow: report.free_eigenvalues.0,
            lambda_fast: report.free_eigenvalues.1,
        });
    }
    if !report.cong_signs_ok {
        return Err(Error::RegimeSigns {
            regime: "congested",
            lambda_slow: report.cong_eigenvalues.0,
            lambda_fast: report.cong_eigenvalues.1,
        });
    }

    let (f1, f2) = report.free_eigenvalues;
    let (c1, c2) = report.cong_eigenvalues;
    let lambda = [f1, f2, -c1, c2];
    let signs = [1.0, 1.0, -1.0, 1.0];
    let ratio = profile.x_shock / (profile.length - profile.x_shock);
    let weights = [1.0, 1.0, ratio, -ratio];

    let ef = profile.pressure.eval(profile.rho_free)?;
    let ec = profile.pressure.eval(profile.rho_cong)?;
    let shift_f = ef.p + profile.rho_free * ef.dp;
    let shift_c = ec.p + profile.rho_cong * ec.dp;
    let lambda_tilde = [
        signs[0] * lambda[0] + shift_f,
        signs[1] * lambda[1] + shift_f,
        signs[2] * lambda[2] + shift_c,
        signs[3] * lambda[3] + shift_c,
    ];
    for (i, lt) in lambda_tilde.iter().enumerate() {
        if !(lt.abs() > f64::EPSILON) {
            return Err(Error::SingularConfiguration(format!(
                "shifted speed {} vanishes at the steady state",
                i + 1
            )));
        }
    }

    let transit_times = [
        profile.x_shock / (weights[0].abs() * lambda[0]),
        profile.x_shock / (weights[1].abs() * lambda[1]),
        profile.x_shock / (weights[2].abs() * lambda[2]),
        profile.x_shock / (weights[3].abs() * lambda[3]),
    ];

    let closure_denominator = profile.rho_free - profile.z_free / lambda_tilde[3];
    if closure_denominator.abs()
        < f64::EPSILON * profile.rho_free.abs().max(profile.z_free.abs() / lambda_tilde[3].abs())
    {
        return Err(Error::SingularConfiguration(format!(
            "interface closure denominator rho_f - z_f/lt4 = {closure_denominator} vanishes"
        )));
    }
    // Ratio i pairs the outgoing wave with the steady state on the *other*
    // side of the interface: congested for i = 1, 2, free for i = 3.
    let other = [
        (profile.rho_cong, profile.z_cong),
        (profile.rho_cong, profile.z_cong),
        (profile.rho_free, profile.z_free),
    ];
    let mut closure_ratios = [0.0; 3];
    for i in 0..3 {
        let (rho_o, z_o) = other[i];
        closure_ratios[i] = (rho_o - z_o / lambda_tilde[i]) / closure_denominator;
    }

    let density_jump = profile.rho_cong - profile.rho_free;
    let mut theta = [0.0; 3];
    for i in 0..3 {
        theta[i] = (-lambda[i] / lambda_tilde[i]
            + signs[i] * lambda[3] * closure_ratios[i] / lambda_tilde[3])
            / density_jump;
    }

    // lt2 - lt1 = rho_f * p'(rho_f) > 0 and lt4 - lt3 = rho_c * p'(rho_c) > 0,
    // so the diagonalizers are always well defined.
    let pre1 = lambda_tilde[0] * lambda_tilde[1] / (lambda_tilde[1] - lambda_tilde[0]);
    let kappa = lambda_tilde[2] * lambda_tilde[3] / (lambda_tilde[3] - lambda_tilde[2]);
    let s1 = [
        [pre1, -pre1 / lambda_tilde[1]],
        [-pre1, pre1 / lambda_tilde[0]],
    ];
    let s2 = [
        [kappa, -kappa / lambda_tilde[3]],
        [-kappa, kappa / lambda_tilde[2]],
    ];

    Ok(CharacteristicData {
        profile: *profile,
        lambda,
        signs,
        weights,
        lambda_tilde,
        transit_times,
        closure_ratios,
        theta,
        density_jump,
        kappa,
        s1,
        s2,
    })
}

impl CharacteristicData {
    /// Free-region deviations `(ρ, z)` to characteristic pair `(u₁, u₂)`.
    pub fn free_to_diag(&self, rho: f64, z: f64) -> (f64, f64) {
        (
            self.s1[0][0] * rho + self.s1[0][1] * z,
            self.s1[1][0] * rho + self.s1[1][1] * z,
        )
    }

    /// Inverse of [`Self::free_to_diag`]:
    /// `ρ = u₁/λ̃₁ + u₂/λ̃₂`, `z = u₁ + u₂`.
    pub fn diag_to_free(&self, u1: f64, u2: f64) -> (f64, f64) {
        (u1 / self.lambda_tilde[0] + u2 / self.lambda_tilde[1], u1 + u2)
    }

    /// Congested-region deviations `(ρ, z)` to characteristic pair `(u₃, u₄)`.
    pub fn cong_to_diag(&self, rho: f64, z: f64) -> (f64, f64) {
        (
            self.s2[0][0] * rho + self.s2[0][1] * z,
            self.s2[1][0] * rho + self.s2[1][1] * z,
        )
    }

    /// Inverse of [`Self::cong_to_diag`]:
    /// `ρ = u₃/λ̃₃ + u₄/λ̃₄`, `z = u₃ + u₄`.
    pub fn diag_to_cong(&self, u3: f64, u4: f64) -> (f64, f64) {
        (u3 / self.lambda_tilde[2] + u4 / self.lambda_tilde[3], u3 + u4)
    }

    /// Linearized interface closure `u₄ = R₁u₁ + R₂u₂ − R₃u₃` expressing the
    /// incoming congested wave at the interface through the outgoing traces.
    pub fn linear_interface_closure(&self, u1: f64, u2: f64, u3: f64) -> f64 {
        self.closure_ratios[0] * u1 + self.closure_ratios[1] * u2 - self.closure_ratios[2] * u3
    }

    /// Longest reference-interval transit time.
    pub fn max_transit_time(&self) -> f64 {
        self.transit_times
            .iter()
            .fold(f64::NEG_INFINITY, |a, &b| a.max(b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::equilibrium::fix_equilibrium;
    use crate::model::pressure::PressureModel;
    use crate::tolerances::{close, REL_ALGEBRAIC, ROUND_TRIP};
    use proptest::prelude::*;

    fn benchmark() -> CharacteristicData {
        let pressure = PressureModel::affine(24.5, 180.0).unwrap();
        let profile = fix_equilibrium(pressure, 500.0, 120.0, 60.0, 150.0).unwrap();
        characteristic_data(&profile).unwrap()
    }

    #[test]
    fn benchmark_speeds_and_shifts() {
        let d = benchmark();
        let expect_lambda = [12.25, 245.0 / 12.0, 12.25, 49.0 / 6.0];
        let expect_tilde = [49.0 / 12.0, 12.25, 49.0 / 12.0, 24.5];
        for i in 0..4 {
            assert!(
                close(d.lambda[i], expect_lambda[i], REL_ALGEBRAIC),
                "lambda[{i}] = {}",
                d.lambda[i]
            );
            assert!(
                close(d.lambda_tilde[i], expect_tilde[i], REL_ALGEBRAIC),
                "lambda_tilde[{i}] = {}",
                d.lambda_tilde[i]
            );
        }
        assert_eq!(d.signs, [1.0, 1.0, -1.0, 1.0]);
        assert!(close(d.weights[2], 6.0 / 19.0, REL_ALGEBRAIC));
        assert!(close(d.weights[3], -6.0 / 19.0, REL_ALGEBRAIC));
    }

    #[test]
    fn benchmark_transit_times() {
        let d = benchmark();
        let expect = [480.0 / 49.0, 288.0 / 49.0, 1520.0 / 49.0, 2280.0 / 49.0];
        for i in 0..4 {
            assert!(
                close(d.transit_times[i], expect[i], REL_ALGEBRAIC),
                "T[{i}] = {}",
                d.transit_times[i]
            );
        }
        assert!(close(d.max_transit_time(), 2280.0 / 49.0, REL_ALGEBRAIC));
    }

    #[test]
    fn benchmark_closure_and_sensitivities() {
        let d = benchmark();
        assert!(d.closure_ratios[0].abs() < 1e-12, "R1 = {}", d.closure_ratios[0]);
        assert!(close(d.closure_ratios[1], 2.0, REL_ALGEBRAIC));
        assert!(d.closure_ratios[2].abs() < 1e-12, "R3 = {}", d.closure_ratios[2]);
        let expect_theta = [-1.0 / 30.0, -1.0 / 90.0, -1.0 / 30.0];
        for i in 0..3 {
            assert!(
                close(d.theta[i], expect_theta[i], REL_ALGEBRAIC),
                "theta[{i}] = {}",
                d.theta[i]
            );
        }
        assert!(close(d.density_jump, 90.0, REL_ALGEBRAIC));
    }

    #[test]
    fn benchmark_diagonalizers() {
        let d = benchmark();
        let expect_s1 = [[6.125, -0.5], [-6.125, 1.5]];
        let expect_s2 = [[4.9, -0.2], [-4.9, 1.2]];
        for r in 0..2 {
            for c in 0..2 {
                assert!(
                    close(d.s1[r][c], expect_s1[r][c], REL_ALGEBRAIC),
                    "s1[{r}][{c}] = {}",
                    d.s1[r][c]
                );
                assert!(
                    close(d.s2[r][c], expect_s2[r][c], REL_ALGEBRAIC),
                    "s2[{r}][{c}] = {}",
                    d.s2[r][c]
                );
            }
        }
        assert!(close(d.kappa, 4.9, REL_ALGEBRAIC));
    }

    #[test]
    fn shifted_slow_speeds_equal_momentum_per_density() {
        let d = benchmark();
        let p = &d.profile;
        assert!(close(d.lambda_tilde[0], p.z_free / p.rho_free, ROUND_TRIP));
        assert!(close(d.lambda_tilde[2], p.z_cong / p.rho_cong, ROUND_TRIP));
        // Consistent profile: the two coincide.
        assert!(close(d.lambda_tilde[0], d.lambda_tilde[2], ROUND_TRIP));
    }

    #[test]
    fn rounded_profile_linearizes_with_nonzero_outer_ratios() {
        let pressure = PressureModel::affine(24.5, 180.0).unwrap();
        let profile = crate::model::equilibrium::EquilibriumShockProfile {
            pressure,
            length: 500.0,
            x_shock: 120.0,
            rho_free: 60.0,
            rho_cong: 150.0,
            z_free: 220.0,
            z_cong: 587.5,
        };
        let d = characteristic_data(&profile).unwrap();
        assert!(close(d.lambda_tilde[0], 11.0 / 3.0, REL_ALGEBRAIC));
        assert!(close(d.lambda_tilde[2], 47.0 / 12.0, REL_ALGEBRAIC));
        assert!(close(d.lambda_tilde[3], 73.0 / 3.0, REL_ALGEBRAIC));
        assert!(d.closure_ratios[0].abs() > 0.1);
        assert!(d.closure_ratios[2].abs() > 0.01);
    }

    proptest! {
        #[test]
        fn prop_diagonalizer_round_trips(
            rho in -40.0f64..40.0,
            z in -200.0f64..200.0,
        ) {
            let d = benchmark();
            let (u1, u2) = d.free_to_diag(rho, z);
            let (rho_b, z_b) = d.diag_to_free(u1, u2);
            prop_assert!(close(rho_b, rho, ROUND_TRIP), "rho {rho} -> {rho_b}");
            prop_assert!(close(z_b, z, ROUND_TRIP), "z {z} -> {z_b}");
            let (u3, u4) = d.cong_to_diag(rho, z);
            let (rho_c, z_c) = d.diag_to_cong(u3, u4);
            prop_assert!(close(rho_c, rho, ROUND_TRIP));
            prop_assert!(close(z_c, z, ROUND_TRIP));
        }

        #[test]
        fn prop_consistent_profiles_have_vanishing_outer_ratios(
            a in 8.0f64..45.0,
            rho_m in 120.0f64..260.0,
            f_frac in 0.25f64..0.5,
            c_frac in 0.7f64..0.95,
            xs_frac in 0.1f64..0.6,
        ) {
            let pressure = PressureModel::affine(a, rho_m).unwrap();
            let rho_f = f_frac * rho_m;
            let rho_c = c_frac * rho_m;
            let length = 500.0;
            let fixed = fix_equilibrium(pressure, length, xs_frac * length, rho_f, rho_c);
            prop_assume!(fixed.is_ok());
            let d = characteristic_data(&fixed.unwrap()).unwrap();
            // Velocity-offset continuity forces the slow shifted speeds to
            // agree and the outer closure ratios to vanish.
            prop_assert!(close(d.lambda_tilde[0], d.lambda_tilde[2], 1e-9));
            prop_assert!(d.closure_ratios[0].abs() < 1e-8, "R1 = {}", d.closure_ratios[0]);
            prop_assert!(d.closure_ratios[2].abs() < 1e-8, "R3 = {}", d.closure_ratios[2]);
            // Transit times and the domain weights are positive where required.
            for t in d.transit_times {
                prop_assert!(t > 0.0);
            }
            prop_assert!(d.weights[2] > 0.0 && d.weights[3] < 0.0);
        }
    }
}
