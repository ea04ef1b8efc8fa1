//! Physical model layer: pressure laws, steady shock profiles, and their
//! linearized characteristic structure.

pub mod characteristics;
pub mod equilibrium;
pub mod pressure;

pub use characteristics::{characteristic_data, CharacteristicData};
pub use equilibrium::{
    compute_eigenvalues, fix_equilibrium, rh_residual, shock_speed, validate_equilibrium,
    EquilibriumShockProfile, ValidationReport,
};
pub use pressure::{eval_pressure, PressureEval, PressureFamily, PressureModel};
