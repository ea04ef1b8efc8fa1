//! Construct and inspect a steady shock profile.
//!
//! Given a pressure law, a segment length, and the interface position with
//! the two regional densities, the regional momenta are fixed so that both
//! regions are stationary and the interface jump is admissible. The example
//! prints the resolved profile, its validation report, and the linearized
//! characteristic quantities every other module consumes.

use arz_shock_control::model::{
    characteristic_data, fix_equilibrium, validate_equilibrium, PressureModel,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pressure = PressureModel::affine(24.5, 180.0)?;
    let profile = fix_equilibrium(pressure, 500.0, 120.0, 60.0, 150.0)?;

    println!("steady shock profile:");
    println!("  interface at {:.1} m of {:.1} m", profile.x_shock, profile.length);
    println!(
        "  free region:      rho = {:>6.1}, z = {:>7.2}",
        profile.rho_free, profile.z_free
    );
    println!(
        "  congested region: rho = {:>6.1}, z = {:>7.2}",
        profile.rho_cong, profile.z_cong
    );
    let (v_free, v_cong) = profile.velocities()?;
    println!("  velocities: {:.3} m/s -> {:.3} m/s", v_free, v_cong);

    let report = validate_equilibrium(&profile)?;
    println!("\nvalidation:");
    println!(
        "  fluxes {:.2} / {:.2}, residual {:.3e}",
        report.flux_free, report.flux_cong, report.flux_residual
    );
    println!(
        "  interface invariant residual {:.3e} (velocity form {:.3e})",
        report.invariant_residual, report.velocity_offset_jump
    );
    println!("  consistent: {}", report.is_consistent);

    let data = characteristic_data(&profile)?;
    println!("\ncharacteristic structure:");
    println!(
        "  free speeds      ({:.4}, {:.4}) m/s",
        data.lambda[0], data.lambda[1]
    );
    println!(
        "  congested speeds ({:.4}, {:.4}) m/s",
        data.lambda[2], data.lambda[3]
    );
    println!(
        "  reference transit times T = ({:.3}, {:.3}, {:.3}, {:.3}) s",
        data.transit_times[0], data.transit_times[1], data.transit_times[2], data.transit_times[3]
    );
    println!(
        "  interface sensitivities Theta = ({:.5}, {:.5}, {:.5})",
        data.theta[0], data.theta[1], data.theta[2]
    );
    Ok(())
}
