//! Relating the design rate to the realized closed-loop decay.
//!
//! For a band of contraction rates: synthesize the feedback, evaluate the
//! certificate, and — where it passes — run the closed loop and fit the
//! decay rate of the combined deviation norm. Shows both ends of the
//! feasible band: small rates decay slowly by design, large rates lose
//! certificate feasibility before synthesis breaks down entirely.

use arz_shock_control::gains::{certify, synthesize_diagonal, CertificateOptions, SynthesisOptions};
use arz_shock_control::lyapunov::{dissipation_check, monitor};
use arz_shock_control::model::{characteristic_data, fix_equilibrium, PressureModel};
use arz_shock_control::solver::{
    ControlMode, InitialCondition, InitialVelocity, SimConfig, Solver,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pressure = PressureModel::affine(24.5, 180.0)?;
    let profile = fix_equilibrium(pressure, 500.0, 120.0, 60.0, 150.0)?;
    let data = characteristic_data(&profile)?;

    let config = SimConfig {
        n_cells: 128,
        cfl: 0.9,
        t_final: 120.0,
        record_dt: 0.25,
        mode: ControlMode::Closed,
        initial: InitialCondition::ConstantPerRegion {
            x_shock: 200.0,
            rho_free: 65.0,
            rho_cong: 130.0,
            velocity: InitialVelocity::Steady,
        },
    };

    println!(
        "{:>7} {:>12} {:>8} {:>13} {:>13}",
        "gamma", "min_eig", "verdict", "fitted rate", "final offset"
    );
    for gamma in [0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9, 1.0, 1.2] {
        let gains = match synthesize_diagonal(&data, gamma, SynthesisOptions::default()) {
            Ok(g) => g,
            Err(err) => {
                println!("{gamma:>7} {:>12} {:>8} -- {err}", "--", "--");
                continue;
            }
        };
        let certificate = certify(&data, &gains, CertificateOptions::default());
        if !certificate.passed() {
            println!(
                "{gamma:>7} {:>12.4e} {:>8} {:>13} {:>13}",
                certificate.min_eig, certificate.verdict, "--", "--"
            );
            continue;
        }
        let solver = Solver::new(&data, &config, Some(&gains))?;
        let record = solver.run();
        let norms = monitor(&data, None, &record)?;
        let fit = dissipation_check(&norms, gamma, None);
        let offset = record.samples.last().unwrap().x_s - profile.x_shock;
        println!(
            "{gamma:>7} {:>12.4e} {:>8} {:>13.5} {:>12.3} m",
            certificate.min_eig, certificate.verdict, fit.rate, offset
        );
    }
    Ok(())
}
