//! Uncontrolled drift of a displaced shock.
//!
//! Same scenario as `closed_loop_run`, but the boundary data is frozen at
//! its initial traces instead of being fed back. The interface then drifts
//! upstream at the speed set by the initial jump, and the deviation norm
//! never contracts — the baseline the feedback is judged against.

use arz_shock_control::lyapunov::monitor;
use arz_shock_control::model::{characteristic_data, fix_equilibrium, PressureModel};
use arz_shock_control::solver::{
    ControlMode, InitialCondition, InitialVelocity, SimConfig, Solver,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pressure = PressureModel::affine(24.5, 180.0)?;
    let profile = fix_equilibrium(pressure, 500.0, 120.0, 60.0, 150.0)?;
    let data = characteristic_data(&profile)?;

    let config = SimConfig {
        n_cells: 200,
        cfl: 0.9,
        t_final: 40.0,
        record_dt: 0.25,
        mode: ControlMode::Open,
        initial: InitialCondition::ConstantPerRegion {
            x_shock: 200.0,
            rho_free: 65.0,
            rho_cong: 130.0,
            velocity: InitialVelocity::Steady,
        },
    };
    let solver = Solver::new(&data, &config, None)?;
    let record = solver.run();
    let norms = monitor(&data, None, &record)?;

    println!(
        "{:>8} {:>12} {:>12} {:>14}",
        "t [s]", "x_s [m]", "xdot [m/s]", "combined norm"
    );
    for (sample, norm) in record.samples.iter().zip(&norms).step_by(20) {
        println!(
            "{:>8.1} {:>12.4} {:>12.4} {:>14.5e}",
            sample.t, sample.x_s, sample.xdot_s, norm.combined
        );
    }

    let first = record.samples.first().unwrap();
    let last = record.samples.last().unwrap();
    println!(
        "\ninterface drifted {:.2} m upstream in {:.0} s (no recovery)",
        first.x_s - last.x_s,
        last.t
    );
    println!(
        "combined norm {:.4e} -> {:.4e}",
        norms.first().unwrap().combined,
        norms.last().unwrap().combined
    );
    Ok(())
}
