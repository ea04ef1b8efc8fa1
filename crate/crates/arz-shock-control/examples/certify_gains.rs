//! Synthesize boundary feedback and audit its stability certificate.
//!
//! Walks one rate through the full pipeline: admissible injection
//! intervals, reflection margins, the realized physical gain rows, and
//! every certificate condition with its margin. Then scans a band of rates
//! to show where synthesis stops being feasible.

use arz_shock_control::gains::{
    b_interval, certify, synthesize_diagonal, CertificateOptions, SynthesisOptions,
};
use arz_shock_control::model::{characteristic_data, fix_equilibrium, PressureModel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pressure = PressureModel::affine(24.5, 180.0)?;
    let profile = fix_equilibrium(pressure, 500.0, 120.0, 60.0, 150.0)?;
    let data = characteristic_data(&profile)?;

    let gamma = 0.5;
    println!("injection intervals at gamma = {gamma}:");
    for i in 0..3 {
        let (lo, hi) = b_interval(&data, i, gamma, false)?;
        println!("  b_{} in ({lo:.9}, {hi:.9})", i + 1);
    }

    let gains = synthesize_diagonal(&data, gamma, SynthesisOptions::default())?;
    println!("\nsynthesized law:");
    println!(
        "  k = ({:.6}, {:.6}, {:.6})",
        gains.k_diag[0], gains.k_diag[1], gains.k_diag[2]
    );
    println!(
        "  b = ({:.6}, {:.6}, {:.2e})",
        gains.b[0], gains.b[1], gains.b[2]
    );
    println!("  physical measurement rows (z_f, z_c, rho_f, delta):");
    for (label, row) in [
        ("inlet density ", gains.physical[0]),
        ("inlet momentum", gains.physical[1]),
        ("outlet Robin  ", gains.physical[2]),
    ] {
        println!(
            "    {label}: [{:>12.6} {:>12.6} {:>12.6} {:>12.6}]",
            row[0], row[1], row[2], row[3]
        );
    }

    let certificate = certify(&data, &gains, CertificateOptions::default());
    println!("\ncertificate: {}", certificate.verdict);
    println!("  min eigenvalue {:.6e}", certificate.min_eig);
    if let Some(constants) = &certificate.constants {
        println!(
            "  weights mu = {:.6}, C0 = {:.2}, sigma = {:.6}",
            constants.mu, constants.c0, constants.sigma
        );
    }
    for reason in &certificate.reasons {
        println!("  violated: {reason}");
    }

    println!("\nfeasibility over rates:");
    for gamma in [0.05, 0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0] {
        let line = match synthesize_diagonal(&data, gamma, SynthesisOptions::default()) {
            Ok(g) => {
                let c = certify(&data, &g, CertificateOptions::default());
                format!("{} (min_eig {:.3e})", c.verdict, c.min_eig)
            }
            Err(err) => format!("synthesis failed: {err}"),
        };
        println!("  gamma {gamma:>5}: {line}");
    }
    Ok(())
}
