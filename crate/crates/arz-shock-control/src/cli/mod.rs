//! Command-line front end: scenario loading, the four commands
//! (`simulate`, `certify`, `sweep`, `validate`), and their artifacts.
//!
//! Exit codes: 0 success, 2 configuration problem, 3 failed
//! certificate/verdict, 4 solver breakdown. Failures also print a one-line
//! JSON record to stderr. Every command writes its audit manifest last.

pub mod config;
pub mod output;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gains::{
    certify, lyapunov_constants, synthesize_diagonal, CertificateOptions, FeedbackGains,
    GainCertificate,
};
use crate::lyapunov::{dissipation_check, monitor, DecayFit};
use crate::model::validate_equilibrium;
use crate::solver::{ControlMode, SimConfig, Solver, TrajectorySample};
use crate::transform::from_fixed_domain;

use config::{parse_config, preset_text, Scenario};
use output::{
    emit_error, ErrorBody, NormSummary, RunManifest, RunSummary, ShockSummary, SweepRow,
};

#[derive(Debug, Parser)]
#[command(
    name = "arz-shock-control",
    version,
    about = "Shock steady states, boundary feedback synthesis, and \
             tracked-interface simulation for two-regime traffic flow"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the tracked-interface simulation and write its artifacts.
    Simulate(CommonArgs),
    /// Synthesize feedback gains and evaluate the stability certificate.
    Certify(CommonArgs),
    /// Certify a range of contraction rates concurrently, simulating the
    /// closed loop for each rate whose certificate passes.
    Sweep(CommonArgs),
    /// Diagnose the configured steady profile (flux balance, interface
    /// jump admissibility, characteristic signs). Exits 3 when the
    /// profile is inconsistent.
    Validate(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Path to a TOML scenario file.
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in scenario: section5 or section5-literal.
    #[arg(long, value_name = "NAME")]
    pub preset: Option<String>,
    /// Output directory, created if absent.
    #[arg(long, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    /// Contraction rate override: one value for simulate, a comma list or
    /// lo:hi:count range for certify and sweep.
    #[arg(long, value_name = "VALUE(S)")]
    pub gamma: Option<String>,
    /// Boundary mode override (open or closed).
    #[arg(long, value_name = "MODE")]
    pub mode: Option<String>,
    /// Use the published index convention in the gain interval endpoints.
    #[arg(long)]
    pub strict_paper_indices: bool,
}

/// Parse the process arguments, run, and return the exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            emit_error(&err);
            err.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Certify(args) => cmd_certify(&args),
        Command::Sweep(args) => cmd_sweep(&args),
        Command::Validate(args) => cmd_validate(&args),
    }
}

fn mode_label(mode: ControlMode) -> &'static str {
    match mode {
        ControlMode::Open => "open",
        ControlMode::Closed => "closed",
    }
}

fn parse_mode(text: &str) -> Result<ControlMode> {
    match text {
        "open" => Ok(ControlMode::Open),
        "closed" => Ok(ControlMode::Closed),
        other => Err(Error::Config(format!(
            "--mode must be 'open' or 'closed', got '{other}'"
        ))),
    }
}

/// Expand `--gamma`: a single value, a comma list, or an inclusive
/// `lo:hi:count` range.
fn parse_gamma_list(text: &str) -> Result<Vec<f64>> {
    let bad = |detail: &str| Error::Config(format!("cannot parse --gamma '{text}': {detail}"));
    let values = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("a range needs exactly lo:hi:count"));
        }
        let lo: f64 = parts[0].trim().parse().map_err(|_| bad("bad lower edge"))?;
        let hi: f64 = parts[1].trim().parse().map_err(|_| bad("bad upper edge"))?;
        let count: usize = parts[2].trim().parse().map_err(|_| bad("bad count"))?;
        match count {
            0 => return Err(bad("count must be at least 1")),
            1 => vec![lo],
            _ => (0..count)
                .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
                .collect(),
        }
    } else {
        text.split(',')
            .map(|part| part.trim().parse::<f64>().map_err(|_| bad(part.trim())))
            .collect::<std::result::Result<Vec<f64>, Error>>()?
    };
    if values.is_empty() {
        return Err(bad("no values"));
    }
    for &g in &values {
        if !(g > 0.0) || !g.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "contraction rate must be positive, got {g}"
            )));
        }
    }
    Ok(values)
}

/// Read the scenario source, apply command-line overrides, and resolve it.
fn load_scenario(args: &CommonArgs, gamma_override: Option<f64>) -> Result<Scenario> {
    let (name, text): (String, String) = match (&args.config, &args.preset) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Error::Config(format!("cannot read {}: {e}", path.display()))
            })?;
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "scenario".to_string());
            (stem, text)
        }
        (None, Some(name)) => {
            let text = preset_text(name).ok_or_else(|| {
                Error::Config(format!(
                    "unknown preset '{name}'; available: {}",
                    config::PRESETS
                        .iter()
                        .map(|(n, _)| *n)
                        .collect::<Vec<_>>()
                        .join(", ")
                ))
            })?;
            (name.clone(), text.to_string())
        }
        (None, None) => {
            return Err(Error::Config(
                "provide a scenario with --config PATH or --preset NAME".into(),
            ))
        }
        (Some(_), Some(_)) => {
            return Err(Error::Config(
                "--config and --preset are mutually exclusive".into(),
            ))
        }
    };
    let mut config = parse_config(&text)?;
    if let Some(mode) = &args.mode {
        config.control.mode = parse_mode(mode)?;
    }
    if args.strict_paper_indices {
        config.control.strict_published_indices = true;
    }
    if let Some(gamma) = gamma_override {
        config.control.gamma_per_s = gamma;
    }
    Scenario::from_config(&name, config)
}

fn write_manifest(
    dir: &Path,
    scenario: &Scenario,
    outputs: Vec<String>,
    start: Instant,
    status: i32,
) -> Result<()> {
    let manifest = RunManifest {
        scenario: scenario.name.clone(),
        config_hash: scenario.hash.clone(),
        outputs,
        version: env!("CARGO_PKG_VERSION").to_string(),
        duration_seconds: start.elapsed().as_secs_f64(),
        exit_status: status,
    };
    output::write_json(&dir.join("manifest.json"), &manifest)
}

fn nearest_index(samples: &[TrajectorySample], t: f64) -> usize {
    let mut best = 0;
    let mut gap = f64::INFINITY;
    for (i, s) in samples.iter().enumerate() {
        let d = (s.t - t).abs();
        if d < gap {
            gap = d;
            best = i;
        }
    }
    best
}

/// Everything one simulation contributes to its output directory.
struct SimArtifacts {
    outputs: Vec<String>,
    fit: Option<DecayFit>,
    summary: RunSummary,
    error: Option<Error>,
}

/// Run one simulation and write its trajectory, optional snapshots, and
/// summary into `dir`. Solver aborts are captured in the artifacts, not
/// returned as errors, so partial output always lands on disk.
fn run_sim(
    scenario: &Scenario,
    sim: &SimConfig,
    gamma: f64,
    gains: Option<&FeedbackGains>,
    certificate: Option<&GainCertificate>,
    dir: &Path,
    with_snapshots: bool,
) -> Result<SimArtifacts> {
    // Constants can be infeasible when an uncertified law is forced
    // through; the run then simply goes without the weighted functional.
    let constants = gains
        .and_then(|g| lyapunov_constants(&scenario.data, g, scenario.config.control.c0).ok());
    let solver = Solver::new(&scenario.data, sim, gains)?;
    let mut record = solver.run();
    let norms = monitor(&scenario.data, constants.as_ref(), &record)?;

    let mut outputs = Vec::new();
    output::write_trajectory(&dir.join("trajectory.csv"), &record.samples, &norms)?;
    outputs.push("trajectory.csv".to_string());

    if with_snapshots {
        for (i, t) in scenario.config.snapshot_times().iter().enumerate() {
            let idx = nearest_index(&record.samples, *t);
            let snapshot = from_fixed_domain(&scenario.data, &record.states[idx])?;
            let name = format!("snapshot_{i:03}.csv");
            output::write_snapshot(&dir.join(&name), &snapshot)?;
            outputs.push(name);
        }
    }

    let fit = match gains {
        Some(_) if norms.len() >= 3 => Some(dissipation_check(
            &norms,
            gamma,
            scenario.config.output.fit_window_s,
        )),
        _ => None,
    };

    let first = record
        .samples
        .first()
        .expect("a run always records its initial sample");
    let last = record.samples.last().expect("nonempty");
    let combined_initial = norms.first().map(|n| n.combined).unwrap_or(f64::NAN);
    let combined_final = norms.last().map(|n| n.combined).unwrap_or(f64::NAN);
    let error = record.error.take();
    let summary = RunSummary {
        scenario: scenario.name.clone(),
        config_hash: scenario.hash.clone(),
        mode: sim.mode,
        gamma,
        n_cells: sim.n_cells,
        t_final_seconds: sim.t_final,
        completed: error.is_none(),
        abort: error.as_ref().map(ErrorBody::of),
        shock: ShockSummary {
            initial_m: first.x_s,
            final_m: last.x_s,
            target_m: scenario.profile.x_shock,
            final_offset_m: last.x_s - scenario.profile.x_shock,
        },
        norms: NormSummary {
            combined_initial,
            combined_final,
            decay_factor: combined_initial / combined_final,
        },
        certificate_verdict: certificate.map(|c| c.verdict.clone()),
        decay_fit: fit.map(Into::into),
    };
    output::write_json(&dir.join("summary.json"), &summary)?;
    outputs.push("summary.json".to_string());

    Ok(SimArtifacts {
        outputs,
        fit,
        summary,
        error,
    })
}

fn cmd_simulate(args: &CommonArgs) -> Result<i32> {
    let start = Instant::now();
    let gamma_override = match &args.gamma {
        Some(text) => {
            let list = parse_gamma_list(text)?;
            if list.len() != 1 {
                return Err(Error::Config(
                    "simulate takes a single --gamma value".into(),
                ));
            }
            Some(list[0])
        }
        None => None,
    };
    let scenario = load_scenario(args, gamma_override)?;
    let gamma = scenario.config.control.gamma_per_s;
    std::fs::create_dir_all(&args.out)?;

    let mut outputs = Vec::new();
    let (gains, certificate) = match scenario.sim.mode {
        ControlMode::Open => (None, None),
        ControlMode::Closed => {
            let gains =
                synthesize_diagonal(&scenario.data, gamma, scenario.config.synthesis_options())?;
            let certificate = certify(
                &scenario.data,
                &gains,
                CertificateOptions {
                    c0: scenario.config.control.c0,
                },
            );
            output::write_json(&args.out.join("certificate.json"), &certificate)?;
            outputs.push("certificate.json".to_string());
            if !certificate.passed() && !scenario.config.control.allow_uncertified {
                let err = Error::CertificateFailed {
                    gamma,
                    reasons: certificate.reasons.clone(),
                };
                write_manifest(&args.out, &scenario, outputs, start, err.exit_code())?;
                return Err(err);
            }
            (Some(gains), Some(certificate))
        }
    };

    let mut artifacts = run_sim(
        &scenario,
        &scenario.sim,
        gamma,
        gains.as_ref(),
        certificate.as_ref(),
        &args.out,
        true,
    )?;
    outputs.append(&mut artifacts.outputs);

    println!(
        "scenario {} ({}, gamma = {gamma})",
        scenario.name,
        mode_label(scenario.sim.mode)
    );
    let shock = &artifacts.summary.shock;
    println!(
        "  interface {:.3} m -> {:.3} m (target {:.1} m)",
        shock.initial_m, shock.final_m, shock.target_m
    );
    let norms = &artifacts.summary.norms;
    println!(
        "  combined deviation {:.4e} -> {:.4e} (factor {:.1})",
        norms.combined_initial, norms.combined_final, norms.decay_factor
    );
    if let Some(fit) = &artifacts.fit {
        println!(
            "  fitted decay rate {:.4} 1/s over [{:.1}, {:.1}] s, R^2 = {:.4}",
            fit.rate, fit.window[0], fit.window[1], fit.r_squared
        );
    }
    if let Some(err) = &artifacts.error {
        println!("  aborted early: {err}");
    }
    println!("  wrote {} file(s) under {}", outputs.len() + 1, args.out.display());

    let status = artifacts.error.as_ref().map(|e| e.exit_code()).unwrap_or(0);
    write_manifest(&args.out, &scenario, outputs, start, status)?;
    match artifacts.error {
        Some(err) => Err(err),
        None => Ok(0),
    }
}

fn cmd_certify(args: &CommonArgs) -> Result<i32> {
    let start = Instant::now();
    let scenario = load_scenario(args, None)?;
    let gammas = match &args.gamma {
        Some(text) => parse_gamma_list(text)?,
        None => vec![scenario.config.control.gamma_per_s],
    };
    std::fs::create_dir_all(&args.out)?;

    let options = CertificateOptions {
        c0: scenario.config.control.c0,
    };
    let mut outputs = Vec::new();
    let mut first_failure: Option<Error> = None;
    for (i, &gamma) in gammas.iter().enumerate() {
        let name = format!("certificate_{i:03}.json");
        match synthesize_diagonal(&scenario.data, gamma, scenario.config.synthesis_options()) {
            Ok(gains) => {
                let certificate = certify(&scenario.data, &gains, options);
                output::write_json(&args.out.join(&name), &certificate)?;
                println!(
                    "gamma {gamma}: {} (min_eig {:.6e})",
                    certificate.verdict, certificate.min_eig
                );
                if !certificate.passed() && first_failure.is_none() {
                    first_failure = Some(Error::CertificateFailed {
                        gamma,
                        reasons: certificate.reasons.clone(),
                    });
                }
            }
            Err(err) => {
                let body = serde_json::json!({
                    "gamma": gamma,
                    "verdict": "fail",
                    "reasons": [err.to_string()],
                });
                output::write_json(&args.out.join(&name), &body)?;
                println!("gamma {gamma}: fail ({err})");
                if first_failure.is_none() {
                    first_failure = Some(Error::CertificateFailed {
                        gamma,
                        reasons: vec![err.to_string()],
                    });
                }
            }
        }
        outputs.push(name);
    }

    let status = first_failure.as_ref().map(|e| e.exit_code()).unwrap_or(0);
    write_manifest(&args.out, &scenario, outputs, start, status)?;
    match first_failure {
        Some(err) => Err(err),
        None => Ok(0),
    }
}

fn cmd_sweep(args: &CommonArgs) -> Result<i32> {
    let start = Instant::now();
    let scenario = load_scenario(args, None)?;
    let gammas = match &args.gamma {
        Some(text) => parse_gamma_list(text)?,
        None => {
            return Err(Error::Config(
                "sweep needs --gamma with a comma list or lo:hi:count range".into(),
            ))
        }
    };
    std::fs::create_dir_all(&args.out)?;

    // The sweep always exercises the closed loop: its whole point is to
    // relate the certified rate to the realized decay.
    let mut sim = scenario.sim.clone();
    sim.mode = ControlMode::Closed;
    let options = CertificateOptions {
        c0: scenario.config.control.c0,
    };

    struct GammaOutcome {
        row: SweepRow,
        outputs: Vec<String>,
        reasons: Vec<String>,
        sim_error: Option<Error>,
    }

    let outcomes: Vec<Result<GammaOutcome>> = gammas
        .par_iter()
        .map(|&gamma| -> Result<GammaOutcome> {
            let sub = format!("gamma_{gamma}");
            let dir = args.out.join(&sub);
            std::fs::create_dir_all(&dir)?;
            let mut outputs = Vec::new();
            match synthesize_diagonal(&scenario.data, gamma, scenario.config.synthesis_options())
            {
                Ok(gains) => {
                    let certificate = certify(&scenario.data, &gains, options);
                    output::write_json(&dir.join("certificate.json"), &certificate)?;
                    outputs.push(format!("{sub}/certificate.json"));
                    if certificate.passed() {
                        let artifacts = run_sim(
                            &scenario,
                            &sim,
                            gamma,
                            Some(&gains),
                            Some(&certificate),
                            &dir,
                            false,
                        )?;
                        outputs.extend(
                            artifacts.outputs.iter().map(|f| format!("{sub}/{f}")),
                        );
                        Ok(GammaOutcome {
                            row: SweepRow {
                                gamma,
                                min_eig: Some(certificate.min_eig),
                                verdict: certificate.verdict.clone(),
                                fitted_rate: artifacts.fit.map(|f| f.rate),
                            },
                            outputs,
                            reasons: Vec::new(),
                            sim_error: artifacts.error,
                        })
                    } else {
                        Ok(GammaOutcome {
                            row: SweepRow {
                                gamma,
                                min_eig: Some(certificate.min_eig),
                                verdict: certificate.verdict.clone(),
                                fitted_rate: None,
                            },
                            outputs,
                            reasons: certificate.reasons.clone(),
                            sim_error: None,
                        })
                    }
                }
                Err(err) => {
                    let body = serde_json::json!({
                        "gamma": gamma,
                        "verdict": "fail",
                        "reasons": [err.to_string()],
                    });
                    output::write_json(&dir.join("certificate.json"), &body)?;
                    outputs.push(format!("{sub}/certificate.json"));
                    Ok(GammaOutcome {
                        row: SweepRow {
                            gamma,
                            min_eig: None,
                            verdict: "fail".to_string(),
                            fitted_rate: None,
                        },
                        outputs,
                        reasons: vec![err.to_string()],
                        sim_error: None,
                    })
                }
            }
        })
        .collect();

    let mut rows = Vec::new();
    let mut outputs = Vec::new();
    let mut first_failure: Option<Error> = None;
    let mut first_sim_error: Option<Error> = None;
    for outcome in outcomes {
        let mut outcome = outcome?;
        println!(
            "gamma {}: {}{}",
            outcome.row.gamma,
            outcome.row.verdict,
            outcome
                .row
                .fitted_rate
                .map(|r| format!(" (fitted rate {r:.4})"))
                .unwrap_or_default()
        );
        if outcome.row.verdict != "pass" && first_failure.is_none() {
            first_failure = Some(Error::CertificateFailed {
                gamma: outcome.row.gamma,
                reasons: outcome.reasons.clone(),
            });
        }
        if first_sim_error.is_none() {
            first_sim_error = outcome.sim_error.take();
        }
        outputs.append(&mut outcome.outputs);
        rows.push(outcome.row);
    }

    output::write_sweep(&args.out.join("sweep.csv"), &rows)?;
    outputs.push("sweep.csv".to_string());

    let failure = first_failure.or(first_sim_error);
    let status = failure.as_ref().map(|e| e.exit_code()).unwrap_or(0);
    write_manifest(&args.out, &scenario, outputs, start, status)?;
    match failure {
        Some(err) => Err(err),
        None => Ok(0),
    }
}

/// Profile and pressure diagnostics document, written by `validate`.
#[derive(Debug, Clone, serde::Serialize)]
#[serde(rename_all = "camelCase")]
struct ValidationDoc {
    scenario: String,
    config_hash: String,
    profile: crate::model::EquilibriumShockProfile,
    report: crate::model::ValidationReport,
}

fn cmd_validate(args: &CommonArgs) -> Result<i32> {
    let start = Instant::now();
    if args.gamma.is_some() {
        return Err(Error::Config("--gamma does not apply to validate".into()));
    }
    if args.mode.is_some() {
        return Err(Error::Config("--mode does not apply to validate".into()));
    }
    // Resolve by hand instead of through Scenario: the whole point of
    // validate is to report on profiles the characteristic analysis would
    // refuse.
    let (name, text): (String, String) = match (&args.config, &args.preset) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Error::Config(format!("cannot read {}: {e}", path.display()))
            })?;
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "scenario".to_string());
            (stem, text)
        }
        (None, Some(preset)) => {
            let text = preset_text(preset).ok_or_else(|| {
                Error::Config(format!("unknown preset '{preset}'"))
            })?;
            (preset.clone(), text.to_string())
        }
        _ => {
            return Err(Error::Config(
                "provide a scenario with --config PATH or --preset NAME".into(),
            ))
        }
    };
    let config = parse_config(&text)?;
    let profile = config.build_profile()?;
    let report = validate_equilibrium(&profile)?;
    std::fs::create_dir_all(&args.out)?;

    println!("profile {name}:");
    println!(
        "  regional fluxes {:.6} / {:.6} (residual {:.3e})",
        report.flux_free, report.flux_cong, report.flux_residual
    );
    println!(
        "  interface invariant residual {:.6} (velocity form {:.6})",
        report.invariant_residual, report.velocity_offset_jump
    );
    println!(
        "  characteristic signs: free {} / congested {}",
        if report.free_signs_ok { "ok" } else { "BAD" },
        if report.cong_signs_ok { "ok" } else { "BAD" }
    );
    println!(
        "  verdict: {}",
        if report.is_consistent {
            "consistent steady shock"
        } else {
            "inconsistent"
        }
    );

    let consistent = report.is_consistent;
    let doc = ValidationDoc {
        scenario: name.clone(),
        config_hash: config.canonical_hash(),
        profile,
        report,
    };
    output::write_json(&args.out.join("validation.json"), &doc)?;

    let status = if consistent { 0 } else { 3 };
    let manifest = RunManifest {
        scenario: name,
        config_hash: doc.config_hash.clone(),
        outputs: vec!["validation.json".to_string()],
        version: env!("CARGO_PKG_VERSION").to_string(),
        duration_seconds: start.elapsed().as_secs_f64(),
        exit_status: status,
    };
    output::write_json(&args.out.join("manifest.json"), &manifest)?;
    Ok(status)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_lists_and_ranges_expand() {
        assert_eq!(parse_gamma_list("0.5").unwrap(), vec![0.5]);
        assert_eq!(
            parse_gamma_list("0.1, 0.5,2").unwrap(),
            vec![0.1, 0.5, 2.0]
        );
        let range = parse_gamma_list("1:2:5").unwrap();
        assert_eq!(range, vec![1.0, 1.25, 1.5, 1.75, 2.0]);
        assert_eq!(parse_gamma_list("3:9:1").unwrap(), vec![3.0]);
    }

    #[test]
    fn nonpositive_rates_are_rejected() {
        assert!(parse_gamma_list("0").is_err());
        assert!(parse_gamma_list("-1").is_err());
        assert!(parse_gamma_list("0.5,0").is_err());
    }

    #[test]
    fn malformed_gamma_text_names_the_input() {
        let err = parse_gamma_list("a,b").unwrap_err();
        assert!(err.to_string().contains('a'), "{err}");
        assert!(parse_gamma_list("1:2").is_err());
        assert!(parse_gamma_list("1:2:0").is_err());
    }

    #[test]
    fn mode_strings_parse() {
        assert_eq!(parse_mode("open").unwrap(), ControlMode::Open);
        assert_eq!(parse_mode("closed").unwrap(), ControlMode::Closed);
        assert!(parse_mode("Closed").is_err());
    }
}
