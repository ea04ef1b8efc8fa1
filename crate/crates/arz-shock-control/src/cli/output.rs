//! Bit-stable file outputs: CSV tables, JSON summaries, and the run
//! manifest.
//!
//! Every float is rendered with 17 significant digits (`{:.16e}`), field
//! order is fixed by the structs, and nothing records wall-clock time
//! except the manifest — so re-running a command with the same
//! configuration and version reproduces each artifact byte for byte.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lyapunov::{DecayFit, LyapunovSample};
use crate::solver::{ControlMode, TrajectorySample};
use crate::transform::PhysicalSnapshot;

/// Canonical float rendering: 17 significant digits, scientific.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt_float(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

pub const TRAJECTORY_HEADER: &str =
    "t,x_s,xdot_s,h2_free,h2_cong,shock_dev,V,V1,V2,V3,V4,V5,V6,rho_in,z_in,z_out";

/// Trajectory table: one row per recorded instant. The functional columns
/// stay empty until the time-difference stencil has filled (and always, in
/// open-loop runs, where no functional is defined).
pub fn write_trajectory(
    path: &Path,
    samples: &[TrajectorySample],
    norms: &[LyapunovSample],
) -> Result<()> {
    debug_assert_eq!(samples.len(), norms.len());
    let mut out = String::new();
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for (s, n) in samples.iter().zip(norms) {
        let parts = n.parts.unwrap_or([f64::NAN; 6]);
        let part = |i: usize| {
            if n.parts.is_some() {
                fmt_float(parts[i])
            } else {
                String::new()
            }
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            fmt_float(s.t),
            fmt_float(s.x_s),
            fmt_float(s.xdot_s),
            fmt_float(n.h2_free),
            fmt_float(n.h2_cong),
            fmt_float(n.shock_dev),
            opt_float(n.v),
            part(0),
            part(1),
            part(2),
            part(3),
            part(4),
            part(5),
            fmt_float(s.rho_in),
            fmt_float(s.z_in),
            fmt_float(s.z_out),
        ));
    }
    write_atomic(path, out.as_bytes())
}

pub const SNAPSHOT_HEADER: &str = "region,x_m,rho,v,z";

/// Full physical profile at one instant, both regions on their own rows.
pub fn write_snapshot(path: &Path, snapshot: &PhysicalSnapshot) -> Result<()> {
    let mut out = String::new();
    out.push_str(SNAPSHOT_HEADER);
    out.push('\n');
    for (label, samples) in [("free", &snapshot.free), ("congested", &snapshot.cong)] {
        for s in samples {
            out.push_str(&format!(
                "{label},{},{},{},{}\n",
                fmt_float(s.x),
                fmt_float(s.rho),
                fmt_float(s.v),
                fmt_float(s.z),
            ));
        }
    }
    write_atomic(path, out.as_bytes())
}

pub const SWEEP_HEADER: &str = "gamma,min_eig,verdict,fitted_rate";

/// One sweep result. `min_eig` is absent when synthesis itself failed;
/// `fitted_rate` is present only for rates whose closed loop was simulated.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub gamma: f64,
    pub min_eig: Option<f64>,
    pub verdict: String,
    pub fitted_rate: Option<f64>,
}

pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut out = String::new();
    out.push_str(SWEEP_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_float(row.gamma),
            opt_float(row.min_eig),
            row.verdict,
            opt_float(row.fitted_rate),
        ));
    }
    write_atomic(path, out.as_bytes())
}

/// Decay diagnostics as they appear in the summary.
#[derive(Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DecayFitSummary {
    pub rate: f64,
    pub r_squared: f64,
    pub margin: f64,
    pub tol_v: f64,
    pub window: [f64; 2],
    pub samples_used: usize,
}

impl From<DecayFit> for DecayFitSummary {
    fn from(f: DecayFit) -> Self {
        Self {
            rate: f.rate,
            r_squared: f.r_squared,
            margin: f.margin,
            tol_v: f.tol_v,
            window: f.window,
            samples_used: f.samples_used,
        }
    }
}

/// Machine-readable failure record; also the shape of the JSON printed to
/// stderr on a nonzero exit.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorBody {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
}

impl ErrorBody {
    pub fn of(err: &Error) -> Self {
        Self {
            code: err.exit_code(),
            kind: err.kind(),
            message: err.to_string(),
        }
    }
}

/// Print the failure record to stderr.
pub fn emit_error(err: &Error) {
    let body = ErrorBody::of(err);
    let json = serde_json::to_string(&body)
        .unwrap_or_else(|_| format!("{{\"code\":{},\"message\":\"unserializable\"}}", body.code));
    eprintln!("{json}");
}

/// Interface trajectory endpoints of a run.
#[derive(Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ShockSummary {
    pub initial_m: f64,
    pub final_m: f64,
    pub target_m: f64,
    pub final_offset_m: f64,
}

/// Deviation-norm endpoints of a run.
#[derive(Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct NormSummary {
    pub combined_initial: f64,
    pub combined_final: f64,
    /// `combined_initial / combined_final`; large means strong decay.
    pub decay_factor: f64,
}

/// Headline result of a simulation, written as `summary.json`.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RunSummary {
    pub scenario: String,
    pub config_hash: String,
    pub mode: ControlMode,
    pub gamma: f64,
    pub n_cells: usize,
    pub t_final_seconds: f64,
    pub completed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abort: Option<ErrorBody>,
    pub shock: ShockSummary,
    pub norms: NormSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate_verdict: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay_fit: Option<DecayFitSummary>,
}

/// Run audit record, written last as `manifest.json`. Carries wall-clock
/// duration, so it is the one artifact excluded from byte-stability.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RunManifest {
    pub scenario: String,
    pub config_hash: String,
    pub outputs: Vec<String>,
    pub version: String,
    pub duration_seconds: f64,
    pub exit_status: i32,
}

/// Serialize any summary-like value as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Config(format!("serialization failed: {e}")))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
