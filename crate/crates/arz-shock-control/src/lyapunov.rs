//! Discrete norms and weighted functionals along trajectories.
//!
//! Two families of diagnostics: the raw squared `H²` deviation norm per
//! region (plus the interface offset), and the exponentially weighted
//! functionals `V₁…V₆` whose decay the gain certificate guarantees. The
//! weighted functionals need the certificate constants `(μ, pᵢ, p′ᵢ, C₀)`
//! and two predecessor states for the time-difference terms, so trajectory
//! decoration withholds them during a two-sample warm-up.

use serde::Serialize;

use crate::error::Result;
use crate::gains::LyapunovConstants;
use crate::model::CharacteristicData;
use crate::solver::{shock_ode_rhs, time_derivative, TrajectoryRecord};
use crate::transform::{to_riemann, ShockState};

/// Fraction of the horizon treated as transient before dissipation and
/// decay-rate checks apply.
pub const WARMUP_FRACTION: f64 = 0.05;

/// Norms and functionals at one recorded instant. The weighted parts are
/// absent while the time-difference stencil is still filling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LyapunovSample {
    pub t: f64,
    /// Squared deviation norm of the upstream region.
    pub h2_free: f64,
    /// Squared deviation norm of the downstream region.
    pub h2_cong: f64,
    /// `|x_s − x_s*|`.
    pub shock_dev: f64,
    /// `(√(H²_free + H²_cong) + shock_dev)²`.
    pub combined: f64,
    /// `ΣVᵢ` once warm-up has passed.
    pub v: Option<f64>,
    /// The six weighted functionals (V₁…V₆) once warm-up has passed.
    pub parts: Option<[f64; 6]>,
}

/// Window-fitted decay diagnostics of a sample series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    /// Decay rate of the combined squared norm (minus the slope of a
    /// log-linear least-squares fit over the window).
    pub rate: f64,
    /// Coefficient of determination of that fit.
    pub r_squared: f64,
    /// Worst value of `−dV/dt − (γ/2)V` over the post-warm-up samples;
    /// nonnegative means the dissipation inequality held everywhere.
    pub margin: f64,
    /// Slack `0.05·max V` the margin is judged against.
    pub tol_v: f64,
    /// Time window of the rate fit actually used.
    pub window: [f64; 2],
    /// Samples inside the fit window.
    pub samples_used: usize,
}

/// Squared discrete `H²` norms of both regions and the interface offset.
///
/// Second-order central differences on the reference grid (one-sided at
/// the endpoints), trapezoid-summed and mapped to physical measure by the
/// region stretch factors `x_s/x_s*` and `(L − x_s)/x_s*`. Needs at least
/// five nodes for the difference stencils.
pub fn h2_norm(data: &CharacteristicData, state: &ShockState) -> (f64, f64, f64) {
    let profile = &data.profile;
    let n = state.n_cells();
    let dx = profile.x_shock / n as f64;
    let region_sum = |fields: &Vec<[f64; 2]>| -> f64 {
        let mut sum = 0.0;
        for component in 0..2 {
            let f = |k: usize| fields[k][component];
            for k in 0..=n {
                let d1 = if k == 0 {
                    (f(1) - f(0)) / dx
                } else if k == n {
                    (f(n) - f(n - 1)) / dx
                } else {
                    (f(k + 1) - f(k - 1)) / (2.0 * dx)
                };
                let d2 = if k == 0 {
                    (f(2) - 2.0 * f(1) + f(0)) / (dx * dx)
                } else if k == n {
                    (f(n) - 2.0 * f(n - 1) + f(n - 2)) / (dx * dx)
                } else {
                    (f(k + 1) - 2.0 * f(k) + f(k - 1)) / (dx * dx)
                };
                let weight = if k == 0 || k == n { 0.5 } else { 1.0 };
                sum += weight * (f(k) * f(k) + d1 * d1 + d2 * d2) * dx;
            }
        }
        sum
    };
    let h2_free = state.x_s / profile.x_shock * region_sum(&state.free);
    let h2_cong = (profile.length - state.x_s) / profile.x_shock * region_sum(&state.cong);
    (h2_free, h2_cong, (state.x_s - profile.x_shock).abs())
}

/// `(√(H²_free + H²_cong) + |x_s − x_s*|)²`.
pub fn combined_norm(h2_free: f64, h2_cong: f64, shock_dev: f64) -> f64 {
    let root = (h2_free + h2_cong).sqrt() + shock_dev;
    root * root
}

/// Locality radius below which the norm-equivalence bounds of the
/// certificate apply: combined norm at most `(0.1·Δρ)²`.
pub fn smallness_threshold(data: &CharacteristicData) -> f64 {
    let r = 0.1 * data.density_jump;
    r * r
}

/// Characteristic components `u₁…u₄` at every node.
fn u_fields(data: &CharacteristicData, state: &ShockState) -> Vec<[f64; 4]> {
    let r = to_riemann(data, state);
    (0..=state.n_cells())
        .map(|k| [r.free[k][0], r.free[k][1], r.cong[k][0], r.cong[k][1]])
        .collect()
}

/// Characteristic time derivatives from the transport form.
fn u_time_derivative(data: &CharacteristicData, state: &ShockState) -> Result<Vec<[f64; 4]>> {
    let (free_t, cong_t) = time_derivative(data, state)?;
    Ok((0..=state.n_cells())
        .map(|k| {
            let (u1, u2) = data.free_to_diag(free_t[k][0], free_t[k][1]);
            let (u3, u4) = data.cong_to_diag(cong_t[k][0], cong_t[k][1]);
            [u1, u2, u3, u4]
        })
        .collect())
}

/// The six weighted functionals for the newest state of `history`
/// (chronological, at least three states), or `None` while warming up.
///
/// Time derivatives of `u` come from the transport form; second time
/// derivatives difference those across the two most recent states, and the
/// interface acceleration uses a three-point backward difference, so the
/// error model is `O(Δx + Δt)`.
pub fn eval_v(
    data: &CharacteristicData,
    constants: &LyapunovConstants,
    history: &[ShockState],
) -> Result<Option<(f64, [f64; 6])>> {
    if history.len() < 3 {
        return Ok(None);
    }
    let current = &history[history.len() - 1];
    let prev = &history[history.len() - 2];
    let prev2 = &history[history.len() - 3];
    let dt1 = current.t - prev.t;
    let dt2 = prev.t - prev2.t;
    if !(dt1 > 0.0 && dt2 > 0.0) {
        return Ok(None);
    }

    let n = current.n_cells();
    let dx = data.profile.x_shock / n as f64;
    let u = u_fields(data, current);
    let ut = u_time_derivative(data, current)?;
    let ut_prev = u_time_derivative(data, prev)?;
    let utt: Vec<[f64; 4]> = (0..=n)
        .map(|k| std::array::from_fn(|i| (ut[k][i] - ut_prev[k][i]) / dt1))
        .collect();

    let delta = current.x_s - data.profile.x_shock;
    let xdot = shock_ode_rhs(data, current.free[n], current.cong[n])?;
    // Three-point backward difference of x_s, tolerant of a shorter final
    // record interval.
    let xddot = 2.0
        * (dt2 * current.x_s - (dt1 + dt2) * prev.x_s + dt1 * prev2.x_s)
        / (dt1 * dt2 * (dt1 + dt2));

    let mu = constants.mu;
    let weight = |i: usize, x: f64| (-mu * x / (data.weights[i] * data.lambda[i])).exp();
    let mut parts = [0.0; 6];
    for k in 0..=n {
        let x = k as f64 * dx;
        let trap = if k == 0 || k == n { 0.5 } else { 1.0 } * dx;
        for i in 0..4 {
            let w = constants.p[i] * weight(i, x) * trap;
            parts[0] += w * u[k][i] * u[k][i];
            parts[1] += w * ut[k][i] * ut[k][i];
            parts[2] += w * utt[k][i] * utt[k][i];
        }
        for i in 0..3 {
            let w = constants.p_prime[i] / data.lambda[i] * weight(i, x) * trap;
            parts[3] += w * delta * u[k][i];
            parts[4] += w * xdot * ut[k][i];
            parts[5] += w * xddot * utt[k][i];
        }
    }
    parts[3] += constants.c0 * delta * delta;
    parts[4] += constants.c0 * xdot * xdot;
    parts[5] += constants.c0 * xddot * xddot;
    Ok(Some((parts.iter().sum(), parts)))
}

/// Decorates every recorded state with norms and (when constants are
/// available) the weighted functionals.
pub fn monitor(
    data: &CharacteristicData,
    constants: Option<&LyapunovConstants>,
    record: &TrajectoryRecord,
) -> Result<Vec<LyapunovSample>> {
    let mut out = Vec::with_capacity(record.states.len());
    for (idx, state) in record.states.iter().enumerate() {
        let (h2_free, h2_cong, shock_dev) = h2_norm(data, state);
        let weighted = match constants {
            Some(c) => {
                let start = idx.saturating_sub(2);
                eval_v(data, c, &record.states[start..=idx])?
            }
            None => None,
        };
        out.push(LyapunovSample {
            t: state.t,
            h2_free,
            h2_cong,
            shock_dev,
            combined: combined_norm(h2_free, h2_cong, shock_dev),
            v: weighted.map(|(v, _)| v),
            parts: weighted.map(|(_, p)| p),
        });
    }
    Ok(out)
}

/// Fits the decay rate of the combined norm over `fit_window` (defaulting
/// to the post-warm-up span) and evaluates the worst dissipation margin of
/// the weighted functional against the target rate `γ`.
pub fn dissipation_check(
    samples: &[LyapunovSample],
    gamma: f64,
    fit_window: Option<[f64; 2]>,
) -> DecayFit {
    let span = match (samples.first(), samples.last()) {
        (Some(a), Some(b)) => [a.t, b.t],
        _ => [0.0, 0.0],
    };
    let warmup = span[0] + WARMUP_FRACTION * (span[1] - span[0]);
    let window = fit_window.unwrap_or([warmup, span[1]]);

    // Log-linear least squares of ln(combined) over the window.
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.t >= window[0] && s.t <= window[1] && s.combined > 0.0)
        .map(|s| (s.t, s.combined.ln()))
        .collect();
    let (rate, r_squared) = fit_line(&pts);

    // Dissipation margin of V over the post-warm-up region, central
    // time differences.
    let tracked: Vec<(f64, f64)> = samples
        .iter()
        .filter_map(|s| s.v.map(|v| (s.t, v)))
        .collect();
    let mut margin = f64::INFINITY;
    let mut vmax = 0.0f64;
    for w in tracked.windows(3) {
        let (t0, v0) = w[0];
        let (t1, v1) = w[1];
        let (t2, v2) = w[2];
        if t1 < warmup {
            continue;
        }
        vmax = vmax.max(v1);
        let dvdt = (v2 - v0) / (t2 - t0);
        margin = margin.min(-dvdt - 0.5 * gamma * v1);
    }
    DecayFit {
        rate,
        r_squared,
        margin,
        tol_v: 0.05 * vmax,
        window,
        samples_used: pts.len(),
    }
}

/// Least-squares slope of `y(t)`, returned as `(−slope, R²)`.
fn fit_line(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return (0.0, 0.0);
    }
    let mean_t = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let mut stt = 0.0;
    let mut sty = 0.0;
    let mut syy = 0.0;
    for &(t, y) in pts {
        stt += (t - mean_t) * (t - mean_t);
        sty += (t - mean_t) * (y - mean_y);
        syy += (y - mean_y) * (y - mean_y);
    }
    if stt == 0.0 {
        return (0.0, 0.0);
    }
    let slope = sty / stt;
    let r2 = if syy > 0.0 { sty * sty / (stt * syy) } else { 1.0 };
    (-slope, r2)
}
