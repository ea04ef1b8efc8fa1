//! Explicit time integration of the shock-attached deviation system.
//!
//! Both regions live on the reference interval with `n + 1` nodes
//! (index `n` = interface). Each step applies, in order:
//!
//! 1. interface speed `ẋ_s` from [`shock_ode_rhs`] on the current traces;
//! 2. first-order upwind update of the interior nodes (plus the free
//!    interface node, whose characteristics all leave the region), with the
//!    local advection matrix split by characteristic sign per node;
//! 3. explicit Euler advance of `x_s`;
//! 4. boundary imposition on the new fields: the interface closure slaves
//!    `u₄`, the measurements feed the inlet rows of the physical gain
//!    matrix (closed loop) or stay frozen (open loop), and the outlet Robin
//!    condition is solved jointly with the extrapolated outgoing `u₄`.
//!
//! The scheme is deliberately low order: the tracked interface keeps the
//! fields smooth, and a monotone upwind update avoids boundary-layer
//! oscillations at the interface node.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gains::FeedbackGains;
use crate::model::CharacteristicData;
use crate::tolerances;
use crate::transform::{to_fixed_domain, PhysicalSnapshot, RegionField, ShockState};

/// Boundary operating mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ControlMode {
    /// Boundary values frozen at the (normalized) initial traces.
    Open,
    /// Measurement feedback through the physical gain rows.
    #[default]
    Closed,
}

/// How to fill the momentum fields when the initial data prescribes only
/// densities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum InitialVelocity {
    /// Each region starts at its steady velocity: `z = ρ(v* + p(ρ))`.
    #[default]
    Steady,
    /// Explicit initial velocities per region.
    Explicit { v_free: f64, v_cong: f64 },
}

/// How the initial state is provided.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitialCondition {
    /// Uniform densities per region with a chosen velocity fill.
    ConstantPerRegion {
        x_shock: f64,
        rho_free: f64,
        rho_cong: f64,
        velocity: InitialVelocity,
    },
    /// Sampled physical profile, interpolated onto the reference grid.
    Snapshot(PhysicalSnapshot),
}

/// Simulation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Cells per region (nodes − 1); at least 16.
    pub n_cells: usize,
    /// Courant number in `(0, 1)`.
    pub cfl: f64,
    /// Horizon in seconds (0 records only the initial sample).
    pub t_final: f64,
    /// Output cadence in seconds.
    pub record_dt: f64,
    pub mode: ControlMode,
    pub initial: InitialCondition,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_cells < 16 {
            return Err(Error::InvalidParameter(format!(
                "cell count must be at least 16, got {}",
                self.n_cells
            )));
        }
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "Courant number must lie in (0, 1), got {}",
                self.cfl
            )));
        }
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "horizon must be nonnegative, got {}",
                self.t_final
            )));
        }
        if !(self.record_dt > 0.0) || !self.record_dt.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "record cadence must be positive, got {}",
                self.record_dt
            )));
        }
        Ok(())
    }
}

/// One recorded instant: interface data and the boundary values in effect.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub x_s: f64,
    pub xdot_s: f64,
    pub rho_in: f64,
    pub z_in: f64,
    pub z_out: f64,
}

/// Run output: samples at the record cadence with the full state at each,
/// plus the terminating error when the run aborted early.
#[derive(Debug)]
pub struct TrajectoryRecord {
    pub samples: Vec<TrajectorySample>,
    pub states: Vec<ShockState>,
    pub record_dt: f64,
    pub error: Option<Error>,
}

impl TrajectoryRecord {
    pub fn completed(&self) -> bool {
        self.error.is_none()
    }
}

/// Boundary-compatibility diagnostics of an initial state against a control
/// law: `zeroth` compares imposed and actual boundary values, `first` the
/// boundary time derivatives implied by the transport form and by the law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompatibilityReport {
    pub zeroth: [f64; 3],
    pub first: [f64; 3],
}

impl CompatibilityReport {
    pub fn max_zeroth(&self) -> f64 {
        self.zeroth.iter().fold(0.0f64, |a, r| a.max(r.abs()))
    }

    pub fn max_first(&self) -> f64 {
        self.first.iter().fold(0.0f64, |a, r| a.max(r.abs()))
    }
}

/// Per-node characteristic speeds on the reference grid, two per region.
#[derive(Debug, Clone, PartialEq)]
pub struct Speeds {
    pub free: Vec<[f64; 2]>,
    pub cong: Vec<[f64; 2]>,
}

impl Speeds {
    pub fn max_abs(&self) -> f64 {
        self.free
            .iter()
            .chain(self.cong.iter())
            .flatten()
            .fold(0.0f64, |a, s| a.max(s.abs()))
    }
}

#[derive(Clone, Copy)]
enum Region {
    Free,
    Cong,
}

/// Sign-split local advection matrix and its characteristic speeds.
#[derive(Clone, Copy)]
struct Split {
    plus: Matrix2<f64>,
    minus: Matrix2<f64>,
    speeds: [f64; 2],
}

fn node_split(
    data: &CharacteristicData,
    state: &ShockState,
    region: Region,
    k: usize,
    xdot: f64,
) -> Result<Split> {
    let profile = &data.profile;
    let n = state.n_cells() as f64;
    let theta = k as f64 / n * xdot;
    let (dev, rho_star, z_star, factor) = match region {
        Region::Free => (
            state.free[k],
            profile.rho_free,
            profile.z_free,
            profile.x_shock / state.x_s,
        ),
        Region::Cong => (
            state.cong[k],
            profile.rho_cong,
            profile.z_cong,
            -profile.x_shock / (profile.length - state.x_s),
        ),
    };
    let rho = rho_star + dev[0];
    let z = z_star + dev[1];
    if !(rho > 0.0) || !rho.is_finite() || !z.is_finite() {
        return Err(Error::StateBlowup {
            t: state.t,
            detail: format!("invalid node state (rho = {rho}, z = {z}) at node {k}"),
        });
    }
    let pe = profile.pressure.eval_unchecked(rho);
    let voff = z / rho;
    let v = voff - pe.p;
    let rdp = rho * pe.dp;
    if !(rdp > 0.0) || !rdp.is_finite() {
        return Err(Error::StateBlowup {
            t: state.t,
            detail: format!("characteristic degeneracy rho*p' = {rdp} at node {k}"),
        });
    }
    let speeds = [factor * (v - rdp - theta), factor * (v - theta)];
    let t_mat = Matrix2::new(1.0, 1.0, voff, voff + rdp);
    let t_inv = Matrix2::new(voff + rdp, -1.0, -voff, 1.0) / rdp;
    let pos = Matrix2::from_diagonal(&Vector2::new(speeds[0].max(0.0), speeds[1].max(0.0)));
    let neg = Matrix2::from_diagonal(&Vector2::new(speeds[0].min(0.0), speeds[1].min(0.0)));
    Ok(Split {
        plus: t_mat * pos * t_inv,
        minus: t_mat * neg * t_inv,
        speeds,
    })
}

/// Characteristic speeds of the transport form at every node, for the
/// current interface speed `xdot`.
pub fn quasilinear_speeds(
    data: &CharacteristicData,
    state: &ShockState,
    xdot: f64,
) -> Result<Speeds> {
    let n = state.n_cells();
    let mut free = Vec::with_capacity(n + 1);
    let mut cong = Vec::with_capacity(n + 1);
    for k in 0..=n {
        free.push(node_split(data, state, Region::Free, k, xdot)?.speeds);
        cong.push(node_split(data, state, Region::Cong, k, xdot)?.speeds);
    }
    Ok(Speeds { free, cong })
}

/// Interface speed from the jump relations, evaluated on deviation traces
/// `(ρ̃, z̃)` of each region at the interface.
pub fn shock_ode_rhs(
    data: &CharacteristicData,
    free_dev: [f64; 2],
    cong_dev: [f64; 2],
) -> Result<f64> {
    let profile = &data.profile;
    let rho_f = profile.rho_free + free_dev[0];
    let z_f = profile.z_free + free_dev[1];
    let rho_c = profile.rho_cong + cong_dev[0];
    let z_c = profile.z_cong + cong_dev[1];
    let denominator = rho_c - rho_f;
    let guard = tolerances::SHOCK_COLLAPSE_FRACTION * data.density_jump;
    if !(denominator.abs() >= guard) {
        return Err(Error::DegenerateShock {
            denominator,
            guard,
        });
    }
    let numerator = z_c - z_f - rho_c * profile.pressure.p(rho_c) + rho_f * profile.pressure.p(rho_f);
    Ok(numerator / denominator)
}

/// Interface momentum continuity `z_c/ρ_c = z_f/ρ_f` residual (velocity
/// plus pressure on both sides of the tracked jump).
pub fn interface_rh_residual(data: &CharacteristicData, state: &ShockState) -> Result<f64> {
    let profile = &data.profile;
    let n = state.n_cells();
    let rho_f = profile.rho_free + state.free[n][0];
    let z_f = profile.z_free + state.free[n][1];
    let rho_c = profile.rho_cong + state.cong[n][0];
    let z_c = profile.z_cong + state.cong[n][1];
    if !(rho_f > 0.0) || !(rho_c > 0.0) {
        return Err(Error::StateBlowup {
            t: state.t,
            detail: format!("nonpositive interface density ({rho_f}, {rho_c})"),
        });
    }
    Ok(z_c / rho_c - z_f / rho_f)
}

/// Slaved interface value of `u₄` given the free-side trace and the
/// congested-side `u₃`.
///
/// Momentum-offset continuity is linear in `u₄`, so the root is exact; the
/// residual is re-checked and a degenerate denominator (free trace offset
/// matching the shifted outgoing speed) reports as a closure failure.
pub fn rh_closure_u4(data: &CharacteristicData, free_dev: [f64; 2], u3: f64) -> Result<f64> {
    let profile = &data.profile;
    let lt3 = data.lambda_tilde[2];
    let lt4 = data.lambda_tilde[3];
    let rho_f = profile.rho_free + free_dev[0];
    let z_f = profile.z_free + free_dev[1];
    let target = z_f / rho_f;
    let denom = 1.0 - target / lt4;
    if !denom.is_finite() || denom.abs() < 1e-12 {
        return Err(Error::ClosureDiverged {
            iters: 0,
            history: vec![denom],
        });
    }
    let u4 = (target * (u3 / lt3 + profile.rho_cong) - u3 - profile.z_cong) / denom;
    let rho_c = u3 / lt3 + u4 / lt4 + profile.rho_cong;
    let residual = (u3 + u4 + profile.z_cong) / rho_c - target;
    if !residual.is_finite()
        || residual.abs() > tolerances::CLOSURE_RESIDUAL * (1.0 + target.abs())
    {
        return Err(Error::ClosureDiverged {
            iters: 1,
            history: vec![residual],
        });
    }
    Ok(u4)
}

/// Transport-form time derivative `w_t = −A(w)·w_x` of both regions, with
/// central interior differences and one-sided ends.
pub fn time_derivative(
    data: &CharacteristicData,
    state: &ShockState,
) -> Result<(RegionField, RegionField)> {
    let n = state.n_cells();
    let dx = data.profile.x_shock / n as f64;
    let xdot = shock_ode_rhs(data, state.free[n], state.cong[n])?;
    let mut out = (Vec::with_capacity(n + 1), Vec::with_capacity(n + 1));
    for (region, fields, sink) in [
        (Region::Free, &state.free, &mut out.0),
        (Region::Cong, &state.cong, &mut out.1),
    ] {
        for k in 0..=n {
            let split = node_split(data, state, region, k, xdot)?;
            let a = split.plus + split.minus;
            let wx = if k == 0 {
                [
                    (fields[1][0] - fields[0][0]) / dx,
                    (fields[1][1] - fields[0][1]) / dx,
                ]
            } else if k == n {
                [
                    (fields[n][0] - fields[n - 1][0]) / dx,
                    (fields[n][1] - fields[n - 1][1]) / dx,
                ]
            } else {
                [
                    (fields[k + 1][0] - fields[k - 1][0]) / (2.0 * dx),
                    (fields[k + 1][1] - fields[k - 1][1]) / (2.0 * dx),
                ]
            };
            let wt = -(a * Vector2::new(wx[0], wx[1]));
            sink.push([wt[0], wt[1]]);
        }
    }
    Ok(out)
}

/// Boundary values frozen for open-loop operation.
#[derive(Debug, Clone, Copy, PartialEq)]
struct FrozenBoundary {
    free_inlet: [f64; 2],
    u3_outlet: f64,
}

/// Deterministic explicit integrator for one configuration.
#[derive(Debug, Clone)]
pub struct Solver {
    data: CharacteristicData,
    config: SimConfig,
    gains: Option<FeedbackGains>,
    initial: ShockState,
    frozen: FrozenBoundary,
    density_floor: f64,
}

impl Solver {
    /// Validates the configuration, builds and normalizes the initial state
    /// (the interface closure is applied once so the tracked jump starts on
    /// the constraint manifold), and freezes the open-loop boundary data.
    pub fn new(
        data: &CharacteristicData,
        config: &SimConfig,
        gains: Option<&FeedbackGains>,
    ) -> Result<Self> {
        config.validate()?;
        if config.mode == ControlMode::Closed && gains.is_none() {
            return Err(Error::InvalidParameter(
                "closed-loop operation needs synthesized feedback gains".into(),
            ));
        }
        let density_floor = tolerances::SHOCK_COLLAPSE_FRACTION * data.density_jump;
        let mut initial = build_initial(data, config)?;
        initial.t = 0.0;
        // Normalize: slave u₄ at the interface to the closure.
        let (u3, _) = data.cong_to_diag(initial.cong[config.n_cells][0], initial.cong[config.n_cells][1]);
        let u4 = rh_closure_u4(data, initial.free[config.n_cells], u3)?;
        let (r, z) = data.diag_to_cong(u3, u4);
        initial.cong[config.n_cells] = [r, z];
        check_physical(data, &initial, density_floor)?;
        let (u3_out, _) = data.cong_to_diag(initial.cong[0][0], initial.cong[0][1]);
        let frozen = FrozenBoundary {
            free_inlet: initial.free[0],
            u3_outlet: u3_out,
        };
        Ok(Self {
            data: data.clone(),
            config: config.clone(),
            gains: gains.cloned(),
            initial,
            frozen,
            density_floor,
        })
    }

    /// The normalized initial state.
    pub fn initial_state(&self) -> ShockState {
        self.initial.clone()
    }

    /// Stable time step: Courant fraction of the reference cell transit at
    /// the fastest node speed, additionally capped so one step moves the
    /// interface by at most a tenth of its distance to either road end.
    /// A fully quiescent state falls back to `fallback`.
    pub fn cfl_dt(&self, state: &ShockState, speeds: &Speeds, xdot: f64, fallback: f64) -> f64 {
        let dx = self.data.profile.x_shock / state.n_cells() as f64;
        let vmax = speeds.max_abs();
        let mut dt = if vmax > 0.0 {
            self.config.cfl * dx / vmax
        } else {
            fallback
        };
        let margin = tolerances::SHOCK_COLLAPSE_FRACTION
            * state.x_s.min(self.data.profile.length - state.x_s);
        if xdot.abs() * dt > margin {
            dt = margin / xdot.abs();
        }
        dt
    }

    /// One explicit step of size `dt`.
    pub fn step(&self, state: &ShockState, dt: f64) -> Result<ShockState> {
        let d = &self.data;
        let profile = &d.profile;
        let n = state.n_cells();
        let dx = profile.x_shock / n as f64;
        let t_new = state.t + dt;

        let xdot = shock_ode_rhs(d, state.free[n], state.cong[n])?;
        self.check_boundary_pattern(state, xdot)?;

        let courant = dt / dx;
        let mut free = state.free.clone();
        let mut cong = state.cong.clone();
        for k in 1..=n {
            let split = node_split(d, state, Region::Free, k, xdot)?;
            let w = Vector2::new(state.free[k][0], state.free[k][1]);
            let wm = Vector2::new(state.free[k - 1][0], state.free[k - 1][1]);
            let mut upd = split.plus * (w - wm);
            if k < n {
                let wp = Vector2::new(state.free[k + 1][0], state.free[k + 1][1]);
                upd += split.minus * (wp - w);
            }
            let new = w - courant * upd;
            free[k] = [new[0], new[1]];
        }
        for k in 1..n {
            let split = node_split(d, state, Region::Cong, k, xdot)?;
            let w = Vector2::new(state.cong[k][0], state.cong[k][1]);
            let wm = Vector2::new(state.cong[k - 1][0], state.cong[k - 1][1]);
            let wp = Vector2::new(state.cong[k + 1][0], state.cong[k + 1][1]);
            let new = w - courant * (split.plus * (w - wm) + split.minus * (wp - w));
            cong[k] = [new[0], new[1]];
        }

        let x_s = state.x_s + dt * xdot;
        // One reference cell of physical room is the smallest resolvable
        // shock offset; beyond that the moving grid is meaningless.
        if !(x_s > dx && x_s < profile.length - dx) {
            return Err(Error::ShockLeftDomain {
                t: t_new,
                x_s,
                length: profile.length,
            });
        }

        let mut out = ShockState {
            t: t_new,
            x_s,
            free,
            cong,
        };
        self.impose_boundaries(&mut out)?;
        check_physical(d, &out, self.density_floor)?;
        Ok(out)
    }

    /// Interface closure, measurement evaluation, and boundary imposition on
    /// freshly updated fields.
    fn impose_boundaries(&self, state: &mut ShockState) -> Result<()> {
        let d = &self.data;
        let n = state.n_cells();

        // Interface: outgoing u₃ extrapolated, u₄ slaved to the closure.
        let (u3_m1, _) = d.cong_to_diag(state.cong[n - 1][0], state.cong[n - 1][1]);
        let (u3_m2, _) = d.cong_to_diag(state.cong[n - 2][0], state.cong[n - 2][1]);
        let u3 = 2.0 * u3_m1 - u3_m2;
        let u4 = rh_closure_u4(d, state.free[n], u3)?;
        let (r, z) = d.diag_to_cong(u3, u4);
        state.cong[n] = [r, z];

        let m = [
            state.free[n][1],
            state.cong[n][1],
            state.free[n][0],
            state.x_s - d.profile.x_shock,
        ];

        // Outgoing u₄ at the outlet, from the new interior.
        let (_, u4_1) = d.cong_to_diag(state.cong[1][0], state.cong[1][1]);
        let (_, u4_2) = d.cong_to_diag(state.cong[2][0], state.cong[2][1]);
        let u4_out = 2.0 * u4_1 - u4_2;

        match self.config.mode {
            ControlMode::Closed => {
                let gains = self.gains.as_ref().expect("validated at construction");
                let gp = &gains.physical;
                state.free[0] = [dot4(&gp[0], &m), dot4(&gp[1], &m)];
                let rhs = dot4(&gp[2], &m);
                let lt3 = d.lambda_tilde[2];
                let denom = lt3 - gains.outlet_slope_value;
                let rho = (rhs - lt3 * u4_out / d.kappa) / denom;
                let z = lt3 * (u4_out / d.kappa + rho);
                state.cong[0] = [rho, z];
            }
            ControlMode::Open => {
                state.free[0] = self.frozen.free_inlet;
                let (r0, z0) = d.diag_to_cong(self.frozen.u3_outlet, u4_out);
                state.cong[0] = [r0, z0];
            }
        }
        Ok(())
    }

    /// The characteristic sign pattern that makes the boundary-condition
    /// counts correct: free-region speeds positive at both ends, congested
    /// speeds of mixed sign (slow in, fast out at the outlet; the interface
    /// must stay subsonic between the congested speeds).
    fn check_boundary_pattern(&self, state: &ShockState, xdot: f64) -> Result<()> {
        let d = &self.data;
        let n = state.n_cells();
        for node in [0, n] {
            let s = node_split(d, state, Region::Free, node, xdot)?.speeds;
            for speed in s {
                if speed <= 0.0 {
                    return Err(Error::CharacteristicReversal {
                        t: state.t,
                        region: "free",
                        node,
                        speed,
                    });
                }
            }
            let s = node_split(d, state, Region::Cong, node, xdot)?.speeds;
            if s[0] <= 0.0 {
                return Err(Error::CharacteristicReversal {
                    t: state.t,
                    region: "congested",
                    node,
                    speed: s[0],
                });
            }
            if s[1] >= 0.0 {
                return Err(Error::CharacteristicReversal {
                    t: state.t,
                    region: "congested",
                    node,
                    speed: s[1],
                });
            }
        }
        Ok(())
    }

    /// Physical boundary values the feedback law prescribes for the current
    /// measurements: inlet `(ρ, z)` and outlet `z`.
    pub fn apply_boundary_control(&self, state: &ShockState) -> Result<(f64, f64, f64)> {
        let gains = self.gains.as_ref().ok_or_else(|| {
            Error::InvalidParameter("boundary control evaluation needs gains".into())
        })?;
        let d = &self.data;
        let profile = &d.profile;
        let n = state.n_cells();
        let m = [
            state.free[n][1],
            state.cong[n][1],
            state.free[n][0],
            state.x_s - profile.x_shock,
        ];
        let gp = &gains.physical;
        let rho_in = profile.rho_free + dot4(&gp[0], &m);
        let z_in = profile.z_free + dot4(&gp[1], &m);
        let z_out =
            profile.z_cong + dot4(&gp[2], &m) + gains.outlet_slope_value * state.cong[0][0];
        Ok((rho_in, z_in, z_out))
    }

    /// Zeroth- and first-order boundary compatibility of a state with a
    /// control law. Mild violations are tolerated by the upwind scheme; the
    /// report quantifies them.
    pub fn compatibility_check(
        data: &CharacteristicData,
        state: &ShockState,
        gains: &FeedbackGains,
    ) -> Result<CompatibilityReport> {
        let profile = &data.profile;
        let n = state.n_cells();
        let m = [
            state.free[n][1],
            state.cong[n][1],
            state.free[n][0],
            state.x_s - profile.x_shock,
        ];
        let gp = &gains.physical;
        let zeroth = [
            state.free[0][0] - dot4(&gp[0], &m),
            state.free[0][1] - dot4(&gp[1], &m),
            (state.cong[0][1] - gains.outlet_slope_value * state.cong[0][0]) - dot4(&gp[2], &m),
        ];
        let (free_t, cong_t) = time_derivative(data, state)?;
        let xdot = shock_ode_rhs(data, state.free[n], state.cong[n])?;
        let m_dot = [free_t[n][1], cong_t[n][1], free_t[n][0], xdot];
        let first = [
            free_t[0][0] - dot4(&gp[0], &m_dot),
            free_t[0][1] - dot4(&gp[1], &m_dot),
            (cong_t[0][1] - gains.outlet_slope_value * cong_t[0][0]) - dot4(&gp[2], &m_dot),
        ];
        Ok(CompatibilityReport { zeroth, first })
    }

    /// Integrate to the horizon, recording at the output cadence. Step
    /// errors terminate the run early; the partial record keeps the error.
    pub fn run(&self) -> TrajectoryRecord {
        let mut record = TrajectoryRecord {
            samples: Vec::new(),
            states: Vec::new(),
            record_dt: self.config.record_dt,
            error: None,
        };
        let mut state = self.initial_state();
        match self.sample(&state) {
            Ok(s) => {
                record.samples.push(s);
                record.states.push(state.clone());
            }
            Err(e) => {
                record.error = Some(e);
                return record;
            }
        }
        let t_final = self.config.t_final;
        let mut k = 0usize;
        'records: while state.t < t_final * (1.0 - 1e-12) {
            k += 1;
            let target = (k as f64 * self.config.record_dt).min(t_final);
            loop {
                let step_result = (|| {
                    let xdot = shock_ode_rhs(&self.data, state.free[state.n_cells()], state.cong[state.n_cells()])?;
                    let speeds = quasilinear_speeds(&self.data, &state, xdot)?;
                    let remaining = target - state.t;
                    let dt_stable = self.cfl_dt(&state, &speeds, xdot, remaining);
                    let landing = dt_stable >= remaining * (1.0 - 1e-12);
                    let dt = if landing { remaining } else { dt_stable };
                    let mut next = self.step(&state, dt)?;
                    if landing {
                        next.t = target;
                    }
                    Ok::<(ShockState, bool), Error>((next, landing))
                })();
                match step_result {
                    Ok((next, landing)) => {
                        state = next;
                        if landing {
                            break;
                        }
                    }
                    Err(e) => {
                        record.error = Some(e);
                        break 'records;
                    }
                }
            }
            match self.sample(&state) {
                Ok(s) => {
                    record.samples.push(s);
                    record.states.push(state.clone());
                }
                Err(e) => {
                    record.error = Some(e);
                    break;
                }
            }
        }
        record
    }

    fn sample(&self, state: &ShockState) -> Result<TrajectorySample> {
        let profile = &self.data.profile;
        let n = state.n_cells();
        let xdot = shock_ode_rhs(&self.data, state.free[n], state.cong[n])?;
        Ok(TrajectorySample {
            t: state.t,
            x_s: state.x_s,
            xdot_s: xdot,
            rho_in: profile.rho_free + state.free[0][0],
            z_in: profile.z_free + state.free[0][1],
            z_out: profile.z_cong + state.cong[0][1],
        })
    }

    pub fn data(&self) -> &CharacteristicData {
        &self.data
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn gains(&self) -> Option<&FeedbackGains> {
        self.gains.as_ref()
    }
}

fn dot4(row: &[f64; 4], v: &[f64; 4]) -> f64 {
    row[0] * v[0] + row[1] * v[1] + row[2] * v[2] + row[3] * v[3]
}

fn build_initial(data: &CharacteristicData, config: &SimConfig) -> Result<ShockState> {
    let profile = &data.profile;
    match &config.initial {
        InitialCondition::ConstantPerRegion {
            x_shock,
            rho_free,
            rho_cong,
            velocity,
        } => {
            if !(*x_shock > 0.0 && *x_shock < profile.length) {
                return Err(Error::InvalidParameter(format!(
                    "initial interface {x_shock} outside the road (0, {})",
                    profile.length
                )));
            }
            if !(*rho_free > 0.0) || !(*rho_cong > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "initial densities must be positive, got ({rho_free}, {rho_cong})"
                )));
            }
            let (v_f, v_c) = match velocity {
                InitialVelocity::Steady => profile.velocities()?,
                InitialVelocity::Explicit { v_free, v_cong } => (*v_free, *v_cong),
            };
            let z_f = rho_free * (v_f + profile.pressure.p(*rho_free));
            let z_c = rho_cong * (v_c + profile.pressure.p(*rho_cong));
            let fdev = [rho_free - profile.rho_free, z_f - profile.z_free];
            let cdev = [rho_cong - profile.rho_cong, z_c - profile.z_cong];
            Ok(ShockState {
                t: 0.0,
                x_s: *x_shock,
                free: vec![fdev; config.n_cells + 1],
                cong: vec![cdev; config.n_cells + 1],
            })
        }
        InitialCondition::Snapshot(snapshot) => to_fixed_domain(data, snapshot, config.n_cells),
    }
}

fn check_physical(data: &CharacteristicData, state: &ShockState, floor: f64) -> Result<()> {
    let profile = &data.profile;
    for (steady, fields, name) in [
        (profile.rho_free, &state.free, "free"),
        (profile.rho_cong, &state.cong, "congested"),
    ] {
        for (k, dev) in fields.iter().enumerate() {
            let rho = steady + dev[0];
            if !rho.is_finite() || !dev[1].is_finite() {
                return Err(Error::StateBlowup {
                    t: state.t,
                    detail: format!("non-finite {name} state at node {k}"),
                });
            }
            if rho < floor {
                return Err(Error::StateBlowup {
                    t: state.t,
                    detail: format!(
                        "{name} density {rho} under the floor {floor} at node {k}"
                    ),
                });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gains::{synthesize_diagonal, SynthesisOptions};
    use crate::model::{characteristic_data, fix_equilibrium, PressureModel};
    use crate::tolerances::close;
    use crate::transform::to_riemann;

    fn benchmark() -> CharacteristicData {
        let pressure = PressureModel::affine(24.5, 180.0).unwrap();
        let profile = fix_equilibrium(pressure, 500.0, 120.0, 60.0, 150.0).unwrap();
        characteristic_data(&profile).unwrap()
    }

    fn benchmark_initial(mode: ControlMode, n_cells: usize, t_final: f64) -> SimConfig {
        SimConfig {
            n_cells,
            cfl: 0.9,
            t_final,
            record_dt: 0.25,
            mode,
            initial: InitialCondition::ConstantPerRegion {
                x_shock: 200.0,
                rho_free: 65.0,
                rho_cong: 130.0,
                velocity: InitialVelocity::Steady,
            },
        }
    }

    fn closed_solver(n_cells: usize, t_final: f64) -> Solver {
        let data = benchmark();
        let gains = synthesize_diagonal(&data, 0.5, SynthesisOptions::default()).unwrap();
        Solver::new(
            &data,
            &benchmark_initial(ControlMode::Closed, n_cells, t_final),
            Some(&gains),
        )
        .unwrap()
    }

    #[test]
    fn shock_speed_matches_hand_value_on_raw_initial_traces() {
        let data = benchmark();
        let p = &data.profile.pressure;
        let z0f = 65.0 * (245.0 / 12.0 + p.p(65.0));
        let z0c = 130.0 * (49.0 / 6.0 + p.p(130.0));
        let rhs = shock_ode_rhs(
            &data,
            [5.0, z0f - 245.0],
            [-20.0, z0c - 612.5],
        )
        .unwrap();
        assert!(close(rhs, -49.0 / 12.0, 1e-12), "rhs = {rhs}");
    }

    #[test]
    fn shock_speed_linearization_matches_interface_sensitivities() {
        // Central difference through the closure chain against Θᵢ.
        let data = benchmark();
        let h = 1e-6;
        for i in 0..3 {
            let eval = |s: f64| {
                let mut u = [0.0; 3];
                u[i] = s;
                let (rf, zf) = data.diag_to_free(u[0], u[1]);
                let u4 = rh_closure_u4(&data, [rf, zf], u[2]).unwrap();
                let (rc, zc) = data.diag_to_cong(u[2], u4);
                shock_ode_rhs(&data, [rf, zf], [rc, zc]).unwrap()
            };
            let derivative = (eval(h) - eval(-h)) / (2.0 * h);
            assert!(
                close(derivative, data.theta[i], 1e-6),
                "mode {i}: {derivative} vs {}",
                data.theta[i]
            );
        }
    }

    #[test]
    fn quiescent_time_step_follows_the_fastest_wave() {
        let solver = closed_solver(200, 1.0);
        let steady = ShockState::quiescent(solver.data(), 200);
        let speeds = quasilinear_speeds(solver.data(), &steady, 0.0).unwrap();
        // Fastest reference speed is the free fast wave; congested speeds
        // carry the compression factor x_s*/(L − x_s*).
        assert!(close(speeds.max_abs(), 245.0 / 12.0, 1e-12));
        let dt = solver.cfl_dt(&steady, &speeds, 0.0, 1.0);
        assert!(close(dt, 0.9 * 0.6 / (245.0 / 12.0), 1e-12), "dt = {dt}");
    }

    #[test]
    fn doubling_resolution_halves_the_time_step() {
        let coarse = closed_solver(100, 1.0);
        let fine = closed_solver(200, 1.0);
        let sc = ShockState::quiescent(coarse.data(), 100);
        let sf = ShockState::quiescent(fine.data(), 200);
        let dc = coarse.cfl_dt(&sc, &quasilinear_speeds(coarse.data(), &sc, 0.0).unwrap(), 0.0, 1.0);
        let df = fine.cfl_dt(&sf, &quasilinear_speeds(fine.data(), &sf, 0.0).unwrap(), 0.0, 1.0);
        assert!(close(dc, 2.0 * df, 1e-12));
    }

    #[test]
    fn interface_motion_cap_limits_the_step() {
        let solver = closed_solver(200, 1.0);
        let state = ShockState::quiescent(solver.data(), 200);
        let speeds = quasilinear_speeds(solver.data(), &state, 0.0).unwrap();
        // An (artificial) fast-moving interface must not cross more than a
        // tenth of its distance to the nearer road end in one step.
        let dt = solver.cfl_dt(&state, &speeds, -1000.0, 1.0);
        assert!(close(dt, 0.1 * 120.0 / 1000.0, 1e-12), "dt = {dt}");
    }

    #[test]
    fn steady_state_is_a_discrete_fixed_point() {
        let solver = closed_solver(64, 1.0);
        let steady = ShockState::quiescent(solver.data(), 64);
        let speeds = quasilinear_speeds(solver.data(), &steady, 0.0).unwrap();
        let dt = solver.cfl_dt(&steady, &speeds, 0.0, 0.25);
        let mut state = steady.clone();
        for _ in 0..1000 {
            state = solver.step(&state, dt).unwrap();
        }
        let drift = state
            .free
            .iter()
            .chain(state.cong.iter())
            .flatten()
            .fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(drift < tolerances::STEADY_FIXED_POINT, "drift = {drift:e}");
        assert!(
            (state.x_s - solver.data().profile.x_shock).abs() < tolerances::STEADY_FIXED_POINT
        );
    }

    #[test]
    fn initial_normalization_puts_the_interface_on_the_jump_manifold() {
        let solver = closed_solver(200, 1.0);
        let state = solver.initial_state();
        let residual = interface_rh_residual(solver.data(), &state).unwrap();
        assert!(residual.abs() < 1e-12, "residual = {residual:e}");
    }

    #[test]
    fn boundary_imposition_realizes_the_characteristic_law() {
        // The feedback law is exact in the linearized variables, while the
        // interface closure is nonlinear, so probe with a small asymmetric
        // perturbation that still exercises every measurement channel.
        let solver = closed_solver(200, 1.0);
        let mut state = ShockState::quiescent(solver.data(), 200);
        let eps = 1e-6;
        for k in 0..=200usize {
            let s = (k as f64 / 200.0 - 0.3).sin();
            state.free[k][0] += 0.4 * eps * s;
            state.free[k][1] += 1.3 * eps * s;
            state.cong[k][1] -= 2.0 * eps * s;
        }
        state.x_s += 3.0 * eps;
        let next = solver.step(&state, 0.0).unwrap();
        let u = to_riemann(solver.data(), &next);
        let n = 200;
        let gains = solver.gains().unwrap();
        let delta = next.x_s - solver.data().profile.x_shock;
        let u_out = [u.free[n][0], u.free[n][1], u.cong[n][0]];
        let u_in = [u.free[0][0], u.free[0][1], u.cong[0][0]];
        for i in 0..3 {
            let expect = gains.k_diag[i] * u_out[i] + gains.b[i] * delta;
            assert!(
                close(u_in[i], expect, 1e-9),
                "channel {i}: {} vs {expect}",
                u_in[i]
            );
        }
    }

    #[test]
    fn open_loop_keeps_inlet_frozen_and_drifts_upstream() {
        let data = benchmark();
        let config = benchmark_initial(ControlMode::Open, 200, 2.0);
        let solver = Solver::new(&data, &config, None).unwrap();
        let record = solver.run();
        assert!(record.completed(), "error: {:?}", record.error);
        let first = record.samples.first().unwrap();
        let last = record.samples.last().unwrap();
        assert!(close(first.rho_in, last.rho_in, 1e-13));
        assert!(close(first.z_in, last.z_in, 1e-13));
        assert!(last.x_s < first.x_s, "shock did not move upstream");
    }

    #[test]
    fn zero_horizon_records_only_the_initial_sample() {
        let data = benchmark();
        let config = benchmark_initial(ControlMode::Open, 32, 0.0);
        let solver = Solver::new(&data, &config, None).unwrap();
        let record = solver.run();
        assert!(record.completed());
        assert_eq!(record.samples.len(), 1);
        assert_eq!(record.samples[0].t, 0.0);
    }

    #[test]
    fn inlet_characteristic_reversal_aborts() {
        let solver = closed_solver(200, 1.0);
        let mut state = solver.initial_state();
        // Dense enough at the inlet that the slow wave turns around.
        state.free[0] = [110.0, 0.0];
        let err = solver.step(&state, 1e-3).unwrap_err();
        assert!(
            matches!(
                err,
                Error::CharacteristicReversal {
                    region: "free",
                    node: 0,
                    ..
                }
            ),
            "got {err:?}"
        );
    }

    #[test]
    fn vanishing_interface_jump_is_rejected() {
        let data = benchmark();
        let err = shock_ode_rhs(&data, [0.0, 0.0], [-85.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::DegenerateShock { .. }));
    }

    #[test]
    fn compatibility_report_flags_constant_initial_data() {
        let data = benchmark();
        let gains = synthesize_diagonal(&data, 0.5, SynthesisOptions::default()).unwrap();
        let config = benchmark_initial(ControlMode::Closed, 200, 1.0);
        let solver = Solver::new(&data, &config, Some(&gains)).unwrap();

        let steady = ShockState::quiescent(&data, 200);
        let report = Solver::compatibility_check(&data, &steady, &gains).unwrap();
        assert!(report.max_zeroth() < 1e-12 && report.max_first() < 1e-12);

        let report = Solver::compatibility_check(&data, &solver.initial_state(), &gains).unwrap();
        assert!(report.max_zeroth() > 1.0, "zeroth = {:?}", report.zeroth);
    }

    #[test]
    fn closed_loop_step_count_matches_the_record_grid() {
        let solver = closed_solver(32, 1.0);
        let record = solver.run();
        assert!(record.completed(), "error: {:?}", record.error);
        assert_eq!(record.samples.len(), 5);
        for (k, s) in record.samples.iter().enumerate() {
            assert!(close(s.t, 0.25 * k as f64, 1e-12));
        }
        let times: Vec<f64> = record.samples.iter().map(|s| s.t).collect();
        assert!(times.windows(2).all(|w| w[1] > w[0]));
    }
}
