//! Central numeric tolerances with their rationale.
//!
//! Every comparison threshold used by validators and solvers lives here so
//! that the accuracy contract of the toolkit is visible in one place.

/// Relative tolerance for closed-form algebraic identities evaluated in f64
/// (eigenvalue identities, matrix reconstructions). Closed forms lose only a
/// handful of ulps; 1e-9 leaves ~6 digits of headroom.
pub const REL_ALGEBRAIC: f64 = 1e-9;

/// Absolute tolerance for residuals whose exact value is zero (flux matching,
/// invariant continuity at a steady state).
pub const ABS_RESIDUAL: f64 = 1e-9;

/// Round-trip tolerance for exact linear-map inverse pairs
/// (Riemann coordinates, 2x2 transformation matrices).
pub const ROUND_TRIP: f64 = 1e-12;

/// Convergence target for the interface closure root-finder. The closure is
/// a smooth scalar equation solved by Newton iteration from a linearized
/// seed, so full double precision is reachable.
pub const CLOSURE_RESIDUAL: f64 = 1e-12;

/// Bound on the invariant-continuity residual at the tracked shock after
/// every accepted step (enforced by the closure, checked by monitors).
pub const RH_INTERFACE: f64 = 1e-10;

/// Per-step drift allowed when the solver is started exactly on the steady
/// state (exact-fixed-point property).
pub const STEADY_FIXED_POINT: f64 = 1e-10;

/// Fraction of the density jump `rho_c* - rho_f*` below which the shock is
/// considered collapsed and the shock-speed denominator degenerate.
pub const SHOCK_COLLAPSE_FRACTION: f64 = 0.1;

/// Relative width used when reproducing a matrix product with an independent
/// oracle implementation.
pub const REL_MATRIX_ORACLE: f64 = 1e-10;

/// Returns true when `a` and `b` agree to relative tolerance `rel`,
/// falling back to an absolute comparison near zero.
pub fn close(a: f64, b: f64, rel: f64) -> bool {
    let scale = a.abs().max(b.abs());
    if scale <= 1.0 {
        (a - b).abs() <= rel
    } else {
        (a - b).abs() <= rel * scale
    }
}

/// Relative distance between `a` and `b` normalized by their magnitude
/// (absolute difference when both are below 1 in magnitude).
pub fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale <= 1.0 {
        (a - b).abs()
    } else {
        (a - b).abs() / scale
    }
}
