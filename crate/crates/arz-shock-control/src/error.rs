//! Error types shared across the toolkit, with process exit-code mapping
//! for the command-line front end.

use thiserror::Error;

/// Unified error type for model construction, gain synthesis, and simulation.
#[derive(Debug, Error)]
pub enum Error {
    /// A physical quantity was evaluated outside its admissible range.
    #[error("{quantity} = {value} outside admissible range [{min}, {max}]")]
    OutOfRange {
        quantity: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    /// Invalid parameter while constructing a model object.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Characteristic speeds violate the sign pattern required by the
    /// requested regime; carries both computed speeds.
    #[error("{regime} regime sign violation: speeds ({lambda_slow}, {lambda_fast})")]
    RegimeSigns {
        regime: &'static str,
        lambda_slow: f64,
        lambda_fast: f64,
    },

    /// Left and right densities coincide; the jump relations degenerate.
    #[error("degenerate jump: |rho_left - rho_right| = {gap:e} below tolerance")]
    DegenerateJump { gap: f64 },

    /// Equilibrium solve produced a state failing an eigenvalue sign
    /// condition.
    #[error("infeasible equilibrium: {which} = {value} has the wrong sign")]
    InfeasibleEquilibrium { which: &'static str, value: f64 },

    /// A denominator in the characteristic algebra vanished.
    #[error("singular configuration: {0}")]
    SingularConfiguration(String),

    /// A shock-coupling coefficient L_i is zero; no admissible gain interval
    /// exists for that channel.
    #[error("degenerate coupling coefficient L_{index} = 0")]
    DegenerateCoefficient { index: usize },

    /// Interface closure root-finder failed to converge.
    #[error("interface closure did not converge in {iters} iterations; residual history {history:?}")]
    ClosureDiverged { iters: usize, history: Vec<f64> },

    /// The density jump across the shock collapsed below the guard.
    #[error("shock strength collapsed: interface density jump {denominator:e} below guard {guard:e}")]
    DegenerateShock { denominator: f64, guard: f64 },

    /// Simulation state became unphysical (density positivity lost or
    /// non-finite values).
    #[error("state blow-up at t = {t}: {detail}")]
    StateBlowup { t: f64, detail: String },

    /// The characteristic sign pattern reversed at a boundary node; the
    /// boundary-condition count no longer matches the flow regime.
    #[error("characteristic reversal at t = {t}, {region} boundary node {node} (speed {speed})")]
    CharacteristicReversal {
        t: f64,
        region: &'static str,
        node: usize,
        speed: f64,
    },

    /// The tracked shock left the road interior.
    #[error("shock position {x_s} left the domain (0, {length}) at t = {t}")]
    ShockLeftDomain { t: f64, x_s: f64, length: f64 },

    /// No feasible Lyapunov constant tuple was found.
    #[error("Lyapunov constants infeasible: {binding}")]
    ConstantsInfeasible { binding: String },

    /// The measurement-map system for recovering a boundary gain matrix is
    /// singular; a diagonal target cannot be realized.
    #[error("gain realization failed: measurement map is singular")]
    RealizationSingular,

    /// The diagonal-gain feasibility scalar went nonpositive, so the
    /// midpoint prescription admits no reflection gain for this mode. This
    /// happens when a decay-rate/transit-time product is small (roughly
    /// below one half); longer roads or larger target rates avoid it.
    #[error("diagonal synthesis contradiction: feasibility scalar K_{index} = {value} <= 0")]
    SynthesisContradiction { index: usize, value: f64 },

    /// A requested certificate did not pass and the caller required it.
    #[error("gain certificate failed for gamma = {gamma}: {reasons:?}")]
    CertificateFailed { gamma: f64, reasons: Vec<String> },

    /// Configuration file problems (missing key, bad value, unknown section).
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Exit codes used by the command-line interface.
///
/// 0 success, 2 configuration error, 3 certificate failure,
/// 4 solver blow-up or runtime divergence.
impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidParameter(_) | Error::OutOfRange { .. } => 2,
            Error::InfeasibleEquilibrium { .. }
            | Error::RegimeSigns { .. }
            | Error::SingularConfiguration(_)
            | Error::DegenerateCoefficient { .. }
            | Error::DegenerateJump { .. } => 2,
            Error::CertificateFailed { .. }
            | Error::ConstantsInfeasible { .. }
            | Error::SynthesisContradiction { .. }
            | Error::RealizationSingular => 3,
            Error::ClosureDiverged { .. }
            | Error::DegenerateShock { .. }
            | Error::StateBlowup { .. }
            | Error::CharacteristicReversal { .. }
            | Error::ShockLeftDomain { .. } => 4,
            Error::Io(_) => 4,
        }
    }

    /// Stable machine-readable tag for the error kind, used in error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::OutOfRange { .. } => "out_of_range",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::RegimeSigns { .. } => "regime_signs",
            Error::DegenerateJump { .. } => "degenerate_jump",
            Error::InfeasibleEquilibrium { .. } => "infeasible_equilibrium",
            Error::SingularConfiguration(_) => "singular_configuration",
            Error::DegenerateCoefficient { .. } => "degenerate_coefficient",
            Error::ClosureDiverged { .. } => "closure_diverged",
            Error::DegenerateShock { .. } => "degenerate_shock",
            Error::StateBlowup { .. } => "state_blowup",
            Error::CharacteristicReversal { .. } => "characteristic_reversal",
            Error::ShockLeftDomain { .. } => "shock_left_domain",
            Error::ConstantsInfeasible { .. } => "constants_infeasible",
            Error::RealizationSingular => "realization_singular",
            Error::SynthesisContradiction { .. } => "synthesis_contradiction",
            Error::CertificateFailed { .. } => "certificate_failed",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
