//! Scenario configuration: the TOML schema, shipped presets, and the
//! translation into solver-ready objects.
//!
//! Every physical key carries its unit in the name (`length_m`,
//! `rho_free_veh_per_km`, `gamma_per_s`, …) so a configuration file reads
//! unambiguously without consulting the docs. Unknown keys are rejected.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gains::{OutletSlope, SynthesisOptions, DEFAULT_C0};
use crate::model::{
    characteristic_data, fix_equilibrium, CharacteristicData, EquilibriumShockProfile,
    PressureModel,
};
use crate::solver::{ControlMode, InitialCondition, InitialVelocity, SimConfig};

/// Built-in scenarios, selectable with `--preset NAME`.
pub const PRESETS: [(&str, &str); 2] = [
    ("section5", include_str!("../../presets/section5.toml")),
    (
        "section5-literal",
        include_str!("../../presets/section5-literal.toml"),
    ),
];

/// Text of a built-in scenario, if `name` matches one.
pub fn preset_text(name: &str) -> Option<&'static str> {
    PRESETS
        .iter()
        .find(|(preset, _)| *preset == name)
        .map(|(_, text)| *text)
}

const SECTION_NAMES: [&str; 7] = [
    "road",
    "pressure",
    "equilibrium",
    "initial",
    "control",
    "numerics",
    "output",
];

/// Typed form of a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub road: RoadSection,
    pub pressure: PressureSection,
    pub equilibrium: EquilibriumSection,
    pub initial: InitialSection,
    pub control: ControlSection,
    pub numerics: NumericsSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoadSection {
    pub length_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PressureFamilyTag {
    Affine,
    PowerLaw,
}

impl PressureFamilyTag {
    fn label(self) -> &'static str {
        match self {
            Self::Affine => "affine",
            Self::PowerLaw => "power_law",
        }
    }
}

/// Pressure law selection. `affine` takes `a_m_per_s` and
/// `rho_max_veh_per_km`; `power_law` takes `c_coeff`, `theta_exponent`,
/// and `rho_hi_veh_per_km` (the admissible density ceiling).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PressureSection {
    pub family: PressureFamilyTag,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_m_per_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_max_veh_per_km: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_coeff: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_exponent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_hi_veh_per_km: Option<f64>,
}

/// Target steady profile. When the momentum overrides are present the
/// profile is taken verbatim (useful for auditing published numbers);
/// otherwise the momenta are the unique pair making both regional fluxes
/// equal and the interface jump admissible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriumSection {
    pub x_shock_m: f64,
    pub rho_free_veh_per_km: f64,
    pub rho_cong_veh_per_km: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_free_veh_per_km_m_per_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_cong_veh_per_km_m_per_s: Option<f64>,
}

/// Initial data: uniform densities per region, with velocities either at
/// their steady values (default) or given explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub x_shock_m: f64,
    pub rho_free_veh_per_km: f64,
    pub rho_cong_veh_per_km: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_free_m_per_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_cong_m_per_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSection {
    pub mode: ControlMode,
    /// Design contraction rate for gain synthesis.
    pub gamma_per_s: f64,
    /// Weight of the interface terms in the monitored functional.
    #[serde(default = "default_c0")]
    pub c0: f64,
    #[serde(default)]
    pub outlet_slope: OutletSlope,
    /// Use the published index convention in the gain interval endpoints.
    #[serde(default)]
    pub strict_published_indices: bool,
    /// Run the closed loop even when the certificate fails.
    #[serde(default)]
    pub allow_uncertified: bool,
}

fn default_c0() -> f64 {
    DEFAULT_C0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsSection {
    pub n_cells: usize,
    pub cfl: f64,
    pub t_final_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub record_dt_s: f64,
    /// Instants to dump full profiles at; defaults to `[0, t_final]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshot_times_s: Option<Vec<f64>>,
    /// Override for the decay-fit window; defaults to the post-warm-up span.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_window_s: Option<[f64; 2]>,
}

/// Parse a scenario file.
///
/// An empty or truncated file reports every missing section at once; other
/// failures carry the offending key path from the TOML deserializer.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let table: toml::Table = text
        .parse()
        .map_err(|e| Error::Config(format!("malformed TOML: {e}")))?;
    let missing: Vec<&str> = SECTION_NAMES
        .iter()
        .copied()
        .filter(|name| !table.contains_key(*name))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Config(format!(
            "missing required sections: [{}]",
            missing.join("], [")
        )));
    }
    toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
}

impl RunConfig {
    /// Hash of the canonical re-serialization: stable under comments,
    /// whitespace, and key order, but not under any value change.
    pub fn canonical_hash(&self) -> String {
        let canonical =
            toml::to_string(self).expect("configuration always re-serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        hex::encode(digest)
    }

    pub fn synthesis_options(&self) -> SynthesisOptions {
        SynthesisOptions {
            outlet_slope: self.control.outlet_slope,
            strict_published_indices: self.control.strict_published_indices,
        }
    }

    pub fn snapshot_times(&self) -> Vec<f64> {
        self.output
            .snapshot_times_s
            .clone()
            .unwrap_or_else(|| vec![0.0, self.numerics.t_final_s])
    }

    fn build_pressure(&self) -> Result<PressureModel> {
        let p = &self.pressure;
        let take = |value: Option<f64>, key: &str| {
            value.ok_or_else(|| {
                Error::Config(format!(
                    "[pressure].{key} is required for family {}",
                    p.family.label()
                ))
            })
        };
        let forbid = |value: Option<f64>, key: &str| {
            if value.is_some() {
                return Err(Error::Config(format!(
                    "[pressure].{key} does not apply to family {}",
                    p.family.label()
                )));
            }
            Ok(())
        };
        match p.family {
            PressureFamilyTag::Affine => {
                forbid(p.c_coeff, "c_coeff")?;
                forbid(p.theta_exponent, "theta_exponent")?;
                forbid(p.rho_hi_veh_per_km, "rho_hi_veh_per_km")?;
                PressureModel::affine(
                    take(p.a_m_per_s, "a_m_per_s")?,
                    take(p.rho_max_veh_per_km, "rho_max_veh_per_km")?,
                )
            }
            PressureFamilyTag::PowerLaw => {
                forbid(p.a_m_per_s, "a_m_per_s")?;
                forbid(p.rho_max_veh_per_km, "rho_max_veh_per_km")?;
                PressureModel::power_law(
                    take(p.c_coeff, "c_coeff")?,
                    take(p.theta_exponent, "theta_exponent")?,
                    take(p.rho_hi_veh_per_km, "rho_hi_veh_per_km")?,
                )
            }
        }
    }

    /// Resolve the steady profile alone; `validate` uses this so it can
    /// report on profiles the characteristic analysis would refuse.
    pub fn build_profile(&self) -> Result<EquilibriumShockProfile> {
        let pressure = self.build_pressure()?;
        let e = &self.equilibrium;
        match (e.z_free_veh_per_km_m_per_s, e.z_cong_veh_per_km_m_per_s) {
            (Some(z_free), Some(z_cong)) => Ok(EquilibriumShockProfile {
                pressure,
                length: self.road.length_m,
                x_shock: e.x_shock_m,
                rho_free: e.rho_free_veh_per_km,
                rho_cong: e.rho_cong_veh_per_km,
                z_free,
                z_cong,
            }),
            (None, None) => fix_equilibrium(
                pressure,
                self.road.length_m,
                e.x_shock_m,
                e.rho_free_veh_per_km,
                e.rho_cong_veh_per_km,
            ),
            _ => Err(Error::Config(
                "[equilibrium] momentum overrides must be given for both \
                 regions or neither"
                    .into(),
            )),
        }
    }

    fn build_sim(&self) -> Result<SimConfig> {
        let i = &self.initial;
        let velocity = match (i.v_free_m_per_s, i.v_cong_m_per_s) {
            (Some(v_free), Some(v_cong)) => InitialVelocity::Explicit { v_free, v_cong },
            (None, None) => InitialVelocity::Steady,
            _ => {
                return Err(Error::Config(
                    "[initial] velocities must be given for both regions or \
                     neither"
                        .into(),
                ))
            }
        };
        Ok(SimConfig {
            n_cells: self.numerics.n_cells,
            cfl: self.numerics.cfl,
            t_final: self.numerics.t_final_s,
            record_dt: self.output.record_dt_s,
            mode: self.control.mode,
            initial: InitialCondition::ConstantPerRegion {
                x_shock: i.x_shock_m,
                rho_free: i.rho_free_veh_per_km,
                rho_cong: i.rho_cong_veh_per_km,
                velocity,
            },
        })
    }
}

/// A fully resolved scenario: effective configuration, derived model
/// objects, and the canonical hash.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub config: RunConfig,
    pub hash: String,
    pub profile: EquilibriumShockProfile,
    pub data: CharacteristicData,
    pub sim: SimConfig,
}

impl Scenario {
    pub fn from_config(name: &str, config: RunConfig) -> Result<Self> {
        let profile = config.build_profile()?;
        let data = characteristic_data(&profile)?;
        let sim = config.build_sim()?;
        let hash = config.canonical_hash();
        Ok(Self {
            name: name.to_string(),
            config,
            hash,
            profile,
            data,
            sim,
        })
    }
}
