//! Shock-fitted change of coordinates and characteristic variables.
//!
//! The moving interface at `x_s(t)` splits `[0, L]` into a free region
//! `[0, x_s]` and a congested region `[x_s, L]`. Both are pulled back onto
//! the common reference interval `[0, x_s*]`:
//!
//! * free:      `x_phys = x · x_s / x_s*` — reference node 0 is the road
//!   inlet, reference node N is the interface;
//! * congested: `x_phys = L + x · (x_s − L) / x_s*` — reference node 0 is
//!   the road outlet `x = L`, reference node N is the interface.
//!
//! On the reference interval the state is stored as *deviations*
//! `(ρ̃, z̃) = (ρ − ρ*, z − z*)` from the steady profile, so the steady
//! shock is the origin. Characteristic variables `u` are the images of the
//! deviations under the regional diagonalizers `S₁`, `S₂`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::CharacteristicData;

/// Solver state on the reference interval: deviation fields for both
/// regions plus the interface position.
///
/// Per-node `[ρ̃, z̃]` samples of one region on the reference grid.
pub type RegionField = Vec<[f64; 2]>;

/// `free[k]` and `cong[k]` hold `[ρ̃, z̃]` at reference node `k` of a
/// uniform `n + 1`-node grid; index `n` is the interface in both regions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShockState {
    pub t: f64,
    /// Interface position in physical coordinates, inside `(0, L)`.
    pub x_s: f64,
    pub free: RegionField,
    pub cong: RegionField,
}

/// Characteristic-variable view of a [`ShockState`]: `free[k] = [u₁, u₂]`,
/// `cong[k] = [u₃, u₄]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiemannState {
    pub t: f64,
    pub x_s: f64,
    pub free: Vec<[f64; 2]>,
    pub cong: Vec<[f64; 2]>,
}

/// One sampled point of the physical solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalSample {
    /// Physical position in meters.
    pub x: f64,
    pub rho: f64,
    /// Velocity `v = z/ρ − p(ρ)`.
    pub v: f64,
    pub z: f64,
}

/// Physical-space view of the solution, ascending in `x` within each
/// region: free covers `[0, x_s]`, congested `[x_s, L]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalSnapshot {
    pub t: f64,
    pub x_s: f64,
    pub free: Vec<PhysicalSample>,
    pub cong: Vec<PhysicalSample>,
}

impl ShockState {
    /// Number of cells per region (`nodes − 1`).
    pub fn n_cells(&self) -> usize {
        self.free.len() - 1
    }

    /// Uniform steady state: both regions identically at the profile.
    pub fn quiescent(data: &CharacteristicData, n: usize) -> Self {
        Self {
            t: 0.0,
            x_s: data.profile.x_shock,
            free: vec![[0.0; 2]; n + 1],
            cong: vec![[0.0; 2]; n + 1],
        }
    }

    /// Physical position of free-region reference node `k`.
    pub fn free_node_x(&self, k: usize) -> f64 {
        let n = self.n_cells() as f64;
        k as f64 * self.x_s / n
    }

    /// Physical position of congested-region reference node `k`
    /// (descending from the outlet at `k = 0` to the interface at `k = n`).
    pub fn cong_node_x(&self, length: f64, k: usize) -> f64 {
        let n = self.n_cells() as f64;
        length + k as f64 * (self.x_s - length) / n
    }
}

/// Map deviations to characteristic variables node by node.
pub fn to_riemann(data: &CharacteristicData, state: &ShockState) -> RiemannState {
    let free = state
        .free
        .iter()
        .map(|&[r, z]| {
            let (u1, u2) = data.free_to_diag(r, z);
            [u1, u2]
        })
        .collect();
    let cong = state
        .cong
        .iter()
        .map(|&[r, z]| {
            let (u3, u4) = data.cong_to_diag(r, z);
            [u3, u4]
        })
        .collect();
    RiemannState {
        t: state.t,
        x_s: state.x_s,
        free,
        cong,
    }
}

/// Inverse of [`to_riemann`].
pub fn from_riemann(data: &CharacteristicData, state: &RiemannState) -> ShockState {
    let free = state
        .free
        .iter()
        .map(|&[u1, u2]| {
            let (r, z) = data.diag_to_free(u1, u2);
            [r, z]
        })
        .collect();
    let cong = state
        .cong
        .iter()
        .map(|&[u3, u4]| {
            let (r, z) = data.diag_to_cong(u3, u4);
            [r, z]
        })
        .collect();
    ShockState {
        t: state.t,
        x_s: state.x_s,
        free,
        cong,
    }
}

/// Reconstruct physical fields from the reference-interval state.
///
/// Output samples ascend in `x` within each region; the congested node
/// order is reversed relative to the solver layout.
pub fn from_fixed_domain(data: &CharacteristicData, state: &ShockState) -> Result<PhysicalSnapshot> {
    let profile = &data.profile;
    let n = state.n_cells();
    let mut free = Vec::with_capacity(n + 1);
    for (k, &[dr, dz]) in state.free.iter().enumerate() {
        let rho = profile.rho_free + dr;
        let z = profile.z_free + dz;
        if !(rho > 0.0) {
            return Err(Error::StateBlowup {
                t: state.t,
                detail: format!("nonpositive free density {rho} at node {k}"),
            });
        }
        let v = z / rho - profile.pressure.eval(rho)?.p;
        free.push(PhysicalSample {
            x: state.free_node_x(k),
            rho,
            v,
            z,
        });
    }
    let mut cong = Vec::with_capacity(n + 1);
    for k in (0..=n).rev() {
        let [dr, dz] = state.cong[k];
        let rho = profile.rho_cong + dr;
        let z = profile.z_cong + dz;
        if !(rho > 0.0) {
            return Err(Error::StateBlowup {
                t: state.t,
                detail: format!("nonpositive congested density {rho} at node {k}"),
            });
        }
        let v = z / rho - profile.pressure.eval(rho)?.p;
        cong.push(PhysicalSample {
            x: state.cong_node_x(profile.length, k),
            rho,
            v,
            z,
        });
    }
    Ok(PhysicalSnapshot {
        t: state.t,
        x_s: state.x_s,
        free,
        cong,
    })
}

/// Linear interpolation of `(rho, v)` within one region's samples.
fn interp_rho_v(samples: &[PhysicalSample], x: f64) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(Error::InvalidParameter(
            "a region needs at least two samples for interpolation".into(),
        ));
    }
    let lo = samples.first().unwrap().x;
    let hi = samples.last().unwrap().x;
    let span = hi - lo;
    let slack = 1e-9 * span.abs().max(1.0);
    if x < lo - slack || x > hi + slack {
        return Err(Error::OutOfRange {
            quantity: "interpolation position",
            value: x,
            min: lo,
            max: hi,
        });
    }
    let xq = x.clamp(lo, hi);
    let j = match samples.partition_point(|s| s.x <= xq) {
        0 => 1,
        p => p.min(samples.len() - 1),
    };
    let (a, b) = (&samples[j - 1], &samples[j]);
    let w = if b.x > a.x { (xq - a.x) / (b.x - a.x) } else { 0.0 };
    Ok((a.rho + w * (b.rho - a.rho), a.v + w * (b.v - a.v)))
}

/// Sample a physical snapshot onto the reference grid and subtract the
/// steady profile.
///
/// `(ρ, v)` are interpolated linearly within each region and `z` is rebuilt
/// as `ρ(v + p(ρ))`, so the result is exactly representable regardless of
/// rounding in the snapshot's `z` column.
pub fn to_fixed_domain(
    data: &CharacteristicData,
    snapshot: &PhysicalSnapshot,
    n: usize,
) -> Result<ShockState> {
    let profile = &data.profile;
    if !(snapshot.x_s > 0.0 && snapshot.x_s < profile.length) {
        return Err(Error::ShockLeftDomain {
            t: snapshot.t,
            x_s: snapshot.x_s,
            length: profile.length,
        });
    }
    let mut state = ShockState {
        t: snapshot.t,
        x_s: snapshot.x_s,
        free: vec![[0.0; 2]; n + 1],
        cong: vec![[0.0; 2]; n + 1],
    };
    for k in 0..=n {
        let x = state.free_node_x(k);
        let (rho, v) = interp_rho_v(&snapshot.free, x)?;
        let z = rho * (v + profile.pressure.eval(rho)?.p);
        state.free[k] = [rho - profile.rho_free, z - profile.z_free];
    }
    for k in 0..=n {
        let x = state.cong_node_x(profile.length, k);
        let (rho, v) = interp_rho_v(&snapshot.cong, x)?;
        let z = rho * (v + profile.pressure.eval(rho)?.p);
        state.cong[k] = [rho - profile.rho_cong, z - profile.z_cong];
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{characteristic_data, fix_equilibrium, PressureModel};
    use crate::tolerances::{close, ROUND_TRIP};
    use proptest::prelude::*;

    fn benchmark() -> CharacteristicData {
        let pressure = PressureModel::affine(24.5, 180.0).unwrap();
        let profile = fix_equilibrium(pressure, 500.0, 120.0, 60.0, 150.0).unwrap();
        characteristic_data(&profile).unwrap()
    }

    #[test]
    fn node_positions_map_both_regions() {
        let d = benchmark();
        let mut s = ShockState::quiescent(&d, 4);
        s.x_s = 200.0;
        let xs_free: Vec<f64> = (0..=4).map(|k| s.free_node_x(k)).collect();
        assert_eq!(xs_free, vec![0.0, 50.0, 100.0, 150.0, 200.0]);
        let xs_cong: Vec<f64> = (0..=4).map(|k| s.cong_node_x(500.0, k)).collect();
        assert_eq!(xs_cong, vec![500.0, 425.0, 350.0, 275.0, 200.0]);
    }

    #[test]
    fn steady_state_reconstructs_steady_physics() {
        let d = benchmark();
        let s = ShockState::quiescent(&d, 8);
        let snap = from_fixed_domain(&d, &s).unwrap();
        assert_eq!(snap.free.len(), 9);
        for sample in &snap.free {
            assert!(close(sample.rho, 60.0, ROUND_TRIP));
            assert!(close(sample.z, 245.0, ROUND_TRIP));
            assert!(close(sample.v, 245.0 / 12.0, ROUND_TRIP));
        }
        // Congested samples ascend from the interface to the outlet.
        assert!(close(snap.cong.first().unwrap().x, 120.0, ROUND_TRIP));
        assert!(close(snap.cong.last().unwrap().x, 500.0, ROUND_TRIP));
        for sample in &snap.cong {
            assert!(close(sample.rho, 150.0, ROUND_TRIP));
            assert!(close(sample.v, 49.0 / 6.0, ROUND_TRIP));
        }
    }

    #[test]
    fn snapshot_round_trips_through_fixed_domain() {
        let d = benchmark();
        let n = 16;
        let mut s = ShockState::quiescent(&d, n);
        s.x_s = 173.0;
        for k in 0..=n {
            let g = k as f64 / n as f64;
            s.free[k] = [3.0 * (6.0 * g).sin(), 12.0 * (4.0 * g).cos()];
            s.cong[k] = [-4.0 * (3.0 * g).cos(), 9.0 * (5.0 * g).sin()];
        }
        let snap = from_fixed_domain(&d, &s).unwrap();
        let back = to_fixed_domain(&d, &snap, n).unwrap();
        assert!(close(back.x_s, s.x_s, ROUND_TRIP));
        for k in 0..=n {
            for c in 0..2 {
                assert!(
                    close(back.free[k][c], s.free[k][c], 1e-10),
                    "free[{k}][{c}]: {} vs {}",
                    back.free[k][c],
                    s.free[k][c]
                );
                assert!(
                    close(back.cong[k][c], s.cong[k][c], 1e-10),
                    "cong[{k}][{c}]: {} vs {}",
                    back.cong[k][c],
                    s.cong[k][c]
                );
            }
        }
    }

    #[test]
    fn interface_outside_road_is_rejected() {
        let d = benchmark();
        let s = ShockState {
            t: 0.0,
            x_s: 700.0,
            free: vec![[0.0; 2]; 5],
            cong: vec![[0.0; 2]; 5],
        };
        let snap = PhysicalSnapshot {
            t: 0.0,
            x_s: 700.0,
            free: from_fixed_domain(&d, &ShockState::quiescent(&d, 4)).unwrap().free,
            cong: from_fixed_domain(&d, &ShockState::quiescent(&d, 4)).unwrap().cong,
        };
        assert!(matches!(
            to_fixed_domain(&d, &snap, 4).unwrap_err(),
            Error::ShockLeftDomain { .. }
        ));
        drop(s);
    }

    proptest! {
        #[test]
        fn prop_riemann_round_trip(
            vals in proptest::collection::vec((-30.0f64..30.0, -120.0f64..120.0), 9),
            x_s in 40.0f64..400.0,
        ) {
            let d = benchmark();
            let n = 8;
            let mut s = ShockState::quiescent(&d, n);
            s.x_s = x_s;
            for (k, &(r, z)) in vals.iter().enumerate() {
                s.free[k] = [r, z];
                s.cong[k] = [0.5 * z, -r];
            }
            let u = to_riemann(&d, &s);
            let back = from_riemann(&d, &u);
            for k in 0..=n {
                for c in 0..2 {
                    prop_assert!(close(back.free[k][c], s.free[k][c], ROUND_TRIP));
                    prop_assert!(close(back.cong[k][c], s.cong[k][c], ROUND_TRIP));
                }
            }
        }
    }
}
