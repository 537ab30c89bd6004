//! Right-hand sides of the coupled marker/vortex system and RK4 time stepping.
//!
//! Markers move with `v + sum_j d_j K(x - z_j)` where `v` is the blob sum of the
//! cloud; inside `r_guard` of a vortex the exact kernel is replaced by the bounded
//! regularization and every such evaluation is counted as a guard event. Vortices
//! move with `v` plus the exact kernel of the other vortices, never their own.

use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::tree::TreeCode;
use crate::field::{blob_sum, MarkerCloud};
use crate::kernels::{biot_savart_unchecked, regularized_kernel, PlanePoint};

mod run;
pub mod scenario;

pub use run::{run, run_twin, RunError, Snapshot, Trajectory};
pub use scenario::{init_scenario, init_twin, ScenarioConfig, ScenarioError};

/// Vortex pairs closer than this are treated as collided.
pub const COLLISION_DISTANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// At most one vortex, free to move.
    Moving,
    /// One vortex pinned at the origin.
    Fixed,
    /// Several same-sign vortices, all free to move.
    Multi,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointVortex {
    pub pos: PlanePoint,
    pub intensity: f64,
}

#[derive(Debug, Clone)]
pub struct SimState {
    pub time: f64,
    pub cloud: MarkerCloud,
    pub vortices: Vec<PointVortex>,
    pub mode: Mode,
}

impl SimState {
    pub fn bitwise_eq(&self, other: &Self) -> bool {
        self.time.to_bits() == other.time.to_bits()
            && self.mode == other.mode
            && self.cloud.bitwise_eq(&other.cloud)
            && self.vortices.len() == other.vortices.len()
            && self.vortices.iter().zip(&other.vortices).all(|(a, b)| {
                a.pos.x1.to_bits() == b.pos.x1.to_bits()
                    && a.pos.x2.to_bits() == b.pos.x2.to_bits()
                    && a.intensity.to_bits() == b.intensity.to_bits()
            })
    }

    fn vortices_move(&self) -> bool {
        self.mode != Mode::Fixed
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("vortices {i} and {j} collided (distance {distance:e})")]
    Collision { i: usize, j: usize, distance: f64 },
    #[error("vortex velocity requested in fixed mode")]
    PinnedVortex,
    #[error("time step must be positive and finite, got {0}")]
    InvalidTimeStep(f64),
    #[error("index {index} out of range ({len} entries)")]
    IndexOutOfRange { index: usize, len: usize },
}

/// Treecode settings for marker velocities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeSettings {
    pub theta: f64,
    pub order: usize,
}

impl Default for TreeSettings {
    fn default() -> Self {
        Self {
            theta: 0.5,
            order: 18,
        }
    }
}

/// Evaluates the coupled right-hand sides and counts guard events.
#[derive(Debug)]
pub struct VortexSystem {
    r_guard: f64,
    guard_events: AtomicU64,
    tree: Option<TreeSettings>,
}

impl VortexSystem {
    pub fn new(r_guard: f64) -> Self {
        Self {
            r_guard,
            guard_events: AtomicU64::new(0),
            tree: None,
        }
    }

    pub fn with_tree(mut self, settings: TreeSettings) -> Self {
        self.tree = Some(settings);
        self
    }

    pub fn r_guard(&self) -> f64 {
        self.r_guard
    }

    /// Marker evaluations that fell inside the guard radius so far.
    pub fn guard_events(&self) -> u64 {
        self.guard_events.load(Ordering::Relaxed)
    }

    /// Point-vortex part of the field at `x`, regularized inside the guard radius.
    #[inline]
    fn vortex_field(&self, vortices: &[PointVortex], x: PlanePoint) -> PlanePoint {
        let mut acc = PlanePoint::ORIGIN;
        let g2 = self.r_guard * self.r_guard;
        for v in vortices {
            let d = x - v.pos;
            if d.norm_sq() < g2 {
                self.guard_events.fetch_add(1, Ordering::Relaxed);
            }
            acc += regularized_kernel(d, self.r_guard) * v.intensity;
        }
        acc
    }

    #[inline]
    fn field_from_parts(&self, cloud: &MarkerCloud, xs: &[f64], ys: &[f64], vortices: &[PointVortex], x: PlanePoint) -> PlanePoint {
        let d = cloud.blob_delta();
        let (u, v) = blob_sum(xs, ys, cloud.strengths(), d * d, x.x1, x.x2);
        PlanePoint::new(u, v) + self.vortex_field(vortices, x)
    }

    /// Velocity felt by fluid at `x`: blob sum of the cloud plus every vortex.
    pub fn total_field(&self, state: &SimState, x: PlanePoint) -> PlanePoint {
        self.field_from_parts(&state.cloud, state.cloud.xs(), state.cloud.ys(), &state.vortices, x)
    }

    /// Velocity of marker `k`.
    pub fn marker_rhs(&self, state: &SimState, k: usize) -> PlanePoint {
        self.total_field(state, state.cloud.pos(k))
    }

    /// Velocity of vortex `i`: blob sum plus the exact kernel of the other vortices.
    pub fn vortex_rhs(&self, state: &SimState, i: usize) -> Result<PlanePoint, DynamicsError> {
        if !state.vortices_move() {
            return Err(DynamicsError::PinnedVortex);
        }
        if i >= state.vortices.len() {
            return Err(DynamicsError::IndexOutOfRange {
                index: i,
                len: state.vortices.len(),
            });
        }
        vortex_velocity(&state.cloud, state.cloud.xs(), state.cloud.ys(), &state.vortices, i)
    }

    /// Velocities of all markers and (unless pinned) all vortices at the given positions.
    fn stage(
        &self,
        cloud: &MarkerCloud,
        xs: &[f64],
        ys: &[f64],
        vortices: &[PointVortex],
        moving: bool,
    ) -> Result<(Vec<PlanePoint>, Vec<PlanePoint>), DynamicsError> {
        let n = xs.len();
        let marker_vel: Vec<PlanePoint> = match self.tree {
            Some(settings) if n > 0 => {
                let stage_cloud = cloud.with_positions(xs.to_vec(), ys.to_vec());
                let tree = TreeCode::build(&stage_cloud, settings.theta, settings.order);
                (0..n)
                    .into_par_iter()
                    .map(|k| {
                        let x = PlanePoint::new(xs[k], ys[k]);
                        tree.velocity(x) + self.vortex_field(vortices, x)
                    })
                    .collect()
            }
            _ => (0..n)
                .into_par_iter()
                .map(|k| self.field_from_parts(cloud, xs, ys, vortices, PlanePoint::new(xs[k], ys[k])))
                .collect(),
        };
        let vortex_vel = if moving {
            (0..vortices.len())
                .map(|i| vortex_velocity(cloud, xs, ys, vortices, i))
                .collect::<Result<Vec<_>, _>>()?
        } else {
            vec![PlanePoint::ORIGIN; vortices.len()]
        };
        Ok((marker_vel, vortex_vel))
    }

    /// One classical Runge-Kutta step of every marker and every free vortex.
    pub fn rk4_step(&self, state: &SimState, dt: f64) -> Result<SimState, DynamicsError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(DynamicsError::InvalidTimeStep(dt));
        }
        self.rk4_step_signed(state, dt)
    }

    /// RK4 step that also accepts negative `dt` (backward integration).
    pub fn rk4_step_signed(&self, state: &SimState, dt: f64) -> Result<SimState, DynamicsError> {
        if !dt.is_finite() || dt == 0.0 {
            return Err(DynamicsError::InvalidTimeStep(dt));
        }
        let cloud = &state.cloud;
        let moving = state.vortices_move();
        let x0 = cloud.xs();
        let y0 = cloud.ys();
        let v0 = &state.vortices;

        let shift = |scale: f64, vel: &(Vec<PlanePoint>, Vec<PlanePoint>)| {
            let xs: Vec<f64> = x0.iter().zip(&vel.0).map(|(x, u)| x + scale * u.x1).collect();
            let ys: Vec<f64> = y0.iter().zip(&vel.0).map(|(y, u)| y + scale * u.x2).collect();
            let vs: Vec<PointVortex> = v0
                .iter()
                .zip(&vel.1)
                .map(|(v, u)| PointVortex {
                    pos: v.pos + *u * scale,
                    intensity: v.intensity,
                })
                .collect();
            (xs, ys, vs)
        };

        let k1 = self.stage(cloud, x0, y0, v0, moving)?;
        let (xs, ys, vs) = shift(0.5 * dt, &k1);
        let k2 = self.stage(cloud, &xs, &ys, &vs, moving)?;
        let (xs, ys, vs) = shift(0.5 * dt, &k2);
        let k3 = self.stage(cloud, &xs, &ys, &vs, moving)?;
        let (xs, ys, vs) = shift(dt, &k3);
        let k4 = self.stage(cloud, &xs, &ys, &vs, moving)?;

        let w = dt / 6.0;
        let combine = |a: PlanePoint, b: PlanePoint, c: PlanePoint, d: PlanePoint| a + (b + c) * 2.0 + d;
        let mut nx = Vec::with_capacity(x0.len());
        let mut ny = Vec::with_capacity(y0.len());
        for k in 0..x0.len() {
            let u = combine(k1.0[k], k2.0[k], k3.0[k], k4.0[k]);
            nx.push(x0[k] + w * u.x1);
            ny.push(y0[k] + w * u.x2);
        }
        let vortices = v0
            .iter()
            .enumerate()
            .map(|(i, v)| PointVortex {
                pos: if moving {
                    v.pos + combine(k1.1[i], k2.1[i], k3.1[i], k4.1[i]) * w
                } else {
                    v.pos
                },
                intensity: v.intensity,
            })
            .collect();
        Ok(SimState {
            time: state.time + dt,
            cloud: cloud.with_positions(nx, ny),
            vortices,
            mode: state.mode,
        })
    }
}

fn vortex_velocity(
    cloud: &MarkerCloud,
    xs: &[f64],
    ys: &[f64],
    vortices: &[PointVortex],
    i: usize,
) -> Result<PlanePoint, DynamicsError> {
    let z = vortices[i].pos;
    let d = cloud.blob_delta();
    let (u, v) = blob_sum(xs, ys, cloud.strengths(), d * d, z.x1, z.x2);
    let mut acc = PlanePoint::new(u, v);
    for (j, other) in vortices.iter().enumerate() {
        if j == i {
            continue;
        }
        let sep = z - other.pos;
        let distance = sep.norm();
        if distance < COLLISION_DISTANCE {
            return Err(DynamicsError::Collision { i, j, distance });
        }
        acc += biot_savart_unchecked(sep) * other.intensity;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests;
