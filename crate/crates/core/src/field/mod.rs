//! Discrete vorticity carried by Lagrangian markers, the velocity it induces,
//! grid deposition and the geometric radii used by the diagnostics.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::kernels::PlanePoint;

mod sum;
pub mod tree;

pub(crate) use sum::blob_sum;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("marker {index} at ({x}, {y}) lies outside the grid")]
    MarkerOutsideGrid { index: usize, x: f64, y: f64 },
    #[error("marker {index} has non-positive weight {weight}")]
    NonPositiveWeight { index: usize, weight: f64 },
    #[error("marker {index} has a non-finite position or value")]
    NonFiniteMarker { index: usize },
    #[error("blob smoothing length must be positive, got {0}")]
    InvalidBlobDelta(f64),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

/// A Lagrangian fluid element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Marker {
    pub pos: PlanePoint,
    /// Vorticity value carried along the flow.
    pub omega: f64,
    /// Area of the fluid element.
    pub weight: f64,
}

/// Marker cloud in structure-of-arrays layout.
///
/// Carried values and weights are shared between clones and never mutated; only
/// positions change as the cloud is advected.
#[derive(Debug, Clone)]
pub struct MarkerCloud {
    xs: Vec<f64>,
    ys: Vec<f64>,
    omega: Arc<[f64]>,
    weight: Arc<[f64]>,
    /// `omega * weight`, the circulation of each marker.
    strength: Arc<[f64]>,
    blob_delta: f64,
}

impl MarkerCloud {
    pub fn new(markers: &[Marker], blob_delta: f64) -> Result<Self, FieldError> {
        if !(blob_delta.is_finite() && blob_delta > 0.0) {
            return Err(FieldError::InvalidBlobDelta(blob_delta));
        }
        for (index, m) in markers.iter().enumerate() {
            if !(m.pos.is_finite() && m.omega.is_finite() && m.weight.is_finite()) {
                return Err(FieldError::NonFiniteMarker { index });
            }
            if m.weight <= 0.0 {
                return Err(FieldError::NonPositiveWeight {
                    index,
                    weight: m.weight,
                });
            }
        }
        Ok(Self {
            xs: markers.iter().map(|m| m.pos.x1).collect(),
            ys: markers.iter().map(|m| m.pos.x2).collect(),
            omega: markers.iter().map(|m| m.omega).collect(),
            weight: markers.iter().map(|m| m.weight).collect(),
            strength: markers.iter().map(|m| m.omega * m.weight).collect(),
            blob_delta,
        })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn blob_delta(&self) -> f64 {
        self.blob_delta
    }

    pub fn marker(&self, k: usize) -> Marker {
        Marker {
            pos: self.pos(k),
            omega: self.omega[k],
            weight: self.weight[k],
        }
    }

    #[inline]
    pub fn pos(&self, k: usize) -> PlanePoint {
        PlanePoint::new(self.xs[k], self.ys[k])
    }

    pub fn markers(&self) -> impl Iterator<Item = Marker> + '_ {
        (0..self.len()).map(move |k| self.marker(k))
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omega
    }

    pub fn weights(&self) -> &[f64] {
        &self.weight
    }

    pub fn strengths(&self) -> &[f64] {
        &self.strength
    }

    /// Sum of `omega * weight` in marker order.
    pub fn total_circulation(&self) -> f64 {
        self.strength.iter().sum()
    }

    /// Sum of `|omega| * weight` in marker order.
    pub fn absolute_circulation(&self) -> f64 {
        self.strength.iter().map(|g| g.abs()).sum()
    }

    /// Same markers at new positions. Panics if the lengths disagree.
    pub fn with_positions(&self, xs: Vec<f64>, ys: Vec<f64>) -> Self {
        assert_eq!(xs.len(), self.len());
        assert_eq!(ys.len(), self.len());
        Self {
            xs,
            ys,
            omega: Arc::clone(&self.omega),
            weight: Arc::clone(&self.weight),
            strength: Arc::clone(&self.strength),
            blob_delta: self.blob_delta,
        }
    }

    pub fn translated(&self, by: PlanePoint) -> Self {
        self.with_positions(
            self.xs.iter().map(|x| x + by.x1).collect(),
            self.ys.iter().map(|y| y + by.x2).collect(),
        )
    }

    /// True when both clouds share carried values and weights bit for bit.
    pub fn same_carried_values(&self, other: &Self) -> bool {
        self.omega.len() == other.omega.len()
            && self
                .omega
                .iter()
                .zip(other.omega.iter())
                .all(|(a, b)| a.to_bits() == b.to_bits())
            && self
                .weight
                .iter()
                .zip(other.weight.iter())
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }

    /// Bitwise equality of positions, values and weights.
    pub fn bitwise_eq(&self, other: &Self) -> bool {
        self.same_carried_values(other)
            && self.blob_delta.to_bits() == other.blob_delta.to_bits()
            && self
                .xs
                .iter()
                .chain(self.ys.iter())
                .zip(other.xs.iter().chain(other.ys.iter()))
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Velocity `K_delta * omega` induced by the cloud at `x`.
///
/// The sum runs over markers in their fixed order, so repeated calls are bitwise
/// identical.
pub fn induced_velocity(cloud: &MarkerCloud, x: PlanePoint) -> PlanePoint {
    let d2 = cloud.blob_delta * cloud.blob_delta;
    let (u, v) = blob_sum(&cloud.xs, &cloud.ys, &cloud.strength, d2, x.x1, x.x2);
    PlanePoint::new(u, v)
}

/// Unsmoothed Biot-Savart velocity at marker `k` from every other marker.
pub fn exact_velocity_at_marker(cloud: &MarkerCloud, k: usize) -> PlanePoint {
    let p = cloud.pos(k);
    let (u0, v0) = blob_sum(&cloud.xs[..k], &cloud.ys[..k], &cloud.strength[..k], 0.0, p.x1, p.x2);
    let j = k + 1;
    let (u1, v1) = blob_sum(&cloud.xs[j..], &cloud.ys[j..], &cloud.strength[j..], 0.0, p.x1, p.x2);
    PlanePoint::new(u0 + u1, v0 + v1)
}

/// [`induced_velocity`] at many points. Each target is summed independently, so the
/// result does not depend on how rayon splits the work.
pub fn induced_velocities(cloud: &MarkerCloud, targets: &[PlanePoint]) -> Vec<PlanePoint> {
    targets
        .par_iter()
        .map(|&x| induced_velocity(cloud, x))
        .collect()
}

/// Uniform node lattice `origin + (i, j) * spacing`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub origin: PlanePoint,
    pub spacing: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    pub fn new(origin: PlanePoint, spacing: f64, nx: usize, ny: usize) -> Result<Self, FieldError> {
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(FieldError::InvalidGrid(format!("spacing {spacing}")));
        }
        if nx < 2 || ny < 2 {
            return Err(FieldError::InvalidGrid(format!("{nx} x {ny} nodes")));
        }
        if !origin.is_finite() {
            return Err(FieldError::InvalidGrid("non-finite origin".into()));
        }
        Ok(Self {
            origin,
            spacing,
            nx,
            ny,
        })
    }

    /// Square grid covering `[center - half_extent, center + half_extent]^2`.
    pub fn centered(center: PlanePoint, half_extent: f64, spacing: f64) -> Result<Self, FieldError> {
        if !(half_extent.is_finite() && half_extent > 0.0) {
            return Err(FieldError::InvalidGrid(format!("half extent {half_extent}")));
        }
        let cells = (2.0 * half_extent / spacing).ceil() as usize;
        let n = cells + 1;
        let half = cells as f64 * spacing / 2.0;
        Self::new(
            PlanePoint::new(center.x1 - half, center.x2 - half),
            spacing,
            n,
            n,
        )
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> PlanePoint {
        PlanePoint::new(
            self.origin.x1 + i as f64 * self.spacing,
            self.origin.x2 + j as f64 * self.spacing,
        )
    }

    /// Node positions, row-major in `j` (index `j * nx + i`).
    pub fn nodes(&self) -> Vec<PlanePoint> {
        let mut out = Vec::with_capacity(self.len());
        for j in 0..self.ny {
            for i in 0..self.nx {
                out.push(self.node(i, j));
            }
        }
        out
    }

    pub fn cell_area(&self) -> f64 {
        self.spacing * self.spacing
    }

    /// Largest distance from `center` that is still inside the grid in every direction.
    pub fn inner_radius(&self, center: PlanePoint) -> f64 {
        let x_max = self.origin.x1 + (self.nx - 1) as f64 * self.spacing;
        let y_max = self.origin.x2 + (self.ny - 1) as f64 * self.spacing;
        (center.x1 - self.origin.x1)
            .min(x_max - center.x1)
            .min(center.x2 - self.origin.x2)
            .min(y_max - center.x2)
    }

    pub fn contains(&self, p: PlanePoint) -> bool {
        let fx = (p.x1 - self.origin.x1) / self.spacing;
        let fy = (p.x2 - self.origin.x2) / self.spacing;
        fx >= 0.0 && fy >= 0.0 && fx <= (self.nx - 1) as f64 && fy <= (self.ny - 1) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub grid: Grid,
    pub values: Vec<PlanePoint>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    /// `sum(values) * spacing^2`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }
}

/// Fields with a pointwise magnitude, for grid norms.
pub trait GridValues {
    fn grid(&self) -> &Grid;
    fn magnitudes(&self) -> Box<dyn Iterator<Item = f64> + '_>;
}

impl GridValues for ScalarField {
    fn grid(&self) -> &Grid {
        &self.grid
    }
    fn magnitudes(&self) -> Box<dyn Iterator<Item = f64> + '_> {
        Box::new(self.values.iter().map(|v| v.abs()))
    }
}

impl GridValues for VectorField {
    fn grid(&self) -> &Grid {
        &self.grid
    }
    fn magnitudes(&self) -> Box<dyn Iterator<Item = f64> + '_> {
        Box::new(self.values.iter().map(|v| v.norm()))
    }
}

/// Node-wise [`induced_velocity`] on the grid.
pub fn velocity_on_grid(cloud: &MarkerCloud, grid: &Grid) -> VectorField {
    VectorField {
        grid: *grid,
        values: induced_velocities(cloud, &grid.nodes()),
    }
}

/// Area-weighted bilinear deposition of marker circulation onto grid nodes.
///
/// The returned field is a density: `sum(values) * spacing^2` equals the total
/// circulation of the cloud.
/// Rounds grid coordinates that sit on a node up to rounding noise.
fn snap(f: f64) -> f64 {
    let r = f.round();
    if (f - r).abs() < 1e-9 {
        r
    } else {
        f
    }
}

pub fn deposit_vorticity(cloud: &MarkerCloud, grid: &Grid) -> Result<ScalarField, FieldError> {
    let mut field = ScalarField::zeros(*grid);
    let inv_area = 1.0 / grid.cell_area();
    for k in 0..cloud.len() {
        let p = cloud.pos(k);
        let fx = (p.x1 - grid.origin.x1) / grid.spacing;
        let fy = (p.x2 - grid.origin.x2) / grid.spacing;
        if !(fx >= 0.0 && fy >= 0.0 && fx <= (grid.nx - 1) as f64 && fy <= (grid.ny - 1) as f64) {
            return Err(FieldError::MarkerOutsideGrid {
                index: k,
                x: p.x1,
                y: p.x2,
            });
        }
        // markers on the last node row/column deposit into the last cell
        let (fx, fy) = (snap(fx), snap(fy));
        let i = (fx.floor() as usize).min(grid.nx - 2);
        let j = (fy.floor() as usize).min(grid.ny - 2);
        let tx = fx - i as f64;
        let ty = fy - j as f64;
        let g = cloud.strength[k] * inv_area;
        let base = j * grid.nx + i;
        field.values[base] += g * (1.0 - tx) * (1.0 - ty);
        field.values[base + 1] += g * tx * (1.0 - ty);
        field.values[base + grid.nx] += g * (1.0 - tx) * ty;
        field.values[base + grid.nx + 1] += g * tx * ty;
    }
    Ok(field)
}

/// Discrete `L^p` norm `(sum |value|^p spacing^2)^(1/p)`; `p = f64::INFINITY` gives the max.
///
/// Panics if `p < 1`.
pub fn grid_lp_norm<F: GridValues + ?Sized>(field: &F, p: f64) -> f64 {
    assert!(p >= 1.0, "L^p norm needs p >= 1, got {p}");
    if p.is_infinite() {
        return field.magnitudes().fold(0.0, f64::max);
    }
    let area = field.grid().cell_area();
    let sum: f64 = if p == 1.0 {
        field.magnitudes().sum()
    } else if p == 2.0 {
        field.magnitudes().map(|m| m * m).sum()
    } else {
        field.magnitudes().map(|m| m.powf(p)).sum()
    };
    (sum * area).powf(1.0 / p)
}

/// Marker-level norm `(sum |omega|^p weight)^(1/p)`, or `max |omega|` for `p = inf`.
pub fn marker_lp_norm(cloud: &MarkerCloud, p: f64) -> f64 {
    assert!(p >= 1.0, "L^p norm needs p >= 1, got {p}");
    if p.is_infinite() {
        return cloud.omega.iter().fold(0.0, |m, w| m.max(w.abs()));
    }
    let sum: f64 = cloud
        .omega
        .iter()
        .zip(cloud.weight.iter())
        .map(|(w, a)| w.abs().powf(p) * a)
        .sum();
    sum.powf(1.0 / p)
}

/// Squared `L^2` distance between the velocity fields of two clouds on a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityDiff {
    pub value: f64,
    /// Set when the two clouds carry different total circulation, in which case the
    /// continuum integral diverges and `value` depends on the grid extent.
    pub circulation_mismatch: bool,
}

pub const CIRCULATION_MISMATCH_TOL: f64 = 1e-8;

pub fn l2_velocity_diff(a: &MarkerCloud, b: &MarkerCloud, grid: &Grid) -> VelocityDiff {
    let mismatch = (a.total_circulation() - b.total_circulation()).abs() > CIRCULATION_MISMATCH_TOL;
    let nodes = grid.nodes();
    let sum: f64 = nodes
        .par_iter()
        .map(|&x| (induced_velocity(a, x) - induced_velocity(b, x)).norm_sq())
        .collect::<Vec<_>>()
        .iter()
        .sum();
    VelocityDiff {
        value: sum * grid.cell_area(),
        circulation_mismatch: mismatch,
    }
}

/// Markers ordered by distance to `center`, ties keeping marker order.
fn by_distance(cloud: &MarkerCloud, center: PlanePoint) -> Vec<(f64, usize)> {
    let mut d: Vec<(f64, usize)> = (0..cloud.len())
        .map(|k| (cloud.pos(k).distance(center), k))
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d
}

/// Radius of the largest disk around `center` whose markers all carry `alpha` (within `tol`).
///
/// Reported at the last compliant marker before the first violating one; a compliant
/// marker at exactly the violator's distance does not count.
pub fn constancy_radius(cloud: &MarkerCloud, center: PlanePoint, alpha: f64, tol: f64) -> f64 {
    let sorted = by_distance(cloud, center);
    let first_bad = sorted
        .iter()
        .find(|&&(_, k)| (cloud.omega[k] - alpha).abs() > tol)
        .map(|&(d, _)| d);
    let limit = first_bad.unwrap_or(f64::INFINITY);
    sorted
        .iter()
        .take_while(|&&(d, _)| d < limit)
        .map(|&(d, _)| d)
        .last()
        .unwrap_or(0.0)
}

/// Largest distance from `center` among markers with `|omega| > tol`; 0 if there are none.
pub fn support_radius(cloud: &MarkerCloud, center: PlanePoint, tol: f64) -> f64 {
    (0..cloud.len())
        .filter(|&k| cloud.omega[k].abs() > tol)
        .map(|k| cloud.pos(k).distance(center))
        .fold(0.0, f64::max)
}

/// Smallest distance from `center` among markers with `|omega| > tol`; infinite if none.
pub fn inner_support_radius(cloud: &MarkerCloud, center: PlanePoint, tol: f64) -> f64 {
    (0..cloud.len())
        .filter(|&k| cloud.omega[k].abs() > tol)
        .map(|k| cloud.pos(k).distance(center))
        .fold(f64::INFINITY, f64::min)
}

/// `|circle average - center value|`, component-wise max, of a planar field.
///
/// The circle average uses the `nsamples`-point trapezoid rule, which is spectrally
/// accurate for smooth periodic integrands.
pub fn harmonic_mean_value_defect<F>(field: F, center: PlanePoint, radius: f64, nsamples: usize) -> f64
where
    F: Fn(PlanePoint) -> PlanePoint,
{
    assert!(nsamples >= 16, "need at least 16 samples, got {nsamples}");
    let mut acc = PlanePoint::ORIGIN;
    for s in 0..nsamples {
        let a = 2.0 * PI * s as f64 / nsamples as f64;
        acc += field(center + PlanePoint::new(radius * a.cos(), radius * a.sin()));
    }
    let mean = acc * (1.0 / nsamples as f64);
    let d = mean - field(center);
    d.x1.abs().max(d.x2.abs())
}
