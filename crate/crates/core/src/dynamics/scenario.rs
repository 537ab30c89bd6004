//! Scenario configuration, defaults and initial marker lattices.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Mode, PointVortex, SimState};
use crate::field::{Grid, Marker, MarkerCloud};
use crate::kernels::PlanePoint;

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_STRIDE: usize = 10;
/// Lattice spacing default: this fraction of the largest patch radius.
pub const DEFAULT_H_FRACTION: f64 = 1.0 / 50.0;
pub const DEFAULT_CONSTANCY_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid configuration `{key}`: {reason}")]
pub struct ScenarioError {
    pub key: String,
    pub reason: String,
}

fn invalid(key: impl Into<String>, reason: impl Into<String>) -> ScenarioError {
    ScenarioError {
        key: key.into(),
        reason: reason.into(),
    }
}

/// How the second member of a twin pair differs from the first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Perturbation {
    /// The first vortex is displaced by `(eta, 0)`.
    #[default]
    VortexOffset,
    /// Every marker is displaced by `eta` times a seeded uniform sample of `[-1, 1]^2`.
    Jitter,
}

/// Vorticity `value + radial_slope (r - inner_radius) + angular_amplitude cos(angular_mode theta)`
/// on the annulus `inner_radius <= r < outer_radius` around `center`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchSpec {
    pub center: [f64; 2],
    #[serde(default)]
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub value: f64,
    #[serde(default)]
    pub radial_slope: f64,
    #[serde(default)]
    pub angular_mode: u32,
    #[serde(default)]
    pub angular_amplitude: f64,
}

impl PatchSpec {
    pub fn disk(center: [f64; 2], radius: f64, value: f64) -> Self {
        Self {
            center,
            inner_radius: 0.0,
            outer_radius: radius,
            value,
            radial_slope: 0.0,
            angular_mode: 0,
            angular_amplitude: 0.0,
        }
    }

    pub fn annulus(center: [f64; 2], inner: f64, outer: f64, value: f64) -> Self {
        Self {
            inner_radius: inner,
            ..Self::disk(center, outer, value)
        }
    }

    pub fn center(&self) -> PlanePoint {
        self.center.into()
    }

    /// True for a solid disk of constant value.
    pub fn is_constant_disk(&self) -> bool {
        self.inner_radius == 0.0
            && self.radial_slope == 0.0
            && (self.angular_amplitude == 0.0 || self.angular_mode == 0)
    }

    pub fn value_at(&self, p: PlanePoint) -> f64 {
        let d = p - self.center();
        let r = d.norm();
        let theta = d.x2.atan2(d.x1);
        self.value
            + self.radial_slope * (r - self.inner_radius)
            + self.angular_amplitude * (self.angular_mode as f64 * theta).cos()
    }

    pub fn area(&self) -> f64 {
        PI * (self.outer_radius * self.outer_radius - self.inner_radius * self.inner_radius)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VortexSpec {
    pub pos: [f64; 2],
    pub intensity: f64,
    /// Value of the constant disk around this vortex, overriding `diagnostics.constancy_alpha`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub mode: Mode,
    #[serde(default)]
    pub patches: Vec<PatchSpec>,
    #[serde(default)]
    pub perturbation: Perturbation,
    #[serde(default)]
    pub eta: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VorticesSection {
    #[serde(default)]
    pub points: Vec<VortexSpec>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsSection {
    pub dt: Option<f64>,
    pub t_end: f64,
    pub h: Option<f64>,
    pub blob_delta: Option<f64>,
    pub r_guard: Option<f64>,
    pub grid_spacing: Option<f64>,
    pub grid_half_extent: Option<f64>,
    pub grid_center: Option<[f64; 2]>,
    /// Use the treecode for marker velocities (only after it passes its accuracy gate).
    #[serde(default)]
    pub treecode: bool,
}

fn default_tol() -> f64 {
    DEFAULT_CONSTANCY_TOL
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSection {
    /// Track the constancy disk of value `alpha` around every vortex.
    pub constancy_alpha: Option<f64>,
    #[serde(default = "default_tol")]
    pub constancy_tol: f64,
    #[serde(default)]
    pub support_tol: f64,
    #[serde(default)]
    pub hole_tol: f64,
    #[serde(default = "default_true")]
    pub lp_norms: bool,
    pub support_center: Option<[f64; 2]>,
    /// Allowed relative drift of the grid L1/L2 norms for the run to pass.
    pub lp_drift_tol: Option<f64>,
    /// Largest allowed distance between each vortex's start and end positions.
    pub return_tol: Option<f64>,
    /// Largest allowed spread of the fixed-vortex hole radius over the run.
    pub hole_spread_tol: Option<f64>,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        Self {
            constancy_alpha: None,
            constancy_tol: DEFAULT_CONSTANCY_TOL,
            support_tol: 0.0,
            hole_tol: 0.0,
            lp_norms: true,
            support_center: None,
            lp_drift_tol: None,
            return_tol: None,
            hole_spread_tol: None,
        }
    }
}

fn default_stride() -> usize {
    DEFAULT_STRIDE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_stride")]
    pub stride: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            stride: DEFAULT_STRIDE,
        }
    }
}

/// Everything needed to set up and run one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub vortices: VorticesSection,
    pub numerics: NumericsSection,
    #[serde(default)]
    pub diagnostics: DiagnosticsSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Numerical parameters with every default filled in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolved {
    pub h: f64,
    pub blob_delta: f64,
    pub r_guard: f64,
    pub dt: f64,
    pub t_end: f64,
    pub steps: usize,
    pub stride: usize,
    pub grid: Grid,
    pub support_center: PlanePoint,
}

fn check_pos(key: &str, v: f64) -> Result<(), ScenarioError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(key, format!("must be finite and positive, got {v}")))
    }
}

fn check_finite(key: &str, v: f64) -> Result<(), ScenarioError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(key, format!("must be finite, got {v}")))
    }
}

fn patches_overlap(a: &PatchSpec, b: &PatchSpec) -> bool {
    let d = a.center().distance(b.center());
    if d < 1e-12 {
        return a.inner_radius < b.outer_radius && b.inner_radius < a.outer_radius;
    }
    if d >= a.outer_radius + b.outer_radius {
        return false;
    }
    // one patch may sit entirely inside the other's hole
    let inside_hole = |outer: &PatchSpec, inner: &PatchSpec| d + inner.outer_radius <= outer.inner_radius;
    !(inside_hole(a, b) || inside_hole(b, a))
}

impl ScenarioConfig {
    pub fn vortex_states(&self) -> Vec<PointVortex> {
        self.vortices
            .points
            .iter()
            .map(|v| PointVortex {
                pos: v.pos.into(),
                intensity: v.intensity,
            })
            .collect()
    }

    /// Largest patch extent measured from `c`.
    fn extent_from(&self, c: PlanePoint) -> f64 {
        let patches = self
            .scenario
            .patches
            .iter()
            .map(|p| p.center().distance(c) + p.outer_radius);
        let vortices = self
            .vortices
            .points
            .iter()
            .map(|v| PlanePoint::from(v.pos).distance(c));
        patches.chain(vortices).fold(0.0, f64::max)
    }

    fn default_center(&self) -> PlanePoint {
        let n = self.scenario.patches.len();
        if n == 0 {
            return PlanePoint::ORIGIN;
        }
        let sum = self
            .scenario
            .patches
            .iter()
            .fold(PlanePoint::ORIGIN, |acc, p| acc + p.center());
        sum * (1.0 / n as f64)
    }

    /// Checks every invariant and fills defaults.
    pub fn resolve(&self) -> Result<Resolved, ScenarioError> {
        let sc = &self.scenario;
        let num = &self.numerics;
        for (i, p) in sc.patches.iter().enumerate() {
            let key = |f: &str| format!("scenario.patches[{i}].{f}");
            check_finite(&key("center"), p.center[0])?;
            check_finite(&key("center"), p.center[1])?;
            check_pos(&key("outer_radius"), p.outer_radius)?;
            if !(p.inner_radius.is_finite() && p.inner_radius >= 0.0 && p.inner_radius < p.outer_radius) {
                return Err(invalid(key("inner_radius"), "must satisfy 0 <= inner_radius < outer_radius"));
            }
            check_finite(&key("value"), p.value)?;
            check_finite(&key("radial_slope"), p.radial_slope)?;
            check_finite(&key("angular_amplitude"), p.angular_amplitude)?;
        }
        for i in 0..sc.patches.len() {
            for j in i + 1..sc.patches.len() {
                if patches_overlap(&sc.patches[i], &sc.patches[j]) {
                    return Err(invalid(
                        format!("scenario.patches[{j}]"),
                        format!("overlaps patch {i}"),
                    ));
                }
            }
        }
        for (i, v) in self.vortices.points.iter().enumerate() {
            check_finite(&format!("vortices.points[{i}].pos"), v.pos[0])?;
            check_finite(&format!("vortices.points[{i}].pos"), v.pos[1])?;
            check_finite(&format!("vortices.points[{i}].intensity"), v.intensity)?;
        }
        let nv = self.vortices.points.len();
        match sc.mode {
            Mode::Moving if nv > 1 => {
                return Err(invalid("vortices.points", "moving mode takes at most one vortex; use multi"))
            }
            Mode::Fixed => {
                if nv != 1 || self.vortices.points[0].pos != [0.0, 0.0] {
                    return Err(invalid("vortices.points", "fixed mode needs exactly one vortex at the origin"));
                }
            }
            Mode::Multi => {
                if nv < 2 {
                    return Err(invalid("vortices.points", "multi mode needs at least two vortices"));
                }
                let sign = self.vortices.points[0].intensity.signum();
                if self.vortices.points.iter().any(|v| v.intensity.signum() != sign || v.intensity == 0.0) {
                    return Err(invalid("vortices.points", "multi mode needs nonzero intensities of one sign"));
                }
            }
            _ => {}
        }
        for i in 0..nv {
            for j in i + 1..nv {
                let a: PlanePoint = self.vortices.points[i].pos.into();
                if a.distance(self.vortices.points[j].pos.into()) < super::COLLISION_DISTANCE {
                    return Err(invalid(format!("vortices.points[{j}]"), format!("coincides with vortex {i}")));
                }
            }
        }
        if sc.seed > i64::MAX as u64 {
            return Err(invalid("scenario.seed", "must fit a signed 64-bit integer"));
        }
        if !(sc.eta.is_finite() && sc.eta >= 0.0) {
            return Err(invalid("scenario.eta", "must be finite and non-negative"));
        }

        let dt = num.dt.unwrap_or(DEFAULT_DT);
        check_pos("numerics.dt", dt)?;
        if !(num.t_end.is_finite() && num.t_end >= 0.0) {
            return Err(invalid("numerics.t_end", "must be finite and non-negative"));
        }
        let patch_radius = sc.patches.iter().map(|p| p.outer_radius).fold(0.0, f64::max);
        let h = match num.h {
            Some(h) => h,
            None if patch_radius > 0.0 => patch_radius * DEFAULT_H_FRACTION,
            None => 0.01,
        };
        check_pos("numerics.h", h)?;
        let blob_delta = num.blob_delta.unwrap_or(2.0 * h);
        check_pos("numerics.blob_delta", blob_delta)?;
        let r_guard = num.r_guard.unwrap_or(h / 2.0);
        check_pos("numerics.r_guard", r_guard)?;
        let stride = self.output.stride;
        if stride == 0 {
            return Err(invalid("output.stride", "must be at least 1"));
        }
        let grid_center = num.grid_center.map(PlanePoint::from).unwrap_or_else(|| self.default_center());
        let extent = self.extent_from(grid_center).max(h);
        let half = num.grid_half_extent.unwrap_or(4.0 * extent);
        check_pos("numerics.grid_half_extent", half)?;
        let spacing = num.grid_spacing.unwrap_or(2.0 * h);
        check_pos("numerics.grid_spacing", spacing)?;
        if half / spacing > 5000.0 {
            return Err(invalid("numerics.grid_spacing", "grid would exceed 10^4 nodes per side"));
        }
        let grid = Grid::centered(grid_center, half, spacing).map_err(|e| invalid("numerics.grid_spacing", e.to_string()))?;
        if extent >= grid.inner_radius(grid_center) {
            return Err(invalid("numerics.grid_half_extent", "grid does not cover the initial support"));
        }

        let diag = &self.diagnostics;
        check_pos("diagnostics.constancy_tol", diag.constancy_tol)?;
        if !(diag.support_tol >= 0.0 && diag.hole_tol >= 0.0) {
            return Err(invalid("diagnostics", "tolerances must be non-negative"));
        }
        if let Some(tol) = diag.lp_drift_tol {
            check_pos("diagnostics.lp_drift_tol", tol)?;
        }
        if let Some(tol) = diag.return_tol {
            check_pos("diagnostics.return_tol", tol)?;
        }
        if let Some(tol) = diag.hole_spread_tol {
            check_pos("diagnostics.hole_spread_tol", tol)?;
        }
        if self.tracks_constancy() {
            if let Some(alpha) = diag.constancy_alpha {
                check_finite("diagnostics.constancy_alpha", alpha)?;
            }
            if nv == 0 {
                return Err(invalid("diagnostics.constancy_alpha", "constancy tracking needs a vortex"));
            }
            for (i, v) in self.vortices.points.iter().enumerate() {
                let Some(alpha) = self.constancy_alpha(i) else {
                    return Err(invalid(format!("vortices.points[{i}].alpha"), "no constancy value for this vortex"));
                };
                check_finite(&format!("vortices.points[{i}].alpha"), alpha)?;
                let z: PlanePoint = v.pos.into();
                let inside = sc.patches.iter().any(|p| {
                    p.is_constant_disk()
                        && (p.value - alpha).abs() <= diag.constancy_tol
                        && z.distance(p.center()) < p.outer_radius
                });
                if !inside {
                    return Err(invalid(
                        format!("vortices.points[{i}]"),
                        "vortex lies outside a constant-value disk of the requested alpha",
                    ));
                }
            }
        }
        let support_center = diag
            .support_center
            .map(PlanePoint::from)
            .unwrap_or_else(|| self.default_center());
        let steps = (num.t_end / dt).round() as usize;
        Ok(Resolved {
            h,
            blob_delta,
            r_guard,
            dt,
            t_end: num.t_end,
            steps,
            stride,
            grid,
            support_center,
        })
    }

    /// Constancy is tracked when a global or any per-vortex value is given.
    pub fn tracks_constancy(&self) -> bool {
        self.diagnostics.constancy_alpha.is_some() || self.vortices.points.iter().any(|v| v.alpha.is_some())
    }

    /// The constancy value of vortex `i`, its own if set, else the global one.
    pub fn constancy_alpha(&self, i: usize) -> Option<f64> {
        if !self.tracks_constancy() {
            return None;
        }
        self.vortices.points.get(i)?.alpha.or(self.diagnostics.constancy_alpha)
    }

    /// Initial radius of the constant disk around vortex `i`, when constancy is tracked.
    pub fn initial_constancy_radius(&self, i: usize) -> Option<f64> {
        let alpha = self.constancy_alpha(i)?;
        let z: PlanePoint = self.vortices.points.get(i)?.pos.into();
        self.scenario
            .patches
            .iter()
            .filter(|p| p.is_constant_disk() && (p.value - alpha).abs() <= self.diagnostics.constancy_tol)
            .find(|p| z.distance(p.center()) < p.outer_radius)
            .map(|p| p.outer_radius - z.distance(p.center()))
    }
}

/// Equal-area polar lattice filling one patch.
///
/// Rings of width close to `h` are split into cells of area close to `h^2`, one marker
/// per cell at the radius that halves the ring's area. For a solid disk the innermost
/// two rings are merged, which keeps markers at least `~1.4 h` from the center.
pub fn fill_patch(patch: &PatchSpec, h: f64) -> Vec<Marker> {
    const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;
    let (r_in, r_out) = (patch.inner_radius, patch.outer_radius);
    let rings = (((r_out - r_in) / h).round() as usize).max(1);
    let width = (r_out - r_in) / rings as f64;
    let mut bounds: Vec<f64> = (0..=rings).map(|k| r_in + k as f64 * width).collect();
    if r_in == 0.0 && rings >= 2 {
        bounds.remove(1);
    }
    let last = bounds.len() - 1;
    bounds[last] = r_out;
    let center = patch.center();
    let mut out = Vec::new();
    for (ring, w) in bounds.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let area = PI * (b * b - a * a);
        let count = ((area / (h * h)).round() as usize).max(1);
        let radius = ((a * a + b * b) / 2.0).sqrt();
        let weight = area / count as f64;
        let offset = ring as f64 * GOLDEN_ANGLE;
        for j in 0..count {
            let theta = offset + 2.0 * PI * j as f64 / count as f64;
            let pos = center + PlanePoint::new(radius * theta.cos(), radius * theta.sin());
            out.push(Marker {
                pos,
                omega: patch.value_at(pos),
                weight,
            });
        }
    }
    out
}

/// Initial state of a scenario.
pub fn init_scenario(config: &ScenarioConfig) -> Result<SimState, ScenarioError> {
    let res = config.resolve()?;
    let markers: Vec<Marker> = config
        .scenario
        .patches
        .iter()
        .flat_map(|p| fill_patch(p, res.h))
        .collect();
    let cloud = MarkerCloud::new(&markers, res.blob_delta).map_err(|e| invalid("scenario.patches", e.to_string()))?;
    Ok(SimState {
        time: 0.0,
        cloud,
        vortices: config.vortex_states(),
        mode: config.scenario.mode,
    })
}

/// The two initial states of a twin comparison.
pub fn init_twin(config: &ScenarioConfig) -> Result<(SimState, SimState), ScenarioError> {
    let first = init_scenario(config)?;
    let eta = config.scenario.eta;
    let mut second = first.clone();
    match config.scenario.perturbation {
        Perturbation::VortexOffset => {
            if eta != 0.0 {
                let v = second
                    .vortices
                    .first_mut()
                    .ok_or_else(|| invalid("scenario.perturbation", "vortex offset needs a vortex"))?;
                v.pos.x1 += eta;
            }
        }
        Perturbation::Jitter => {
            if eta != 0.0 {
                let mut rng = ChaCha8Rng::seed_from_u64(config.scenario.seed);
                let cloud = &first.cloud;
                let mut xs = cloud.xs().to_vec();
                let mut ys = cloud.ys().to_vec();
                for (x, y) in xs.iter_mut().zip(ys.iter_mut()) {
                    *x += eta * rng.gen_range(-1.0..=1.0);
                    *y += eta * rng.gen_range(-1.0..=1.0);
                }
                second.cloud = cloud.with_positions(xs, ys);
            }
        }
    }
    Ok((first, second))
}
