//! Checks of the qualitative laws, evaluated on finished trajectories.
//!
//! The constants in the radius laws are never known in closed form, so every law
//! is checked as a shape test: data are transformed so the law becomes affine in
//! `t`, a line is fitted, and the run passes when the data stay on the allowed side
//! of that line within a stated band.

use thiserror::Error;

use crate::dynamics::scenario::{Resolved, ScenarioConfig};
use crate::dynamics::{Mode, SimState};
use crate::field::{
    constancy_radius, deposit_vorticity, grid_lp_norm, inner_support_radius, support_radius, FieldError, Grid,
};
use crate::kernels::PlanePoint;

mod laws;
mod twin;
mod weak;

pub use laws::{
    collision_margin, constancy_envelope, constancy_intrusions, constancy_series, fit_constancy_constant, fit_hole_law,
    hole_radius, lp_drift, margin_exponent_fit, marker_lp_drift, predicted_constancy_radius, support_growth_fit,
    support_series, CollisionMargin, ConstancyEnvelope, HoleSeries,
};
pub use twin::{twin_divergence, twin_harmonic_defects, HarmonicSample};
pub use weak::{weak_residual, weak_residual_signed, LinearCombination, TestField, TestFunction};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("{name} = {value} is outside the domain: {reason}")]
    Domain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("constancy radius reached zero at t = {time}")]
    ConstancyLost { time: f64 },
    #[error("snapshot {index} times differ: {a} vs {b}")]
    TimeMismatch { index: usize, a: f64, b: f64 },
    #[error("trajectories have {a} and {b} snapshots")]
    LengthMismatch { a: usize, b: usize },
    #[error("test function support violation: {0}")]
    Support(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Scalars recorded at one output time.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub time: f64,
    /// Constancy radius around each vortex, empty when not tracked.
    pub constancy_radius: Vec<f64>,
    pub support_radius: f64,
    pub l1: Option<f64>,
    pub l2: Option<f64>,
    pub linf: Option<f64>,
    pub twin_r: Option<f64>,
    pub min_vortex_marker_dist: Option<f64>,
    pub min_vortex_pair_dist: Option<f64>,
    pub hole_radius: Option<f64>,
    pub guard_event_count: u64,
}

/// Least-squares line plus the verdict of the law it was fitted for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    /// The empirical constant the fit stands for (its meaning depends on the law).
    pub parameter: f64,
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
    pub samples: usize,
    pub pass: bool,
}

/// Ordinary least squares `y = intercept + slope x`; returns `(slope, intercept, rms)`.
pub(crate) fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let rms = (x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - (intercept + slope * a);
            r * r
        })
        .sum::<f64>()
        / n)
        .sqrt();
    (slope, intercept, rms)
}

/// Computes [`DiagnosticsRecord`]s for one scenario.
#[derive(Debug, Clone)]
pub struct Recorder {
    /// Constancy value per vortex, empty when constancy is not tracked.
    alphas: Vec<f64>,
    constancy_tol: f64,
    support_tol: f64,
    hole_tol: f64,
    lp_norms: bool,
    support_center: PlanePoint,
    grid: Grid,
}

impl Recorder {
    pub fn new(config: &ScenarioConfig, res: &Resolved) -> Self {
        let d = &config.diagnostics;
        Self {
            alphas: (0..config.vortices.points.len())
                .map_while(|i| config.constancy_alpha(i))
                .collect(),
            constancy_tol: d.constancy_tol,
            support_tol: d.support_tol,
            hole_tol: d.hole_tol,
            lp_norms: d.lp_norms,
            support_center: res.support_center,
            grid: res.grid,
        }
    }

    pub fn record(&self, state: &SimState, guard_events: u64) -> Result<DiagnosticsRecord, FieldError> {
        let cloud = &state.cloud;
        let constancy = state
            .vortices
            .iter()
            .zip(&self.alphas)
            .map(|(v, &alpha)| constancy_radius(cloud, v.pos, alpha, self.constancy_tol))
            .collect();
        let (l1, l2, linf) = if self.lp_norms && !cloud.is_empty() {
            let field = deposit_vorticity(cloud, &self.grid)?;
            (
                Some(grid_lp_norm(&field, 1.0)),
                Some(grid_lp_norm(&field, 2.0)),
                Some(grid_lp_norm(&field, f64::INFINITY)),
            )
        } else {
            (None, None, None)
        };
        let min_vortex_marker_dist = if state.vortices.is_empty() || cloud.is_empty() {
            None
        } else {
            Some(
                state
                    .vortices
                    .iter()
                    .flat_map(|v| (0..cloud.len()).map(move |k| cloud.pos(k).distance(v.pos)))
                    .fold(f64::INFINITY, f64::min),
            )
        };
        let min_vortex_pair_dist = if state.vortices.len() < 2 {
            None
        } else {
            let mut m = f64::INFINITY;
            for (i, a) in state.vortices.iter().enumerate() {
                for b in &state.vortices[i + 1..] {
                    m = m.min(a.pos.distance(b.pos));
                }
            }
            Some(m)
        };
        let hole_radius = (state.mode == Mode::Fixed)
            .then(|| inner_support_radius(cloud, PlanePoint::ORIGIN, self.hole_tol));
        Ok(DiagnosticsRecord {
            time: state.time,
            constancy_radius: constancy,
            support_radius: support_radius(cloud, self.support_center, self.support_tol),
            l1,
            l2,
            linf,
            twin_r: None,
            min_vortex_marker_dist,
            min_vortex_pair_dist,
            hole_radius,
            guard_event_count: guard_events,
        })
    }
}
