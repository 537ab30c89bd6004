//! Radius laws, collision margins and norm drift.

use super::{linear_fit, DiagnosticsError, FitResult};
use crate::dynamics::Trajectory;
use crate::field::{deposit_vorticity, grid_lp_norm, inner_support_radius, marker_lp_norm, FieldError};
use crate::kernels::PlanePoint;

/// `R(t) = exp(1 - (1 - ln R0) e^{2 C t})`, the shrinking radius of the constancy disk.
pub fn predicted_constancy_radius(t: f64, r0: f64, c: f64) -> Result<f64, DiagnosticsError> {
    if !(r0 > 0.0 && r0 <= 1.0) {
        return Err(DiagnosticsError::Domain {
            name: "R0",
            value: r0,
            reason: "must lie in (0, 1]",
        });
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(DiagnosticsError::Domain {
            name: "C",
            value: c,
            reason: "must be positive",
        });
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(DiagnosticsError::Domain {
            name: "t",
            value: t,
            reason: "must be non-negative",
        });
    }
    // R0 exp(-(1 - ln R0)(e^{2Ct} - 1)), exact at t = 0
    Ok(r0 * (-(1.0 - r0.ln()) * (2.0 * c * t).exp_m1()).exp())
}

/// Upper bound `y(t) <= intercept + slope t + band` on `y = ln(1 - ln rho)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstancyEnvelope {
    pub slope: f64,
    pub intercept: f64,
    pub band: f64,
}

impl ConstancyEnvelope {
    /// Smallest constancy radius the envelope allows at time `t`.
    pub fn radius_at(&self, t: f64) -> f64 {
        (1.0 - (self.intercept + self.slope * t + self.band).exp()).exp()
    }
}

fn constancy_samples(series: &[(f64, f64)]) -> Result<(Vec<f64>, Vec<f64>), DiagnosticsError> {
    if series.len() < 5 {
        return Err(DiagnosticsError::TooFewSamples {
            needed: 5,
            got: series.len(),
        });
    }
    for &(t, rho) in series {
        if rho <= 0.0 {
            return Err(DiagnosticsError::ConstancyLost { time: t });
        }
        if rho > 1.0 {
            return Err(DiagnosticsError::Domain {
                name: "rho",
                value: rho,
                reason: "constancy radius must not exceed 1",
            });
        }
    }
    Ok((
        series.iter().map(|s| s.0).collect(),
        series.iter().map(|s| (1.0 - s.1.ln()).ln()).collect(),
    ))
}

/// Line fitted to the first half of the series, widened by that half's largest
/// residual and by the effect of a radius error of `resolution` (the lattice
/// spacing; 0 for exact data).
pub fn constancy_envelope(series: &[(f64, f64)], resolution: f64) -> Result<ConstancyEnvelope, DiagnosticsError> {
    let (ts, ys) = constancy_samples(series)?;
    let half = ts.len().div_ceil(2).max(3);
    let (slope, intercept, _) = linear_fit(&ts[..half], &ys[..half]);
    let half_band = ts[..half]
        .iter()
        .zip(&ys[..half])
        .map(|(t, y)| (y - (intercept + slope * t)).abs())
        .fold(0.0, f64::max);
    // dy/drho = -1 / (rho (1 - ln rho))
    let meas = series
        .iter()
        .map(|&(_, rho)| resolution / (rho * (1.0 - rho.ln())))
        .fold(0.0, f64::max);
    Ok(ConstancyEnvelope {
        slope,
        intercept,
        band: half_band + meas + 1e-12,
    })
}

/// Fits `ln(1 - ln rho(t))` against `t`; the empirical constant is half the slope.
///
/// The law passes when every sample lies inside [`constancy_envelope`].
pub fn fit_constancy_constant(series: &[(f64, f64)], resolution: f64) -> Result<FitResult, DiagnosticsError> {
    let (ts, ys) = constancy_samples(series)?;
    let (slope, intercept, residual) = linear_fit(&ts, &ys);
    let env = constancy_envelope(series, resolution)?;
    let pass = ts
        .iter()
        .zip(&ys)
        .all(|(t, y)| *y <= env.intercept + env.slope * t + env.band);
    Ok(FitResult {
        parameter: slope / 2.0,
        slope,
        intercept,
        residual,
        samples: series.len(),
        pass,
    })
}

/// Markers whose value differs from `alpha` yet lie within the envelope radius of
/// vortex `vortex`, summed over all snapshots.
pub fn constancy_intrusions(traj: &Trajectory, vortex: usize, alpha: f64, tol: f64, env: &ConstancyEnvelope) -> usize {
    traj.snapshots
        .iter()
        .map(|s| {
            let z = s.state.vortices[vortex].pos;
            let r = env.radius_at(s.record.time);
            let cloud = &s.state.cloud;
            (0..cloud.len())
                .filter(|&k| (cloud.omegas()[k] - alpha).abs() > tol && cloud.pos(k).distance(z) < r)
                .count()
        })
        .sum()
}

/// The constancy radius series of vortex `vortex`.
pub fn constancy_series(traj: &Trajectory, vortex: usize) -> Vec<(f64, f64)> {
    traj.snapshots
        .iter()
        .filter_map(|s| s.record.constancy_radius.get(vortex).map(|&r| (s.record.time, r)))
        .collect()
}

/// The support radius series.
pub fn support_series(traj: &Trajectory) -> Vec<(f64, f64)> {
    traj.snapshots
        .iter()
        .map(|s| (s.record.time, s.record.support_radius))
        .collect()
}

/// Linear fit of the support radius; passes when no sample exceeds the line by `2 h`.
pub fn support_growth_fit(series: &[(f64, f64)], h: f64) -> Result<FitResult, DiagnosticsError> {
    if series.len() < 5 {
        return Err(DiagnosticsError::TooFewSamples {
            needed: 5,
            got: series.len(),
        });
    }
    let ts: Vec<f64> = series.iter().map(|s| s.0).collect();
    let rs: Vec<f64> = series.iter().map(|s| s.1).collect();
    let (slope, intercept, residual) = linear_fit(&ts, &rs);
    let worst = ts
        .iter()
        .zip(&rs)
        .map(|(t, r)| r - (intercept + slope * t))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(FitResult {
        parameter: slope,
        slope,
        intercept,
        residual,
        samples: series.len(),
        pass: worst < 2.0 * h,
    })
}

/// Fits `ln r(t) = ln C1 - C2 t`; passes when `r(t) >= C1 e^{-C2 t} - h` at every sample.
pub fn fit_hole_law(series: &[(f64, f64)], h: f64) -> Result<FitResult, DiagnosticsError> {
    if series.len() < 2 {
        return Err(DiagnosticsError::TooFewSamples {
            needed: 2,
            got: series.len(),
        });
    }
    if let Some(&(_, r)) = series.iter().find(|s| !(s.1 > 0.0 && s.1.is_finite())) {
        return Err(DiagnosticsError::Domain {
            name: "hole radius",
            value: r,
            reason: "must be positive and finite",
        });
    }
    let ts: Vec<f64> = series.iter().map(|s| s.0).collect();
    let ls: Vec<f64> = series.iter().map(|s| s.1.ln()).collect();
    let (slope, intercept, residual) = linear_fit(&ts, &ls);
    let pass = series
        .iter()
        .all(|&(t, r)| r >= (intercept + slope * t).exp() - h - 1e-12);
    Ok(FitResult {
        parameter: -slope,
        slope,
        intercept,
        residual,
        samples: series.len(),
        pass,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoleSeries {
    pub series: Vec<(f64, f64)>,
    pub fit: FitResult,
    pub pass: bool,
}

/// Inner radius of the vorticity support around the pinned vortex at each snapshot.
pub fn hole_radius(traj: &Trajectory, tol: f64) -> Result<HoleSeries, DiagnosticsError> {
    let series: Vec<(f64, f64)> = traj
        .snapshots
        .iter()
        .map(|s| (s.record.time, inner_support_radius(&s.state.cloud, PlanePoint::ORIGIN, tol)))
        .collect();
    let fit = fit_hole_law(&series, traj.resolved.h)?;
    Ok(HoleSeries {
        pass: fit.pass,
        series,
        fit,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollisionMargin {
    /// `(t, min over markers and vortices of |x - z|)`.
    pub series: Vec<(f64, f64)>,
    pub guard_events: u64,
    pub r_guard: f64,
    /// Margin above `r_guard` at every snapshot and no guard events.
    pub pass: bool,
}

pub fn collision_margin(traj: &Trajectory) -> CollisionMargin {
    let series: Vec<(f64, f64)> = traj
        .snapshots
        .iter()
        .map(|s| {
            let cloud = &s.state.cloud;
            let m = s
                .state
                .vortices
                .iter()
                .flat_map(|v| (0..cloud.len()).map(move |k| cloud.pos(k).distance(v.pos)))
                .fold(f64::INFINITY, f64::min);
            (s.record.time, m)
        })
        .collect();
    let r_guard = traj.resolved.r_guard;
    let guard_events = traj.total_guard_events();
    let pass = guard_events == 0 && series.iter().all(|&(_, m)| m > r_guard);
    CollisionMargin {
        series,
        guard_events,
        r_guard,
        pass,
    }
}

/// Fits `ln margin(T) = ln A + B ln margin(0)` across a family of runs; `parameter` is `B`.
pub fn margin_exponent_fit(family: &[CollisionMargin]) -> Result<FitResult, DiagnosticsError> {
    if family.len() < 2 {
        return Err(DiagnosticsError::TooFewSamples {
            needed: 2,
            got: family.len(),
        });
    }
    let x: Vec<f64> = family.iter().map(|m| m.series[0].1.ln()).collect();
    let y: Vec<f64> = family.iter().map(|m| m.series.last().expect("nonempty").1.ln()).collect();
    let (slope, intercept, residual) = linear_fit(&x, &y);
    Ok(FitResult {
        parameter: slope,
        slope,
        intercept,
        residual,
        samples: family.len(),
        pass: slope.is_finite() && family.iter().all(|m| m.pass),
    })
}

/// Largest relative change of the deposited grid `L^p` norm over the trajectory.
pub fn lp_drift(traj: &Trajectory, p: f64) -> Result<f64, FieldError> {
    let grid = traj.resolved.grid;
    let norm = |k: usize| -> Result<f64, FieldError> {
        let f = deposit_vorticity(&traj.snapshots[k].state.cloud, &grid)?;
        Ok(grid_lp_norm(&f, p))
    };
    let initial = norm(0)?;
    let mut worst: f64 = 0.0;
    for k in 1..traj.snapshots.len() {
        worst = worst.max((norm(k)? - initial).abs() / initial);
    }
    Ok(worst)
}

/// Same as [`lp_drift`] with the marker-level norm `(sum |omega|^p weight)^(1/p)`.
pub fn marker_lp_drift(traj: &Trajectory, p: f64) -> f64 {
    let initial = marker_lp_norm(&traj.first().state.cloud, p);
    traj.snapshots
        .iter()
        .map(|s| (marker_lp_norm(&s.state.cloud, p) - initial).abs() / initial)
        .fold(0.0, f64::max)
}
