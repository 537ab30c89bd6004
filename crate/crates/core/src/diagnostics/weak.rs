//! Residual of the distributional transport equation against smooth test functions.

use rayon::prelude::*;

use super::DiagnosticsError;
use crate::dynamics::{SimState, Trajectory};
use crate::field::Grid;
use crate::field::exact_velocity_at_marker;
use crate::kernels::{biot_savart_unchecked, PlanePoint};

/// A compactly supported smooth function of `(t, x)`.
pub trait TestField: Sync {
    fn value(&self, t: f64, x: PlanePoint) -> f64;
    fn time_derivative(&self, t: f64, x: PlanePoint) -> f64;
    fn gradient(&self, t: f64, x: PlanePoint) -> PlanePoint;
    /// Whether `(t, x)` may lie in the support (false only where everything vanishes).
    fn touches(&self, t: f64, x: PlanePoint) -> bool;
    fn check_support(&self, grid: &Grid, t_end: f64) -> Result<(), DiagnosticsError>;
}

/// `amplitude * b(|x - center| / radius) * b(|t - t_center| / t_half)` with `b(s) = (1 - s^2)^3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestFunction {
    pub center: PlanePoint,
    pub radius: f64,
    pub t_center: f64,
    pub t_half: f64,
    pub amplitude: f64,
}

/// `(b, b')` as functions of `q = s^2`: `b = (1 - q)^3`, `db/dq = -3 (1 - q)^2`.
#[inline]
fn bump(q: f64) -> (f64, f64) {
    if q >= 1.0 {
        (0.0, 0.0)
    } else {
        let m = 1.0 - q;
        (m * m * m, -3.0 * m * m)
    }
}

impl TestFunction {
    fn space(&self, x: PlanePoint) -> (f64, PlanePoint) {
        let d = x - self.center;
        let r2 = self.radius * self.radius;
        let (b, db) = bump(d.norm_sq() / r2);
        (b, d * (2.0 * db / r2))
    }

    fn time(&self, t: f64) -> (f64, f64) {
        let s = t - self.t_center;
        let h2 = self.t_half * self.t_half;
        let (b, db) = bump(s * s / h2);
        (b, 2.0 * s * db / h2)
    }
}

impl TestField for TestFunction {
    fn value(&self, t: f64, x: PlanePoint) -> f64 {
        self.amplitude * self.space(x).0 * self.time(t).0
    }

    fn time_derivative(&self, t: f64, x: PlanePoint) -> f64 {
        self.amplitude * self.space(x).0 * self.time(t).1
    }

    fn gradient(&self, t: f64, x: PlanePoint) -> PlanePoint {
        self.space(x).1 * (self.amplitude * self.time(t).0)
    }

    fn touches(&self, t: f64, x: PlanePoint) -> bool {
        self.amplitude != 0.0 && (t - self.t_center).abs() < self.t_half && x.distance(self.center) < self.radius
    }

    fn check_support(&self, grid: &Grid, t_end: f64) -> Result<(), DiagnosticsError> {
        if !(self.radius > 0.0 && self.t_half > 0.0) {
            return Err(DiagnosticsError::Support(format!(
                "radius {} and time half-width {} must be positive",
                self.radius, self.t_half
            )));
        }
        if self.t_center - self.t_half < 0.0 || self.t_center + self.t_half > t_end {
            return Err(DiagnosticsError::Support(format!(
                "time support [{}, {}] leaves [0, {t_end}]",
                self.t_center - self.t_half,
                self.t_center + self.t_half
            )));
        }
        let r = PlanePoint::new(self.radius, self.radius);
        if !grid.contains(self.center - r) || !grid.contains(self.center + r) {
            return Err(DiagnosticsError::Support(format!(
                "disk of radius {} around ({}, {}) leaves the grid",
                self.radius, self.center.x1, self.center.x2
            )));
        }
        Ok(())
    }
}

/// `sum_i c_i psi_i`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearCombination {
    pub terms: Vec<(f64, TestFunction)>,
}

impl TestField for LinearCombination {
    fn value(&self, t: f64, x: PlanePoint) -> f64 {
        self.terms.iter().map(|(c, f)| c * f.value(t, x)).sum()
    }

    fn time_derivative(&self, t: f64, x: PlanePoint) -> f64 {
        self.terms.iter().map(|(c, f)| c * f.time_derivative(t, x)).sum()
    }

    fn gradient(&self, t: f64, x: PlanePoint) -> PlanePoint {
        self.terms
            .iter()
            .fold(PlanePoint::ORIGIN, |acc, (c, f)| acc + f.gradient(t, x) * *c)
    }

    fn touches(&self, t: f64, x: PlanePoint) -> bool {
        self.terms.iter().any(|(c, f)| *c != 0.0 && f.touches(t, x))
    }

    fn check_support(&self, grid: &Grid, t_end: f64) -> Result<(), DiagnosticsError> {
        self.terms.iter().try_for_each(|(_, f)| f.check_support(grid, t_end))
    }
}

/// `sum_k omega_k w_k (d_t psi + (v + H) . grad psi)(t, x_k)` for one state.
fn spatial_integrand<F: TestField + ?Sized>(state: &SimState, psi: &F) -> f64 {
    let cloud = &state.cloud;
    let t = state.time;
    let active: Vec<usize> = (0..cloud.len()).filter(|&k| psi.touches(t, cloud.pos(k))).collect();
    let terms: Vec<f64> = active
        .par_iter()
        .map(|&k| {
            let x = cloud.pos(k);
            let mut u = exact_velocity_at_marker(cloud, k);
            for v in &state.vortices {
                u += biot_savart_unchecked(x - v.pos) * v.intensity;
            }
            cloud.strengths()[k] * (psi.time_derivative(t, x) + u.dot(psi.gradient(t, x)))
        })
        .collect();
    terms.iter().sum()
}

/// Signed residual `int omega_0 psi(0) + int int omega (d_t psi + (v + H) . grad psi)`.
///
/// Space integrals use the markers as quadrature nodes, the time integral uses the
/// trapezoid rule over the snapshots.
pub fn weak_residual_signed<F: TestField + ?Sized>(traj: &Trajectory, psi: &F, grid: &Grid) -> Result<f64, DiagnosticsError> {
    psi.check_support(grid, traj.resolved.t_end)?;
    let first = &traj.first().state;
    let initial: f64 = (0..first.cloud.len())
        .map(|k| first.cloud.strengths()[k] * psi.value(0.0, first.cloud.pos(k)))
        .sum();
    let values: Vec<(f64, f64)> = traj
        .snapshots
        .iter()
        .map(|s| (s.state.time, spatial_integrand(&s.state, psi)))
        .collect();
    let time_integral: f64 = values
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
        .sum();
    Ok(initial + time_integral)
}

pub fn weak_residual<F: TestField + ?Sized>(traj: &Trajectory, psi: &F, grid: &Grid) -> Result<f64, DiagnosticsError> {
    weak_residual_signed(traj, psi, grid).map(f64::abs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump() -> TestFunction {
        TestFunction {
            center: PlanePoint::new(0.2, -0.1),
            radius: 0.3,
            t_center: 0.5,
            t_half: 0.4,
            amplitude: 1.7,
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let f = bump();
        let h = 1e-6;
        for &(t, x1, x2) in &[(0.4, 0.25, -0.05), (0.7, 0.1, 0.0), (0.3, 0.35, -0.2)] {
            let x = PlanePoint::new(x1, x2);
            let ft = (f.value(t + h, x) - f.value(t - h, x)) / (2.0 * h);
            assert!((ft - f.time_derivative(t, x)).abs() < 1e-7);
            let g = f.gradient(t, x);
            let fx = (f.value(t, x + PlanePoint::new(h, 0.0)) - f.value(t, x - PlanePoint::new(h, 0.0))) / (2.0 * h);
            let fy = (f.value(t, x + PlanePoint::new(0.0, h)) - f.value(t, x - PlanePoint::new(0.0, h))) / (2.0 * h);
            assert!((fx - g.x1).abs() < 1e-7);
            assert!((fy - g.x2).abs() < 1e-7);
        }
    }

    #[test]
    fn vanishes_outside_support() {
        let f = bump();
        let out = PlanePoint::new(0.6, 0.0);
        assert_eq!(f.value(0.5, out), 0.0);
        assert_eq!(f.gradient(0.5, out), PlanePoint::ORIGIN);
        assert_eq!(f.value(0.95, f.center), 0.0);
        assert!(!f.touches(0.5, out));
        assert!(f.touches(0.5, f.center));
    }

    #[test]
    fn support_checks() {
        let grid = Grid::centered(PlanePoint::ORIGIN, 1.0, 0.1).unwrap();
        assert!(bump().check_support(&grid, 1.0).is_ok());
        assert!(bump().check_support(&grid, 0.8).is_err());
        let mut far = bump();
        far.center = PlanePoint::new(0.9, 0.0);
        assert!(far.check_support(&grid, 1.0).is_err());
    }
}
