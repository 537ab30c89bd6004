//! Pure kernel functions: the Biot-Savart kernel, its smoothed variants,
//! the radial cut-off and the almost-Lipschitz modulus.
//!
//! Everything here is stateless and safe to call from any thread.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("Biot-Savart kernel is singular at the origin")]
    SingularPoint,
    #[error("almost-Lipschitz modulus is undefined for negative argument {0}")]
    NegativeArgument(f64),
    #[error("invalid kernel parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
}

/// A point (or vector) of the plane.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanePoint {
    pub x1: f64,
    pub x2: f64,
}

impl PlanePoint {
    pub const ORIGIN: PlanePoint = PlanePoint { x1: 0.0, x2: 0.0 };

    #[inline]
    pub const fn new(x1: f64, x2: f64) -> Self {
        Self { x1, x2 }
    }

    /// Rotation by a quarter turn: `(x1, x2) -> (-x2, x1)`.
    #[inline]
    pub fn perp(self) -> Self {
        Self::new(-self.x2, self.x1)
    }

    #[inline]
    pub fn dot(self, other: Self) -> f64 {
        self.x1 * other.x1 + self.x2 * other.x2
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x1.hypot(self.x2)
    }

    #[inline]
    pub fn distance(self, other: Self) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x1.is_finite() && self.x2.is_finite()
    }
}

impl Add for PlanePoint {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x1 + rhs.x1, self.x2 + rhs.x2)
    }
}

impl AddAssign for PlanePoint {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        self.x1 += rhs.x1;
        self.x2 += rhs.x2;
    }
}

impl Sub for PlanePoint {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x1 - rhs.x1, self.x2 - rhs.x2)
    }
}

impl SubAssign for PlanePoint {
    #[inline]
    fn sub_assign(&mut self, rhs: Self) {
        self.x1 -= rhs.x1;
        self.x2 -= rhs.x2;
    }
}

impl Mul<f64> for PlanePoint {
    type Output = Self;
    #[inline]
    fn mul(self, s: f64) -> Self {
        Self::new(self.x1 * s, self.x2 * s)
    }
}

impl Neg for PlanePoint {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x1, -self.x2)
    }
}

impl From<[f64; 2]> for PlanePoint {
    fn from(v: [f64; 2]) -> Self {
        Self::new(v[0], v[1])
    }
}

impl From<PlanePoint> for [f64; 2] {
    fn from(p: PlanePoint) -> Self {
        [p.x1, p.x2]
    }
}

/// Smoothing lengths used by the discrete model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    /// Blob smoothing length of the marker sum.
    pub blob_delta: f64,
    /// Matching radius of the regularized kernel.
    pub eps: f64,
    /// Scale of the radial cut-off.
    pub cutoff_delta: f64,
}

impl KernelParams {
    pub fn new(blob_delta: f64, eps: f64, cutoff_delta: f64) -> Result<Self, KernelError> {
        check_positive("blob_delta", blob_delta)?;
        check_positive("eps", eps)?;
        check_positive("cutoff_delta", cutoff_delta)?;
        if blob_delta > 1.0 {
            return Err(KernelError::InvalidParameter {
                name: "blob_delta",
                value: blob_delta,
                reason: "must not exceed 1",
            });
        }
        if eps > 1.0 {
            return Err(KernelError::InvalidParameter {
                name: "eps",
                value: eps,
                reason: "must not exceed 1",
            });
        }
        Ok(Self {
            blob_delta,
            eps,
            cutoff_delta,
        })
    }
}

fn check_positive(name: &'static str, value: f64) -> Result<(), KernelError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(KernelError::InvalidParameter {
            name,
            value,
            reason: "must be finite and strictly positive",
        })
    }
}

/// Shared evaluation path of `K(x) = x^perp / (2 pi |x|^2)`; caller guarantees `x != 0`.
#[inline]
pub(crate) fn biot_savart_unchecked(x: PlanePoint) -> PlanePoint {
    let s = 1.0 / (2.0 * PI * x.norm_sq());
    PlanePoint::new(-x.x2 * s, x.x1 * s)
}

/// The Biot-Savart kernel `K(x) = x^perp / (2 pi |x|^2)`.
pub fn biot_savart(x: PlanePoint) -> Result<PlanePoint, KernelError> {
    if x.x1 == 0.0 && x.x2 == 0.0 {
        return Err(KernelError::SingularPoint);
    }
    Ok(biot_savart_unchecked(x))
}

/// Bounded, divergence-free kernel that coincides with [`biot_savart`] for `|x| >= eps`.
///
/// Inside the ball the kernel is `x^perp (2 - (r/eps)^2) / (2 pi eps^2)`: it matches `K`
/// and its first derivatives at `r = eps`, and its magnitude stays below `1/(pi eps)`.
#[inline]
pub fn regularized_kernel(x: PlanePoint, eps: f64) -> PlanePoint {
    let r2 = x.norm_sq();
    let eps2 = eps * eps;
    if r2 >= eps2 {
        biot_savart_unchecked(x)
    } else {
        let s = (2.0 - r2 / eps2) / (2.0 * PI * eps2);
        PlanePoint::new(-x.x2 * s, x.x1 * s)
    }
}

/// Algebraic blob kernel `x^perp / (2 pi (|x|^2 + delta^2))`.
#[inline]
pub fn blob_kernel(x: PlanePoint, delta: f64) -> PlanePoint {
    let s = 1.0 / (2.0 * PI * (x.norm_sq() + delta * delta));
    PlanePoint::new(-x.x2 * s, x.x1 * s)
}

/// Value and gradient of the radial cut-off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cutoff {
    pub value: f64,
    pub gradient: PlanePoint,
}

/// Radial cut-off: 0 on `|x| <= delta/2`, 1 on `|x| >= delta`, quintic smoothstep between.
pub fn cutoff(x: PlanePoint, delta: f64) -> Cutoff {
    let r = x.norm();
    let s = 2.0 * r / delta - 1.0;
    if s <= 0.0 {
        Cutoff {
            value: 0.0,
            gradient: PlanePoint::ORIGIN,
        }
    } else if s >= 1.0 {
        Cutoff {
            value: 1.0,
            gradient: PlanePoint::ORIGIN,
        }
    } else {
        let value = s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
        let ds = 30.0 * s * s * (1.0 - s) * (1.0 - s);
        // d/dr of s is 2/delta; direction x/r.
        let g = ds * 2.0 / (delta * r);
        Cutoff {
            value,
            gradient: x * g,
        }
    }
}

/// Almost-Lipschitz modulus `phi(z) = z (1 - ln z)` on `[0, 1)`, `1` beyond.
pub fn al_modulus(z: f64) -> Result<f64, KernelError> {
    if z < 0.0 || z.is_nan() {
        return Err(KernelError::NegativeArgument(z));
    }
    Ok(if z == 0.0 {
        0.0
    } else if z < 1.0 {
        z * (1.0 - z.ln())
    } else {
        1.0
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn biot_savart_examples() {
        let k = biot_savart(PlanePoint::new(1.0, 0.0)).unwrap();
        assert_eq!(k.x1, 0.0);
        assert!(close(k.x2, 0.159_154_9, 1e-7));
        let k = biot_savart(PlanePoint::new(0.0, 2.0)).unwrap();
        assert!(close(k.x1, -1.0 / (4.0 * PI), 1e-15));
        assert_eq!(k.x2, 0.0);
        let x = PlanePoint::new(3.0, 4.0);
        assert_eq!(biot_savart(x).unwrap().dot(x), 0.0);
        assert_eq!(biot_savart(PlanePoint::ORIGIN), Err(KernelError::SingularPoint));
    }

    #[test]
    fn regularized_kernel_examples() {
        let eps = 0.3;
        let k = regularized_kernel(PlanePoint::new(eps, 0.0), eps);
        assert!(close(k.x2, 1.0 / (2.0 * PI * eps), 1e-14));
        assert_eq!(regularized_kernel(PlanePoint::ORIGIN, eps), PlanePoint::ORIGIN);
        let k = regularized_kernel(PlanePoint::new(eps / 2.0, 0.0), eps);
        assert!(close(k.x2, 7.0 / (16.0 * PI * eps), 1e-14));
    }

    #[test]
    fn regularized_kernel_is_c1_at_the_matching_radius() {
        // one-sided derivatives of the tangential profile on both sides of r = eps
        let eps = 0.25;
        let step = 1e-6;
        let f = |r: f64| regularized_kernel(PlanePoint::new(r, 0.0), eps).x2;
        let inner = (f(eps) - f(eps - step)) / step;
        let outer = (f(eps + step) - f(eps)) / step;
        assert!((inner - outer).abs() < 1e-3 * outer.abs(), "{inner} vs {outer}");
        assert!((f(eps - 1e-12) - f(eps)).abs() < 1e-9);
    }

    #[test]
    fn regularized_kernel_is_bounded() {
        let eps = 0.1;
        let bound = 1.0 / (PI * eps);
        for i in 0..=2000 {
            let r = 3.0 * eps * i as f64 / 2000.0;
            assert!(regularized_kernel(PlanePoint::new(r, 0.0), eps).norm() <= bound);
        }
    }

    #[test]
    fn blob_kernel_examples() {
        assert_eq!(blob_kernel(PlanePoint::ORIGIN, 0.7), PlanePoint::ORIGIN);
        let k = blob_kernel(PlanePoint::new(1.0, 0.0), 1.0);
        assert!(close(k.x2, 1.0 / (4.0 * PI), 1e-16));
        let x = PlanePoint::new(1.0, 0.0);
        let d = blob_kernel(x, 1e-6) - biot_savart(x).unwrap();
        assert!(d.norm() < 1e-10);
    }

    #[test]
    fn cutoff_examples() {
        let delta = 0.2;
        let c = cutoff(PlanePoint::new(delta / 4.0, 0.0), delta);
        assert_eq!(c.value, 0.0);
        assert_eq!(c.gradient, PlanePoint::ORIGIN);
        let c = cutoff(PlanePoint::new(0.0, 2.0 * delta), delta);
        assert_eq!(c.value, 1.0);
        assert_eq!(c.gradient, PlanePoint::ORIGIN);
        // radial gradient is orthogonal to the tangential kernel in the ramp
        for i in 1..100 {
            let r = delta / 2.0 + delta / 2.0 * i as f64 / 100.0;
            let a = 0.37 * i as f64;
            let x = PlanePoint::new(r * a.cos(), r * a.sin());
            let c = cutoff(x, delta);
            let k = biot_savart(x).unwrap();
            assert!(k.dot(c.gradient).abs() <= 1e-12 * k.norm() * c.gradient.norm());
            assert!(c.value > 0.0 && c.value < 1.0);
        }
    }

    #[test]
    fn cutoff_gradient_matches_finite_differences() {
        let delta = 0.5;
        let h = 1e-6;
        for &(a, b) in &[(0.3, 0.1), (-0.2, 0.3), (0.1, -0.4)] {
            let x = PlanePoint::new(a, b);
            let c = cutoff(x, delta);
            let gx = (cutoff(PlanePoint::new(a + h, b), delta).value
                - cutoff(PlanePoint::new(a - h, b), delta).value)
                / (2.0 * h);
            let gy = (cutoff(PlanePoint::new(a, b + h), delta).value
                - cutoff(PlanePoint::new(a, b - h), delta).value)
                / (2.0 * h);
            assert!(close(c.gradient.x1, gx, 1e-6), "{:?} {gx}", c.gradient);
            assert!(close(c.gradient.x2, gy, 1e-6));
        }
    }

    #[test]
    fn cutoff_gradient_l1_norm_scales_with_delta() {
        // independent radial quadrature of |grad chi| against 3 pi delta / 2
        for &delta in &[1.0, 0.1, 0.01] {
            let n = 20_000;
            let (a, b) = (delta / 2.0, delta);
            let dr = (b - a) / n as f64;
            let total: f64 = (0..n)
                .map(|i| {
                    let r = a + (i as f64 + 0.5) * dr;
                    cutoff(PlanePoint::new(r, 0.0), delta).gradient.norm() * 2.0 * PI * r * dr
                })
                .sum();
            assert!(close(total, 1.5 * PI * delta, 1e-6 * delta), "{total}");
        }
    }

    #[test]
    fn modulus_examples() {
        assert_eq!(al_modulus(1.0).unwrap(), 1.0);
        assert_eq!(al_modulus(0.0).unwrap(), 0.0);
        assert!(close(al_modulus((-1.0f64).exp()).unwrap(), 2.0 / 1f64.exp(), 1e-15));
        assert!(matches!(al_modulus(-0.1), Err(KernelError::NegativeArgument(_))));
        assert!(close(al_modulus(1.0 - 1e-12).unwrap(), 1.0, 1e-11));
    }

    #[test]
    fn modulus_is_monotone_and_concave() {
        let n = 4000;
        let vals: Vec<f64> = (0..=n)
            .map(|i| al_modulus(i as f64 / n as f64).unwrap())
            .collect();
        for w in vals.windows(2) {
            assert!(w[1] >= w[0]);
        }
        for w in vals.windows(3) {
            assert!(w[0] - 2.0 * w[1] + w[2] <= 1e-15);
        }
    }

    #[test]
    fn kernel_params_validation() {
        assert!(KernelParams::new(0.1, 0.2, 0.3).is_ok());
        assert!(KernelParams::new(0.0, 0.2, 0.3).is_err());
        assert!(KernelParams::new(1.5, 0.2, 0.3).is_err());
        assert!(KernelParams::new(0.1, 2.0, 0.3).is_err());
        assert!(KernelParams::new(0.1, 0.2, f64::NAN).is_err());
    }
}
