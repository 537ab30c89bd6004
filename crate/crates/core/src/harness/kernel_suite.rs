//! Numerical invariants of the kernels, run by `check-kernels`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::kernels::{al_modulus, biot_savart, blob_kernel, regularized_kernel, PlanePoint};

pub const ORTHOGONALITY_SAMPLES: usize = 1_000_000;
pub const DIVERGENCE_SAMPLES: usize = 100_000;
pub const FD_STEP: f64 = 1e-5;
pub const DIVERGENCE_TOL: f64 = 1e-6;
/// Smallest radius at which divergences are sampled outside the regularized core.
///
/// The central difference carries a truncation error of about `step^2 / r^4`, which
/// exceeds the tolerance for `r` much below 0.1.
pub const DIVERGENCE_MIN_RADIUS: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct KernelCheck {
    pub name: &'static str,
    /// The worst observed value of the checked quantity.
    pub worst: f64,
    pub pass: bool,
}

fn random_point(rng: &mut ChaCha8Rng, r_min: f64, r_max: f64) -> PlanePoint {
    let r = (rng.gen_range(r_min.ln()..r_max.ln())).exp();
    let a = rng.gen_range(0.0..2.0 * PI);
    PlanePoint::new(r * a.cos(), r * a.sin())
}

fn fd_divergence<F: Fn(PlanePoint) -> PlanePoint>(f: &F, x: PlanePoint) -> f64 {
    let e1 = PlanePoint::new(FD_STEP, 0.0);
    let e2 = PlanePoint::new(0.0, FD_STEP);
    ((f(x + e1).x1 - f(x - e1).x1) + (f(x + e2).x2 - f(x - e2).x2)) / (2.0 * FD_STEP)
}

fn max_divergence<F: Fn(PlanePoint) -> PlanePoint + Sync>(f: F, points: &[PlanePoint]) -> f64 {
    points
        .par_iter()
        .map(|&x| fd_divergence(&f, x).abs())
        .collect::<Vec<_>>()
        .into_iter()
        .fold(0.0, f64::max)
}

/// Runs every kernel invariant; `eps` and `delta` are the regularization and blob lengths.
pub fn run_kernel_suite(eps: f64, delta: f64, seed: u64) -> Vec<KernelCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    let points: Vec<PlanePoint> = (0..ORTHOGONALITY_SAMPLES)
        .map(|_| random_point(&mut rng, 1e-6, 1e6))
        .collect();
    let worst = points
        .par_iter()
        .map(|&x| {
            let k = biot_savart(x).expect("sample points are nonzero");
            k.dot(x).abs() / (f64::EPSILON * k.norm() * x.norm())
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(0.0, f64::max);
    out.push(KernelCheck {
        name: "orthogonality_eps_units",
        worst,
        pass: worst <= 4.0,
    });

    let far: Vec<PlanePoint> = (0..DIVERGENCE_SAMPLES)
        .map(|_| random_point(&mut rng, DIVERGENCE_MIN_RADIUS, 10.0))
        .collect();
    // the regularized kernel is a cubic polynomial inside its core, so the difference
    // quotient is exact there up to rounding
    let core_and_far: Vec<PlanePoint> = (0..DIVERGENCE_SAMPLES)
        .map(|_| random_point(&mut rng, 1e-4 * eps, eps - 2.0 * FD_STEP))
        .chain(far.iter().copied())
        .collect();
    for (name, worst) in [
        ("divergence_biot_savart", max_divergence(|x| biot_savart(x).expect("nonzero"), &far)),
        ("divergence_regularized", max_divergence(|x| regularized_kernel(x, eps), &core_and_far)),
        ("divergence_blob", max_divergence(|x| blob_kernel(x, delta), &far)),
    ] {
        out.push(KernelCheck {
            name,
            worst,
            pass: worst < DIVERGENCE_TOL,
        });
    }

    let mut mismatches = 0usize;
    for _ in 0..DIVERGENCE_SAMPLES {
        let x = random_point(&mut rng, eps, 1e3 * eps);
        let a = regularized_kernel(x, eps);
        let b = biot_savart(x).expect("nonzero");
        if a.x1.to_bits() != b.x1.to_bits() || a.x2.to_bits() != b.x2.to_bits() {
            mismatches += 1;
        }
    }
    out.push(KernelCheck {
        name: "regularized_matches_outside_eps",
        worst: mismatches as f64,
        pass: mismatches == 0,
    });

    // log grid over (1e-9, 10], integer p in [1, 64]
    let mut worst = f64::NEG_INFINITY;
    for i in 0..=2000 {
        let t = 10f64.powf(-9.0 + 10.0 * i as f64 / 2000.0);
        let phi = al_modulus(t).expect("positive argument");
        for p in 1..=64 {
            let p = p as f64;
            worst = worst.max(phi - p * t.powf(1.0 - 1.0 / p));
        }
    }
    out.push(KernelCheck {
        name: "modulus_power_bound",
        worst,
        pass: worst <= 1e-12,
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn divergence_of_rotation_is_zero_and_of_source_is_two() {
        let x = PlanePoint::new(0.3, -0.7);
        assert!(fd_divergence(&|p: PlanePoint| p.perp(), x).abs() < 1e-10);
        assert!((fd_divergence(&|p: PlanePoint| p, x) - 2.0).abs() < 1e-10);
    }
}
