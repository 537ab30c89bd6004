//! Comparison of two trajectories started from nearby data.

use super::DiagnosticsError;
use crate::dynamics::Trajectory;
use crate::field::{harmonic_mean_value_defect, induced_velocity, l2_velocity_diff, Grid};
use crate::kernels::PlanePoint;

fn check_aligned(a: &Trajectory, b: &Trajectory) -> Result<(), DiagnosticsError> {
    if a.snapshots.len() != b.snapshots.len() {
        return Err(DiagnosticsError::LengthMismatch {
            a: a.snapshots.len(),
            b: b.snapshots.len(),
        });
    }
    for (index, (sa, sb)) in a.snapshots.iter().zip(&b.snapshots).enumerate() {
        if sa.record.time.to_bits() != sb.record.time.to_bits() {
            return Err(DiagnosticsError::TimeMismatch {
                index,
                a: sa.record.time,
                b: sb.record.time,
            });
        }
    }
    Ok(())
}

/// `r(t) = ||v_A - v_B||^2 + sum_i |z_i^A - z_i^B|^2` at each shared snapshot time.
pub fn twin_divergence(a: &Trajectory, b: &Trajectory, grid: &Grid) -> Result<Vec<(f64, f64)>, DiagnosticsError> {
    check_aligned(a, b)?;
    Ok(a.snapshots
        .iter()
        .zip(&b.snapshots)
        .map(|(sa, sb)| {
            let field = l2_velocity_diff(&sa.state.cloud, &sb.state.cloud, grid).value;
            let vortex: f64 = sa
                .state
                .vortices
                .iter()
                .zip(&sb.state.vortices)
                .map(|(va, vb)| va.pos.distance(vb.pos).powi(2))
                .sum();
            (sa.record.time, field + vortex)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicSample {
    pub time: f64,
    pub center: PlanePoint,
    /// Circle radius, a fixed fraction of the joint constancy radius.
    pub radius: f64,
    pub defect: f64,
    /// `||v_A - v_B||` on the grid.
    pub l2_norm: f64,
}

/// Mean-value defect of `v_A - v_B` on a circle inside the disk where both clouds are constant.
///
/// The circle is centered at the midpoint of the two first vortices; its radius is
/// `fraction` times the largest radius fitting inside both constancy disks.
pub fn twin_harmonic_defects(
    a: &Trajectory,
    b: &Trajectory,
    grid: &Grid,
    fraction: f64,
    nsamples: usize,
) -> Result<Vec<HarmonicSample>, DiagnosticsError> {
    check_aligned(a, b)?;
    let mut out = Vec::with_capacity(a.snapshots.len());
    for (sa, sb) in a.snapshots.iter().zip(&b.snapshots) {
        let (Some(za), Some(zb)) = (sa.state.vortices.first(), sb.state.vortices.first()) else {
            return Err(DiagnosticsError::Support("twin pair has no vortex".into()));
        };
        let (Some(&ra), Some(&rb)) = (sa.record.constancy_radius.first(), sb.record.constancy_radius.first()) else {
            return Err(DiagnosticsError::Support("constancy radius was not recorded".into()));
        };
        let center = (za.pos + zb.pos) * 0.5;
        let joint = (ra - center.distance(za.pos)).min(rb - center.distance(zb.pos));
        if joint <= 0.0 {
            return Err(DiagnosticsError::ConstancyLost { time: sa.record.time });
        }
        let radius = fraction * joint;
        let (ca, cb) = (&sa.state.cloud, &sb.state.cloud);
        let defect = harmonic_mean_value_defect(
            |x| induced_velocity(ca, x) - induced_velocity(cb, x),
            center,
            radius,
            nsamples,
        );
        let l2_norm = l2_velocity_diff(ca, cb, grid).value.sqrt();
        out.push(HarmonicSample {
            time: sa.record.time,
            center,
            radius,
            defect,
            l2_norm,
        });
    }
    Ok(out)
}
