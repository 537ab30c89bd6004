use std::f64::consts::PI;

use super::scenario::{
    DiagnosticsSection, NumericsSection, OutputSection, PatchSpec, Perturbation, ScenarioSection, VortexSpec,
    VorticesSection,
};
use super::*;
use crate::diagnostics::{lp_drift, marker_lp_drift};
use crate::field::Marker;
use crate::kernels::biot_savart;

fn empty_state(vortices: Vec<PointVortex>, mode: Mode) -> SimState {
    SimState {
        time: 0.0,
        cloud: MarkerCloud::new(&[], 0.1).unwrap(),
        vortices,
        mode,
    }
}

fn vortex(x1: f64, x2: f64, intensity: f64) -> PointVortex {
    PointVortex {
        pos: PlanePoint::new(x1, x2),
        intensity,
    }
}

fn config(mode: Mode, patches: Vec<PatchSpec>, points: Vec<VortexSpec>, t_end: f64, h: f64) -> ScenarioConfig {
    ScenarioConfig {
        scenario: ScenarioSection {
            mode,
            patches,
            perturbation: Perturbation::VortexOffset,
            eta: 0.0,
            seed: 0,
        },
        vortices: VorticesSection { points },
        numerics: NumericsSection {
            t_end,
            h: Some(h),
            ..Default::default()
        },
        diagnostics: DiagnosticsSection::default(),
        output: OutputSection::default(),
    }
}

#[test]
fn total_field_of_single_vortex_is_the_kernel() {
    let sys = VortexSystem::new(0.01);
    let state = empty_state(vec![vortex(0.0, 0.0, 1.0)], Mode::Moving);
    let u = sys.total_field(&state, PlanePoint::new(1.0, 0.0));
    assert!((u.x1).abs() < 1e-16);
    assert!((u.x2 - 1.0 / (2.0 * PI)).abs() < 1e-15);
    assert_eq!(sys.guard_events(), 0);
    // inside the guard radius the field is bounded and counted
    let near = sys.total_field(&state, PlanePoint::new(1e-6, 0.0));
    assert!(near.norm() < 1.0 / (PI * 0.01));
    assert_eq!(sys.guard_events(), 1);
}

#[test]
fn total_field_superposes_cloud_and_vortices() {
    let sys = VortexSystem::new(0.01);
    let cloud = MarkerCloud::new(
        &[Marker {
            pos: PlanePoint::new(0.0, 1.0),
            omega: 2.0,
            weight: 0.5,
        }],
        0.05,
    )
    .unwrap();
    let state = SimState {
        time: 0.0,
        cloud: cloud.clone(),
        vortices: vec![vortex(0.5, 0.0, -1.5)],
        mode: Mode::Moving,
    };
    let x = PlanePoint::new(0.3, 0.4);
    let expect = crate::field::induced_velocity(&cloud, x) + biot_savart(x - PlanePoint::new(0.5, 0.0)).unwrap() * -1.5;
    assert!((sys.total_field(&state, x) - expect).norm() < 1e-15);
}

#[test]
fn lone_vortex_does_not_self_advect() {
    let sys = VortexSystem::new(0.01);
    let state = empty_state(vec![vortex(0.3, -0.2, 4.0)], Mode::Moving);
    assert_eq!(sys.vortex_rhs(&state, 0).unwrap(), PlanePoint::ORIGIN);
    let next = sys.rk4_step(&state, 0.1).unwrap();
    assert_eq!(next.vortices[0].pos, state.vortices[0].pos);
}

#[test]
fn pair_speed_matches_point_vortex_theory() {
    let sys = VortexSystem::new(0.01);
    let rho = 0.5;
    let state = empty_state(vec![vortex(-rho, 0.0, 1.0), vortex(rho, 0.0, 1.0)], Mode::Multi);
    let u = sys.vortex_rhs(&state, 1).unwrap();
    assert!(u.x1.abs() < 1e-16);
    assert!((u.x2 - 1.0 / (4.0 * PI * rho)).abs() < 1e-15);
    assert!(sys.vortex_rhs(&state, 2).is_err());
}

#[test]
fn pinned_vortex_has_no_velocity() {
    let sys = VortexSystem::new(0.01);
    let state = empty_state(vec![vortex(0.0, 0.0, 1.0)], Mode::Fixed);
    assert_eq!(sys.vortex_rhs(&state, 0), Err(DynamicsError::PinnedVortex));
}

#[test]
fn vortex_at_center_of_symmetric_patch_stays_put() {
    let cfg = config(
        Mode::Moving,
        vec![PatchSpec::disk([0.0, 0.0], 0.5, 1.0)],
        vec![VortexSpec {
            pos: [0.0, 0.0],
            intensity: 1.0,
            alpha: None,
        }],
        0.0,
        0.02,
    );
    let state = init_scenario(&cfg).unwrap();
    let sys = VortexSystem::new(0.01);
    assert!(sys.vortex_rhs(&state, 0).unwrap().norm() < 1e-10);
}

#[test]
fn marker_rhs_matches_total_field() {
    let cfg = config(Mode::Moving, vec![PatchSpec::disk([0.0, 0.0], 0.3, 1.0)], vec![], 0.0, 0.03);
    let state = init_scenario(&cfg).unwrap();
    let sys = VortexSystem::new(0.015);
    for k in [0, 7, state.cloud.len() - 1] {
        assert_eq!(sys.marker_rhs(&state, k), sys.total_field(&state, state.cloud.pos(k)));
    }
}

#[test]
fn rk4_rejects_bad_steps() {
    let sys = VortexSystem::new(0.01);
    let state = empty_state(vec![], Mode::Moving);
    assert!(sys.rk4_step(&state, 0.0).is_err());
    assert!(sys.rk4_step(&state, -1e-3).is_err());
    assert!(sys.rk4_step(&state, f64::NAN).is_err());
    assert!(sys.rk4_step_signed(&state, -1e-3).is_ok());
}

#[test]
fn rk4_on_empty_scenario_only_advances_time() {
    let sys = VortexSystem::new(0.01);
    let state = empty_state(vec![], Mode::Moving);
    let next = sys.rk4_step(&state, 0.25).unwrap();
    assert_eq!(next.time, 0.25);
    assert!(next.cloud.is_empty() && next.vortices.is_empty());
}

#[test]
fn co_rotating_pair_returns_after_one_period() {
    let sys = VortexSystem::new(0.01);
    let rho = 0.5;
    let period = 8.0 * PI * PI * rho * rho;
    let steps = 2000;
    let dt = period / steps as f64;
    let start = empty_state(vec![vortex(-rho, 0.0, 1.0), vortex(rho, 0.0, 1.0)], Mode::Multi);
    let mut state = start.clone();
    for _ in 0..steps {
        state = sys.rk4_step(&state, dt).unwrap();
    }
    for (a, b) in state.vortices.iter().zip(&start.vortices) {
        assert!(a.pos.distance(b.pos) < 1e-6 * rho);
    }
}

#[test]
fn collision_is_reported() {
    let sys = VortexSystem::new(0.01);
    let state = empty_state(vec![vortex(0.0, 0.0, 1.0), vortex(1e-12, 0.0, 1.0)], Mode::Multi);
    assert!(matches!(sys.rk4_step(&state, 1e-3), Err(DynamicsError::Collision { .. })));
}

#[test]
fn rankine_patch_keeps_its_radii() {
    let cfg = config(Mode::Moving, vec![PatchSpec::disk([0.0, 0.0], 0.3, 1.0)], vec![], 0.0, 0.02);
    let start = init_scenario(&cfg).unwrap();
    let sys = VortexSystem::new(0.01);
    let mut state = start.clone();
    for _ in 0..50 {
        state = sys.rk4_step(&state, 1e-2).unwrap();
    }
    let worst = (0..state.cloud.len())
        .map(|k| (state.cloud.pos(k).norm() - start.cloud.pos(k).norm()).abs())
        .fold(0.0, f64::max);
    assert!(worst < 0.02, "radial drift {worst}");
    assert!(state.cloud.same_carried_values(&start.cloud));
}

#[test]
fn forward_then_backward_recovers_the_start() {
    let cfg = config(
        Mode::Moving,
        vec![PatchSpec {
            angular_mode: 2,
            angular_amplitude: 0.5,
            ..PatchSpec::annulus([0.0, 0.0], 0.2, 0.4, 1.0)
        }],
        vec![VortexSpec {
            pos: [0.05, 0.0],
            intensity: 0.5,
            alpha: None,
        }],
        0.0,
        0.03,
    );
    let start = init_scenario(&cfg).unwrap();
    let sys = VortexSystem::new(0.015);
    let mut state = start.clone();
    for _ in 0..20 {
        state = sys.rk4_step_signed(&state, 5e-3).unwrap();
    }
    for _ in 0..20 {
        state = sys.rk4_step_signed(&state, -5e-3).unwrap();
    }
    let worst = (0..state.cloud.len())
        .map(|k| state.cloud.pos(k).distance(start.cloud.pos(k)))
        .fold(0.0, f64::max);
    assert!(worst < 1e-5, "marker error {worst}");
    assert!(state.vortices[0].pos.distance(start.vortices[0].pos) < 1e-5);
}

#[test]
fn zero_horizon_run_has_one_snapshot_and_no_drift() {
    let cfg = config(Mode::Moving, vec![PatchSpec::disk([0.0, 0.0], 0.3, 1.0)], vec![], 0.0, 0.03);
    let traj = run(&cfg).unwrap();
    assert_eq!(traj.snapshots.len(), 1);
    assert_eq!(lp_drift(&traj, 1.0).unwrap(), 0.0);
    assert_eq!(marker_lp_drift(&traj, 2.0), 0.0);
}

#[test]
fn runs_are_deterministic() {
    let cfg = config(
        Mode::Moving,
        vec![PatchSpec::disk([0.0, 0.0], 0.3, 1.0)],
        vec![VortexSpec {
            pos: [0.05, 0.0],
            intensity: 1.0,
            alpha: None,
        }],
        0.02,
        0.03,
    );
    let a = run(&cfg).unwrap();
    let b = run(&cfg).unwrap();
    assert_eq!(a.snapshots.len(), b.snapshots.len());
    for (x, y) in a.snapshots.iter().zip(&b.snapshots) {
        assert!(x.state.bitwise_eq(&y.state));
        assert_eq!(x.record, y.record);
    }
    assert_eq!(a.times(), vec![0.0, 0.01, 0.02]);
    assert_eq!(marker_lp_drift(&a, 1.0), 0.0);
}

#[test]
fn short_rankine_run_conserves_grid_norms() {
    let cfg = config(Mode::Moving, vec![PatchSpec::disk([0.0, 0.0], 0.3, 1.0)], vec![], 0.05, 0.015);
    let traj = run(&cfg).unwrap();
    assert!(lp_drift(&traj, 1.0).unwrap() < 0.02);
    assert!(lp_drift(&traj, 2.0).unwrap() < 0.02);
}
