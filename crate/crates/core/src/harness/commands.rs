//! The five command pipelines behind the CLI.

use std::f64::consts::PI;
use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use super::config::{parse_config, ConfigError, RunManifest};
use super::kernel_suite::run_kernel_suite;
use super::output::{records_table, write_atomic, write_timeseries, Report, Table};
use crate::diagnostics::{
    collision_margin, constancy_envelope, constancy_intrusions, constancy_series, fit_constancy_constant,
    hole_radius, lp_drift, support_growth_fit, support_series, twin_divergence, twin_harmonic_defects,
    weak_residual_signed, DiagnosticsError, TestFunction,
};
use crate::dynamics::scenario::{PatchSpec, ScenarioConfig};
use crate::dynamics::{run, run_twin, Mode, RunError, Trajectory};
use crate::field::{induced_velocities, MarkerCloud};
use crate::kernels::PlanePoint;

/// Harmonic-defect circles use this fraction of the joint constancy radius.
pub const HARMONIC_FRACTION: f64 = 0.25;
pub const HARMONIC_SAMPLES: usize = 64;
pub const HARMONIC_RELATIVE_TOL: f64 = 1e-3;
pub const HARMONIC_FLOOR: f64 = 1e-8;
/// Minimum factor by which each weak residual must drop per refinement level.
/// Relative tolerance of the rigid-rotation speed of a lone disk.
pub const STATIONARY_SPEED_TOL: f64 = 0.02;
const STATIONARY_PROBE_RINGS: usize = 8;
pub const CONVERGENCE_FACTOR: f64 = 1.5;
pub const DEFAULT_LEVELS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Simulate,
    Twin,
    Fixed,
    CheckKernels,
    Convergence,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Simulate => "simulate",
            Self::Twin => "twin",
            Self::Fixed => "fixed",
            Self::CheckKernels => "check-kernels",
            Self::Convergence => "convergence",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CommandOptions {
    pub eta: Option<f64>,
    pub levels: Option<usize>,
}

#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
}

impl CommandError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Usage(_) => 2,
            _ => 3,
        }
    }
}

/// Exit status and the report written next to the outputs.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub exit_code: i32,
    pub report: Report,
}

/// Runs one command, writes its outputs and `report` under `out_dir`, and never panics on bad input.
pub fn execute(kind: CommandKind, config_text: Option<&str>, out_dir: &Path, opts: CommandOptions) -> Outcome {
    let mut report = Report::default();
    report.info("command", kind.name());
    let result = fs::create_dir_all(out_dir)
        .map_err(CommandError::from)
        .and_then(|_| dispatch(kind, config_text, out_dir, opts, &mut report));
    let exit_code = match result {
        Ok(()) if report.passed() => 0,
        Ok(()) => 1,
        Err(e) => {
            report.check("error", e.to_string().replace('\n', " "), false);
            e.exit_code()
        }
    };
    report.info("exit_code", exit_code);
    // the report is best effort once the run itself has failed
    let _ = write_atomic(&out_dir.join("report"), report.to_string().as_bytes());
    Outcome { exit_code, report }
}

fn load(config_text: Option<&str>, opts: CommandOptions) -> Result<ScenarioConfig, CommandError> {
    let text = config_text.ok_or_else(|| CommandError::Usage("this command needs --config".into()))?;
    let mut config = parse_config(text)?;
    if let Some(eta) = opts.eta {
        config.scenario.eta = eta;
        config.resolve().map_err(ConfigError::from)?;
    }
    Ok(config)
}

fn dispatch(
    kind: CommandKind,
    config_text: Option<&str>,
    out: &Path,
    opts: CommandOptions,
    report: &mut Report,
) -> Result<(), CommandError> {
    match kind {
        CommandKind::CheckKernels => check_kernels(config_text, out, report),
        CommandKind::Simulate => {
            let config = load(config_text, opts)?;
            let traj = run(&config)?;
            write_trajectory(&traj, "simulate", out, "series.csv")?;
            trajectory_checks(&traj, report)
        }
        CommandKind::Twin => twin(load(config_text, opts)?, out, report),
        CommandKind::Fixed => fixed(load(config_text, opts)?, out, report),
        CommandKind::Convergence => {
            let config = load(config_text, opts)?;
            convergence(&config, opts.levels.unwrap_or(DEFAULT_LEVELS), out, report)
        }
    }
}

fn write_trajectory(traj: &Trajectory, command: &str, out: &Path, name: &str) -> Result<(), CommandError> {
    let records: Vec<_> = traj.snapshots.iter().map(|s| s.record.clone()).collect();
    let config = &traj.config;
    let table = records_table(
        config.scenario.mode,
        config.vortices.points.len(),
        config.tracks_constancy(),
        config.diagnostics.lp_norms && !traj.first().state.cloud.is_empty(),
        &records,
    );
    write_timeseries(&table, &out.join(name))?;
    let manifest = RunManifest::for_trajectory(command, traj).map_err(ConfigError::from)?;
    write_atomic(&out.join("manifest"), manifest.to_text().as_bytes())?;
    Ok(())
}

fn check_kernels(config_text: Option<&str>, out: &Path, report: &mut Report) -> Result<(), CommandError> {
    let (eps, delta, seed) = match config_text {
        Some(text) => {
            let config = parse_config(text)?;
            let res = config.resolve().map_err(ConfigError::from)?;
            (res.r_guard, res.blob_delta, config.scenario.seed)
        }
        None => (0.05, 0.05, 0),
    };
    report.info("eps", eps);
    report.info("blob_delta", delta);
    let mut table = Table::new(["check", "worst", "pass"]);
    for (i, c) in run_kernel_suite(eps, delta, seed).into_iter().enumerate() {
        report.check(c.name, format!("{:e}", c.worst), c.pass);
        table.push(vec![i as f64, c.worst, if c.pass { 1.0 } else { 0.0 }]);
    }
    write_timeseries(&table, &out.join("kernels.csv"))?;
    Ok(())
}

/// A lone constant disk without vortices, which rotates rigidly and never changes.
fn stationary_disk(config: &ScenarioConfig) -> Option<&PatchSpec> {
    match config.scenario.patches.as_slice() {
        [p] if config.vortices.points.is_empty() && p.is_constant_disk() => Some(p),
        _ => None,
    }
}

/// Worst relative deviation of the tangential speed from `value * r / 2` on interior probes.
fn disk_speed_error(cloud: &MarkerCloud, disk: &PatchSpec) -> f64 {
    let c = disk.center();
    let probes: Vec<PlanePoint> = (1..=STATIONARY_PROBE_RINGS)
        .flat_map(|i| {
            let r = disk.outer_radius * 0.8 * i as f64 / STATIONARY_PROBE_RINGS as f64;
            (0..8).map(move |j| {
                let a = 0.1 + PI * j as f64 / 4.0;
                c + PlanePoint::new(r * a.cos(), r * a.sin())
            })
        })
        .collect();
    induced_velocities(cloud, &probes)
        .iter()
        .zip(&probes)
        .map(|(u, &x)| {
            let d = x - c;
            let r = d.norm();
            let tangential = u.dot(d.perp()) / r;
            let expected = 0.5 * disk.value * r;
            (tangential - expected).abs() / expected.abs()
        })
        .fold(0.0, f64::max)
}

/// Checks shared by every single-trajectory command.
fn trajectory_checks(traj: &Trajectory, report: &mut Report) -> Result<(), CommandError> {
    let config = &traj.config;
    let res = &traj.resolved;
    report.info("snapshots", traj.snapshots.len());
    report.info("markers", traj.first().state.cloud.len());
    report.check("guard_events", traj.total_guard_events(), traj.total_guard_events() == 0);

    if !traj.first().state.vortices.is_empty() && !traj.first().state.cloud.is_empty() {
        let margin = collision_margin(traj);
        let min = margin.series.iter().map(|m| m.1).fold(f64::INFINITY, f64::min);
        report.check("collision_margin", min, margin.pass);
    }
    if config.scenario.mode == Mode::Multi {
        let pair = |k: usize| traj.snapshots[k].record.min_vortex_pair_dist.unwrap_or(f64::INFINITY);
        let initial = pair(0);
        let min = (0..traj.snapshots.len()).map(pair).fold(f64::INFINITY, f64::min);
        report.check("min_vortex_pair_dist", min, min >= 0.5 * initial);
    }
    if let Some(tol) = config.diagnostics.return_tol {
        let (first, last) = (&traj.first().state.vortices, &traj.last().state.vortices);
        let worst = first
            .iter()
            .zip(last)
            .map(|(a, b)| a.pos.distance(b.pos))
            .fold(0.0, f64::max);
        report.check("vortex_return", worst, worst <= tol);
    }
    if traj.first().state.cloud.is_empty() {
        return Ok(());
    }
    if let Some(disk) = stationary_disk(config) {
        let speed = disk_speed_error(&traj.first().state.cloud, disk);
        report.check("disk_speed_error", speed, speed < STATIONARY_SPEED_TOL);
        let support = support_series(traj);
        let r0 = support[0].1;
        let drift = support.iter().map(|s| (s.1 - r0).abs()).fold(0.0, f64::max);
        report.check("support_drift", drift, drift < 2.0 * res.h);
    }
    if config.diagnostics.lp_norms {
        for (name, p) in [("l1_drift", 1.0), ("l2_drift", 2.0)] {
            let drift = lp_drift(traj, p).map_err(DiagnosticsError::from)?;
            match config.diagnostics.lp_drift_tol {
                Some(tol) => report.check(name, drift, drift < tol),
                None => report.info(name, drift),
            }
        }
    }
    let support = support_series(traj);
    if support.len() >= 5 {
        let fit = support_growth_fit(&support, res.h)?;
        report.info("support_slope", fit.slope);
        report.check("support_growth", fit.residual, fit.pass);
    }
    for i in 0..traj.first().state.vortices.len() {
        if let Some(alpha) = config.constancy_alpha(i) {
            let series = constancy_series(traj, i);
            if series.len() < 5 {
                continue;
            }
            let fit = fit_constancy_constant(&series, res.h)?;
            let env = constancy_envelope(&series, res.h)?;
            let intrusions = constancy_intrusions(traj, i, alpha, config.diagnostics.constancy_tol, &env);
            report.info(&format!("constancy_c_{i}"), fit.parameter);
            report.check(&format!("constancy_law_{i}"), fit.residual, fit.pass);
            report.check(&format!("constancy_intrusions_{i}"), intrusions, intrusions == 0);
        }
    }
    Ok(())
}

fn twin(config: ScenarioConfig, out: &Path, report: &mut Report) -> Result<(), CommandError> {
    let (a, b) = run_twin(&config)?;
    write_trajectory(&a, "twin", out, "series_a.csv")?;
    write_trajectory(&b, "twin", out, "series_b.csv")?;
    let grid = a.resolved.grid;
    let r = twin_divergence(&a, &b, &grid)?;
    let mut table = Table::new(["time", "r"]);
    for &(t, v) in &r {
        table.push(vec![t, v]);
    }
    write_timeseries(&table, &out.join("twin.csv"))?;
    let eta = config.scenario.eta;
    report.info("eta", eta);
    let last = r.last().map_or(0.0, |x| x.1);
    if eta == 0.0 {
        let zero = r.iter().all(|x| x.1 == 0.0);
        report.check("r_final", last, zero);
    } else {
        report.check("r_final", last, last.is_finite());
    }
    trajectory_checks(&a, report)?;
    if config.tracks_constancy() && eta > 0.0 && !a.first().state.vortices.is_empty() {
        let samples = twin_harmonic_defects(&a, &b, &grid, HARMONIC_FRACTION, HARMONIC_SAMPLES)?;
        let worst = samples
            .iter()
            .map(|s| s.defect / (HARMONIC_RELATIVE_TOL * s.l2_norm + HARMONIC_FLOOR))
            .fold(0.0, f64::max);
        report.check("harmonic_defect_ratio", worst, worst < 1.0);
    }
    Ok(())
}

fn fixed(config: ScenarioConfig, out: &Path, report: &mut Report) -> Result<(), CommandError> {
    if config.scenario.mode != Mode::Fixed {
        return Err(ConfigError::Invalid(crate::dynamics::ScenarioError {
            key: "scenario.mode".into(),
            reason: "the fixed command needs mode = \"fixed\"".into(),
        })
        .into());
    }
    let traj = run(&config)?;
    write_trajectory(&traj, "fixed", out, "series.csv")?;
    let hole = hole_radius(&traj, config.diagnostics.hole_tol)?;
    let mut table = Table::new(["time", "hole_radius"]);
    for &(t, r) in &hole.series {
        table.push(vec![t, r]);
    }
    write_timeseries(&table, &out.join("hole.csv"))?;
    report.info("hole_c1", hole.fit.intercept.exp());
    report.info("hole_c2", hole.fit.parameter);
    let spread = hole.series.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max)
        - hole.series.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    match config.diagnostics.hole_spread_tol {
        Some(tol) => report.check("hole_spread", spread, spread <= tol),
        None => report.info("hole_spread", spread),
    }
    report.check("hole_law", hole.fit.residual, hole.pass);
    trajectory_checks(&traj, report)
}

/// Five off-center bumps overlapping the first patch, active strictly inside `(0, t_end)`.
pub fn convergence_battery(config: &ScenarioConfig) -> Vec<TestFunction> {
    let (center, a) = config
        .scenario
        .patches
        .first()
        .map_or((PlanePoint::ORIGIN, 0.5), |p| (p.center(), p.outer_radius));
    let t_end = config.numerics.t_end;
    (0..5)
        .map(|k| {
            let theta = 0.3 + 2.0 * PI * k as f64 / 5.0;
            let d = a * (0.45 + 0.05 * k as f64);
            TestFunction {
                center: center + PlanePoint::new(d * theta.cos(), d * theta.sin()),
                radius: a * (0.3 + 0.04 * k as f64),
                t_center: 0.5 * t_end,
                t_half: 0.45 * t_end,
                amplitude: 1.0,
            }
        })
        .collect()
}

/// The config of refinement level `level`: `h`, `dt`, the blob length and the guard
/// radius are divided by `2^level`; the grid and the output stride are kept.
pub fn refined(config: &ScenarioConfig, level: usize) -> Result<ScenarioConfig, ConfigError> {
    let base = config.resolve()?;
    let f = 0.5f64.powi(level as i32);
    let mut c = config.clone();
    c.numerics.h = Some(base.h * f);
    c.numerics.dt = Some(base.dt * f);
    c.numerics.blob_delta = Some(base.blob_delta * f);
    c.numerics.r_guard = Some(base.r_guard * f);
    c.numerics.grid_spacing = Some(base.grid.spacing);
    let half = base.grid.spacing * (base.grid.nx - 1) as f64 / 2.0;
    c.numerics.grid_center = Some((base.grid.origin + PlanePoint::new(half, half)).into());
    c.numerics.grid_half_extent = Some(half);
    c.resolve()?;
    Ok(c)
}

/// Signed weak residuals of the battery at each refinement level.
pub fn convergence_table(config: &ScenarioConfig, levels: usize) -> Result<Table, CommandError> {
    let battery = convergence_battery(config);
    let mut header = vec!["level".to_string(), "h".to_string(), "dt".to_string()];
    header.extend((0..battery.len()).map(|k| format!("residual_{k}")));
    let mut table = Table::new(header);
    for level in 0..levels {
        let c = refined(config, level)?;
        let traj = run(&c)?;
        let grid = traj.resolved.grid;
        let mut row = vec![level as f64, traj.resolved.h, traj.resolved.dt];
        for psi in &battery {
            row.push(weak_residual_signed(&traj, psi, &grid)?.abs());
        }
        table.push(row);
    }
    Ok(table)
}

fn convergence(config: &ScenarioConfig, levels: usize, out: &Path, report: &mut Report) -> Result<(), CommandError> {
    if levels < 2 {
        return Err(CommandError::Usage("convergence needs at least 2 levels".into()));
    }
    let table = convergence_table(config, levels)?;
    write_timeseries(&table, &out.join("convergence.csv"))?;
    let manifest = RunManifest::new("convergence", config).map_err(ConfigError::from)?;
    write_atomic(&out.join("manifest"), manifest.to_text().as_bytes())?;
    for k in 0..table.header.len() - 3 {
        let col = table.column(&format!("residual_{k}")).expect("column exists");
        let worst = col.windows(2).map(|w| w[0] / w[1]).fold(f64::INFINITY, f64::min);
        report.check(&format!("residual_{k}_min_ratio"), worst, worst >= CONVERGENCE_FACTOR);
    }
    Ok(())
}
