//! The run driver: steps a scenario to `t_end` and records diagnostics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::scenario::{init_scenario, init_twin, Resolved, ScenarioConfig, ScenarioError};
use super::{DynamicsError, SimState, TreeSettings, VortexSystem};
use crate::diagnostics::{DiagnosticsRecord, Recorder};
use crate::field::tree::{tree_relative_error, TreeCode};
use crate::field::FieldError;
use crate::kernels::PlanePoint;

/// Relative accuracy the treecode must reach before it may replace direct summation.
pub const TREE_ACCEPTANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ScenarioError),
    #[error("step {step} (t = {time}): {source}")]
    Dynamics {
        step: usize,
        time: f64,
        source: DynamicsError,
    },
    #[error("step {step} (t = {time}): non-finite position detected")]
    NonFinite { step: usize, time: f64 },
    #[error("diagnostics at step {step}: {source}")]
    Diagnostics { step: usize, source: FieldError },
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub state: SimState,
    pub record: DiagnosticsRecord,
}

/// Snapshots in strictly increasing time, with the configuration that produced them.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub config: ScenarioConfig,
    pub resolved: Resolved,
    pub snapshots: Vec<Snapshot>,
    /// Whether marker velocities came from the treecode.
    pub used_treecode: bool,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.record.time).collect()
    }

    pub fn first(&self) -> &Snapshot {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("trajectory has at least one snapshot")
    }

    pub fn total_guard_events(&self) -> u64 {
        self.last().record.guard_event_count
    }
}

fn tree_is_eligible(state: &SimState, settings: TreeSettings, seed: u64) -> bool {
    let cloud = &state.cloud;
    if cloud.is_empty() {
        return false;
    }
    let tree = TreeCode::build(cloud, settings.theta, settings.order);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probes: Vec<PlanePoint> = (0..1000)
        .map(|_| cloud.pos(rng.gen_range(0..cloud.len())) + PlanePoint::new(rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05)))
        .collect();
    tree_relative_error(&tree, cloud, &probes) < TREE_ACCEPTANCE
}

fn all_finite(state: &SimState) -> bool {
    state.cloud.xs().iter().chain(state.cloud.ys()).all(|v| v.is_finite())
        && state.vortices.iter().all(|v| v.pos.is_finite())
}

/// Integrates `state` over the resolved horizon of `config`.
pub fn run_from(config: &ScenarioConfig, initial: SimState) -> Result<Trajectory, RunError> {
    let res = config.resolve()?;
    let mut system = VortexSystem::new(res.r_guard);
    let mut used_treecode = false;
    if config.numerics.treecode {
        let settings = TreeSettings::default();
        if tree_is_eligible(&initial, settings, config.scenario.seed) {
            system = system.with_tree(settings);
            used_treecode = true;
        }
    }
    let recorder = Recorder::new(config, &res);
    let record = |state: &SimState, step: usize, events: u64| {
        recorder
            .record(state, events)
            .map_err(|source| RunError::Diagnostics { step, source })
    };
    let mut snapshots = Vec::with_capacity(res.steps / res.stride + 2);
    let mut state = initial;
    state.time = 0.0;
    snapshots.push(Snapshot {
        record: record(&state, 0, 0)?,
        state: state.clone(),
    });
    for step in 1..=res.steps {
        let next = system
            .rk4_step(&state, res.dt)
            .map_err(|source| RunError::Dynamics {
                step,
                time: state.time,
                source,
            })?;
        state = next;
        // integer multiples keep snapshot times free of accumulated rounding
        state.time = step as f64 * res.dt;
        if !all_finite(&state) {
            return Err(RunError::NonFinite {
                step,
                time: state.time,
            });
        }
        if step % res.stride == 0 || step == res.steps {
            snapshots.push(Snapshot {
                record: record(&state, step, system.guard_events())?,
                state: state.clone(),
            });
        }
    }
    Ok(Trajectory {
        config: config.clone(),
        resolved: res,
        snapshots,
        used_treecode,
    })
}

pub fn run(config: &ScenarioConfig) -> Result<Trajectory, RunError> {
    let initial = init_scenario(config)?;
    run_from(config, initial)
}

/// Runs both members of a twin pair built by [`init_twin`].
pub fn run_twin(config: &ScenarioConfig) -> Result<(Trajectory, Trajectory), RunError> {
    let (a, b) = init_twin(config)?;
    Ok((run_from(config, a)?, run_from(config, b)?))
}
