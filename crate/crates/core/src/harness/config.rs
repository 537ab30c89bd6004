//! Config files and run manifests.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::scenario::{Perturbation, ScenarioConfig, ScenarioError};
use crate::dynamics::Trajectory;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    Invalid(#[from] ScenarioError),
}

/// 1-based line and column of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

/// Parses and validates a scenario config; unknown keys are rejected.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let config: ScenarioConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
        ConfigError::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    config.resolve()?;
    Ok(config)
}

pub fn emit_config(config: &ScenarioConfig) -> String {
    toml::to_string(config).expect("scenario configs always serialize")
}

/// Sidecar describing how a set of output files was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub h: f64,
    pub blob_delta: f64,
    pub r_guard: f64,
    pub dt: f64,
    pub steps: usize,
    pub grid_origin: [f64; 2],
    pub grid_spacing: f64,
    pub grid_nodes: [usize; 2],
    pub perturbation: Perturbation,
    pub eta: f64,
    pub seed: u64,
    pub treecode_used: bool,
    pub config: ScenarioConfig,
}

impl RunManifest {
    pub fn new(command: &str, config: &ScenarioConfig) -> Result<Self, ScenarioError> {
        let res = config.resolve()?;
        Ok(Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            h: res.h,
            blob_delta: res.blob_delta,
            r_guard: res.r_guard,
            dt: res.dt,
            steps: res.steps,
            grid_origin: res.grid.origin.into(),
            grid_spacing: res.grid.spacing,
            grid_nodes: [res.grid.nx, res.grid.ny],
            perturbation: config.scenario.perturbation,
            eta: config.scenario.eta,
            seed: config.scenario.seed,
            treecode_used: false,
            config: config.clone(),
        })
    }

    pub fn for_trajectory(command: &str, traj: &Trajectory) -> Result<Self, ScenarioError> {
        let mut m = Self::new(command, &traj.config)?;
        m.treecode_used = traj.used_treecode;
        Ok(m)
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("manifests always serialize")
    }

    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
            ConfigError::Parse {
                line,
                column,
                message: e.message().to_string(),
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::scenario::{PatchSpec, VortexSpec};
    use crate::dynamics::Mode;
    use proptest::prelude::*;

    const MINIMAL: &str = r#"
[scenario]
mode = "moving"

[[scenario.patches]]
center = [0.0, 0.0]
outer_radius = 0.5
value = 1.0

[numerics]
dt = 0.001
t_end = 1.0
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.output.stride, 10);
        let res = cfg.resolve().unwrap();
        assert_eq!(res.h, 0.01);
        assert_eq!(res.steps, 1000);
    }

    #[test]
    fn unknown_key_is_named() {
        let text = MINIMAL.replace("t_end = 1.0", "t_end = 1.0\nviscosity = 0.1");
        match parse_config(&text).unwrap_err() {
            ConfigError::Parse { line, message, .. } => {
                assert!(message.contains("viscosity"), "{message}");
                assert_eq!(line, 13);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_value_names_key() {
        let text = MINIMAL.replace("dt = 0.001", "dt = -0.001");
        match parse_config(&text).unwrap_err() {
            ConfigError::Invalid(e) => assert_eq!(e.key, "numerics.dt"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn emit_parse_round_trip() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(parse_config(&emit_config(&cfg)).unwrap(), cfg);
    }

    #[test]
    fn manifest_round_trip() {
        let cfg = parse_config(MINIMAL).unwrap();
        let m = RunManifest::new("simulate", &cfg).unwrap();
        assert_eq!(RunManifest::from_text(&m.to_text()).unwrap(), m);
    }

    fn finite(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
        lo..hi
    }

    prop_compose! {
        fn arb_config()(
            mode in 0..3u8,
            cx in finite(-2.0, 2.0),
            cy in finite(-2.0, 2.0),
            radius in finite(0.1, 1.0),
            hole in finite(0.0, 0.5),
            value in finite(-3.0, 3.0),
            slope in finite(-1.0, 1.0),
            angular_mode in 0..5u32,
            amplitude in finite(0.0, 1.0),
            intensity in finite(0.1, 2.0),
            dt in finite(1e-4, 1e-2),
            t_end in finite(0.0, 2.0),
            h_frac in finite(0.01, 0.1),
            eta in finite(0.0, 0.1),
            seed in 0..=i64::MAX as u64,
            stride in 1..50usize,
            jitter in any::<bool>(),
            treecode in any::<bool>(),
            alpha in proptest::option::of(finite(-1.0, 1.0)),
        ) -> ScenarioConfig {
            let mode = [Mode::Moving, Mode::Fixed, Mode::Multi][mode as usize];
            let center = if mode == Mode::Fixed { [0.0, 0.0] } else { [cx, cy] };
            let mut patch = PatchSpec::annulus(center, hole * radius, radius, value);
            patch.radial_slope = slope;
            patch.angular_mode = angular_mode;
            patch.angular_amplitude = amplitude;
            let points = match mode {
                Mode::Moving => vec![VortexSpec { pos: [cx + 3.0, cy], intensity, alpha: None }],
                Mode::Fixed => vec![VortexSpec { pos: [0.0, 0.0], intensity, alpha: None }],
                Mode::Multi => vec![
                    VortexSpec { pos: [cx + 3.0, cy], intensity, alpha: None },
                    VortexSpec { pos: [cx - 3.0, cy], intensity: intensity * 0.5, alpha: None },
                ],
            };
            let mut cfg: ScenarioConfig = parse_config(MINIMAL).unwrap();
            cfg.scenario.mode = mode;
            cfg.scenario.patches = vec![patch];
            cfg.scenario.eta = eta;
            cfg.scenario.seed = seed;
            if jitter {
                cfg.scenario.perturbation = Perturbation::Jitter;
            }
            cfg.vortices.points = points;
            cfg.numerics.dt = Some(dt);
            cfg.numerics.t_end = t_end;
            cfg.numerics.h = Some(h_frac * radius);
            cfg.numerics.treecode = treecode;
            cfg.output.stride = stride;
            // constancy tracking is only valid with a vortex inside a constant disk
            if let (Some(a), Mode::Moving) = (alpha, mode) {
                cfg.scenario.patches = vec![PatchSpec::disk(center, radius, a)];
                cfg.vortices.points[0].pos = center;
                cfg.diagnostics.constancy_alpha = Some(a);
            }
            cfg
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn random_configs_round_trip(cfg in arb_config()) {
            prop_assert!(cfg.resolve().is_ok());
            let text = emit_config(&cfg);
            prop_assert_eq!(parse_config(&text).unwrap(), cfg.clone());
            let m = RunManifest::new("twin", &cfg).unwrap();
            prop_assert_eq!(RunManifest::from_text(&m.to_text()).unwrap().config, cfg);
        }
    }
}
