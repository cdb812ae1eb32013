//! JSON run configuration shared by the command-line workflows.
//!
//! Every field has a default, so `{}` is a complete configuration: the
//! reference parameters, a 10-per-axis four-dimensional table over the
//! reference box, and a 25-point agent-1 disturbance sweep. Relative paths are
//! resolved against the directory of the configuration file.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::control::{
    ControlStack, Disturbance, ImpulseParams, IntelligentController, Measurement, MeasurementMap, MeasurementMode,
    SelectorSet, Side, StandingControl,
};
use crate::dynamics::{SimSettings, StateVector};
use crate::experiments::{ControllerSpec, DisturbanceSide, SweepConfig};
use crate::learning::{load_table_file, ClassifierTable, GridSpec, LearnSpec, LearningError, SlicePlane};
use crate::params::CipParams;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("{}invalid configuration: {source}", path.as_ref().map(|p| format!("{p}: ")).unwrap_or_default())]
    Parse { path: Option<String>, source: serde_json::Error },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("controller table for agent {agent} ({path}): {source}")]
    Table { agent: usize, path: String, source: LearningError },
    #[error(transparent)]
    Learning(#[from] LearningError),
}

/// The grid and impulse used to learn a table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearnConfig {
    pub bounds: Vec<[f64; 2]>,
    pub resolution: u32,
    pub mode: MeasurementMode,
    /// Learning impulse, N·m·s.
    pub p: f64,
    /// Pulse width; the integration step when absent.
    pub delta_tau: Option<f64>,
    /// Relaxation time; the integration step when absent.
    pub tau_g: Option<f64>,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            bounds: GridSpec::REFERENCE_DOMAIN.to_vec(),
            resolution: 10,
            mode: MeasurementMode::FourDim,
            p: 0.06,
            delta_tau: None,
            tau_g: None,
        }
    }
}

fn impulse(p: f64, delta_tau: Option<f64>, tau_g: Option<f64>, dt: f64) -> ImpulseParams {
    ImpulseParams { p, delta_tau: delta_tau.unwrap_or(dt), tau_g: tau_g.unwrap_or(dt) }
}

/// An intelligent controller on one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    /// Table file learned from agent 1's point of view.
    pub table: PathBuf,
    /// Target equilibria; `[2, 3]` on agent 1 and `[4, 7]` on agent 2 when absent.
    #[serde(default)]
    pub targets: Option<SelectorSet>,
    /// Delay of the classifier input, s.
    #[serde(default)]
    pub tau_d: f64,
    /// Impulse magnitude; agent 2 applies it with the opposite sign.
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default)]
    pub delta_tau: Option<f64>,
    #[serde(default)]
    pub tau_g: Option<f64>,
}

fn default_p() -> f64 {
    0.06
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentControllers {
    pub agent1: Option<ControllerConfig>,
    pub agent2: Option<ControllerConfig>,
}

impl AgentControllers {
    pub fn get(&self, side: Side) -> Option<&ControllerConfig> {
        match side {
            Side::Agent1 => self.agent1.as_ref(),
            Side::Agent2 => self.agent2.as_ref(),
        }
    }

    fn get_mut(&mut self, side: Side) -> Option<&mut ControllerConfig> {
        match side {
            Side::Agent1 => self.agent1.as_mut(),
            Side::Agent2 => self.agent2.as_mut(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    pub q_max: f64,
    pub n_q: usize,
    pub side: DisturbanceSide,
    /// Disturbance pulse width; the integration step when absent.
    pub delta_tau: Option<f64>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self { q_max: 0.06, n_q: 25, side: DisturbanceSide::Agent1, delta_tau: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceSpec {
    pub side: Side,
    pub q: f64,
}

/// Initial condition and inputs of a single `simulate` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSpec {
    /// Full state `(x1, v1, th1, w1, x2, v2, th2, w2)`; overrides the angles below.
    pub initial: Option<[f64; 8]>,
    /// `(theta1, theta2)`, with carts placed so that the rod has its natural length.
    pub theta: [f64; 2],
    /// `(theta1_dot, theta2_dot)`.
    pub omega: [f64; 2],
    pub disturbance: Option<DisturbanceSpec>,
    /// Install the configured intelligent controllers.
    pub controllers: bool,
}

impl Default for SimulateSpec {
    fn default() -> Self {
        Self { initial: None, theta: [0.0; 2], omega: [0.0; 2], disturbance: None, controllers: true }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SliceSpec {
    /// Table to cut; the learned table output when absent.
    pub table: Option<PathBuf>,
    /// Zero-based free dimensions; `[0, 2]` (the two angles) when absent.
    pub free: Option<[usize; 2]>,
    /// Values of the pinned dimensions; zeros when absent.
    pub fixed: Option<Vec<f64>>,
}

/// Default output locations, overridden by `--out`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Outputs {
    pub table: Option<PathBuf>,
    pub results: Option<PathBuf>,
    pub trajectory: Option<PathBuf>,
    pub slice: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub description: Option<String>,
    pub params: CipParams,
    pub settings: SimSettings,
    pub learn: LearnConfig,
    pub controllers: AgentControllers,
    pub sweep: SweepSpec,
    /// Classifier delays of the delay scan; `0, 0.0005, ..., 0.006` when empty.
    pub delays: Vec<f64>,
    pub simulate: SimulateSpec,
    pub slice: SliceSpec,
    pub outputs: Outputs,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let c: Self = serde_json::from_str(text).map_err(|source| ConfigError::Parse { path: None, source })?;
        c.validate()?;
        Ok(c)
    }

    /// Reads `path` and resolves relative paths against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: shown.clone(), source })?;
        let mut c: Self =
            serde_json::from_str(&text).map_err(|source| ConfigError::Parse { path: Some(shown), source })?;
        c.resolve_paths(path.parent().unwrap_or(Path::new("")));
        c.validate()?;
        Ok(c)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for side in [Side::Agent1, Side::Agent2] {
            if let Some(c) = self.controllers.get_mut(side) {
                fix(&mut c.table);
            }
        }
        let o = &mut self.outputs;
        for p in [&mut self.slice.table, &mut o.table, &mut o.results, &mut o.trajectory, &mut o.slice]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
    }

    /// Checks everything that does not need the table files.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        self.params.validate().map_err(|e| invalid(&e))?;
        self.settings.validate().map_err(|e| invalid(&e))?;
        self.learn_spec(None)?.validate(&self.params)?;
        self.sweep_config_with([None, None]).validate(&self.params).map_err(|e| invalid(&e))?;
        for side in [Side::Agent1, Side::Agent2] {
            if let Some(c) = self.controllers.get(side) {
                self.controller_impulse(c).validate().map_err(|e| invalid(&e))?;
                if !(c.tau_d >= 0.0 && c.tau_d.is_finite()) {
                    return Err(ConfigError::Invalid(format!("tau_d must be >= 0, got {}", c.tau_d)));
                }
            }
        }
        if let Some(&d) = self.delays.iter().find(|d| !(**d >= 0.0 && d.is_finite())) {
            return Err(ConfigError::Invalid(format!("delays must be >= 0, got {d}")));
        }
        Ok(())
    }

    /// The learning experiment, optionally at another per-axis resolution.
    pub fn learn_spec(&self, resolution: Option<u32>) -> Result<LearnSpec, ConfigError> {
        let l = &self.learn;
        let grid = GridSpec::uniform(l.bounds.clone(), resolution.unwrap_or(l.resolution))?;
        Ok(LearnSpec {
            grid,
            mode: l.mode,
            impulse: impulse(l.p, l.delta_tau, l.tau_g, self.settings.dt),
            settings: self.settings,
        })
    }

    fn controller_impulse(&self, c: &ControllerConfig) -> ImpulseParams {
        impulse(c.p, c.delta_tau, c.tau_g, self.settings.dt)
    }

    /// Loads the table of `side`'s controller, checking its parameter digest.
    pub fn controller(&self, side: Side) -> Result<Option<ControllerSpec>, ConfigError> {
        let Some(c) = self.controllers.get(side) else { return Ok(None) };
        let path = c.table.display().to_string();
        let table = load_table_file(&c.table, &self.params)
            .map_err(|source| ConfigError::Table { agent: side.index() + 1, path: path.clone(), source })?;
        let targets = c.targets.clone().unwrap_or_else(|| match side {
            Side::Agent1 => SelectorSet::agent1_wins(),
            Side::Agent2 => SelectorSet::agent2_wins(),
        });
        Ok(Some(ControllerSpec {
            table: Arc::new(table),
            targets,
            tau_d: c.tau_d,
            impulse: self.controller_impulse(c),
            source: Some(path),
        }))
    }

    fn sweep_config_with(&self, controllers: [Option<ControllerSpec>; 2]) -> SweepConfig {
        let s = &self.sweep;
        SweepConfig {
            q_max: s.q_max,
            n_q: s.n_q,
            side: s.side,
            delta_tau: s.delta_tau.unwrap_or(self.settings.dt),
            controllers,
            settings: self.settings,
        }
    }

    /// The sweep with both configured controllers loaded.
    pub fn sweep_config(&self) -> Result<SweepConfig, ConfigError> {
        Ok(self.sweep_config_with([self.controller(Side::Agent1)?, self.controller(Side::Agent2)?]))
    }

    pub fn delay_grid(&self) -> Vec<f64> {
        if self.delays.is_empty() {
            (0..=12).map(|k| k as f64 * 5e-4).collect()
        } else {
            self.delays.clone()
        }
    }

    /// Initial state of `simulate`.
    pub fn initial_state(&self) -> Result<StateVector, ConfigError> {
        let s = &self.simulate;
        if let Some(a) = s.initial {
            let st = StateVector::from_array(a);
            return if st.is_finite() { Ok(st) } else { Err(ConfigError::Invalid("non-finite initial state".into())) };
        }
        let map = MeasurementMap::four_dim(self.params.model.rod.w0, self.params.model.pendulum.r);
        let y = Measurement::new(&[s.theta[0], s.omega[0], s.theta[1], s.omega[1]]).expect("four components");
        map.reconstruct(&y).map_err(|e| ConfigError::Invalid(format!("initial angles: {e}")))
    }

    /// Controllers of `simulate`: standing control, the optional disturbance
    /// and, unless disabled, the configured intelligent controllers.
    pub fn simulate_stack(&self) -> Result<ControlStack, ConfigError> {
        let dt = self.settings.dt;
        let mut stack = ControlStack::standing_only(StandingControl::new(self.params.standing));
        if let Some(d) = self.simulate.disturbance {
            let delta_tau = self.sweep.delta_tau.unwrap_or(dt);
            stack = stack.with_disturbance(Disturbance { side: d.side, q: d.q, delta_tau });
        }
        if self.simulate.controllers {
            for side in [Side::Agent1, Side::Agent2] {
                if let Some(c) = self.controller(side)? {
                    stack = stack.with_controller(IntelligentController::new(
                        side,
                        c.table,
                        c.targets,
                        c.impulse,
                        c.tau_d,
                        dt,
                    ));
                }
            }
        }
        Ok(stack)
    }

    /// Table to slice: the explicit slice table, else the learned-table output.
    pub fn slice_table(&self) -> Result<ClassifierTable, ConfigError> {
        let path = self
            .slice
            .table
            .as_ref()
            .or(self.outputs.table.as_ref())
            .ok_or_else(|| ConfigError::Invalid("slice needs slice.table or outputs.table".into()))?;
        Ok(load_table_file(path, &self.params)?)
    }

    pub fn slice_plane(&self, dim: usize) -> SlicePlane {
        SlicePlane { free: self.slice.free.unwrap_or([0, 2]), fixed: self.slice.fixed.clone().unwrap_or(vec![0.0; dim]) }
    }
}
