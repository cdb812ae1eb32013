use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::integrator::rkg4_step;
use super::{CipModel, DetectionParams, DynamicsError, EquilibriumDetector, EquilibriumIndex, StateVector};

/// Torque produced by a controller for one integration step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HeldTorque {
    /// Torque `(T1, T2)` held constant over the step.
    pub torque: [f64; 2],
    /// Whether each agent's impulsive controller is emitting a pulse during the step.
    pub firing: [bool; 2],
}

/// Source of the joint torques.
///
/// The total torque on a step is `feedback_torque(stage state) + held_torque(...)`:
/// smooth state feedback is re-evaluated at every integrator stage, while
/// pulses, delayed decisions and disturbances are sampled once per step and
/// held (zero-order hold on the integration grid).
pub trait Controller {
    fn feedback_torque(&self, s: &StateVector) -> [f64; 2];

    fn held_torque(&mut self, _step: u64, _t: f64, _s: &StateVector) -> HeldTorque {
        HeldTorque::default()
    }
}

/// No torque at all.
#[derive(Debug, Clone, Copy, Default)]
pub struct Passive;

impl Controller for Passive {
    fn feedback_torque(&self, _s: &StateVector) -> [f64; 2] {
        [0.0, 0.0]
    }
}

impl<C: Controller + ?Sized> Controller for &mut C {
    fn feedback_torque(&self, s: &StateVector) -> [f64; 2] {
        (**self).feedback_torque(s)
    }

    fn held_torque(&mut self, step: u64, t: f64, s: &StateVector) -> HeldTorque {
        (**self).held_torque(step, t, s)
    }
}

/// Integration step, horizon and convergence detection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSettings {
    /// Fixed step, s.
    pub dt: f64,
    /// Maximum simulated time, s.
    pub horizon: f64,
    pub detection: DetectionParams,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self { dt: 5e-4, horizon: 60.0, detection: DetectionParams::default() }
    }
}

impl SimSettings {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        super::params::positive("dt", self.dt)?;
        if !(self.horizon.is_finite() && self.horizon >= self.dt) {
            return Err(DynamicsError::InvalidParameter {
                name: "horizon",
                reason: format!("must be >= dt = {}, got {}", self.dt, self.horizon),
            });
        }
        super::params::positive("omega_tol", self.detection.omega_tol)?;
        super::params::positive("v_tol", self.detection.v_tol)?;
        super::params::non_negative("dwell", self.detection.dwell)
    }

    pub fn steps(&self) -> u64 {
        (self.horizon / self.dt).round() as u64
    }

    /// Time of grid point `k`.
    pub fn time(&self, k: u64) -> f64 {
        k as f64 * self.dt
    }
}

/// One recorded point of a trajectory: the state at `t` and the torque applied from `t` on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub state: StateVector,
    pub torque: [f64; 2],
    pub firing: [bool; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOutcome {
    pub final_state: StateVector,
    /// Final equilibrium, or `UNCLASSIFIED` when the horizon elapsed first.
    pub nu: EquilibriumIndex,
    /// Time at which convergence was declared.
    pub converged_at: Option<f64>,
    /// Simulated time actually covered.
    pub elapsed: f64,
    /// Whether any impulsive controller fired, per agent.
    pub fired: [bool; 2],
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("simulation failed at t = {time} s: {source}")]
pub struct SimError {
    pub time: f64,
    #[source]
    pub source: DynamicsError,
}

/// Integrates from `s0` at `t = 0` until convergence or the horizon.
///
/// `observer`, when given, receives every step-start sample and the final state.
pub fn simulate<C: Controller>(
    model: &CipModel,
    s0: StateVector,
    mut controller: C,
    settings: &SimSettings,
    mut observer: Option<&mut dyn FnMut(&Sample)>,
) -> Result<SimOutcome, SimError> {
    settings.validate().map_err(|source| SimError { time: 0.0, source })?;
    if !s0.is_finite() {
        return Err(SimError { time: 0.0, source: DynamicsError::NonFiniteState });
    }

    let dt = settings.dt;
    let mut detector = EquilibriumDetector::new(settings.detection);
    let mut s = s0;
    let mut fired = [false; 2];
    let mut nu = detector.observe(0.0, &s);
    let mut k = 0;
    let steps = settings.steps();

    while nu.is_none() && k < steps {
        let t = settings.time(k);
        let held = controller.held_torque(k, t, &s);
        fired[0] |= held.firing[0];
        fired[1] |= held.firing[1];
        if let Some(obs) = observer.as_mut() {
            let fb = controller.feedback_torque(&s);
            obs(&Sample {
                t,
                state: s,
                torque: [fb[0] + held.torque[0], fb[1] + held.torque[1]],
                firing: held.firing,
            });
        }

        let y = s.to_array();
        let next = rkg4_step(&y, t, dt, |_, y| {
            let stage = StateVector::from_array(*y);
            let fb = controller.feedback_torque(&stage);
            model
                .derivative(&stage, [fb[0] + held.torque[0], fb[1] + held.torque[1]])
                .map(|d| d.to_array())
        })
        .map_err(|source| SimError { time: t, source })?;
        s = StateVector::from_array(next);
        k += 1;

        let t_next = settings.time(k);
        if !s.is_finite() {
            return Err(SimError { time: t_next, source: DynamicsError::NonFiniteState });
        }
        for (agent, a) in s.agents.iter().enumerate() {
            if a.theta.abs() > PI {
                return Err(SimError {
                    time: t_next,
                    source: DynamicsError::AngleOutOfBranch { agent, theta: a.theta },
                });
            }
        }
        nu = detector.observe(t_next, &s);
    }

    let elapsed = settings.time(k);
    if let Some(obs) = observer.as_mut() {
        obs(&Sample { t: elapsed, state: s, torque: controller.feedback_torque(&s), firing: [false; 2] });
    }
    Ok(SimOutcome {
        final_state: s,
        nu: nu.unwrap_or(EquilibriumIndex::UNCLASSIFIED),
        converged_at: nu.map(|_| elapsed),
        elapsed,
        fired,
    })
}
