//! Selector and impulse generator of the intelligent controller.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::ControlError;
use crate::dynamics::EquilibriumIndex;

/// Slack for comparing times that are multiples of the integration step.
const TIME_EPS: f64 = 1e-9;

/// Strength and timing of the impulses emitted by an intelligent controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpulseParams {
    /// Angular impulse per firing, N·m·s.
    pub p: f64,
    /// Pulse width, s.
    pub delta_tau: f64,
    /// Relaxation (refractory) time, s.
    pub tau_g: f64,
}

impl ImpulseParams {
    /// Pulse width and relaxation time equal to the integration step.
    pub fn with_step(p: f64, dt: f64) -> Self {
        Self { p, delta_tau: dt, tau_g: dt }
    }

    pub fn validate(&self) -> Result<(), ControlError> {
        if !self.p.is_finite() {
            return Err(ControlError::InvalidImpulse(format!("p must be finite, got {}", self.p)));
        }
        if !(self.delta_tau > 0.0 && self.delta_tau.is_finite()) {
            return Err(ControlError::InvalidImpulse(format!("delta_tau must be > 0, got {}", self.delta_tau)));
        }
        if !(self.tau_g >= self.delta_tau - TIME_EPS && self.tau_g.is_finite()) {
            return Err(ControlError::InvalidImpulse(format!(
                "tau_g ({}) must be >= delta_tau ({})",
                self.tau_g, self.delta_tau
            )));
        }
        Ok(())
    }

    /// Torque amplitude `P / delta_tau` during a pulse.
    pub fn amplitude(&self) -> f64 {
        self.p / self.delta_tau
    }
}

/// Target equilibria `J` of a controller.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u8>", into = "Vec<u8>")]
pub struct SelectorSet(BTreeSet<u8>);

impl SelectorSet {
    pub fn new(indices: impl IntoIterator<Item = u8>) -> Result<Self, ControlError> {
        let set: BTreeSet<u8> = indices.into_iter().collect();
        if set.is_empty() {
            return Err(ControlError::InvalidSelector("selector set is empty".into()));
        }
        if let Some(bad) = set.iter().find(|&&v| !(1..=9).contains(&v)) {
            return Err(ControlError::InvalidSelector(format!("index {bad} outside 1..=9")));
        }
        Ok(Self(set))
    }

    /// `{2, 3}`: agent 1 standing, agent 2 fallen.
    pub fn agent1_wins() -> Self {
        Self([2, 3].into_iter().collect())
    }

    /// `{4, 7}`: agent 2 standing, agent 1 fallen.
    pub fn agent2_wins() -> Self {
        Self([4, 7].into_iter().collect())
    }

    pub fn contains(&self, nu: EquilibriumIndex) -> bool {
        self.0.contains(&nu.value())
    }

    pub fn iter(&self) -> impl Iterator<Item = EquilibriumIndex> + '_ {
        self.0.iter().filter_map(|&v| EquilibriumIndex::new(v))
    }
}

impl TryFrom<Vec<u8>> for SelectorSet {
    type Error = ControlError;

    fn try_from(v: Vec<u8>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<SelectorSet> for Vec<u8> {
    fn from(s: SelectorSet) -> Vec<u8> {
        s.0.into_iter().collect()
    }
}

/// `1` iff `nu` is a target; an unclassified state never selects.
pub fn selector(nu: EquilibriumIndex, j: &SelectorSet) -> bool {
    nu.is_classified() && j.contains(nu)
}

/// AND gate followed by the pulse timer `T_I` and the relaxation timer `T_G`,
/// sampled on the integration grid.
///
/// A rise of the gated signal `delta && T_G` at `t_r` starts a pulse of height
/// `1/delta_tau` on `[t_r, t_r + delta_tau)` and closes the gate on
/// `(t_r, t_r + tau_g)`. A selector held high therefore fires again only after
/// the gate has been observed closed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ImpulseGeneratorState {
    pub firing_until: Option<f64>,
    pub refractory_until: Option<f64>,
    pub last_rise_time: Option<f64>,
    gated: bool,
}

impl ImpulseGeneratorState {
    pub fn new() -> Self {
        Self::default()
    }

    fn gate_open(&self, t: f64) -> bool {
        match (self.last_rise_time, self.refractory_until) {
            (Some(rise), Some(until)) => !(t > rise + TIME_EPS && t < until - TIME_EPS),
            _ => true,
        }
    }

    /// Advances to time `t` with selector bit `delta`; returns the unit-area pulse value.
    pub fn step(&mut self, delta: bool, t: f64, p: &ImpulseParams) -> f64 {
        let gated = delta && self.gate_open(t);
        if gated && !self.gated {
            self.last_rise_time = Some(t);
            self.firing_until = Some(t + p.delta_tau);
            self.refractory_until = Some(t + p.tau_g);
        }
        self.gated = gated;
        match (self.last_rise_time, self.firing_until) {
            (Some(rise), Some(until)) if t >= rise && t < until - TIME_EPS => 1.0 / p.delta_tau,
            _ => 0.0,
        }
    }
}

/// Functional form of [`ImpulseGeneratorState::step`].
pub fn impulse_generator_step(
    g: &ImpulseGeneratorState,
    delta: bool,
    t: f64,
    p: &ImpulseParams,
) -> (f64, ImpulseGeneratorState) {
    let mut next = g.clone();
    let out = next.step(delta, t, p);
    (out, next)
}
