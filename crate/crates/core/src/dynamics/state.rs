use serde::{Deserialize, Serialize};

/// Cart displacement/velocity and pendulum angle/rate of one agent.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AgentState {
    /// Cart displacement (m).
    pub x: f64,
    /// Cart velocity (m/s).
    pub v: f64,
    /// Pendulum angle from the upward vertical (rad), positive towards +x.
    pub theta: f64,
    /// Pendulum angular velocity (rad/s).
    pub omega: f64,
}

impl AgentState {
    pub const fn new(x: f64, v: f64, theta: f64, omega: f64) -> Self {
        Self { x, v, theta, omega }
    }
}

/// Full state of the coupled system, ordered `(x1, v1, th1, w1, x2, v2, th2, w2)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StateVector {
    pub agents: [AgentState; 2],
}

impl StateVector {
    pub const DIM: usize = 8;

    pub const fn new(a1: AgentState, a2: AgentState) -> Self {
        Self { agents: [a1, a2] }
    }

    /// Both pendula upright and at rest, carts separated by the natural rod length.
    pub const fn trivial(w0: f64) -> Self {
        Self::new(AgentState::new(0.0, 0.0, 0.0, 0.0), AgentState::new(w0, 0.0, 0.0, 0.0))
    }

    pub const fn from_array(a: [f64; 8]) -> Self {
        Self::new(
            AgentState::new(a[0], a[1], a[2], a[3]),
            AgentState::new(a[4], a[5], a[6], a[7]),
        )
    }

    pub const fn to_array(&self) -> [f64; 8] {
        let [a, b] = self.agents;
        [a.x, a.v, a.theta, a.omega, b.x, b.v, b.theta, b.omega]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|c| c.is_finite())
    }

    pub fn agent(&self, i: usize) -> &AgentState {
        &self.agents[i]
    }

    /// Largest absolute difference over all eight components.
    pub fn max_abs_diff(&self, other: &StateVector) -> f64 {
        self.to_array()
            .iter()
            .zip(other.to_array().iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl From<[f64; 8]> for StateVector {
    fn from(a: [f64; 8]) -> Self {
        Self::from_array(a)
    }
}

impl From<StateVector> for [f64; 8] {
    fn from(s: StateVector) -> Self {
        s.to_array()
    }
}
