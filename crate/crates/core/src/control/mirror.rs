use super::SelectorSet;
use crate::dynamics::{AgentState, StateVector};

fn negate(a: &AgentState) -> AgentState {
    AgentState::new(-a.x, -a.v, -a.theta, -a.omega)
}

/// `x' = -(x2, x1)`: the scene seen from the other agent's side.
pub fn mirror_transform(s: &StateVector) -> StateVector {
    StateVector::new(negate(&s.agents[1]), negate(&s.agents[0]))
}

/// Image of a target set under exchange of the agents.
pub fn mirror_set(j: &SelectorSet) -> SelectorSet {
    SelectorSet::new(j.iter().map(|nu| nu.transpose().value())).expect("transpose keeps indices in 1..=9")
}
