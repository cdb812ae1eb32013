//! Torque-producing logic: deadband PD standing control, measurement and
//! reconstruction, the selector and impulse generator, (delayed) intelligent
//! controllers, and the agent-exchange mirror.

mod impulse;
mod intelligent;
mod measurement;
mod mirror;
mod standing;

pub use impulse::{impulse_generator_step, selector, ImpulseGeneratorState, ImpulseParams, SelectorSet};
pub use intelligent::{dic_output, ic_output, ControlStack, DelayBuffer, Disturbance, IntelligentController, Side};
pub use measurement::{
    measure, reconstruct, rigid_second_cart, Measurement, MeasurementMap, MeasurementMode,
};
pub use mirror::{mirror_set, mirror_transform};
pub use standing::{pd_torque, trap, StandingControl, StandingControlParams};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ControlError {
    #[error("rigid-rod reconstruction infeasible (square-root argument {radicand:e})")]
    ConstraintInfeasible { radicand: f64 },
    #[error("measurement has {got} components, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid impulse parameters: {0}")]
    InvalidImpulse(String),
    #[error("invalid selector set: {0}")]
    InvalidSelector(String),
}
