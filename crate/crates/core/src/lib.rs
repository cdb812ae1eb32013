//! Coupled inverted pendula wrestling: dynamics, deadband standing control,
//! impulsive intelligent controllers driven by a learned reachable-set table,
//! and the numerical experiments built on them.

pub mod config;
pub mod control;
pub mod dynamics;
pub mod experiments;
pub mod learning;
pub mod params;
pub mod validation;

pub use control::{
    ControlError, ControlStack, DelayBuffer, Disturbance, ImpulseParams, IntelligentController, MeasurementMap,
    MeasurementMode, SelectorSet, Side, StandingControl, StandingControlParams,
};
pub use dynamics::{
    simulate, CipModel, DynamicsError, EquilibriumIndex, SimOutcome, SimSettings, StateVector,
};
pub use learning::{ClassifierTable, GridSpec, LearnSpec, LearningError};
pub use config::{ConfigError, RunConfig};
pub use params::CipParams;
