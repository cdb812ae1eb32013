//! Mechanics of the coupled inverted pendula: tip forces, equations of motion,
//! integration, and classification of final states.

mod equilibrium;
mod forces;
mod integrator;
mod model;
mod params;
mod simulate;
mod state;

pub use equilibrium::{
    detect_equilibrium, AgentStatus, DetectionParams, EquilibriumDetector, EquilibriumIndex, Outcome,
    WinLossMatrix,
};
pub use forces::{
    floor_forces, rod_force, smooth_sign, smooth_step, tip_kinematics, FloorForce, RodForce, TipKinematics,
    MIN_ROD_LENGTH,
};
pub use integrator::rkg4_step;
pub use model::{CipModel, TipForce};
pub use params::{FloorParams, PendulumParams, RodParams};
pub use simulate::{simulate, Controller, HeldTorque, Passive, Sample, SimError, SimOutcome, SimSettings};
pub use state::{AgentState, StateVector};

pub(crate) use params::{non_negative, positive};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DynamicsError {
    #[error("state contains NaN or infinite components")]
    NonFiniteState,
    #[error("connection rod collapsed to length {length:e} m")]
    DegenerateRod { length: f64 },
    #[error("mass matrix of agent {} is singular (det = {det:e})", agent + 1)]
    SingularMassMatrix { agent: usize, det: f64 },
    #[error("pendulum {} left the unwrapped angle branch (theta = {theta})", agent + 1)]
    AngleOutOfBranch { agent: usize, theta: f64 },
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
}
