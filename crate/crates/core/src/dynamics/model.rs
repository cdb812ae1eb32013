use serde::{Deserialize, Serialize};

use super::forces::{floor_forces_from_tips, rod_force_from_tips, tip_kinematics};
use super::{AgentState, DynamicsError, FloorParams, PendulumParams, RodParams, StateVector};

/// Relative determinant threshold of the per-agent mass matrix.
const SINGULAR_DET_REL: f64 = 1e-12;

/// The mechanical model: two cart-pendula on a penalty floor, tips joined by a rod.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CipModel {
    pub pendulum: PendulumParams,
    pub rod: RodParams,
    pub floor: FloorParams,
}

/// Horizontal/vertical force applied to one pendulum tip.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TipForce {
    pub fx: f64,
    pub fy: f64,
}

impl CipModel {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        self.pendulum.validate()?;
        self.rod.validate(&self.pendulum)?;
        self.floor.validate()
    }

    /// Total force on each tip: rod reaction (`-p` on agent 1, `+p` on agent 2) plus floor.
    pub fn tip_forces(&self, s: &StateVector) -> Result<[TipForce; 2], DynamicsError> {
        let tips = tip_kinematics(s, &self.pendulum);
        let rod = rod_force_from_tips(&tips, &self.rod)?;
        let floor = floor_forces_from_tips(&tips, &self.floor);
        Ok([
            TipForce { fx: -rod.vector[0] + floor[0].friction, fy: -rod.vector[1] + floor[0].normal },
            TipForce { fx: rod.vector[0] + floor[1].friction, fy: rod.vector[1] + floor[1].normal },
        ])
    }

    /// Time derivative of the state under joint torques `torques = (T1, T2)`.
    pub fn derivative(&self, s: &StateVector, torques: [f64; 2]) -> Result<StateVector, DynamicsError> {
        if !s.is_finite() {
            return Err(DynamicsError::NonFiniteState);
        }
        let forces = self.tip_forces(s)?;
        let mut out = StateVector::default();
        for i in 0..2 {
            let (x_dd, th_dd) = self.accelerations(i, &s.agents[i], forces[i], torques[i])?;
            let a = &s.agents[i];
            out.agents[i] = AgentState::new(a.v, x_dd, a.omega, th_dd);
        }
        if !out.is_finite() {
            return Err(DynamicsError::NonFiniteState);
        }
        Ok(out)
    }

    /// Solves the 2x2 mass-matrix system of one agent for `(x'', theta'')`.
    fn accelerations(
        &self,
        agent: usize,
        a: &AgentState,
        f: TipForce,
        torque: f64,
    ) -> Result<(f64, f64), DynamicsError> {
        let p = &self.pendulum;
        let (sin, cos) = a.theta.sin_cos();
        let m11 = p.m_x + p.m_theta;
        let m12 = p.m_theta * p.r * cos;
        let m22 = p.m_theta * p.r * p.r;
        let det = m11 * m22 - m12 * m12;
        if det.abs() < SINGULAR_DET_REL * m11 * m22 {
            return Err(DynamicsError::SingularMassMatrix { agent, det });
        }
        let b1 = -p.c_x * a.v + f.fx + p.m_theta * p.r * a.omega * a.omega * sin;
        let b2 = -p.c_theta * a.omega + p.r * (cos * f.fx - sin * f.fy) + torque + p.m_theta * p.g * p.r * sin;
        Ok(((m22 * b1 - m12 * b2) / det, (m11 * b2 - m12 * b1) / det))
    }

    /// Kinetic + gravitational + rod elastic energy. Floor penalty energy is not included.
    pub fn mechanical_energy(&self, s: &StateVector) -> Result<f64, DynamicsError> {
        let p = &self.pendulum;
        let mut e = 0.0;
        for a in &s.agents {
            let (_, cos) = a.theta.sin_cos();
            e += 0.5 * (p.m_x + p.m_theta) * a.v * a.v
                + p.m_theta * p.r * cos * a.v * a.omega
                + 0.5 * p.m_theta * p.r * p.r * a.omega * a.omega
                + p.m_theta * p.g * p.r * cos;
        }
        let rod = rod_force_from_tips(&tip_kinematics(s, p), &self.rod)?;
        let stretch = rod.length - self.rod.w0;
        Ok(e + 0.5 * self.rod.k_w * stretch * stretch)
    }

    /// Relative rod elongation `|w - w0| / w0`.
    pub fn rod_strain(&self, s: &StateVector) -> Result<f64, DynamicsError> {
        let rod = rod_force_from_tips(&tip_kinematics(s, &self.pendulum), &self.rod)?;
        Ok((rod.length - self.rod.w0).abs() / self.rod.w0)
    }
}
