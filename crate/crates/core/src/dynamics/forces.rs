//! Tip geometry and the external forces acting on the pendulum tips: the
//! viscoelastic rod reaction and the penalty-method floor.

use super::{DynamicsError, FloorParams, PendulumParams, RodParams, StateVector};

/// Rod lengths below this are treated as a collapsed (invalid) configuration.
pub const MIN_ROD_LENGTH: f64 = 1e-9;

/// Sigmoid approximation `1 / (1 + exp(-sigma * s))` of the unit step.
///
/// Evaluated branchwise so that `exp` is only ever called with a
/// non-positive argument and cannot overflow for steep `sigma`.
#[inline]
pub fn smooth_step(s: f64, sigma: f64) -> f64 {
    let z = sigma * s;
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Smooth signum `2 U_sigma(s) - 1`.
#[inline]
pub fn smooth_sign(s: f64, sigma: f64) -> f64 {
    2.0 * smooth_step(s, sigma) - 1.0
}

/// Position and velocity of one pendulum tip in the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TipKinematics {
    pub pos: [f64; 2],
    pub vel: [f64; 2],
}

/// Tip positions `(x + r sin th, r cos th)` and their time derivatives for both agents.
pub fn tip_kinematics(s: &StateVector, p: &PendulumParams) -> [TipKinematics; 2] {
    s.agents.map(|a| {
        let (sin, cos) = a.theta.sin_cos();
        TipKinematics {
            pos: [a.x + p.r * sin, p.r * cos],
            vel: [a.v + p.r * a.omega * cos, -p.r * a.omega * sin],
        }
    })
}

/// Reaction carried by the connection rod.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RodForce {
    /// Force vector `(p / w) * w_vec`, where `w_vec` points from tip 1 to tip 2.
    /// Agent 1 receives `-vector`, agent 2 receives `+vector`.
    pub vector: [f64; 2],
    /// Signed magnitude `-k_w (w - w0) - c_w dw/dt`; negative when stretched.
    pub magnitude: f64,
    /// Current rod length `w`.
    pub length: f64,
    /// Rate of change of the rod length.
    pub length_rate: f64,
}

pub fn rod_force(
    s: &StateVector,
    rp: &RodParams,
    p: &PendulumParams,
) -> Result<RodForce, DynamicsError> {
    rod_force_from_tips(&tip_kinematics(s, p), rp)
}

pub(crate) fn rod_force_from_tips(
    tips: &[TipKinematics; 2],
    rp: &RodParams,
) -> Result<RodForce, DynamicsError> {
    let wx = tips[1].pos[0] - tips[0].pos[0];
    let wy = tips[1].pos[1] - tips[0].pos[1];
    let w = wx.hypot(wy);
    if !(w >= MIN_ROD_LENGTH) {
        return Err(DynamicsError::DegenerateRod { length: w });
    }
    let wx_dot = tips[1].vel[0] - tips[0].vel[0];
    let wy_dot = tips[1].vel[1] - tips[0].vel[1];
    let w_dot = (wx_dot * wx + wy_dot * wy) / w;
    let magnitude = -rp.k_w * (w - rp.w0) - rp.c_w * w_dot;
    let scale = magnitude / w;
    Ok(RodForce { vector: [scale * wx, scale * wy], magnitude, length: w, length_rate: w_dot })
}

/// Floor reaction on one tip: normal force `R` and friction `F`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FloorForce {
    pub normal: f64,
    pub friction: f64,
}

pub fn floor_forces(s: &StateVector, fp: &FloorParams, p: &PendulumParams) -> [FloorForce; 2] {
    floor_forces_from_tips(&tip_kinematics(s, p), fp)
}

pub(crate) fn floor_forces_from_tips(tips: &[TipKinematics; 2], fp: &FloorParams) -> [FloorForce; 2] {
    tips.map(|tip| {
        let y = tip.pos[1];
        let y_dot = tip.vel[1];
        let normal = smooth_step(-y, fp.sigma) * (-fp.k_f * y - fp.c_f * y_dot);
        let friction = if fp.mu == 0.0 {
            0.0
        } else {
            -fp.mu * normal * smooth_sign(tip.vel[0], fp.sigma)
        };
        FloorForce { normal, friction }
    })
}
