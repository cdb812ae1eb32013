use serde::{Deserialize, Serialize};

use super::DynamicsError;

/// Physical constants shared by both cart-pendulum agents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PendulumParams {
    /// Pendulum (tip) mass, kg.
    pub m_theta: f64,
    /// Cart mass, kg.
    pub m_x: f64,
    /// Pendulum length, m.
    pub r: f64,
    /// Gravitational acceleration, m/s².
    pub g: f64,
    /// Viscous coefficient on the cart, N·s/m.
    pub c_x: f64,
    /// Viscous coefficient on the pendulum joint, N·m·s.
    pub c_theta: f64,
}

impl Default for PendulumParams {
    /// Light pendulum on a heavy cart. The printed parameter table lists the
    /// two masses the other way round ([`Self::AS_PRINTED`]); with those the
    /// printed standing gains cannot hold the upright, while this assignment
    /// reproduces the published measurement box.
    fn default() -> Self {
        Self { m_theta: 0.067, m_x: 0.68, ..Self::AS_PRINTED }
    }
}

impl PendulumParams {
    pub const AS_PRINTED: Self = Self { m_theta: 0.68, m_x: 0.067, r: 0.3, g: 9.8, c_x: 0.01, c_theta: 0.01 };

    pub fn validate(&self) -> Result<(), DynamicsError> {
        positive("m_theta", self.m_theta)?;
        positive("m_x", self.m_x)?;
        positive("r", self.r)?;
        positive("g", self.g)?;
        non_negative("c_x", self.c_x)?;
        non_negative("c_theta", self.c_theta)
    }

    /// Gravity stiffness `m_theta * g * r` of the upright position (N·m/rad).
    pub fn gravity_stiffness(&self) -> f64 {
        self.m_theta * self.g * self.r
    }
}

/// Viscoelastic connection rod between the two pendulum tips.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RodParams {
    /// Natural length, m.
    pub w0: f64,
    /// Spring coefficient, N/m.
    pub k_w: f64,
    /// Viscous coefficient, N·s/m.
    pub c_w: f64,
}

impl Default for RodParams {
    fn default() -> Self {
        Self { w0: 1.0, k_w: 5000.0, c_w: 50.0 }
    }
}

impl RodParams {
    pub fn validate(&self, pendulum: &PendulumParams) -> Result<(), DynamicsError> {
        if !(self.w0.is_finite() && self.w0 > 2.0 * pendulum.r) {
            return Err(DynamicsError::InvalidParameter {
                name: "w0",
                reason: format!("must exceed 2r = {}, got {}", 2.0 * pendulum.r, self.w0),
            });
        }
        non_negative("k_w", self.k_w)?;
        non_negative("c_w", self.c_w)
    }
}

/// Penalty floor at `Y = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FloorParams {
    /// Spring coefficient, N/m.
    pub k_f: f64,
    /// Viscous coefficient, N·s/m.
    pub c_f: f64,
    /// Coulomb friction coefficient.
    pub mu: f64,
    /// Steepness of the smoothed step.
    pub sigma: f64,
}

impl Default for FloorParams {
    fn default() -> Self {
        Self { k_f: 500.0, c_f: 10.0, mu: 0.0, sigma: 1e6 }
    }
}

impl FloorParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        non_negative("k_f", self.k_f)?;
        non_negative("c_f", self.c_f)?;
        non_negative("mu", self.mu)?;
        positive("sigma", self.sigma)
    }
}

pub(crate) fn positive(name: &'static str, v: f64) -> Result<(), DynamicsError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(DynamicsError::InvalidParameter { name, reason: format!("must be > 0, got {v}") })
    }
}

pub(crate) fn non_negative(name: &'static str, v: f64) -> Result<(), DynamicsError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(DynamicsError::InvalidParameter { name, reason: format!("must be >= 0, got {v}") })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let p = PendulumParams::default();
        p.validate().unwrap();
        RodParams::default().validate(&p).unwrap();
        FloorParams::default().validate().unwrap();
    }

    #[test]
    fn short_rod_is_rejected() {
        let p = PendulumParams::default();
        let rod = RodParams { w0: 0.5, ..RodParams::default() };
        assert!(matches!(rod.validate(&p), Err(DynamicsError::InvalidParameter { name: "w0", .. })));
    }

    #[test]
    fn negative_damping_is_rejected() {
        let p = PendulumParams { c_x: -1.0, ..PendulumParams::default() };
        assert!(p.validate().is_err());
        let f = FloorParams { sigma: 0.0, ..FloorParams::default() };
        assert!(f.validate().is_err());
    }
}
