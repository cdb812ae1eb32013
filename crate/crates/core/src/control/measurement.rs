//! Reduced measurements `y = H x` and their rigid-rod reconstruction `x = h(y)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::ControlError;
use crate::dynamics::{AgentState, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasurementMode {
    /// `(th1, w1, th2, w2)`.
    FourDim,
    /// `(x1, v1, th1, w1, th2, w2)`.
    SixDim,
}

impl MeasurementMode {
    pub fn dim(self) -> usize {
        match self {
            MeasurementMode::FourDim => 4,
            MeasurementMode::SixDim => 6,
        }
    }
}

impl fmt::Display for MeasurementMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MeasurementMode::FourDim => "four-dim",
            MeasurementMode::SixDim => "six-dim",
        })
    }
}

/// A measurement vector of 4 or 6 components, stored inline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    dim: usize,
    data: [f64; 6],
}

impl Measurement {
    pub fn new(values: &[f64]) -> Option<Self> {
        if values.len() != 4 && values.len() != 6 {
            return None;
        }
        let mut data = [0.0; 6];
        data[..values.len()].copy_from_slice(values);
        Some(Self { dim: values.len(), data })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data[..self.dim]
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// The linear measurement `H` together with the geometry needed for `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementMap {
    pub mode: MeasurementMode,
    /// Rigid rod length used by the reconstruction, m.
    pub w0: f64,
    /// Pendulum length, m.
    pub r: f64,
}

impl MeasurementMap {
    pub fn four_dim(w0: f64, r: f64) -> Self {
        Self { mode: MeasurementMode::FourDim, w0, r }
    }

    pub fn six_dim(w0: f64, r: f64) -> Self {
        Self { mode: MeasurementMode::SixDim, w0, r }
    }

    pub fn measure(&self, s: &StateVector) -> Measurement {
        measure(s, self.mode)
    }

    pub fn reconstruct(&self, y: &Measurement) -> Result<StateVector, ControlError> {
        reconstruct(y, self)
    }
}

pub fn measure(s: &StateVector, mode: MeasurementMode) -> Measurement {
    let [a, b] = s.agents;
    let mut data = [0.0; 6];
    match mode {
        MeasurementMode::FourDim => data[..4].copy_from_slice(&[a.theta, a.omega, b.theta, b.omega]),
        MeasurementMode::SixDim => data.copy_from_slice(&[a.x, a.v, a.theta, a.omega, b.theta, b.omega]),
    }
    Measurement { dim: mode.dim(), data }
}

/// Cart 2 position and velocity that keep the tips exactly `w0` apart.
///
/// Fails when `w0^2 <= r^2 (cos th2 - cos th1)^2`.
pub fn rigid_second_cart(
    w0: f64,
    r: f64,
    agent1: &AgentState,
    theta2: f64,
    omega2: f64,
) -> Result<(f64, f64), ControlError> {
    let (s1, c1) = agent1.theta.sin_cos();
    let (s2, c2) = theta2.sin_cos();
    let dc = c2 - c1;
    let radicand = w0 * w0 - r * r * dc * dc;
    if !(radicand > 0.0) {
        return Err(ControlError::ConstraintInfeasible { radicand });
    }
    let root = radicand.sqrt();
    let x2 = agent1.x - r * (s2 - s1) + root;
    let v2 = agent1.v - r * (omega2 * c2 - agent1.omega * c1) + r * r * dc * (omega2 * s2 - agent1.omega * s1) / root;
    Ok((x2, v2))
}

/// Inverse `h` of the measurement under the rigid-rod constraint. In four-dim
/// mode cart 1 is placed at rest at the origin.
pub fn reconstruct(y: &Measurement, m: &MeasurementMap) -> Result<StateVector, ControlError> {
    if y.dim() != m.mode.dim() {
        return Err(ControlError::DimensionMismatch { expected: m.mode.dim(), got: y.dim() });
    }
    let v = y.as_slice();
    let (a1, th2, w2) = match m.mode {
        MeasurementMode::FourDim => (AgentState::new(0.0, 0.0, v[0], v[1]), v[2], v[3]),
        MeasurementMode::SixDim => (AgentState::new(v[0], v[1], v[2], v[3]), v[4], v[5]),
    };
    let (x2, v2) = rigid_second_cart(m.w0, m.r, &a1, th2, w2)?;
    Ok(StateVector::new(a1, AgentState::new(x2, v2, th2, w2)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{rod_force, PendulumParams, RodParams};
    use proptest::prelude::*;

    fn map4() -> MeasurementMap {
        MeasurementMap::four_dim(1.0, 0.3)
    }

    #[test]
    fn projection() {
        let s = StateVector::from_array([0.5, 0.1, 0.2, -1.0, 1.4, 0.3, 0.1, 3.0]);
        assert_eq!(measure(&s, MeasurementMode::FourDim).as_slice(), &[0.2, -1.0, 0.1, 3.0]);
        assert_eq!(measure(&s, MeasurementMode::SixDim).as_slice(), &[0.5, 0.1, 0.2, -1.0, 0.1, 3.0]);
        assert_eq!(measure(&StateVector::trivial(1.0), MeasurementMode::FourDim).as_slice(), &[0.0; 4]);
    }

    #[test]
    fn zero_measurement_reconstructs_trivial_state() {
        let y = Measurement::new(&[0.0; 4]).unwrap();
        assert_eq!(reconstruct(&y, &map4()).unwrap(), StateVector::trivial(1.0));
    }

    #[test]
    fn equal_angles_keep_carts_a_rod_apart() {
        let y = Measurement::new(&[0.4, 1.5, 0.4, 1.5]).unwrap();
        let s = reconstruct(&y, &map4()).unwrap();
        assert!((s.agents[1].x - 1.0).abs() < 1e-15);
        assert!((s.agents[1].v - s.agents[0].v).abs() < 1e-15);
    }

    #[test]
    fn closed_form_second_cart() {
        let y = Measurement::new(&[0.3, 0.0, -0.2, 0.0]).unwrap();
        let s = reconstruct(&y, &map4()).unwrap();
        let expected = -0.3 * ((-0.2f64).sin() - 0.3f64.sin())
            + (1.0 - 0.09 * ((-0.2f64).cos() - 0.3f64.cos()).powi(2)).sqrt();
        assert!((s.agents[1].x - expected).abs() < 1e-15);
    }

    #[test]
    fn six_dim_uses_given_cart_one() {
        let m = MeasurementMap::six_dim(1.0, 0.3);
        let y = Measurement::new(&[0.25, -0.5, 0.1, 0.2, -0.1, 0.4]).unwrap();
        let s = reconstruct(&y, &m).unwrap();
        assert_eq!(s.agents[0], AgentState::new(0.25, -0.5, 0.1, 0.2));
        assert_eq!(measure(&s, MeasurementMode::SixDim), y);
    }

    #[test]
    fn infeasible_constraint_is_reported() {
        let m = MeasurementMap::four_dim(0.1, 0.3);
        let y = Measurement::new(&[0.0, 0.0, 3.0, 0.0]).unwrap();
        assert!(matches!(reconstruct(&y, &m), Err(ControlError::ConstraintInfeasible { .. })));
    }

    #[test]
    fn wrong_dimension_is_rejected() {
        let y = Measurement::new(&[0.0; 6]).unwrap();
        assert!(matches!(reconstruct(&y, &map4()), Err(ControlError::DimensionMismatch { .. })));
        assert!(Measurement::new(&[0.0; 5]).is_none());
    }

    proptest! {
        #[test]
        fn measure_inverts_reconstruct(
            th1 in -0.13f64..0.43, w1 in -3.28f64..10.58, th2 in -0.35f64..0.31, w2 in -3.80f64..5.15,
        ) {
            let y = Measurement::new(&[th1, w1, th2, w2]).unwrap();
            let s = reconstruct(&y, &map4()).unwrap();
            prop_assert_eq!(measure(&s, MeasurementMode::FourDim), y);
        }

        #[test]
        fn reconstruction_honours_rigid_rod(
            x1 in -2.0f64..2.0, v1 in -1.0f64..1.0,
            th1 in -1.5f64..1.5, w1 in -10.0f64..10.0, th2 in -1.5f64..1.5, w2 in -10.0f64..10.0,
        ) {
            let m = MeasurementMap::six_dim(1.0, 0.3);
            let s = reconstruct(&Measurement::new(&[x1, v1, th1, w1, th2, w2]).unwrap(), &m).unwrap();
            let rod = rod_force(&s, &RodParams::default(), &PendulumParams::default()).unwrap();
            prop_assert!((rod.length - 1.0).abs() < 1e-12);
            prop_assert!(rod.length_rate.abs() < 1e-9 * (1.0 + w1.abs() + w2.abs()));
        }
    }
}
