use std::f64::consts::FRAC_PI_6;

use serde::{Deserialize, Serialize};

use crate::dynamics::{smooth_step, Controller, DynamicsError, StateVector};

/// Deadband PD standing control. Inside `|theta| < delta_theta` it acts as a plain
/// PD law; outside it fades to zero so that the pendulum can fall onto the floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StandingControlParams {
    /// Proportional gain, N·m/rad.
    pub k_p: f64,
    /// Derivative gain, N·m·s/rad.
    pub k_d: f64,
    /// Half width of the deadband trapezoid, rad.
    pub delta_theta: f64,
    /// Steepness of the trapezoid edges.
    pub alpha: f64,
}

impl StandingControlParams {
    /// Gains of the original parameter table.
    pub const PUBLISHED: Self = Self { k_p: 1.0, k_d: 0.01, delta_theta: FRAC_PI_6, alpha: 25.0 };

    pub fn validate(&self) -> Result<(), DynamicsError> {
        crate::dynamics::non_negative("k_p", self.k_p)?;
        crate::dynamics::non_negative("k_d", self.k_d)?;
        crate::dynamics::positive("delta_theta", self.delta_theta)?;
        crate::dynamics::positive("alpha", self.alpha)
    }
}

impl Default for StandingControlParams {
    fn default() -> Self {
        Self::PUBLISHED
    }
}

/// Smooth trapezoid of unit height, `U_a(theta + dth) * U_a(dth - theta)`.
#[inline]
pub fn trap(theta: f64, delta_theta: f64, alpha: f64) -> f64 {
    smooth_step(theta + delta_theta, alpha) * smooth_step(-theta + delta_theta, alpha)
}

#[inline]
pub fn pd_torque(theta: f64, theta_dot: f64, p: &StandingControlParams) -> f64 {
    trap(theta, p.delta_theta, p.alpha) * (-p.k_p * theta - p.k_d * theta_dot)
}

/// Deadband PD on both agents and nothing else.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StandingControl {
    pub params: StandingControlParams,
}

impl StandingControl {
    pub fn new(params: StandingControlParams) -> Self {
        Self { params }
    }

    pub fn torques(&self, s: &StateVector) -> [f64; 2] {
        s.agents.map(|a| pd_torque(a.theta, a.omega, &self.params))
    }
}

impl Controller for StandingControl {
    fn feedback_torque(&self, s: &StateVector) -> [f64; 2] {
        self.torques(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn trapezoid_centre_value() {
        let expected = (1.0 + (-25.0 * FRAC_PI_6).exp()).powi(-2);
        let v = trap(0.0, FRAC_PI_6, 25.0);
        assert!((v - expected).abs() < 1e-15);
        // 0.9999959: the quoted 0.99999 is this value truncated to five decimals.
        assert_eq!((v * 1e5).floor() / 1e5, 0.99999);
    }

    #[test]
    fn trapezoid_tails_vanish() {
        assert!(trap(10.0, FRAC_PI_6, 25.0) < 1e-4);
        assert!(trap(-10.0, FRAC_PI_6, 25.0) < 1e-4);
    }

    #[test]
    fn pd_near_origin() {
        let p = StandingControlParams { k_p: 1.0, k_d: 0.01, ..StandingControlParams::PUBLISHED };
        assert_eq!(pd_torque(0.0, 0.0, &p), 0.0);
        let t = pd_torque(0.1, 0.0, &p);
        assert!((t + 0.099_997).abs() < 1e-6, "{t}");
    }

    #[test]
    fn pd_cut_off_beyond_deadband() {
        let p = StandingControlParams::PUBLISHED;
        for w in [-500.0, -10.0, 0.0, 10.0, 800.0] {
            assert!(pd_torque(1.0, w, &p).abs() < 1e-3, "w={w}");
        }
    }

    #[test]
    fn default_gains_exceed_gravity_stiffness() {
        use crate::dynamics::PendulumParams;
        let k_p = StandingControlParams::default().k_p;
        assert!(k_p > PendulumParams::default().gravity_stiffness());
        // With the masses exactly as printed the upright would be statically unstable.
        assert!(k_p < PendulumParams::AS_PRINTED.gravity_stiffness());
    }

    #[test]
    fn trapezoid_edge_decays_like_the_sigmoid() {
        // Five steepness units past the edge the factor is still 1/(1+e^5) ~ 6.7e-3;
        // seven units are needed to get below 1e-3.
        let a = 25.0;
        let at5 = trap(FRAC_PI_6 + 5.0 / a, FRAC_PI_6, a);
        assert!((at5 - 1.0 / (1.0 + 5f64.exp())).abs() < 1e-6);
        assert!(trap(FRAC_PI_6 + 7.0 / a, FRAC_PI_6, a) < 1e-3);
    }

    proptest! {
        #[test]
        fn trapezoid_is_even(theta in -20.0f64..20.0) {
            prop_assert_eq!(trap(theta, FRAC_PI_6, 25.0), trap(-theta, FRAC_PI_6, 25.0));
        }

        #[test]
        fn trapezoid_tail_bound(
            theta in 0.0f64..3.0,
            w in -50.0f64..50.0,
            k_p in 0.1f64..10.0,
            k_d in 0.0f64..1.0,
            alpha in 5.0f64..100.0,
        ) {
            let p = StandingControlParams { k_p, k_d, delta_theta: FRAC_PI_6, alpha };
            let th = FRAC_PI_6 + 7.0 / alpha + theta;
            for sign in [1.0, -1.0] {
                let t = pd_torque(sign * th, w, &p);
                prop_assert!(t.abs() < 1e-3 * (k_p * th + k_d * w.abs()));
            }
        }
    }
}
