//! The nine stable equilibria, their competitive interpretation, and
//! convergence detection along a trajectory.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::StateVector;

/// Posture of one agent at rest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AgentStatus {
    Standing = 0,
    /// Lying on the floor at `theta ~ -pi/2`.
    FallenNegative = 1,
    /// Lying on the floor at `theta ~ +pi/2`.
    FallenPositive = 2,
}

impl AgentStatus {
    /// Nearest of `{0, -pi/2, +pi/2}`; angles beyond `pi/2` (floor penetration) still bin as fallen.
    pub fn from_angle(theta: f64) -> Self {
        if theta.abs() <= 0.5 * FRAC_PI_2 {
            AgentStatus::Standing
        } else if theta < 0.0 {
            AgentStatus::FallenNegative
        } else {
            AgentStatus::FallenPositive
        }
    }

    fn from_code(c: u8) -> Self {
        match c {
            0 => AgentStatus::Standing,
            1 => AgentStatus::FallenNegative,
            _ => AgentStatus::FallenPositive,
        }
    }
}

/// Index `nu` of a final state: `0` = not converged, `1..=9` the equilibria
/// `nu = 3a + b + 1` where `a`, `b` are the statuses of agent 1 and agent 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct EquilibriumIndex(u8);

impl EquilibriumIndex {
    pub const UNCLASSIFIED: Self = Self(0);
    pub const BOTH_STANDING: Self = Self(1);

    pub fn new(nu: u8) -> Option<Self> {
        (nu <= 9).then_some(Self(nu))
    }

    pub fn from_statuses(a: AgentStatus, b: AgentStatus) -> Self {
        Self(3 * a as u8 + b as u8 + 1)
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn is_classified(self) -> bool {
        self.0 != 0
    }

    pub fn statuses(self) -> Option<(AgentStatus, AgentStatus)> {
        if self.0 == 0 {
            return None;
        }
        let k = self.0 - 1;
        Some((AgentStatus::from_code(k / 3), AgentStatus::from_code(k % 3)))
    }

    /// Swaps the roles of the two agents (transpose of the 3x3 outcome matrix).
    pub fn transpose(self) -> Self {
        match self.statuses() {
            None => self,
            Some((a, b)) => Self::from_statuses(b, a),
        }
    }

    /// Classifies a state by binning both angles; velocities are not inspected.
    pub fn of_state(s: &StateVector) -> Self {
        Self::from_statuses(
            AgentStatus::from_angle(s.agents[0].theta),
            AgentStatus::from_angle(s.agents[1].theta),
        )
    }
}

impl TryFrom<u8> for EquilibriumIndex {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        Self::new(v).ok_or_else(|| format!("equilibrium index {v} out of range 0..=9"))
    }
}

impl From<EquilibriumIndex> for u8 {
    fn from(n: EquilibriumIndex) -> u8 {
        n.0
    }
}

impl fmt::Display for EquilibriumIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Competitive meaning of a final state: the agent left standing wins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Unresolved,
    BothStanding,
    Agent1Wins,
    Agent2Wins,
    DoubleFall,
}

/// Interpretation of the nine equilibria as a win-loss table.
pub struct WinLossMatrix;

impl WinLossMatrix {
    pub fn outcome(nu: EquilibriumIndex) -> Outcome {
        match nu.statuses() {
            None => Outcome::Unresolved,
            Some((AgentStatus::Standing, AgentStatus::Standing)) => Outcome::BothStanding,
            Some((AgentStatus::Standing, _)) => Outcome::Agent1Wins,
            Some((_, AgentStatus::Standing)) => Outcome::Agent2Wins,
            Some(_) => Outcome::DoubleFall,
        }
    }

    /// Human-readable label. Agent 1 stands on the left, so `theta < 0` of agent 2 is a
    /// fall towards agent 1 (pulled) and `theta > 0` of agent 1 is a fall towards agent 2.
    pub fn label(nu: EquilibriumIndex) -> &'static str {
        match nu.value() {
            0 => "unresolved",
            1 => "both standing",
            2 => "agent 1 wins by pulling",
            3 => "agent 1 wins by pushing",
            4 => "agent 2 wins by pushing",
            5 => "both fall leftwards",
            6 => "both fall outwards",
            7 => "agent 2 wins by pulling",
            8 => "both fall inwards",
            _ => "both fall rightwards",
        }
    }
}

/// Thresholds for declaring a trajectory converged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectionParams {
    /// Bound on `|theta_dot|` of both pendula, rad/s.
    pub omega_tol: f64,
    /// Bound on the relative cart velocity `|v1 - v2|`, m/s.
    pub v_tol: f64,
    /// Time both bounds must hold without interruption, s.
    pub dwell: f64,
}

impl Default for DetectionParams {
    fn default() -> Self {
        Self { omega_tol: 1e-3, v_tol: 1e-3, dwell: 0.5 }
    }
}

impl DetectionParams {
    /// Whether the rates of `s` are within tolerance at this instant.
    ///
    /// Uniform translation of the whole linkage is a neutral direction of every
    /// equilibrium, so only the relative cart velocity is gated.
    pub fn is_calm(&self, s: &StateVector) -> bool {
        let [a, b] = s.agents;
        a.omega.abs().max(b.omega.abs()) < self.omega_tol && (a.v - b.v).abs() < self.v_tol
    }
}

/// Tracks how long a trajectory has stayed calm and reports the equilibrium
/// once the dwell time is reached.
#[derive(Debug, Clone)]
pub struct EquilibriumDetector {
    params: DetectionParams,
    calm_since: Option<f64>,
}

impl EquilibriumDetector {
    pub fn new(params: DetectionParams) -> Self {
        Self { params, calm_since: None }
    }

    pub fn reset(&mut self) {
        self.calm_since = None;
    }

    /// Feeds the state at time `t`; returns the equilibrium once converged.
    pub fn observe(&mut self, t: f64, s: &StateVector) -> Option<EquilibriumIndex> {
        if !self.params.is_calm(s) {
            self.calm_since = None;
            return None;
        }
        let since = *self.calm_since.get_or_insert(t);
        // Tolerate the rounding of t accumulated on the step grid.
        (t - since >= self.params.dwell - 1e-9).then(|| EquilibriumIndex::of_state(s))
    }
}

/// One-shot check over a window of recent `(t, state)` samples, oldest first.
///
/// Converged when every sample is calm and the window spans at least the dwell time.
pub fn detect_equilibrium(history: &[(f64, StateVector)], params: &DetectionParams) -> Option<EquilibriumIndex> {
    let mut det = EquilibriumDetector::new(*params);
    history.iter().fold(None, |_, (t, s)| det.observe(*t, s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::AgentState;

    #[test]
    fn encoding_covers_all_nine() {
        let all = [AgentStatus::Standing, AgentStatus::FallenNegative, AgentStatus::FallenPositive];
        let mut seen = Vec::new();
        for a in all {
            for b in all {
                let nu = EquilibriumIndex::from_statuses(a, b);
                assert_eq!(nu.statuses(), Some((a, b)));
                seen.push(nu.value());
            }
        }
        seen.sort();
        assert_eq!(seen, (1..=9).collect::<Vec<u8>>());
    }

    #[test]
    fn transpose_maps_agent1_wins_to_agent2_wins() {
        let t: Vec<u8> = [2, 3].iter().map(|&v| EquilibriumIndex(v).transpose().value()).collect();
        assert_eq!(t, vec![4, 7]);
        for v in 0..=9 {
            let n = EquilibriumIndex(v);
            assert_eq!(n.transpose().transpose(), n);
        }
    }

    #[test]
    fn win_loss_table() {
        use Outcome::*;
        let expect = [Unresolved, BothStanding, Agent1Wins, Agent1Wins, Agent2Wins, DoubleFall, DoubleFall, Agent2Wins, DoubleFall, DoubleFall];
        for (v, o) in expect.iter().enumerate() {
            assert_eq!(WinLossMatrix::outcome(EquilibriumIndex(v as u8)), *o, "nu={v}");
        }
        assert_eq!(WinLossMatrix::label(EquilibriumIndex(2)), "agent 1 wins by pulling");
    }

    #[test]
    fn out_of_range_index_is_rejected() {
        assert!(EquilibriumIndex::new(10).is_none());
        assert!(serde_json::from_str::<EquilibriumIndex>("12").is_err());
        assert_eq!(serde_json::from_str::<EquilibriumIndex>("7").unwrap().value(), 7);
    }

    fn rest(th1: f64, th2: f64) -> StateVector {
        StateVector::new(AgentState::new(0.0, 0.0, th1, 0.0), AgentState::new(1.0, 0.0, th2, 0.0))
    }

    fn held(s: StateVector, duration: f64, dt: f64) -> Vec<(f64, StateVector)> {
        (0..=(duration / dt).round() as usize).map(|k| (k as f64 * dt, s)).collect()
    }

    #[test]
    fn trivial_state_held_half_a_second_is_both_standing() {
        let p = DetectionParams::default();
        assert_eq!(detect_equilibrium(&held(rest(0.0, 0.0), 0.5, 5e-4), &p), Some(EquilibriumIndex(1)));
        assert_eq!(detect_equilibrium(&held(rest(0.0, 0.0), 0.4, 5e-4), &p), None);
    }

    #[test]
    fn floor_exceedance_still_bins_as_fallen() {
        let p = DetectionParams::default();
        assert_eq!(detect_equilibrium(&held(rest(-1.62, 0.0), 0.5, 5e-4), &p), Some(EquilibriumIndex(4)));
        assert_eq!(detect_equilibrium(&held(rest(1.62, -1.62), 0.5, 5e-4), &p), Some(EquilibriumIndex(8)));
    }

    #[test]
    fn fast_rotation_is_never_converged() {
        let p = DetectionParams::default();
        let mut s = rest(0.0, 0.0);
        s.agents[0].omega = 0.5;
        assert_eq!(detect_equilibrium(&held(s, 2.0, 5e-4), &p), None);
    }

    #[test]
    fn common_translation_is_neutral_but_relative_motion_is_not() {
        let p = DetectionParams::default();
        let mut s = rest(0.0, 0.0);
        s.agents[0].v = 0.01;
        s.agents[1].v = 0.01;
        assert!(p.is_calm(&s));
        s.agents[1].v = 0.0;
        assert!(!p.is_calm(&s));
    }

    #[test]
    fn interruption_restarts_the_dwell_clock() {
        let mut det = EquilibriumDetector::new(DetectionParams::default());
        let calm = rest(0.0, 0.0);
        let mut busy = calm;
        busy.agents[1].omega = 1.0;
        assert_eq!(det.observe(0.0, &calm), None);
        assert_eq!(det.observe(0.3, &busy), None);
        assert_eq!(det.observe(0.4, &calm), None);
        assert_eq!(det.observe(0.8, &calm), None);
        assert_eq!(det.observe(0.9, &calm), Some(EquilibriumIndex(1)));
    }
}
