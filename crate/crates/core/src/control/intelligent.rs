//! The intelligent controller (classifier -> selector -> impulse generator),
//! its delayed variant, and the full per-simulation control stack.

use std::collections::VecDeque;
use std::sync::Arc;

use super::{mirror_transform, selector, ImpulseGeneratorState, ImpulseParams, SelectorSet, StandingControl};
use crate::dynamics::{Controller, EquilibriumIndex, HeldTorque, StateVector};
use crate::learning::ClassifierTable;

/// Which side of the rod a controller drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Agent1,
    Agent2,
}

impl Side {
    pub fn index(self) -> usize {
        match self {
            Side::Agent1 => 0,
            Side::Agent2 => 1,
        }
    }

    pub fn other(self) -> Self {
        match self {
            Side::Agent1 => Side::Agent2,
            Side::Agent2 => Side::Agent1,
        }
    }
}

/// Past states on the integration grid, used to feed the classifier a state
/// `depth` steps old. Before enough history exists the oldest state is used.
#[derive(Debug, Clone)]
pub struct DelayBuffer {
    depth: usize,
    ring: VecDeque<StateVector>,
}

impl DelayBuffer {
    /// Buffer for delay `tau_d` rounded to the nearest whole number of steps.
    pub fn new(tau_d: f64, dt: f64) -> Self {
        let depth = if tau_d > 0.0 { (tau_d / dt).round() as usize } else { 0 };
        Self::with_depth(depth)
    }

    pub fn with_depth(depth: usize) -> Self {
        Self { depth, ring: VecDeque::with_capacity(depth + 1) }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Records the present state and returns the delayed one.
    pub fn push(&mut self, s: StateVector) -> StateVector {
        if self.ring.len() == self.depth + 1 {
            self.ring.pop_front();
        }
        self.ring.push_back(s);
        self.ring[0]
    }

    pub fn clear(&mut self) {
        self.ring.clear();
    }
}

/// Single decision of the controller for agent 1's frame:
/// `P * G(S_J(C*(s)))`. Returns the torque and whether the state was inside the table.
pub fn ic_output(
    s_measured: &StateVector,
    table: &ClassifierTable,
    targets: &SelectorSet,
    generator: &mut ImpulseGeneratorState,
    impulse: &ImpulseParams,
    t: f64,
) -> (f64, bool) {
    let nu = table.classify(s_measured);
    let inside = nu.is_some();
    let delta = selector(nu.unwrap_or(EquilibriumIndex::UNCLASSIFIED), targets);
    (impulse.p * generator.step(delta, t, impulse), inside)
}

/// `ic_output` evaluated on the state `buffer.depth()` steps in the past; the
/// generator itself runs in present time.
pub fn dic_output(
    buffer: &mut DelayBuffer,
    current: &StateVector,
    table: &ClassifierTable,
    targets: &SelectorSet,
    generator: &mut ImpulseGeneratorState,
    impulse: &ImpulseParams,
    t: f64,
) -> (f64, bool) {
    let delayed = buffer.push(*current);
    ic_output(&delayed, table, targets, generator, impulse, t)
}

/// A (delayed) intelligent controller installed on one agent.
///
/// Tables are always learned from agent 1's point of view. On agent 2 the
/// state is mirrored before lookup, the target set is taken back through the
/// transpose, and the impulse sign is flipped.
#[derive(Debug, Clone)]
pub struct IntelligentController {
    side: Side,
    table: Arc<ClassifierTable>,
    /// Targets expressed in the table's (agent 1) frame.
    frame_targets: SelectorSet,
    impulse: ImpulseParams,
    buffer: DelayBuffer,
    generator: ImpulseGeneratorState,
    out_of_range: u64,
}

impl IntelligentController {
    /// `targets` are global equilibrium indices, e.g. `{4, 7}` for agent 2;
    /// `impulse.p` is the magnitude used on agent 1 (agent 2 applies `-p`).
    pub fn new(
        side: Side,
        table: Arc<ClassifierTable>,
        targets: SelectorSet,
        impulse: ImpulseParams,
        tau_d: f64,
        dt: f64,
    ) -> Self {
        let (frame_targets, impulse) = match side {
            Side::Agent1 => (targets, impulse),
            Side::Agent2 => (super::mirror_set(&targets), ImpulseParams { p: -impulse.p, ..impulse }),
        };
        Self {
            side,
            table,
            frame_targets,
            impulse,
            buffer: DelayBuffer::new(tau_d, dt),
            generator: ImpulseGeneratorState::new(),
            out_of_range: 0,
        }
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn delay_steps(&self) -> usize {
        self.buffer.depth()
    }

    /// Steps on which the (delayed) measurement fell outside the table.
    pub fn out_of_range_count(&self) -> u64 {
        self.out_of_range
    }

    pub fn generator(&self) -> &ImpulseGeneratorState {
        &self.generator
    }

    pub fn reset(&mut self) {
        self.buffer.clear();
        self.generator = ImpulseGeneratorState::new();
        self.out_of_range = 0;
    }

    /// Torque on this controller's own joint for the step starting at `t`.
    pub fn output(&mut self, t: f64, s: &StateVector) -> f64 {
        let own = match self.side {
            Side::Agent1 => *s,
            Side::Agent2 => mirror_transform(s),
        };
        let (torque, inside) = dic_output(
            &mut self.buffer,
            &own,
            &self.table,
            &self.frame_targets,
            &mut self.generator,
            &self.impulse,
            t,
        );
        if !inside {
            self.out_of_range += 1;
        }
        torque
    }
}

/// Rectangular disturbance `q * I_dtau(t)` on one agent at the start of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disturbance {
    pub side: Side,
    /// Angular impulse, N·m·s (signed).
    pub q: f64,
    /// Pulse width, s.
    pub delta_tau: f64,
}

impl Disturbance {
    pub fn torque_at(&self, t: f64) -> [f64; 2] {
        let mut out = [0.0; 2];
        if self.q != 0.0 && t >= 0.0 && t < self.delta_tau - 1e-9 {
            out[self.side.index()] = self.q / self.delta_tau;
        }
        out
    }

    pub fn mirrored(&self) -> Self {
        Self { side: self.side.other(), q: -self.q, ..*self }
    }
}

/// Standing control on both agents plus optional intelligent controllers and
/// an initial disturbance.
#[derive(Debug, Clone)]
pub struct ControlStack {
    pub standing: StandingControl,
    pub intelligent: [Option<IntelligentController>; 2],
    pub disturbance: Option<Disturbance>,
}

impl ControlStack {
    pub fn standing_only(standing: StandingControl) -> Self {
        Self { standing, intelligent: [None, None], disturbance: None }
    }

    pub fn with_disturbance(mut self, d: Disturbance) -> Self {
        self.disturbance = Some(d);
        self
    }

    pub fn with_controller(mut self, ic: IntelligentController) -> Self {
        let i = ic.side().index();
        self.intelligent[i] = Some(ic);
        self
    }

    pub fn out_of_range_counts(&self) -> [u64; 2] {
        [0, 1].map(|i| self.intelligent[i].as_ref().map_or(0, |c| c.out_of_range_count()))
    }
}

impl Controller for ControlStack {
    fn feedback_torque(&self, s: &StateVector) -> [f64; 2] {
        self.standing.torques(s)
    }

    fn held_torque(&mut self, _step: u64, t: f64, s: &StateVector) -> HeldTorque {
        let mut held = HeldTorque::default();
        if let Some(d) = &self.disturbance {
            held.torque = d.torque_at(t);
        }
        for (i, ic) in self.intelligent.iter_mut().enumerate() {
            if let Some(ic) = ic {
                let u = ic.output(t, s);
                if u != 0.0 {
                    held.torque[i] += u;
                    held.firing[i] = true;
                }
            }
        }
        held
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::MeasurementMode;
    use crate::learning::{ClassifierTable, GridSpec, Provenance};

    const DT: f64 = 5e-4;

    fn table_with(label: u8) -> ClassifierTable {
        let grid = GridSpec::uniform(
            vec![[-0.13, 0.43], [-3.28, 10.58], [-0.35, 0.31], [-3.80, 5.15]],
            2,
        )
        .unwrap();
        let n = grid.cell_count();
        ClassifierTable::new(grid, MeasurementMode::FourDim, vec![label; n], Provenance::unspecified()).unwrap()
    }

    fn impulse() -> ImpulseParams {
        ImpulseParams::with_step(0.06, DT)
    }

    #[test]
    fn delay_buffer_pass_through_and_warm_up() {
        let mut b = DelayBuffer::new(0.0, DT);
        let s = |v: f64| StateVector::from_array([v; 8]);
        assert_eq!(b.push(s(1.0)), s(1.0));
        assert_eq!(b.push(s(2.0)), s(2.0));

        let mut b = DelayBuffer::new(0.0045, DT);
        assert_eq!(b.depth(), 9);
        for k in 0..9 {
            assert_eq!(b.push(s(k as f64)), s(0.0), "warm-up step {k}");
        }
        for k in 9..30 {
            assert_eq!(b.push(s(k as f64)), s((k - 9) as f64));
        }
    }

    #[test]
    fn delay_rounds_to_nearest_step() {
        assert_eq!(DelayBuffer::new(0.0012, DT).depth(), 2);
        assert_eq!(DelayBuffer::new(0.0013, DT).depth(), 3);
    }

    #[test]
    fn ic_gated_by_selector() {
        let j = SelectorSet::agent1_wins();
        let s = StateVector::trivial(1.0);
        let mut g = ImpulseGeneratorState::new();
        assert_eq!(ic_output(&s, &table_with(5), &j, &mut g, &impulse(), 0.0), (0.0, true));
        let mut g = ImpulseGeneratorState::new();
        let (u, inside) = ic_output(&s, &table_with(2), &j, &mut g, &impulse(), 0.0);
        assert!(inside);
        assert!((u - 120.0).abs() < 1e-9);
        assert_eq!(ic_output(&s, &table_with(2), &j, &mut g, &impulse(), DT).0, 0.0);
    }

    #[test]
    fn ic_silent_outside_table() {
        let j = SelectorSet::agent1_wins();
        let mut s = StateVector::trivial(1.0);
        s.agents[0].theta = 0.5;
        let mut g = ImpulseGeneratorState::new();
        assert_eq!(ic_output(&s, &table_with(2), &j, &mut g, &impulse(), 0.0), (0.0, false));
    }

    #[test]
    fn zero_delay_matches_plain_ic() {
        let table = table_with(3);
        let j = SelectorSet::agent1_wins();
        let mut b = DelayBuffer::new(0.0, DT);
        let (mut g1, mut g2) = (ImpulseGeneratorState::new(), ImpulseGeneratorState::new());
        for k in 0..50 {
            let th = 0.6 * ((k as f64) * 0.3).sin();
            let s = StateVector::from_array([0.0, 0.0, th, 0.0, 1.0, 0.0, 0.0, 0.0]);
            let t = k as f64 * DT;
            assert_eq!(
                ic_output(&s, &table, &j, &mut g1, &impulse(), t),
                dic_output(&mut b, &s, &table, &j, &mut g2, &impulse(), t)
            );
        }
    }

    #[test]
    fn agent2_controller_fires_negative_impulse() {
        // Table says "3" in agent 1's frame, i.e. 7 in the global frame for agent 2.
        let table = Arc::new(table_with(3));
        let mut ic = IntelligentController::new(Side::Agent2, table, SelectorSet::agent2_wins(), impulse(), 0.0, DT);
        let u = ic.output(0.0, &StateVector::trivial(1.0));
        assert!((u + 120.0).abs() < 1e-9);
    }

    #[test]
    fn disturbance_pulse() {
        let d = Disturbance { side: Side::Agent2, q: 0.03, delta_tau: DT };
        assert_eq!(d.torque_at(0.0), [0.0, 60.0]);
        assert_eq!(d.torque_at(DT), [0.0, 0.0]);
        assert_eq!(d.mirrored().torque_at(0.0), [-60.0, 0.0]);
        let zero = Disturbance { q: 0.0, ..d };
        assert_eq!(zero.torque_at(0.0), [0.0, 0.0]);
    }

    #[test]
    fn stack_reports_firing() {
        let table = Arc::new(table_with(2));
        let ic = IntelligentController::new(Side::Agent1, table, SelectorSet::agent1_wins(), impulse(), 0.0, DT);
        let mut stack = ControlStack::standing_only(StandingControl::default()).with_controller(ic);
        let held = stack.held_torque(0, 0.0, &StateVector::trivial(1.0));
        assert_eq!(held.firing, [true, false]);
        let held = stack.held_torque(1, DT, &StateVector::trivial(1.0));
        assert_eq!(held.firing, [false, false]);
        assert_eq!(stack.out_of_range_counts(), [0, 0]);
    }
}
