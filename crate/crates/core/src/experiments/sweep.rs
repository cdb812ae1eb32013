use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::control::{
    ControlStack, Disturbance, ImpulseParams, IntelligentController, MeasurementMode, SelectorSet, Side,
    StandingControl,
};
use crate::dynamics::{simulate, EquilibriumIndex, SimSettings, StateVector, WinLossMatrix};
use crate::learning::ClassifierTable;
use crate::params::CipParams;

/// Where the initial disturbance `Q I(t)` is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DisturbanceSide {
    Agent1,
    Agent2,
    /// Both placements, trials pooled into one success rate.
    Both,
}

impl DisturbanceSide {
    pub fn sides(self) -> &'static [Side] {
        match self {
            DisturbanceSide::Agent1 => &[Side::Agent1],
            DisturbanceSide::Agent2 => &[Side::Agent2],
            DisturbanceSide::Both => &[Side::Agent1, Side::Agent2],
        }
    }
}

/// An intelligent controller to install on one agent.
#[derive(Debug, Clone)]
pub struct ControllerSpec {
    /// Table learned from agent 1's point of view.
    pub table: Arc<ClassifierTable>,
    /// Target equilibria in the global frame.
    pub targets: SelectorSet,
    /// Delay of the classifier input, s.
    pub tau_d: f64,
    /// Impulse in agent 1's frame; agent 2 applies `-p`.
    pub impulse: ImpulseParams,
    /// Where the table came from, echoed in exported results.
    pub source: Option<String>,
}

impl ControllerSpec {
    fn build(&self, side: Side, dt: f64) -> IntelligentController {
        IntelligentController::new(side, self.table.clone(), self.targets.clone(), self.impulse, self.tau_d, dt)
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    /// Largest disturbance impulse, N·m·s.
    pub q_max: f64,
    /// Number of disturbance strengths, spaced uniformly over `[0, q_max]` inclusive.
    pub n_q: usize,
    pub side: DisturbanceSide,
    /// Disturbance pulse width, s.
    pub delta_tau: f64,
    /// Intelligent controllers for agent 1 and agent 2.
    pub controllers: [Option<ControllerSpec>; 2],
    pub settings: SimSettings,
}

impl SweepConfig {
    /// `n_q` strengths, disturbance on `side`, no controllers yet, Δτ = dt.
    pub fn new(q_max: f64, n_q: usize, side: DisturbanceSide, settings: SimSettings) -> Self {
        Self { q_max, n_q, side, delta_tau: settings.dt, controllers: [None, None], settings }
    }

    pub fn with_controller(mut self, side: Side, c: ControllerSpec) -> Self {
        self.controllers[side.index()] = Some(c);
        self
    }

    /// The strengths `Q_k = q_max k / (n_q - 1)`.
    pub fn q_samples(&self) -> Vec<f64> {
        if self.n_q == 1 {
            return vec![0.0];
        }
        let last = (self.n_q - 1) as f64;
        (0..self.n_q).map(|k| if k + 1 == self.n_q { self.q_max } else { self.q_max * k as f64 / last }).collect()
    }

    pub fn validate(&self, params: &CipParams) -> Result<(), ExperimentError> {
        params.validate()?;
        self.settings.validate()?;
        if self.n_q == 0 {
            return Err(ExperimentError::InvalidConfig("n_q must be >= 1".into()));
        }
        if !(self.q_max >= 0.0 && self.q_max.is_finite()) {
            return Err(ExperimentError::InvalidConfig(format!("q_max must be finite and >= 0, got {}", self.q_max)));
        }
        if !(self.delta_tau > 0.0 && self.delta_tau.is_finite()) {
            return Err(ExperimentError::InvalidConfig(format!("delta_tau must be > 0, got {}", self.delta_tau)));
        }
        let digest = params.digest();
        for (i, c) in self.controllers.iter().enumerate() {
            let Some(c) = c else { continue };
            c.impulse.validate()?;
            if !(c.tau_d >= 0.0 && c.tau_d.is_finite()) {
                return Err(ExperimentError::InvalidConfig(format!("tau_d must be >= 0, got {}", c.tau_d)));
            }
            if c.table.mode() != MeasurementMode::FourDim {
                return Err(ExperimentError::InvalidConfig(format!(
                    "controller {} needs a four-dim table, got {}",
                    i + 1,
                    c.table.mode()
                )));
            }
            let found = &c.table.provenance().param_digest;
            if *found != digest {
                return Err(ExperimentError::TableDigest {
                    agent: i + 1,
                    path: c.source.clone(),
                    expected: digest.clone(),
                    found: found.clone(),
                });
            }
        }
        Ok(())
    }

    /// Serializable summary of this configuration.
    pub fn echo(&self, params: &CipParams) -> SweepEcho {
        let controllers = [0, 1].map(|i| {
            self.controllers[i].as_ref().map(|c| ControllerEcho {
                targets: c.targets.clone(),
                tau_d: c.tau_d,
                impulse: c.impulse,
                resolution: c.table.grid().resolution().to_vec(),
                bounds: c.table.grid().bounds().to_vec(),
                source: c.source.clone(),
            })
        });
        SweepEcho {
            q_max: self.q_max,
            n_q: self.n_q,
            side: self.side,
            delta_tau: self.delta_tau,
            settings: self.settings,
            param_digest: params.digest(),
            controllers,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerEcho {
    pub targets: SelectorSet,
    pub tau_d: f64,
    pub impulse: ImpulseParams,
    pub resolution: Vec<u32>,
    pub bounds: Vec<[f64; 2]>,
    pub source: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEcho {
    pub q_max: f64,
    pub n_q: usize,
    pub side: DisturbanceSide,
    pub delta_tau: f64,
    pub settings: SimSettings,
    pub param_digest: String,
    pub controllers: [Option<ControllerEcho>; 2],
}

/// One disturbance trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_id: usize,
    #[serde(rename = "Q")]
    pub q: f64,
    pub side: Side,
    pub nu: EquilibriumIndex,
    /// Whether any intelligent controller emitted a pulse.
    pub fired: bool,
    pub fired_by: [bool; 2],
    pub t_converge: Option<f64>,
    pub label: String,
    /// Steps on which each controller's measurement fell outside its table.
    pub out_of_range: [u64; 2],
}

/// `E = N_J / (N_total - N_0)`, or no value when every trial is in `N_0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "value", rename_all = "kebab-case")]
pub enum SuccessRate {
    Defined(f64),
    NoDenominator,
}

impl SuccessRate {
    pub fn value(self) -> Option<f64> {
        match self {
            SuccessRate::Defined(v) => Some(v),
            SuccessRate::NoDenominator => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentScore {
    pub agent: Side,
    pub targets: SelectorSet,
    /// Fired trials ending in `targets`.
    pub n_j: usize,
    pub e: SuccessRate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub n_q_total: usize,
    /// Trials in which no controller fired.
    pub n0: usize,
    pub scores: Vec<AgentScore>,
}

impl Aggregates {
    /// Counts over `trials`; `targets` lists the scored agents and their sets.
    pub fn compute(trials: &[TrialRecord], targets: &[(Side, SelectorSet)]) -> Self {
        let n0 = trials.iter().filter(|t| !t.fired).count();
        let denom = trials.len() - n0;
        let scores = targets
            .iter()
            .map(|(agent, j)| {
                let n_j = trials.iter().filter(|t| t.fired && j.contains(t.nu)).count();
                let e = if denom == 0 { SuccessRate::NoDenominator } else { SuccessRate::Defined(n_j as f64 / denom as f64) };
                AgentScore { agent: *agent, targets: j.clone(), n_j, e }
            })
            .collect();
        Self { n_q_total: trials.len(), n0, scores }
    }

    pub fn score(&self, agent: Side) -> Option<&AgentScore> {
        self.scores.iter().find(|s| s.agent == agent)
    }

    pub fn e(&self, agent: Side) -> Option<f64> {
        self.score(agent).and_then(|s| s.e.value())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub config: SweepEcho,
    pub trials: Vec<TrialRecord>,
    pub aggregates: Aggregates,
}

impl SweepResult {
    pub fn targets(&self) -> Vec<(Side, SelectorSet)> {
        self.aggregates.scores.iter().map(|s| (s.agent, s.targets.clone())).collect()
    }

    /// Recomputes the aggregates from the trial records.
    pub fn recompute(&self) -> Aggregates {
        Aggregates::compute(&self.trials, &self.targets())
    }
}

/// Runs a single trial: trivial initial state, disturbance `q` on `side`, the
/// configured controllers. The trial's own torque history is reported to `observer`.
pub fn run_trial(
    params: &CipParams,
    config: &SweepConfig,
    trial_id: usize,
    q: f64,
    side: Side,
    observer: Option<&mut dyn FnMut(&crate::dynamics::Sample)>,
) -> Result<TrialRecord, ExperimentError> {
    let dt = config.settings.dt;
    let mut stack = ControlStack::standing_only(StandingControl::new(params.standing))
        .with_disturbance(Disturbance { side, q, delta_tau: config.delta_tau });
    for (i, c) in config.controllers.iter().enumerate() {
        if let Some(c) = c {
            stack = stack.with_controller(c.build(if i == 0 { Side::Agent1 } else { Side::Agent2 }, dt));
        }
    }
    let s0 = StateVector::trivial(params.model.rod.w0);
    let out = simulate(&params.model, s0, &mut stack, &config.settings, observer)
        .map_err(|source| ExperimentError::Simulation { q, side, source })?;
    Ok(TrialRecord {
        trial_id,
        q,
        side,
        nu: out.nu,
        fired: out.fired[0] || out.fired[1],
        fired_by: out.fired,
        t_converge: out.converged_at,
        label: WinLossMatrix::label(out.nu).to_string(),
        out_of_range: stack.out_of_range_counts(),
    })
}

fn with_pool<T: Send>(
    jobs: Option<usize>,
    f: impl FnOnce() -> Result<T, ExperimentError> + Send,
) -> Result<T, ExperimentError> {
    match jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .map_err(|e| ExperimentError::ThreadPool(e.to_string()))?
            .install(f),
        None => f(),
    }
}

/// Trials for every `(side, Q)` pair, scored against each installed controller's targets.
pub fn impulse_response_sweep(
    params: &CipParams,
    config: &SweepConfig,
    jobs: Option<usize>,
) -> Result<SweepResult, ExperimentError> {
    config.validate(params)?;
    let qs = config.q_samples();
    let plan: Vec<(Side, f64)> =
        config.side.sides().iter().flat_map(|&s| qs.iter().map(move |&q| (s, q))).collect();
    let trials = with_pool(jobs, || {
        plan.par_iter()
            .enumerate()
            .map(|(id, &(side, q))| run_trial(params, config, id, q, side, None))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let targets: Vec<(Side, SelectorSet)> = [Side::Agent1, Side::Agent2]
        .into_iter()
        .filter_map(|s| config.controllers[s.index()].as_ref().map(|c| (s, c.targets.clone())))
        .collect();
    let aggregates = Aggregates::compute(&trials, &targets);
    Ok(SweepResult { config: config.echo(params), trials, aggregates })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayPoint {
    pub tau_d: f64,
    pub result: SweepResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayScan {
    pub points: Vec<DelayPoint>,
    /// Index into `points` of the largest defined agent-1 success rate (first on ties).
    pub argmax: Option<usize>,
}

impl DelayScan {
    pub fn best(&self) -> Option<(f64, f64)> {
        let p = &self.points[self.argmax?];
        Some((p.tau_d, p.result.aggregates.e(Side::Agent1)?))
    }
}

/// Repeats the sweep with agent 1's controller delayed by each of `delays`.
pub fn delay_scan(
    params: &CipParams,
    config: &SweepConfig,
    delays: &[f64],
    jobs: Option<usize>,
) -> Result<DelayScan, ExperimentError> {
    if config.controllers[0].is_none() {
        return Err(ExperimentError::InvalidConfig("delay scan needs a controller on agent 1".into()));
    }
    let mut points = Vec::with_capacity(delays.len());
    for &tau_d in delays {
        let mut c = config.clone();
        if let Some(ic) = c.controllers[0].as_mut() {
            ic.tau_d = tau_d;
        }
        points.push(DelayPoint { tau_d, result: impulse_response_sweep(params, &c, jobs)? });
    }
    let mut argmax: Option<(usize, f64)> = None;
    for (k, p) in points.iter().enumerate() {
        if let Some(e) = p.result.aggregates.e(Side::Agent1) {
            if argmax.is_none_or(|(_, best)| e > best) {
                argmax = Some((k, e));
            }
        }
    }
    Ok(DelayScan { points, argmax: argmax.map(|(k, _)| k) })
}

/// Both agents carry controllers (`J1 = {2, 3}`, `J2 = {4, 7}` unless set
/// otherwise); every strength is applied once to each agent.
pub fn competition_run(
    params: &CipParams,
    config: &SweepConfig,
    jobs: Option<usize>,
) -> Result<SweepResult, ExperimentError> {
    if config.controllers.iter().any(Option::is_none) {
        return Err(ExperimentError::InvalidConfig("competition needs controllers on both agents".into()));
    }
    let mut c = config.clone();
    c.side = DisturbanceSide::Both;
    impulse_response_sweep(params, &c, jobs)
}

/// Agent-1 controller with `J = {2, 3}` and the agent-2 controller `J = {4, 7}`
/// reusing the same kind of table through the mirror map.
pub fn competition_config(
    q_max: f64,
    n_q: usize,
    settings: SimSettings,
    agent1: (Arc<ClassifierTable>, f64),
    agent2: (Arc<ClassifierTable>, f64),
    impulse: ImpulseParams,
) -> SweepConfig {
    let spec = |(table, tau_d): (Arc<ClassifierTable>, f64), targets| ControllerSpec {
        table,
        targets,
        tau_d,
        impulse,
        source: None,
    };
    SweepConfig::new(q_max, n_q, DisturbanceSide::Both, settings)
        .with_controller(Side::Agent1, spec(agent1, SelectorSet::agent1_wins()))
        .with_controller(Side::Agent2, spec(agent2, SelectorSet::agent2_wins()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial(id: usize, nu: u8, fired: bool) -> TrialRecord {
        TrialRecord {
            trial_id: id,
            q: 0.0,
            side: Side::Agent1,
            nu: EquilibriumIndex::new(nu).unwrap(),
            fired,
            fired_by: [fired, false],
            t_converge: None,
            label: String::new(),
            out_of_range: [0, 0],
        }
    }

    #[test]
    fn success_rate_arithmetic() {
        // 100 trials: 20 silent, 30 fired into J, 50 fired elsewhere.
        let mut t = Vec::new();
        t.extend((0..20).map(|k| trial(k, 1, false)));
        t.extend((20..50).map(|k| trial(k, 2, true)));
        t.extend((50..100).map(|k| trial(k, 5, true)));
        let a = Aggregates::compute(&t, &[(Side::Agent1, SelectorSet::agent1_wins())]);
        assert_eq!((a.n_q_total, a.n0, a.score(Side::Agent1).unwrap().n_j), (100, 20, 30));
        assert_eq!(a.e(Side::Agent1), Some(0.375));
    }

    #[test]
    fn silent_trials_never_count_toward_targets() {
        let t = vec![trial(0, 2, false), trial(1, 5, true)];
        let a = Aggregates::compute(&t, &[(Side::Agent1, SelectorSet::agent1_wins())]);
        assert_eq!(a.e(Side::Agent1), Some(0.0));
    }

    #[test]
    fn all_silent_has_no_denominator() {
        let t = vec![trial(0, 1, false), trial(1, 1, false)];
        let a = Aggregates::compute(&t, &[(Side::Agent1, SelectorSet::agent1_wins())]);
        assert_eq!(a.score(Side::Agent1).unwrap().e, SuccessRate::NoDenominator);
        assert_eq!(a.e(Side::Agent1), None);
    }

    #[test]
    fn q_samples_include_both_ends() {
        let c = SweepConfig::new(0.06, 25, DisturbanceSide::Agent1, SimSettings::default());
        let q = c.q_samples();
        assert_eq!(q.len(), 25);
        assert_eq!(q[0], 0.0);
        assert_eq!(q[24], 0.06);
        assert!((q[1] - 0.0025).abs() < 1e-15);
        assert_eq!(SweepConfig::new(0.06, 1, DisturbanceSide::Agent1, SimSettings::default()).q_samples(), vec![0.0]);
    }

    #[test]
    fn success_rate_serialization() {
        assert_eq!(serde_json::to_string(&SuccessRate::Defined(0.5)).unwrap(), r#"{"status":"defined","value":0.5}"#);
        assert_eq!(serde_json::to_string(&SuccessRate::NoDenominator).unwrap(), r#"{"status":"no-denominator"}"#);
    }

    #[test]
    fn zero_disturbance_without_controllers() {
        let params = CipParams::default();
        let mut settings = SimSettings::default();
        settings.horizon = 2.0;
        let c = SweepConfig::new(0.0, 1, DisturbanceSide::Both, settings);
        let r = impulse_response_sweep(&params, &c, Some(1)).unwrap();
        assert_eq!(r.trials.len(), 2);
        for t in &r.trials {
            assert_eq!(t.nu, EquilibriumIndex::BOTH_STANDING);
            assert!(!t.fired);
        }
        assert_eq!(r.aggregates.n0, 2);
        assert!(r.aggregates.scores.is_empty());
    }
}
