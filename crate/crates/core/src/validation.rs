//! Numerical checks of the structural properties of the model, controllers,
//! learner and experiments. Used by the test suite and by `cip validate`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::control::{
    mirror_set, mirror_transform, pd_torque, ControlError, ControlStack, Disturbance, ImpulseGeneratorState,
    ImpulseParams, IntelligentController, Measurement, MeasurementMap, MeasurementMode, SelectorSet, Side,
    StandingControl,
};
use crate::dynamics::{
    simulate, tip_kinematics, Controller, DetectionParams, DynamicsError, EquilibriumIndex, Passive, Sample, SimError, SimOutcome,
    SimSettings, StateVector,
};
use crate::experiments::{impulse_response_sweep, run_trial, DisturbanceSide, ExperimentError, SweepConfig, SweepResult};
use crate::learning::{
    label_cell, label_measurement, learn_table, read_table, save_table, ClassifierTable, GridSpec, LearnSpec,
    LearningError, Provenance,
};
use crate::params::CipParams;

/// Reduced measurement box used for desk-scale learning checks.
pub const DESK_BOX: [[f64; 2]; 4] = [[-0.1, 0.4], [-3.0, 9.0], [-0.3, 0.3], [-3.5, 5.0]];

#[derive(Debug, thiserror::Error)]
pub enum ValidationError {
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Learning(#[from] LearningError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
}

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: impl Into<String>) -> Self {
        Self { name, passed, detail: detail.into() }
    }
}

/// Runs `controller` from `s0` and returns every sample with the outcome.
pub fn trajectory<C: Controller>(
    params: &CipParams,
    s0: StateVector,
    controller: C,
    settings: &SimSettings,
) -> Result<(Vec<Sample>, SimOutcome), SimError> {
    let mut samples = Vec::with_capacity(settings.steps().min(1 << 20) as usize + 1);
    let mut rec = |s: &Sample| samples.push(*s);
    let out = simulate(&params.model, s0, controller, settings, Some(&mut rec))?;
    Ok((samples, out))
}

/// Settings that run exactly `duration` seconds without stopping at convergence.
pub fn fixed_duration(settings: &SimSettings, duration: f64) -> SimSettings {
    SimSettings {
        horizon: duration,
        detection: DetectionParams { dwell: duration + 1.0, ..settings.detection },
        ..*settings
    }
}

/// Table over the reference box with every cell labelled `nu`.
pub fn uniform_table(params: &CipParams, m: u32, nu: EquilibriumIndex) -> ClassifierTable {
    let grid = GridSpec::reference(m);
    let labels = vec![nu.value(); grid.cell_count()];
    let provenance = Provenance { param_digest: params.digest(), ..Provenance::unspecified() };
    ClassifierTable::new(grid, MeasurementMode::FourDim, labels, provenance).expect("uniform labels are valid")
}

/// Largest component deviation between the mirror image of a run and the run
/// of the mirrored setup. Agent 1 is disturbed by `q` and, when `table` is
/// given, carries an intelligent controller with targets `{2, 3}`.
pub fn mirror_deviation(
    params: &CipParams,
    s0: StateVector,
    q: f64,
    table: Option<Arc<ClassifierTable>>,
    settings: &SimSettings,
    duration: f64,
) -> Result<f64, SimError> {
    let settings = fixed_duration(settings, duration);
    let dt = settings.dt;
    let impulse = ImpulseParams::with_step(0.06, dt);
    let d = Disturbance { side: Side::Agent1, q, delta_tau: dt };
    let j = SelectorSet::agent1_wins();

    let mut a = ControlStack::standing_only(StandingControl::new(params.standing)).with_disturbance(d);
    let mut b = ControlStack::standing_only(StandingControl::new(params.standing)).with_disturbance(d.mirrored());
    if let Some(t) = table {
        a = a.with_controller(IntelligentController::new(Side::Agent1, t.clone(), j.clone(), impulse, 0.0, dt));
        b = b.with_controller(IntelligentController::new(Side::Agent2, t, mirror_set(&j), impulse, 0.0, dt));
    }
    let (ta, _) = trajectory(params, s0, a, &settings)?;
    let (tb, _) = trajectory(params, mirror_transform(&s0), b, &settings)?;
    let mut worst: f64 = if ta.len() == tb.len() { 0.0 } else { f64::INFINITY };
    for (x, y) in ta.iter().zip(&tb) {
        let m = mirror_transform(&x.state).to_array();
        for (p, q) in m.iter().zip(y.state.to_array()) {
            worst = worst.max((p - q).abs());
        }
    }
    Ok(worst)
}

/// Largest relative per-step increase of mechanical energy of the unforced,
/// frictionless system, taken while both tips stay clear of the floor.
/// Returns the increase and the number of steps checked.
pub fn energy_increase(params: &CipParams, s0: StateVector, duration: f64) -> Result<(f64, usize), SimError> {
    let mut p = *params;
    p.model.floor.mu = 0.0;
    let settings = fixed_duration(&SimSettings::default(), duration);
    let (samples, _) = trajectory(&p, s0, Passive, &settings)?;
    let clear = |s: &StateVector| tip_kinematics(s, &p.model.pendulum).iter().all(|t| t.pos[1] > 0.05);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let energy = |s: &StateVector| p.model.mechanical_energy(s).map_err(|source| SimError { time: 0.0, source });
    for w in samples.windows(2) {
        if !(clear(&w[0].state) && clear(&w[1].state)) {
            break;
        }
        let (e0, e1) = (energy(&w[0].state)?, energy(&w[1].state)?);
        worst = worst.max((e1 - e0) / e0.abs().max(1e-12));
        checked += 1;
    }
    Ok((worst, checked))
}

/// Largest `|w - w0| / w0` after a single disturbance `q` on agent 1.
pub fn max_rod_strain(params: &CipParams, q: f64, settings: &SimSettings) -> Result<f64, SimError> {
    let stack = ControlStack::standing_only(StandingControl::new(params.standing)).with_disturbance(Disturbance {
        side: Side::Agent1,
        q,
        delta_tau: settings.dt,
    });
    let (samples, _) = trajectory(params, StateVector::trivial(params.model.rod.w0), stack, settings)?;
    let mut worst: f64 = 0.0;
    for s in &samples {
        let strain = params.model.rod_strain(&s.state).map_err(|source| SimError { time: s.t, source })?;
        worst = worst.max(strain.abs());
    }
    Ok(worst)
}

/// Whether two identical runs produce bit-identical trajectories and outcomes.
pub fn runs_are_identical(params: &CipParams, s0: StateVector, q: f64, settings: &SimSettings) -> Result<bool, SimError> {
    let run = || {
        let stack = ControlStack::standing_only(StandingControl::new(params.standing)).with_disturbance(Disturbance {
            side: Side::Agent1,
            q,
            delta_tau: settings.dt,
        });
        trajectory(params, s0, stack, settings)
    };
    let (a, oa) = run()?;
    let (b, ob) = run()?;
    let bits = |v: &[Sample]| -> Vec<u64> { v.iter().flat_map(|s| s.state.to_array().map(f64::to_bits)).collect() };
    Ok(oa == ob && bits(&a) == bits(&b))
}

/// Largest `|pd| / (K_p |theta| + K_d |theta_dot|)` over angles at least
/// `margin / alpha` beyond the deadband.
pub fn deadband_tail_ratio(params: &CipParams, margin: f64) -> f64 {
    let sp = &params.standing;
    let start = sp.delta_theta + margin / sp.alpha;
    let mut worst: f64 = 0.0;
    for k in 0..2000 {
        let th = start + k as f64 * 1e-3;
        for theta in [th, -th] {
            for rate in [-10.0, -0.5, 0.0, 0.7, 12.0] {
                let scale = sp.k_p * theta.abs() + sp.k_d * f64::abs(rate);
                worst = worst.max(pd_torque(theta, rate, sp).abs() / scale);
            }
        }
    }
    worst
}

/// Rise times of the generator driven by `deltas` sampled every `dt`.
pub fn generator_rises(p: &ImpulseParams, dt: f64, deltas: &[bool]) -> Vec<f64> {
    let mut g = ImpulseGeneratorState::new();
    let mut rises = Vec::new();
    let mut prev = 0.0;
    for (k, &d) in deltas.iter().enumerate() {
        let t = k as f64 * dt;
        let out = g.step(d, t, p);
        if out > 0.0 && prev == 0.0 {
            rises.push(t);
        }
        prev = out;
    }
    rises
}

/// Number of consecutive rises closer than `tau_g` over random selector traces.
pub fn refractory_violations(p: &ImpulseParams, dt: f64, traces: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = 0;
    for _ in 0..traces {
        let density: f64 = rng.random_range(0.05..0.95);
        let deltas: Vec<bool> = (0..400).map(|_| rng.random_bool(density)).collect();
        let rises = generator_rises(p, dt, &deltas);
        bad += rises.windows(2).filter(|w| w[1] - w[0] < p.tau_g - 1e-9).count();
    }
    bad
}

/// `P` times the rectangle-rule integral of one generator pulse.
pub fn impulse_area(p: &ImpulseParams, dt: f64) -> f64 {
    let mut g = ImpulseGeneratorState::new();
    let n = (p.tau_g / dt).ceil() as usize + 4;
    (0..n).map(|k| g.step(k == 0, k as f64 * dt, p) * dt).sum::<f64>() * p.p
}

/// Random states in the box of `table`, reconstructed from uniform measurements.
pub fn random_states(params: &CipParams, grid: &GridSpec, n: usize, seed: u64) -> Vec<StateVector> {
    let map = MeasurementMap::four_dim(params.model.rod.w0, params.model.pendulum.r);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .filter_map(|_| {
            let y: Vec<f64> = grid.bounds().iter().map(|&[a, b]| rng.random_range(a..=b)).collect();
            map.reconstruct(&Measurement::new(&y)?).ok()
        })
        .collect()
}

/// Number of random states on which agent 2's controller disagrees with
/// agent 1's table lookup of the mirrored state, negated.
pub fn controller_equivariance_mismatches(
    params: &CipParams,
    table: Arc<ClassifierTable>,
    n: usize,
    seed: u64,
) -> usize {
    let dt = SimSettings::default().dt;
    let impulse = ImpulseParams::with_step(0.06, dt);
    let j2 = SelectorSet::agent2_wins();
    let j1 = mirror_set(&j2);
    let mut bad = 0;
    for s in random_states(params, table.grid(), n, seed) {
        // Jitter the carts off the reconstruction so that cart positions matter if they are misused.
        let mut s = s;
        s.agents[0].x += 0.37;
        s.agents[1].x += 0.37;
        let mut ic = IntelligentController::new(Side::Agent2, table.clone(), j2.clone(), impulse, 0.0, dt);
        let u = ic.output(0.0, &s);
        let direct = match table.classify(&mirror_transform(&s)) {
            Some(nu) if j1.contains(nu) => -impulse.amplitude(),
            _ => 0.0,
        };
        if u != direct {
            bad += 1;
        }
    }
    bad
}

/// Largest relative deviation of the tip distance from `w0` over random measurements in `grid`.
pub fn reconstruction_error(params: &CipParams, grid: &GridSpec, n: usize, seed: u64) -> f64 {
    let w0 = params.model.rod.w0;
    random_states(params, grid, n, seed)
        .iter()
        .map(|s| {
            let [a, b] = tip_kinematics(s, &params.model.pendulum);
            ((b.pos[0] - a.pos[0]).hypot(b.pos[1] - a.pos[1]) - w0).abs() / w0
        })
        .fold(0.0, f64::max)
}

fn table_bytes(t: &ClassifierTable) -> Result<Vec<u8>, LearningError> {
    let mut v = Vec::new();
    save_table(t, &mut v)?;
    Ok(v)
}

/// Learns `spec` serially, on two threads and cell by cell in reverse order,
/// and reports whether all three tables serialize to the same bytes.
pub fn order_independent(spec: &LearnSpec, params: &CipParams) -> Result<bool, LearningError> {
    let serial = learn_table(spec, params, Some(1))?.table;
    let parallel = learn_table(spec, params, Some(2))?.table;
    let n = spec.grid.cell_count();
    let mut labels = vec![0u8; n];
    for l in (0..n).rev() {
        labels[l] = label_cell(spec, params, l)?.nu().value();
    }
    let reversed = ClassifierTable::new(spec.grid.clone(), spec.mode, labels, serial.provenance().clone())?;
    let b = table_bytes(&serial)?;
    Ok(b == table_bytes(&parallel)? && b == table_bytes(&reversed)?)
}

/// Whether save then load reproduces the table and its bytes.
pub fn persistence_round_trip(t: &ClassifierTable) -> Result<bool, LearningError> {
    let b = table_bytes(t)?;
    let back = read_table(&b[..])?;
    Ok(back == *t && table_bytes(&back)? == b)
}

/// Whether `E` lies in `[0, 1]` and `E (N_total - N0) = N_J` for every scored agent.
pub fn success_identity_holds(r: &SweepResult) -> bool {
    let a = &r.aggregates;
    let denom = a.n_q_total - a.n0;
    a.n0 == r.trials.iter().filter(|t| !t.fired).count()
        && a.scores.iter().all(|s| {
            s.n_j <= denom
                && match s.e.value() {
                    Some(e) => (0.0..=1.0).contains(&e) && (e * denom as f64 - s.n_j as f64).abs() < 1e-9,
                    None => denom == 0,
                }
        })
}

/// Silent trials of `r` whose trajectory differs from the controller-free run
/// with the same disturbance.
pub fn no_fire_mismatches(params: &CipParams, config: &SweepConfig, r: &SweepResult) -> Result<usize, ExperimentError> {
    let mut bare = config.clone();
    bare.controllers = [None, None];
    let mut bad = 0;
    for t in r.trials.iter().filter(|t| !t.fired) {
        let mut with = Vec::new();
        let mut without = Vec::new();
        run_trial(params, config, t.trial_id, t.q, t.side, Some(&mut |s: &Sample| with.push(s.state)))?;
        run_trial(params, &bare, t.trial_id, t.q, t.side, Some(&mut |s: &Sample| without.push(s.state)))?;
        if with != without {
            bad += 1;
        }
    }
    Ok(bad)
}

/// Probe measurements drawn uniformly from the box of `grid`.
pub fn probe_measurements(grid: &GridSpec, n: usize, seed: u64) -> Vec<Measurement> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let y: Vec<f64> = grid.bounds().iter().map(|&[a, b]| rng.random_range(a..=b)).collect();
            Measurement::new(&y).expect("grid dimension is 4 or 6")
        })
        .collect()
}

/// Direct simulation labels of `probes` under the learning experiment of `spec`.
pub fn oracle_labels(spec: &LearnSpec, params: &CipParams, probes: &[Measurement]) -> Vec<EquilibriumIndex> {
    use rayon::prelude::*;
    probes.par_iter().map(|y| label_measurement(spec, params, y).nu()).collect()
}

/// Fraction of probes whose table label differs from the oracle label.
pub fn disagreement(table: &ClassifierTable, probes: &[Measurement], oracle: &[EquilibriumIndex]) -> f64 {
    let bad = probes
        .iter()
        .zip(oracle)
        .filter(|(y, nu)| table.classify_measurement(y.as_slice()) != Some(**nu))
        .count();
    bad as f64 / probes.len().max(1) as f64
}

/// Options for [`invariant_suite`].
#[derive(Debug, Clone, Copy)]
pub struct SuiteOptions {
    pub settings: SimSettings,
    pub jobs: Option<usize>,
    /// Resolution of the small table learned on [`DESK_BOX`].
    pub resolution: u32,
    pub seed: u64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self { settings: SimSettings::default(), jobs: None, resolution: 2, seed: 20 }
    }
}

/// Runs every quick structural check. Failing checks are reported, not raised.
pub fn invariant_suite(params: &CipParams, opts: &SuiteOptions) -> Result<Vec<Check>, ValidationError> {
    params.validate()?;
    let settings = opts.settings;
    let w0 = params.model.rod.w0;
    let mut out = Vec::new();

    let mut s0 = StateVector::trivial(w0);
    s0.agents[0].theta = 0.1;
    s0.agents[1].omega = -0.3;
    let ic_table = Arc::new(uniform_table(params, 4, EquilibriumIndex::new(2).expect("valid index")));
    let dev = mirror_deviation(params, s0, 0.03, Some(ic_table.clone()), &settings, 5.0)?;
    out.push(Check::new("mirror symmetry over 5 s", dev < 1e-6, format!("max deviation {dev:.3e}")));

    let mut e0 = StateVector::trivial(w0);
    e0.agents[0].theta = 0.05;
    e0.agents[0].omega = 0.4;
    e0.agents[1].theta = -0.02;
    let (rise, steps) = energy_increase(params, e0, 2.0)?;
    out.push(Check::new(
        "energy non-increasing without torque",
        rise <= 1e-6 && steps > 0,
        format!("max relative step increase {rise:.3e} over {steps} steps"),
    ));

    let mut strains = Vec::new();
    for q in [0.02, 0.04, 0.06] {
        strains.push(max_rod_strain(params, q, &fixed_duration(&settings, 10.0))?);
    }
    let worst = strains.iter().cloned().fold(0.0, f64::max);
    out.push(Check::new("rod near-rigidity", worst < 0.01, format!("max strain {worst:.3e}")));

    let same = runs_are_identical(params, s0, 0.04, &fixed_duration(&settings, 5.0))?;
    out.push(Check::new("deterministic trajectories", same, if same { "bit-identical" } else { "runs differ" }));

    let tail = deadband_tail_ratio(params, 7.0);
    out.push(Check::new("deadband cutoff", tail < 1e-3, format!("max tail ratio {tail:.3e}")));

    let dt = settings.dt;
    let mut bad = 0;
    for k in [1.0, 3.0, 10.0] {
        let p = ImpulseParams { p: 0.06, delta_tau: dt, tau_g: k * dt };
        bad += refractory_violations(&p, dt, 50, opts.seed);
    }
    out.push(Check::new("generator refractory", bad == 0, format!("{bad} rises closer than tau_g")));

    let mut area_err: f64 = 0.0;
    for (w, g) in [(1.0, 1.0), (4.0, 4.0), (4.0, 9.0)] {
        let p = ImpulseParams { p: 0.06, delta_tau: w * dt, tau_g: g * dt };
        area_err = area_err.max((impulse_area(&p, dt) - p.p).abs());
    }
    out.push(Check::new("impulse area", area_err <= 0.06 * dt, format!("max |area - P| {area_err:.3e}")));

    let desk = GridSpec::uniform(DESK_BOX.to_vec(), opts.resolution)?;
    let mut spec = LearnSpec::reference(opts.resolution);
    spec.grid = desk;
    spec.settings = settings;
    spec.impulse = ImpulseParams::with_step(0.06, settings.dt);
    let report = learn_table(&spec, params, opts.jobs)?;
    let table = Arc::new(report.table);

    let mism = controller_equivariance_mismatches(params, table.clone(), 500, opts.seed);
    out.push(Check::new("controller mirror equivariance", mism == 0, format!("{mism} of 500 states differ")));

    let rec = reconstruction_error(params, &GridSpec::reference(1), 1000, opts.seed);
    out.push(Check::new("reconstruction keeps the rod rigid", rec < 1e-12, format!("max relative error {rec:.3e}")));

    let h = table.histogram();
    let partition = h.iter().sum::<usize>() == table.grid().cell_count();
    out.push(Check::new("labels partition the box", partition, format!("histogram {h:?}")));

    let same = order_independent(&spec, params)?;
    out.push(Check::new("evaluation-order independence", same, if same { "byte-identical" } else { "tables differ" }));

    let rt = persistence_round_trip(&table)?;
    out.push(Check::new("persistence round trip", rt, if rt { "identity" } else { "mismatch" }));

    let config = SweepConfig::new(0.06, 7, DisturbanceSide::Both, settings).with_controller(
        Side::Agent1,
        crate::experiments::ControllerSpec {
            table: table.clone(),
            targets: SelectorSet::agent1_wins(),
            tau_d: 0.0,
            impulse: spec.impulse,
            source: None,
        },
    );
    let r = impulse_response_sweep(params, &config, opts.jobs)?;
    let ok = success_identity_holds(&r);
    out.push(Check::new("success-rate bounds and identity", ok, format!("{:?}", r.aggregates.e(Side::Agent1))));
    let silent = no_fire_mismatches(params, &config, &r)?;
    out.push(Check::new(
        "no-fire consistency",
        silent == 0,
        format!("{silent} of {} silent trials differ from the bare run", r.aggregates.n0),
    ));
    let again = impulse_response_sweep(params, &config, opts.jobs)?;
    out.push(Check::new("deterministic sweeps", again.trials == r.trials, format!("{} trials", r.trials.len())));

    Ok(out)
}
