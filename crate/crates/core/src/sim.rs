//! Fixed-step closed-loop simulation.
//!
//! One loop serves both sampling schemes. At every grid point the errors and
//! the triggering function are evaluated with the control currently held;
//! the control is recomputed when the rule fires (event-triggered) or
//! unconditionally (time-triggered), and the plant is advanced one RK4 step
//! with the control frozen across all four stages.

use serde::{Deserialize, Serialize};

use crate::controller::{self, ErrorState, HeldControl, ReferenceSignal, SlidingParams};
use crate::error::{Error, Result};
use crate::plant::{self, DimlessParams, DimlessState, Disturbance, StateBox};
use crate::trigger::{self, EventLog, LipschitzEstimate, TriggerParams};

pub const DEFAULT_STEP: f64 = 1e-3;
pub const DEFAULT_HORIZON: f64 = 50.0;
pub const DEFAULT_TF0_KELVIN: f64 = 300.0;

/// Fraction of the horizon, counted from the end, used for steady-state statistics.
pub const STEADY_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Scenario {
    /// Startup tracking without disturbances.
    Nominal,
    /// Startup tracking under the configured feed disturbances.
    Disturbed,
    /// Regulation to a kelvin setpoint, converted with the feed anchor `tf0_kelvin`.
    Regulate { setpoint_kelvin: f64, tf0_kelvin: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Integration step.
    pub h: f64,
    /// Horizon.
    pub t_end: f64,
    pub x0: DimlessState,
    pub scenario: Scenario,
    pub plant: DimlessParams,
    pub sliding: SlidingParams,
    pub trigger: TriggerParams,
    /// Startup reference; the regulate scenario overrides `x1ref` and `x2ss`.
    pub reference: ReferenceSignal,
    /// Disturbance signals; applied only in the disturbed scenario.
    pub disturbance: Disturbance,
    pub lipschitz_box: StateBox,
    pub lipschitz_samples: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            h: DEFAULT_STEP,
            t_end: DEFAULT_HORIZON,
            x0: DimlessState::new(0.0, 0.0),
            scenario: Scenario::Nominal,
            plant: DimlessParams::default(),
            sliding: SlidingParams::default(),
            trigger: TriggerParams::default(),
            reference: ReferenceSignal::default(),
            disturbance: Disturbance::reference_sinusoids(),
            lipschitz_box: trigger::LIPSCHITZ_BOX,
            lipschitz_samples: trigger::LIPSCHITZ_SAMPLES,
        }
    }
}

impl SimConfig {
    pub fn with_scenario(scenario: Scenario) -> Self {
        Self { scenario, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(Error::InvalidParameter("h must be positive".into()));
        }
        if !(self.t_end.is_finite() && self.t_end >= 10.0 * self.h) {
            return Err(Error::InvalidParameter("t_end must be at least 10 h".into()));
        }
        if !self.x0.is_finite() {
            return Err(Error::InvalidParameter("x0 must be finite".into()));
        }
        self.plant.validate()?;
        self.sliding.validate()?;
        self.trigger.validate()?;
        self.reference.validate()?;
        self.lipschitz_box.validate()?;
        if self.lipschitz_samples < 100 {
            return Err(Error::InvalidParameter("lipschitz_samples must be at least 100".into()));
        }
        for s in [self.disturbance.d1, self.disturbance.d2] {
            if !(s.amp.is_finite() && s.freq.is_finite()) {
                return Err(Error::InvalidParameter("disturbance must be finite".into()));
            }
        }
        if let Scenario::Regulate { setpoint_kelvin, tf0_kelvin } = self.scenario {
            if !(setpoint_kelvin.is_finite() && setpoint_kelvin > 0.0) {
                return Err(Error::InvalidParameter("setpoint_kelvin must be positive".into()));
            }
            if !(tf0_kelvin.is_finite() && tf0_kelvin > 0.0) {
                return Err(Error::InvalidParameter("tf0_kelvin must be positive".into()));
            }
        }
        Ok(())
    }

    /// Number of integration steps; the grid has `steps() + 1` points.
    pub fn steps(&self) -> usize {
        ((self.t_end / self.h) - 1e-9).ceil() as usize
    }

    /// Reference actually tracked under the configured scenario.
    ///
    /// Regulation converts the kelvin setpoint to `x2ss` and tracks the
    /// composition that balances the reaction at that temperature.
    pub fn effective_reference(&self) -> Result<ReferenceSignal> {
        match self.scenario {
            Scenario::Nominal | Scenario::Disturbed => Ok(self.reference),
            Scenario::Regulate { setpoint_kelvin, tf0_kelvin } => {
                let x2ss = plant::kelvin_to_x2(setpoint_kelvin, tf0_kelvin, self.plant.gamma)?;
                let x1ref = plant::equilibrium_composition(x2ss, &self.plant)?;
                Ok(ReferenceSignal { x1ref, x2ss, ..self.reference })
            }
        }
    }

    pub fn effective_disturbance(&self) -> Disturbance {
        match self.scenario {
            Scenario::Disturbed => self.disturbance,
            _ => Disturbance::NONE,
        }
    }

    /// Surface band `threshold(t) / min|lambda|` outside which the surface must be attractive.
    pub fn reachability_band(&self, t: f64) -> f64 {
        trigger::threshold(t, &self.trigger) / self.sliding.min_weight()
    }
}

/// Classical fourth-order Runge-Kutta step for `x' = f(t, x)`.
pub fn rk4<F>(x: &DimlessState, t: f64, h: f64, f: F) -> Result<DimlessState>
where
    F: Fn(f64, &DimlessState) -> Result<DimlessState>,
{
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {h}")));
    }
    let half = 0.5 * h;
    let k1 = f(t, x)?;
    let k2 = f(t + half, &x.offset(&k1, half))?;
    let k3 = f(t + half, &x.offset(&k2, half))?;
    let k4 = f(t + h, &x.offset(&k3, h))?;
    let sixth = h / 6.0;
    Ok(DimlessState::new(
        x.x1 + sixth * (k1.x1 + 2.0 * k2.x1 + 2.0 * k3.x1 + k4.x1),
        x.x2 + sixth * (k1.x2 + 2.0 * k2.x2 + 2.0 * k3.x2 + k4.x2),
    ))
}

/// One plant step with `u` held over all stages.
pub fn rk4_step(
    x: &DimlessState,
    u: f64,
    t: f64,
    h: f64,
    p: &DimlessParams,
    d: &Disturbance,
) -> Result<DimlessState> {
    let next = rk4(x, t, h, |s, y| plant::state_derivative(y, u, s, p, d))?;
    if !next.is_finite() {
        return Err(Error::NonFiniteState { t: t + h, x1: next.x1, x2: next.x2 });
    }
    Ok(next)
}

/// Per-grid-point record of a closed-loop run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub x1ref: Vec<f64>,
    pub x2ref: Vec<f64>,
    /// Control applied on `[t_n, t_{n+1})`.
    pub u: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Surface rate under the applied control.
    pub sigma_dot: Vec<f64>,
    /// Triggering function evaluated before any update at `t_n`.
    pub delta: Vec<f64>,
    pub event: Vec<bool>,
    /// Lyapunov candidate `sigma^2 / 2`.
    pub v: Vec<f64>,
    /// Reachability band at `t_n`.
    pub band: Vec<f64>,
}

impl Trajectory {
    fn with_capacity(n: usize) -> Self {
        let v = || Vec::with_capacity(n);
        Self {
            t: v(),
            x1: v(),
            x2: v(),
            x1ref: v(),
            x2ref: v(),
            u: v(),
            sigma: v(),
            sigma_dot: v(),
            delta: v(),
            event: Vec::with_capacity(n),
            v: v(),
            band: v(),
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn state(&self, n: usize) -> DimlessState {
        DimlessState::new(self.x1[n], self.x2[n])
    }

    pub fn e2(&self, n: usize) -> f64 {
        self.x2[n] - self.x2ref[n]
    }

    /// Indices with `t >= from`.
    pub fn indices_from(&self, from: f64) -> std::ops::Range<usize> {
        let start = self.t.partition_point(|&t| t < from);
        start..self.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Update only when the triggering rule fires.
    EventTriggered,
    /// Update at every grid point.
    TimeTriggered,
}

/// Outcome of the reaching-condition check.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Reachability {
    /// `min(-sigma sigma_dot / |sigma|)` over out-of-band samples; `None` when there are none.
    pub eta_hat: Option<f64>,
    pub samples: usize,
    /// Out-of-band samples where `sigma * sigma_dot >= 0`.
    pub violations: Vec<usize>,
}

impl Reachability {
    pub fn holds(&self) -> bool {
        self.violations.is_empty() && self.eta_hat.is_none_or(|eta| eta > 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub event_count: usize,
    pub step_count: usize,
    /// Updates relative to a time-triggered run on the same grid.
    pub event_ratio: f64,
    pub min_gap: Option<f64>,
    pub mean_gap: Option<f64>,
    pub max_gap: Option<f64>,
    pub eta_hat: Option<f64>,
    pub reachability_violations: usize,
    pub lyapunov_violations: usize,
    /// `(min, max)` of x1 over the final fifth of the horizon.
    pub steady_band_x1: (f64, f64),
    pub tracking_rmse: f64,
    /// Largest `|x(t) - x(t_k)|` accumulated between consecutive updates.
    pub max_discretization_error: f64,
    pub lipschitz: Option<f64>,
    pub min_zeno_bound: Option<f64>,
    /// Samples with x1 above the feed-conversion diagnostic limit.
    pub nonphysical_samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub sampling: Sampling,
    pub trajectory: Trajectory,
    pub log: EventLog,
    pub metrics: Metrics,
}

/// Closed-loop loop shared by both sampling schemes.
pub fn simulate(cfg: &SimConfig, sampling: Sampling) -> Result<(Trajectory, EventLog)> {
    cfg.validate()?;
    let p = &cfg.plant;
    let sp = &cfg.sliding;
    let reference = cfg.effective_reference()?;
    let dist = cfg.effective_disturbance();
    let steps = cfg.steps();

    let mut traj = Trajectory::with_capacity(steps + 1);
    let mut log = EventLog::default();
    let mut x = cfg.x0;
    let mut held: Option<HeldControl> = None;

    for n in 0..=steps {
        let t = n as f64 * cfg.h;
        let rp = reference.eval(t);
        // before the first update the actuator is at rest
        let applied = held.map_or(0.0, |c| c.value_at(t));
        let xdot = plant::state_derivative(&x, applied, t, p, &dist)?;
        let err = ErrorState::new(&x, &xdot, &rp);
        let delta = trigger::delta(&err, t, &cfg.trigger);

        let update = match sampling {
            Sampling::EventTriggered => held.is_none() || trigger::fires(delta),
            Sampling::TimeTriggered => true,
        };
        if update {
            held = Some(controller::event_control_update(&x, t, p, &dist, &reference, sp)?);
            log.push(n, t, delta);
        }
        let control = held.expect("first grid point always updates");
        let u = control.value_at(t);

        let drift = controller::drift_vector(&x, t, p, &dist, &reference)?;
        let s = controller::sigma(&err, sp);

        traj.t.push(t);
        traj.x1.push(x.x1);
        traj.x2.push(x.x2);
        traj.x1ref.push(rp.x1);
        traj.x2ref.push(rp.x2);
        traj.u.push(u);
        traj.sigma.push(s);
        traj.sigma_dot.push(controller::sigma_rate(&drift, u, p, sp));
        traj.delta.push(delta);
        traj.event.push(update);
        traj.v.push(0.5 * s * s);
        traj.band.push(cfg.reachability_band(t));

        if n < steps {
            x = rk4_step(&x, u, t, cfg.h, p, &dist)?;
        }
    }
    Ok((traj, log))
}

fn finish(cfg: &SimConfig, sampling: Sampling, traj: Trajectory, mut log: EventLog) -> Result<RunOutput> {
    let lip = trigger::estimate_lipschitz(&cfg.plant, cfg.lipschitz_box, cfg.lipschitz_samples)?;
    let eps = max_discretization_error(&traj, &log);
    log.bound_at_event = if eps > 0.0 {
        log.steps
            .iter()
            .map(|&n| trigger::zeno_bound(&traj.state(n), eps, &lip, &cfg.plant, &cfg.sliding))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let mut metrics = compute_metrics(&traj, &log);
    metrics.lipschitz = Some(lip.l_bar);
    Ok(RunOutput { sampling, trajectory: traj, log, metrics })
}

/// Event-triggered run: the control is recomputed only when the rule fires.
pub fn run_event_triggered(cfg: &SimConfig) -> Result<RunOutput> {
    let (traj, log) = simulate(cfg, Sampling::EventTriggered)?;
    finish(cfg, Sampling::EventTriggered, traj, log)
}

/// Time-triggered baseline: the control is recomputed at every grid point.
pub fn run_time_triggered(cfg: &SimConfig) -> Result<RunOutput> {
    let (traj, log) = simulate(cfg, Sampling::TimeTriggered)?;
    finish(cfg, Sampling::TimeTriggered, traj, log)
}

/// Checks `sigma * sigma_dot < 0` wherever `|sigma|` exceeds the per-sample band.
pub fn verify_reachability(traj: &Trajectory, band: &[f64]) -> Reachability {
    assert_eq!(band.len(), traj.len(), "band must have one entry per sample");
    let mut out = Reachability::default();
    for (n, (&s, &sdot)) in traj.sigma.iter().zip(&traj.sigma_dot).enumerate() {
        if s.abs() <= band[n] {
            continue;
        }
        out.samples += 1;
        let rate = -s.signum() * sdot;
        out.eta_hat = Some(out.eta_hat.map_or(rate, |eta: f64| eta.min(rate)));
        if s * sdot >= 0.0 {
            out.violations.push(n);
        }
    }
    out
}

/// Sample pairs that stay on one side of the surface and outside the band
/// at both ends, yet show an increase of `V`.
pub fn lyapunov_violations(traj: &Trajectory, band: &[f64]) -> Vec<usize> {
    (1..traj.len())
        .filter(|&n| {
            let (a, b) = (traj.sigma[n - 1], traj.sigma[n]);
            a.abs() > band[n - 1] && b.abs() > band[n] && a * b > 0.0 && traj.v[n] > traj.v[n - 1]
        })
        .map(|n| n - 1)
        .collect()
}

/// Largest drift of the state away from its last update snapshot, including
/// the grid point where the next update resets it.
pub fn max_discretization_error(traj: &Trajectory, log: &EventLog) -> f64 {
    let mut worst = 0.0f64;
    for (k, &start) in log.steps.iter().enumerate() {
        let end = log.steps.get(k + 1).copied().unwrap_or(traj.len() - 1);
        let snap = traj.state(start);
        for n in start..=end {
            worst = worst.max(traj.state(n).distance(&snap));
        }
    }
    worst
}

/// Largest state difference between two runs on the same grid.
pub fn sup_state_gap(a: &Trajectory, b: &Trajectory) -> f64 {
    assert_eq!(a.len(), b.len(), "trajectories must share a grid");
    (0..a.len()).map(|n| a.state(n).distance(&b.state(n))).fold(0.0, f64::max)
}

pub fn compute_metrics(traj: &Trajectory, log: &EventLog) -> Metrics {
    let n = traj.len();
    let gaps = &log.gaps;
    let (min_gap, mean_gap, max_gap) = if gaps.is_empty() {
        (None, None, None)
    } else {
        (
            Some(gaps.iter().copied().fold(f64::INFINITY, f64::min)),
            Some(gaps.iter().sum::<f64>() / gaps.len() as f64),
            Some(gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
        )
    };

    let t_end = traj.t.last().copied().unwrap_or(0.0);
    let steady = traj.indices_from((1.0 - STEADY_FRACTION) * t_end);
    let steady_band_x1 = traj.x1[steady]
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));

    let tracking_rmse = if n == 0 {
        0.0
    } else {
        ((0..n).map(|i| traj.e2(i).powi(2)).sum::<f64>() / n as f64).sqrt()
    };

    let reach = verify_reachability(traj, &traj.band);

    Metrics {
        event_count: log.len(),
        step_count: n,
        event_ratio: if n == 0 { 0.0 } else { log.len() as f64 / n as f64 },
        min_gap,
        mean_gap,
        max_gap,
        eta_hat: reach.eta_hat,
        reachability_violations: reach.violations.len(),
        lyapunov_violations: lyapunov_violations(traj, &traj.band).len(),
        steady_band_x1,
        tracking_rmse,
        max_discretization_error: max_discretization_error(traj, log),
        lipschitz: None,
        min_zeno_bound: log.bound_at_event.iter().copied().reduce(f64::min),
        nonphysical_samples: (0..n).filter(|&i| traj.state(i).exceeds_feed()).count(),
    }
}

/// Lipschitz estimate used for the inter-event bound of a run.
pub fn lipschitz_for(cfg: &SimConfig) -> Result<LipschitzEstimate> {
    trigger::estimate_lipschitz(&cfg.plant, cfg.lipschitz_box, cfg.lipschitz_samples)
}

/// Outcome of one named runtime invariant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl InvariantCheck {
    fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.to_string(), passed, detail: detail.into() }
    }
}

/// Runtime invariants every completed run must satisfy.
pub fn check_invariants(run: &RunOutput, h: f64) -> Vec<InvariantCheck> {
    let traj = &run.trajectory;
    let log = &run.log;
    let mut checks = Vec::new();

    let finite = (0..traj.len()).all(|n| traj.state(n).is_finite());
    checks.push(InvariantCheck::new("finite_states", finite, format!("{} samples", traj.len())));

    let step_gap = log.min_step_gap();
    let gap_ok = step_gap.is_none_or(|g| g >= 1)
        && run.metrics.min_gap.is_none_or(|g| g >= h * (1.0 - 1e-9));
    checks.push(InvariantCheck::new(
        "min_gap_at_least_step",
        gap_ok,
        format!("min gap {:?} ({:?} steps), h = {h}", run.metrics.min_gap, step_gap),
    ));

    let bounds_ok = log.bound_at_event.len() == log.len()
        && log.bound_at_event.iter().all(|b| *b > 0.0 && b.is_finite());
    checks.push(InvariantCheck::new(
        "zeno_bound_positive",
        bounds_ok,
        format!("min bound {:?} over {} events", run.metrics.min_zeno_bound, log.len()),
    ));

    let flagged: Vec<usize> = (0..traj.len()).filter(|&n| traj.event[n]).collect();
    let mut consistent = flagged == log.steps;
    if run.sampling == Sampling::EventTriggered {
        consistent &= (1..traj.len()).all(|n| traj.event[n] == trigger::fires(traj.delta[n]));
    }
    checks.push(InvariantCheck::new(
        "event_log_consistency",
        consistent,
        format!("{} flagged, {} logged", flagged.len(), log.len()),
    ));

    let held = (1..traj.len()).all(|n| traj.event[n] || traj.u[n].to_bits() == traj.u[n - 1].to_bits());
    checks.push(InvariantCheck::new("control_piecewise_constant", held, ""));

    let v_exact = traj.v.iter().zip(&traj.sigma).all(|(v, s)| *v == 0.5 * s * s);
    checks.push(InvariantCheck::new("lyapunov_candidate_exact", v_exact, ""));

    let reach = verify_reachability(traj, &traj.band);
    checks.push(InvariantCheck::new(
        "reachability",
        reach.holds(),
        format!(
            "eta_hat {:?} over {} samples, {} violations",
            reach.eta_hat,
            reach.samples,
            reach.violations.len()
        ),
    ));

    let lyap = lyapunov_violations(traj, &traj.band);
    checks.push(InvariantCheck::new(
        "lyapunov_nonincreasing",
        lyap.is_empty(),
        format!("{} violations", lyap.len()),
    ));
    checks
}
