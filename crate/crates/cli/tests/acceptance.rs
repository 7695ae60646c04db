//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use cstr_etsmc::plant::{self, Mat2};
use cstr_etsmc::sim;
use cstr_etsmc::{controller, DimlessParams, DimlessState, RunOutput, Scenario, SimConfig, Switching};
use cstr_etsmc_cli::scenario::{self, ScenarioName};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const STEADY_WINDOW: (f64, f64) = (40.0, 50.0);
const STEADY_E2_TOL: f64 = 0.06;
const RUNTIME_LIMIT: Duration = Duration::from_secs(5);

const DISTURBED_WINDOW_FRACTION: f64 = 0.6;
const DISTURBED_X1_BAND: (f64, f64) = (0.40, 0.47);
const REPORTED_X1_BAND: (f64, f64) = (0.4067, 0.4454);

const EVENT_RATIO_LIMIT: f64 = 0.5;

const GAP_REL_TOL: f64 = 1e-9;

const REFINEMENT_PSI: [f64; 3] = [0.5, 0.1, 0.02];

const JACOBIAN_STATES: usize = 100;
const JACOBIAN_FD_STEP: f64 = 1e-6;
const JACOBIAN_REL_TOL: f64 = 1e-5;
const STUB_ORDER_MIN: f64 = 3.9;

const REGULATION_SETPOINTS: [f64; 3] = [300.0, 400.0, 500.0];
const REGULATION_TF0: f64 = 300.0;
const DENSITY_FRACTION: f64 = 0.2;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

struct Runs {
    nominal: RunOutput,
    nominal_runtime: Duration,
    nominal_time: RunOutput,
    disturbed: RunOutput,
    disturbed_time: RunOutput,
    regulate: Vec<(f64, SimConfig, RunOutput)>,
}

fn default_cfg(scenario: Scenario) -> SimConfig {
    SimConfig::with_scenario(scenario)
}

fn runs() -> Runs {
    let nominal_cfg = default_cfg(Scenario::Nominal);
    let started = Instant::now();
    let nominal = sim::run_event_triggered(&nominal_cfg).expect("nominal run");
    let nominal_runtime = started.elapsed();
    let disturbed_cfg = default_cfg(Scenario::Disturbed);
    let regulate = REGULATION_SETPOINTS
        .iter()
        .map(|&sp| {
            let cfg = default_cfg(Scenario::Regulate { setpoint_kelvin: sp, tf0_kelvin: REGULATION_TF0 });
            let run = sim::run_event_triggered(&cfg).expect("regulation run");
            (sp, cfg, run)
        })
        .collect();
    Runs {
        nominal,
        nominal_runtime,
        nominal_time: sim::run_time_triggered(&nominal_cfg).expect("nominal baseline"),
        disturbed: sim::run_event_triggered(&disturbed_cfg).expect("disturbed run"),
        disturbed_time: sim::run_time_triggered(&disturbed_cfg).expect("disturbed baseline"),
        regulate,
    }
}

fn max_abs_e2(run: &RunOutput, window: (f64, f64)) -> f64 {
    let tr = &run.trajectory;
    tr.indices_from(window.0)
        .filter(|&n| tr.t[n] <= window.1 + 1e-9)
        .map(|n| tr.e2(n).abs())
        .fold(0.0, f64::max)
}

fn event_density(run: &RunOutput, from: f64, to: f64) -> f64 {
    let tr = &run.trajectory;
    let idx: Vec<usize> = (0..tr.len()).filter(|&n| tr.t[n] >= from - 1e-9 && tr.t[n] < to - 1e-9).collect();
    idx.iter().filter(|&&n| tr.event[n]).count() as f64 / idx.len() as f64
}

fn criterion_1(r: &Runs) -> Outcome {
    let e2 = max_abs_e2(&r.nominal, STEADY_WINDOW);
    let tr = &r.nominal.trajectory;
    let profile_ok = (0..tr.len()).all(|n| (tr.x2ref[n] - 2.6516 * (1.0 - (-tr.t[n]).exp())).abs() < 1e-12);
    let fast = r.nominal_runtime < RUNTIME_LIMIT;
    outcome(
        e2 <= STEADY_E2_TOL && fast && profile_ok,
        format!(
            "max |e2| on [{}, {}] = {e2:.4} (tol {STEADY_E2_TOL}); reference profile exact: {profile_ok}; runtime {:.3} s (limit {} s)",
            STEADY_WINDOW.0,
            STEADY_WINDOW.1,
            r.nominal_runtime.as_secs_f64(),
            RUNTIME_LIMIT.as_secs()
        ),
    )
}

fn criterion_2(r: &Runs) -> Outcome {
    let tr = &r.disturbed.trajectory;
    let t_end = *tr.t.last().unwrap();
    let (lo, hi) = tr
        .indices_from((1.0 - DISTURBED_WINDOW_FRACTION) * t_end)
        .map(|n| tr.x1[n])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    outcome(
        lo >= DISTURBED_X1_BAND.0 && hi <= DISTURBED_X1_BAND.1,
        format!(
            "x1 over final {:.0}% in [{lo:.4}, {hi:.4}], required [{}, {}], reported [{}, {}]",
            100.0 * DISTURBED_WINDOW_FRACTION,
            DISTURBED_X1_BAND.0,
            DISTURBED_X1_BAND.1,
            REPORTED_X1_BAND.0,
            REPORTED_X1_BAND.1
        ),
    )
}

fn criterion_3(r: &Runs) -> Outcome {
    let (n, d) = (r.nominal.metrics.event_count, r.disturbed.metrics.event_count);
    let ratio_n = n as f64 / r.nominal_time.metrics.event_count as f64;
    let ratio_d = d as f64 / r.disturbed_time.metrics.event_count as f64;
    outcome(
        d > n && ratio_n < EVENT_RATIO_LIMIT && ratio_d < EVENT_RATIO_LIMIT,
        format!(
            "events nominal {n}, disturbed {d} (need disturbed > nominal); event ratios {ratio_n:.4}, {ratio_d:.4} (need < {EVENT_RATIO_LIMIT})"
        ),
    )
}

fn zeno_ok(run: &RunOutput, h: f64) -> (bool, String) {
    let log = &run.log;
    let steps_ok = log.min_step_gap().is_none_or(|g| g >= 1);
    let gap_ok = run.metrics.min_gap.is_none_or(|g| g >= h * (1.0 - GAP_REL_TOL));
    let bound_ok = log.bound_at_event.len() == log.len() && log.bound_at_event.iter().all(|b| *b > 0.0);
    (
        steps_ok && gap_ok && bound_ok,
        format!(
            "min gap {:.3e}, min bound {:.3e} over {} events",
            run.metrics.min_gap.unwrap_or(f64::NAN),
            run.metrics.min_zeno_bound.unwrap_or(f64::NAN),
            log.len()
        ),
    )
}

fn acceptance_runs(r: &Runs) -> Vec<(String, &RunOutput, f64)> {
    let h = sim::DEFAULT_STEP;
    let mut v = vec![("nominal".to_string(), &r.nominal, h), ("disturbed".to_string(), &r.disturbed, h)];
    for (sp, cfg, run) in &r.regulate {
        v.push((format!("regulate-{sp}"), run, cfg.h));
    }
    v
}

fn criterion_4(r: &Runs) -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for (name, run, h) in acceptance_runs(r) {
        let (ok, detail) = zeno_ok(run, h);
        passed &= ok;
        parts.push(format!("{name}: {detail}"));
    }
    outcome(passed, parts.join("; "))
}

fn criterion_5(r: &Runs) -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for (name, run, _) in acceptance_runs(r) {
        let reach = sim::verify_reachability(&run.trajectory, &run.trajectory.band);
        let lyap = sim::lyapunov_violations(&run.trajectory, &run.trajectory.band).len();
        let ok = reach.holds() && reach.eta_hat.is_some() && lyap == 0;
        passed &= ok;
        parts.push(format!(
            "{name}: eta_hat {:.3}, {} reach / {lyap} V violations",
            reach.eta_hat.unwrap_or(f64::NAN),
            reach.violations.len()
        ));
    }
    let mut flipped = default_cfg(Scenario::Nominal);
    flipped.t_end = 1.0;
    flipped.sliding.switching = Switching::Reversed;
    let run = sim::run_event_triggered(&flipped).expect("sign-flipped run");
    let reach = sim::verify_reachability(&run.trajectory, &run.trajectory.band);
    let detected = !reach.holds();
    passed &= detected;
    parts.push(format!(
        "sign-flipped: eta_hat {:.3}, {} violations, detected {detected}",
        reach.eta_hat.unwrap_or(f64::NAN),
        reach.violations.len()
    ));
    outcome(passed, parts.join("; "))
}

fn criterion_6(r: &Runs) -> Outcome {
    let base = default_cfg(Scenario::Nominal);
    let continuous = &r.nominal_time;
    let mut gaps = Vec::new();
    let mut exact = true;
    for psi in REFINEMENT_PSI {
        let mut cfg = base.clone();
        cfg.trigger.psi = psi;
        let run = sim::run_event_triggered(&cfg).expect("refinement run");
        gaps.push(sim::sup_state_gap(&run.trajectory, &continuous.trajectory));
        let reference = cfg.effective_reference().unwrap();
        let dist = cfg.effective_disturbance();
        for &n in &run.log.steps {
            let x = run.trajectory.state(n);
            let u = controller::continuous_control(&x, run.trajectory.t[n], &cfg.plant, &dist, &reference, &cfg.sliding)
                .unwrap();
            exact &= u.to_bits() == run.trajectory.u[n].to_bits();
        }
    }
    let monotone = gaps.windows(2).all(|w| w[1] <= w[0]);
    outcome(
        monotone && exact,
        format!("sup gaps for psi {REFINEMENT_PSI:?}: {gaps:?}; nonincreasing {monotone}; laws agree at every event {exact}"),
    )
}

fn jacobian_worst_error() -> f64 {
    let p = DimlessParams::default();
    let mut rng = StdRng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..JACOBIAN_STATES {
        let x = DimlessState::new(rng.random_range(0.0..1.0), rng.random_range(0.0..5.0));
        let exact = plant::jacobian(&x, &p).unwrap();
        let h = JACOBIAN_FD_STEP;
        let f = |y: DimlessState| plant::drift(&y, &p).unwrap();
        let c1 = f(DimlessState::new(x.x1 + h, x.x2)) - f(DimlessState::new(x.x1 - h, x.x2));
        let c2 = f(DimlessState::new(x.x1, x.x2 + h)) - f(DimlessState::new(x.x1, x.x2 - h));
        let fd = Mat2([[c1.x1 / (2.0 * h), c2.x1 / (2.0 * h)], [c1.x2 / (2.0 * h), c2.x2 / (2.0 * h)]]);
        let diff = Mat2([
            [exact.0[0][0] - fd.0[0][0], exact.0[0][1] - fd.0[0][1]],
            [exact.0[1][0] - fd.0[1][0], exact.0[1][1] - fd.0[1][1]],
        ]);
        worst = worst.max(diff.frobenius_norm() / exact.frobenius_norm());
    }
    worst
}

fn stub_order() -> f64 {
    let decay = |_: f64, x: &DimlessState| Ok(DimlessState::new(-x.x1, -x.x2));
    let err = |h: f64| {
        let steps = (1.0 / h).round() as usize;
        let mut x = DimlessState::new(1.0, 1.0);
        for n in 0..steps {
            x = sim::rk4(&x, n as f64 * h, h, decay).unwrap();
        }
        (x.x1 - (-1.0f64).exp()).abs()
    };
    (err(0.1) / err(0.05)).log2()
}

fn manifests_reproduce() -> (bool, String) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = default_cfg(Scenario::Disturbed);
    let first = scenario::run_scenario(ScenarioName::Disturbed, &cfg, dir.path(), true).unwrap();
    let manifest = dir.path().join("disturbed").join(scenario::MANIFEST_FILE);
    let v = scenario::verify_manifest(&manifest).unwrap();
    let again = scenario::rerun_from_manifest(&first).unwrap();
    let same = again.files.iter().all(|(name, bytes)| std::fs::read(dir.path().join("disturbed").join(name)).unwrap() == *bytes);
    (v.ok() && same, format!("{} files, digests and rerun bytes identical: {}", first.files.len(), v.ok() && same))
}

fn criterion_7() -> Outcome {
    let worst = jacobian_worst_error();
    let order = stub_order();
    let (reproduced, detail) = manifests_reproduce();
    outcome(
        worst <= JACOBIAN_REL_TOL && order >= STUB_ORDER_MIN && reproduced,
        format!(
            "Jacobian worst rel. error {worst:.2e} (tol {JACOBIAN_REL_TOL:e}); RK4 stub order {order:.3} (min {STUB_ORDER_MIN}); reruns: {detail}"
        ),
    )
}

fn criterion_8(r: &Runs) -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for (sp, cfg, run) in &r.regulate {
        let x2ss = cfg.effective_reference().unwrap().x2ss;
        let expected = plant::kelvin_to_x2(*sp, REGULATION_TF0, cfg.plant.gamma).unwrap();
        let e2 = max_abs_e2(run, STEADY_WINDOW);
        let t_end = cfg.t_end;
        let early = event_density(run, 0.0, DENSITY_FRACTION * t_end);
        let late = event_density(run, (1.0 - DENSITY_FRACTION) * t_end, t_end + cfg.h);
        let ok = x2ss == expected && e2 <= STEADY_E2_TOL && late < early;
        passed &= ok;
        parts.push(format!(
            "{sp} K: x2ss {x2ss:.4}, max |e2| {e2:.4}, event density first/last {:.0}% {early:.3}/{late:.3}",
            100.0 * DENSITY_FRACTION
        ));
    }
    outcome(passed, parts.join("; "))
}

fn main() -> ExitCode {
    let r = runs();
    let results = [
        ("1", "startup tracking", criterion_1(&r)),
        ("2", "disturbance robustness band", criterion_2(&r)),
        ("3", "event economy", criterion_3(&r)),
        ("4", "Zeno exclusion", criterion_4(&r)),
        ("5", "reachability and Lyapunov", criterion_5(&r)),
        ("6", "refinement consistency", criterion_6(&r)),
        ("7", "numerical hygiene", criterion_7()),
        ("8", "regulation scenarios", criterion_8(&r)),
    ];
    let mut failed = 0;
    for (id, name, o) in &results {
        let verdict = if o.passed { "PASS" } else { "FAIL" };
        println!("acceptance criterion {id} ({name}): {verdict}: {}", o.detail);
        failed += usize::from(!o.passed);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
