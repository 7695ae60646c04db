//! Named scenarios, artifact emission and run manifests.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cstr_etsmc::export::{write_event_csv, write_trajectory_csv};
use cstr_etsmc::sim::{self, DEFAULT_TF0_KELVIN};
use cstr_etsmc::{InvariantCheck, Metrics, RunOutput, Scenario, SimConfig, Trajectory};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{self, ConfigError};
use crate::plot::{render_svg, Plot, PlotError, PlotStyle, Series};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Line plots are thinned to at most this many points per series.
const MAX_LINE_POINTS: usize = 4000;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Sim(#[from] cstr_etsmc::Error),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Plot(#[from] PlotError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ScenarioError + '_ {
    move |source| ScenarioError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioName {
    Nominal,
    Disturbed,
    Regulate300,
    Regulate400,
    Regulate500,
    /// Regulation to the setpoint given in the config or on the command line.
    Regulate,
    /// Nominal run paired with a time-triggered baseline.
    BaselineComparison,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 7] = [
        ScenarioName::Nominal,
        ScenarioName::Disturbed,
        ScenarioName::Regulate300,
        ScenarioName::Regulate400,
        ScenarioName::Regulate500,
        ScenarioName::Regulate,
        ScenarioName::BaselineComparison,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioName::Nominal => "nominal",
            ScenarioName::Disturbed => "disturbed",
            ScenarioName::Regulate300 => "regulate-300",
            ScenarioName::Regulate400 => "regulate-400",
            ScenarioName::Regulate500 => "regulate-500",
            ScenarioName::Regulate => "regulate",
            ScenarioName::BaselineComparison => "baseline-comparison",
        }
    }

    fn fixed_setpoint(self) -> Option<f64> {
        match self {
            ScenarioName::Regulate300 => Some(300.0),
            ScenarioName::Regulate400 => Some(400.0),
            ScenarioName::Regulate500 => Some(500.0),
            _ => None,
        }
    }

    /// Name that reproduces the scenario stored in `cfg`.
    pub fn of_config(cfg: &SimConfig) -> ScenarioName {
        match cfg.scenario {
            Scenario::Nominal => ScenarioName::Nominal,
            Scenario::Disturbed => ScenarioName::Disturbed,
            Scenario::Regulate { .. } => ScenarioName::Regulate,
        }
    }

    /// Specialises `base` for this scenario.
    ///
    /// `setpoint_kelvin` is accepted only for `regulate`; `tf0_kelvin`
    /// applies to every regulation scenario and defaults to the value in
    /// `base`, or 300 K.
    pub fn configure(
        self,
        base: &SimConfig,
        setpoint_kelvin: Option<f64>,
        tf0_kelvin: Option<f64>,
    ) -> Result<SimConfig, ScenarioError> {
        let (base_setpoint, base_tf0) = match base.scenario {
            Scenario::Regulate { setpoint_kelvin, tf0_kelvin } => (Some(setpoint_kelvin), Some(tf0_kelvin)),
            _ => (None, None),
        };
        if setpoint_kelvin.is_some() && self != ScenarioName::Regulate {
            return Err(ScenarioError::Usage(format!(
                "--setpoint-kelvin only applies to the regulate scenario, not {self}"
            )));
        }
        let tf0 = tf0_kelvin.or(base_tf0).unwrap_or(DEFAULT_TF0_KELVIN);
        let scenario = match self {
            ScenarioName::Nominal | ScenarioName::BaselineComparison => {
                if tf0_kelvin.is_some() {
                    return Err(ScenarioError::Usage(format!("--tf0-kelvin does not apply to {self}")));
                }
                Scenario::Nominal
            }
            ScenarioName::Disturbed => {
                if tf0_kelvin.is_some() {
                    return Err(ScenarioError::Usage(format!("--tf0-kelvin does not apply to {self}")));
                }
                Scenario::Disturbed
            }
            ScenarioName::Regulate => Scenario::Regulate {
                setpoint_kelvin: setpoint_kelvin.or(base_setpoint).ok_or_else(|| {
                    ScenarioError::Usage("the regulate scenario needs a setpoint (--setpoint-kelvin)".into())
                })?,
                tf0_kelvin: tf0,
            },
            fixed => Scenario::Regulate {
                setpoint_kelvin: fixed.fixed_setpoint().expect("fixed regulation scenario"),
                tf0_kelvin: tf0,
            },
        };
        let cfg = SimConfig { scenario, ..base.clone() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn wants_baseline(self) -> bool {
        self == ScenarioName::BaselineComparison
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioName {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScenarioName::ALL.into_iter().find(|n| n.as_str() == s).ok_or_else(|| {
            let names: Vec<_> = ScenarioName::ALL.iter().map(|n| n.as_str()).collect();
            ScenarioError::Usage(format!("unknown scenario {s:?}; expected one of {}", names.join(", ")))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub scenario: String,
    pub baseline: bool,
    /// Resolved configuration in the config-file format.
    pub config: String,
    pub output_dir: PathBuf,
    pub files: Vec<FileDigest>,
    pub invariants: Vec<InvariantCheck>,
}

impl RunManifest {
    pub fn failed_invariants(&self) -> impl Iterator<Item = &InvariantCheck> {
        self.invariants.iter().filter(|c| !c.passed)
    }

    pub fn all_passed(&self) -> bool {
        self.failed_invariants().next().is_none()
    }

    pub fn read(path: &Path) -> Result<RunManifest, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text)
            .map_err(|e| ScenarioError::Manifest { path: path.to_path_buf(), message: e.to_string() })
    }
}

/// Everything a scenario run produces, before anything touches the disk.
#[derive(Debug)]
pub struct RunArtifacts {
    pub event_run: RunOutput,
    pub baseline: Option<RunOutput>,
    pub invariants: Vec<InvariantCheck>,
    pub files: Vec<(String, Vec<u8>)>,
}

#[derive(Serialize)]
struct MetricsReport<'a> {
    scenario: &'a str,
    event_triggered: &'a Metrics,
    #[serde(skip_serializing_if = "Option::is_none")]
    time_triggered: Option<&'a Metrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    comparison: Option<Comparison>,
}

#[derive(Serialize)]
struct Comparison {
    event_ratio: f64,
    event_updates: usize,
    time_updates: usize,
    rmse_event: f64,
    rmse_time: f64,
    sup_state_gap: f64,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn thin(t: &[f64], y: &[f64]) -> Vec<(f64, f64)> {
    let stride = t.len().div_ceil(MAX_LINE_POINTS).max(1);
    let mut pts: Vec<_> = (0..t.len()).step_by(stride).map(|i| (t[i], y[i])).collect();
    if let (Some(&last_t), Some(&last_y)) = (t.last(), y.last()) {
        if pts.last().map(|p| p.0) != Some(last_t) {
            pts.push((last_t, last_y));
        }
    }
    pts
}

fn line_plot(title: &str, y_label: &str, series: Vec<Series>) -> Plot {
    Plot {
        title: title.into(),
        x_label: "t (dimensionless)".into(),
        y_label: y_label.into(),
        style: PlotStyle::Line,
        series,
    }
}

fn plots(name: &str, traj: &Trajectory, run: &RunOutput) -> Vec<(&'static str, Plot)> {
    let log = &run.log;
    let gaps: Vec<(f64, f64)> =
        log.gaps.iter().enumerate().map(|(k, &g)| (log.instants[k], g)).collect();
    let intervals = if gaps.is_empty() { vec![(log.instants[0], 0.0)] } else { gaps };
    vec![
        (
            "composition.svg",
            line_plot(
                &format!("{name}: concentration"),
                "x1",
                vec![Series::new("x1", thin(&traj.t, &traj.x1)), Series::new("x1ref", thin(&traj.t, &traj.x1ref))],
            ),
        ),
        (
            "temperature.svg",
            line_plot(
                &format!("{name}: temperature"),
                "x2",
                vec![Series::new("x2", thin(&traj.t, &traj.x2)), Series::new("x2ref", thin(&traj.t, &traj.x2ref))],
            ),
        ),
        ("control.svg", line_plot(&format!("{name}: control"), "u", vec![Series::new("u", thin(&traj.t, &traj.u))])),
        (
            "events.svg",
            Plot {
                title: format!("{name}: inter-event intervals"),
                x_label: "t_k".into(),
                y_label: "T_k".into(),
                style: PlotStyle::Stem,
                series: vec![Series::new("T_k", intervals)],
            },
        ),
    ]
}

fn metrics_text(name: &str, run: &RunOutput, baseline: Option<&RunOutput>, invariants: &[InvariantCheck]) -> String {
    let mut s = String::new();
    let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v}"));
    let m = &run.metrics;
    let _ = writeln!(s, "scenario = {name}");
    let _ = writeln!(s, "event_count = {}", m.event_count);
    let _ = writeln!(s, "step_count = {}", m.step_count);
    let _ = writeln!(s, "event_ratio = {}", m.event_ratio);
    let _ = writeln!(s, "min_gap = {}", opt(m.min_gap));
    let _ = writeln!(s, "mean_gap = {}", opt(m.mean_gap));
    let _ = writeln!(s, "max_gap = {}", opt(m.max_gap));
    let _ = writeln!(s, "eta_hat = {}", opt(m.eta_hat));
    let _ = writeln!(s, "reachability_violations = {}", m.reachability_violations);
    let _ = writeln!(s, "lyapunov_violations = {}", m.lyapunov_violations);
    let _ = writeln!(s, "steady_band_x1 = [{}, {}]", m.steady_band_x1.0, m.steady_band_x1.1);
    let _ = writeln!(s, "tracking_rmse = {}", m.tracking_rmse);
    let _ = writeln!(s, "max_discretization_error = {}", m.max_discretization_error);
    let _ = writeln!(s, "lipschitz = {}", opt(m.lipschitz));
    let _ = writeln!(s, "min_zeno_bound = {}", opt(m.min_zeno_bound));
    let _ = writeln!(s, "nonphysical_samples = {}", m.nonphysical_samples);
    if let Some(b) = baseline {
        let _ = writeln!(s, "baseline.event_count = {}", b.metrics.event_count);
        let _ = writeln!(s, "baseline.tracking_rmse = {}", b.metrics.tracking_rmse);
        let _ = writeln!(s, "comparison.event_ratio = {}", m.event_count as f64 / b.metrics.event_count as f64);
        let _ = writeln!(s, "comparison.sup_state_gap = {}", sim::sup_state_gap(&run.trajectory, &b.trajectory));
    }
    for c in invariants {
        let _ = writeln!(s, "invariant.{} = {} ({})", c.name, if c.passed { "pass" } else { "FAIL" }, c.detail);
    }
    s
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> cstr_etsmc::Result<()>) -> Result<Vec<u8>, ScenarioError> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

/// Runs the simulation(s) for `name` and renders every artifact in memory.
pub fn build_artifacts(name: ScenarioName, cfg: &SimConfig, baseline: bool) -> Result<RunArtifacts, ScenarioError> {
    let label = name.as_str();
    let run = sim::run_event_triggered(cfg)?;
    let base = if baseline || name.wants_baseline() { Some(sim::run_time_triggered(cfg)?) } else { None };

    let mut invariants = sim::check_invariants(&run, cfg.h);
    if let Some(b) = &base {
        invariants.extend(sim::check_invariants(b, cfg.h).into_iter().map(|mut c| {
            c.name = format!("baseline.{}", c.name);
            c
        }));
    }

    let mut files = vec![
        ("config.toml".to_string(), config::to_toml(cfg).into_bytes()),
        ("trajectory.csv".to_string(), csv_bytes(|b| write_trajectory_csv(&run.trajectory, b))?),
        ("events.csv".to_string(), csv_bytes(|b| write_event_csv(&run.log, b))?),
    ];
    if let Some(b) = &base {
        files.push(("baseline_trajectory.csv".into(), csv_bytes(|w| write_trajectory_csv(&b.trajectory, w))?));
        files.push(("baseline_events.csv".into(), csv_bytes(|w| write_event_csv(&b.log, w))?));
    }
    files.push(("metrics.txt".into(), metrics_text(label, &run, base.as_ref(), &invariants).into_bytes()));

    let comparison = base.as_ref().map(|b| Comparison {
        event_ratio: run.metrics.event_count as f64 / b.metrics.event_count as f64,
        event_updates: run.metrics.event_count,
        time_updates: b.metrics.event_count,
        rmse_event: run.metrics.tracking_rmse,
        rmse_time: b.metrics.tracking_rmse,
        sup_state_gap: sim::sup_state_gap(&run.trajectory, &b.trajectory),
    });
    let report = MetricsReport {
        scenario: label,
        event_triggered: &run.metrics,
        time_triggered: base.as_ref().map(|b| &b.metrics),
        comparison,
    };
    let mut json = serde_json::to_string_pretty(&report).expect("metrics serialise");
    json.push('\n');
    files.push(("metrics.json".into(), json.into_bytes()));

    for (file, plot) in plots(label, &run.trajectory, &run) {
        files.push((file.to_string(), render_svg(&plot)?.into_bytes()));
    }

    Ok(RunArtifacts { event_run: run, baseline: base, invariants, files })
}

/// Runs `name` and writes `<outdir>/<name>/...`; the manifest is written last.
pub fn run_scenario(
    name: ScenarioName,
    cfg: &SimConfig,
    outdir: &Path,
    baseline: bool,
) -> Result<RunManifest, ScenarioError> {
    let artifacts = build_artifacts(name, cfg, baseline)?;
    let dir = outdir.join(name.as_str());
    std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let mut files = Vec::with_capacity(artifacts.files.len());
    for (file, bytes) in &artifacts.files {
        let path = dir.join(file);
        std::fs::write(&path, bytes).map_err(io_err(&path))?;
        files.push(FileDigest { name: file.clone(), sha256: sha256_hex(bytes) });
    }
    let manifest = RunManifest {
        scenario: name.as_str().to_string(),
        baseline: baseline || name.wants_baseline(),
        config: config::to_toml(cfg),
        output_dir: dir.clone(),
        files,
        invariants: artifacts.invariants,
    };
    let path = dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    text.push('\n');
    std::fs::write(&path, text).map_err(io_err(&path))?;
    Ok(manifest)
}

/// Result of checking a manifest against the files on disk and a fresh rerun.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Verification {
    /// Files whose on-disk digest differs from the manifest (or that are missing).
    pub tampered: Vec<String>,
    /// Files whose rerun digest differs from the manifest.
    pub not_reproduced: Vec<String>,
}

impl Verification {
    pub fn ok(&self) -> bool {
        self.tampered.is_empty() && self.not_reproduced.is_empty()
    }
}

/// Rebuilds a run from the manifest's config snapshot.
pub fn rerun_from_manifest(manifest: &RunManifest) -> Result<RunArtifacts, ScenarioError> {
    let name: ScenarioName = manifest.scenario.parse()?;
    let cfg = config::parse_config_str(&manifest.config, Path::new("<manifest>"))?;
    build_artifacts(name, &cfg, manifest.baseline)
}

/// Checks emitted files against their digests and reruns the scenario in memory.
pub fn verify_manifest(path: &Path) -> Result<Verification, ScenarioError> {
    let manifest = RunManifest::read(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut report = Verification::default();
    for f in &manifest.files {
        let matches = std::fs::read(dir.join(&f.name)).map(|b| sha256_hex(&b) == f.sha256).unwrap_or(false);
        if !matches {
            report.tampered.push(f.name.clone());
        }
    }
    let rerun = rerun_from_manifest(&manifest)?;
    for f in &manifest.files {
        let fresh = rerun.files.iter().find(|(n, _)| *n == f.name).map(|(_, b)| sha256_hex(b));
        if fresh.as_deref() != Some(f.sha256.as_str()) {
            report.not_reproduced.push(f.name.clone());
        }
    }
    Ok(report)
}
