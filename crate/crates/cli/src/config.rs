//! TOML run configuration.
//!
//! Every key is optional; anything left out falls back to the reference
//! parameter set (`SimConfig::default()`). Unknown keys are rejected.
//!
//! ```toml
//! scenario = "nominal"        # nominal | disturbed | regulate
//! setpoint_kelvin = 400.0     # regulate only
//! tf0_kelvin = 300.0
//! h = 0.001
//! t_end = 50.0
//! x0 = [0.0, 0.0]
//!
//! da = 0.078
//! gamma = 20.0
//! b_rise = 8.0
//! beta = 0.3
//! x2c0 = 0.0
//! d1_amp = 0.026
//! d1_freq = 0.1
//! d2_amp = 0.037
//! d2_freq = 0.1
//!
//! lambda1 = 1.0
//! lambda2 = 2.0
//! mu = 25.0
//! switching = "sign"          # sign | tanh | reversed
//! tanh_width = 0.05           # tanh only
//!
//! zeta = 0.8
//! xi = 0.8
//! psi = 0.5
//! m1 = 0.0001
//! m2 = 0.2025
//! varsigma = 0.97
//! trigger_indices = [2]
//!
//! x1ref = 0.4472
//! x2ss = 2.6516
//! k1 = 1.0
//! k2 = 1.0
//!
//! lipschitz_box = [0.0, 1.0, 0.0, 5.0]
//! lipschitz_samples = 10000
//!
//! # Optional: derive da, gamma, b_rise, beta and x2c0 from physical constants.
//! # [physical]
//! # k0 = ...  caf0 = ...  f0 = ...  rho = ...  cp = ...  dh = ...
//! # rhoc = ...  cpc = ...  v = ...  fc = ...  e = ...  r = ...
//! # tf0 = ...  tc0 = ...  a = ...  b = ...
//! ```

use std::path::{Path, PathBuf};

use cstr_etsmc::plant::{self, PhysicalParams};
use cstr_etsmc::sim::DEFAULT_TF0_KELVIN;
use cstr_etsmc::{Scenario, SimConfig, StateBox, Switching};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

impl From<cstr_etsmc::Error> for ConfigError {
    fn from(e: cstr_etsmc::Error) -> Self {
        let msg = match e {
            cstr_etsmc::Error::InvalidParameter(m) | cstr_etsmc::Error::InvalidArgument(m) => m,
            other => other.to_string(),
        };
        ConfigError::Invalid(msg)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub scenario: Option<String>,
    pub setpoint_kelvin: Option<f64>,
    pub tf0_kelvin: Option<f64>,
    pub h: Option<f64>,
    pub t_end: Option<f64>,
    pub x0: Option<[f64; 2]>,

    pub da: Option<f64>,
    pub gamma: Option<f64>,
    pub b_rise: Option<f64>,
    pub beta: Option<f64>,
    pub x2c0: Option<f64>,
    pub d1_amp: Option<f64>,
    pub d1_freq: Option<f64>,
    pub d2_amp: Option<f64>,
    pub d2_freq: Option<f64>,

    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub mu: Option<f64>,
    pub switching: Option<String>,
    pub tanh_width: Option<f64>,

    pub zeta: Option<f64>,
    pub xi: Option<f64>,
    pub psi: Option<f64>,
    pub m1: Option<f64>,
    pub m2: Option<f64>,
    pub varsigma: Option<f64>,
    pub trigger_indices: Option<Vec<usize>>,

    pub x1ref: Option<f64>,
    pub x2ss: Option<f64>,
    pub k1: Option<f64>,
    pub k2: Option<f64>,

    pub lipschitz_box: Option<[f64; 4]>,
    pub lipschitz_samples: Option<usize>,

    pub physical: Option<PhysicalParams>,
}

impl ConfigFile {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_path_buf(),
            message: e.to_string().trim_end().to_string(),
        })
    }

    /// Applies the file on top of the defaults and validates the result.
    pub fn resolve(&self) -> Result<SimConfig, ConfigError> {
        let mut cfg = SimConfig::default();
        macro_rules! set {
            ($($key:ident => $($dst:ident).+),* $(,)?) => {
                $( if let Some(v) = self.$key { cfg.$($dst).+ = v; } )*
            };
        }
        set!(
            h => h, t_end => t_end,
            da => plant.da, gamma => plant.gamma, b_rise => plant.b_rise,
            beta => plant.beta, x2c0 => plant.x2c0,
            d1_amp => disturbance.d1.amp, d1_freq => disturbance.d1.freq,
            d2_amp => disturbance.d2.amp, d2_freq => disturbance.d2.freq,
            lambda1 => sliding.lambda1, lambda2 => sliding.lambda2, mu => sliding.mu,
            zeta => trigger.zeta, xi => trigger.xi, psi => trigger.psi,
            m1 => trigger.m1, m2 => trigger.m2, varsigma => trigger.varsigma,
            x1ref => reference.x1ref, x2ss => reference.x2ss,
            k1 => reference.k1, k2 => reference.k2,
            lipschitz_samples => lipschitz_samples,
        );
        if let Some([a, b]) = self.x0 {
            cfg.x0 = cstr_etsmc::DimlessState::new(a, b);
        }
        if let Some(idx) = &self.trigger_indices {
            let mut idx = idx.clone();
            idx.sort_unstable();
            idx.dedup();
            cfg.trigger.indices = idx;
        }
        if let Some([a, b, c, d]) = self.lipschitz_box {
            cfg.lipschitz_box = StateBox { x1: (a, b), x2: (c, d) };
        }

        if let Some(pp) = &self.physical {
            let overlapping = [self.da, self.gamma, self.b_rise, self.beta, self.x2c0];
            if overlapping.iter().any(Option::is_some) {
                return Err(ConfigError::Invalid(
                    "da, gamma, b_rise, beta and x2c0 cannot be combined with [physical]".into(),
                ));
            }
            cfg.plant = plant::physical_to_dimensionless(pp)?;
        }

        cfg.sliding.switching = match self.switching.as_deref().unwrap_or("sign") {
            "sign" => Switching::Sign,
            "reversed" => Switching::Reversed,
            "tanh" => Switching::Tanh {
                width: self.tanh_width.ok_or_else(|| {
                    ConfigError::Invalid("switching = \"tanh\" requires tanh_width".into())
                })?,
            },
            other => {
                return Err(ConfigError::Invalid(format!(
                    "switching must be one of sign, tanh, reversed (got {other:?})"
                )))
            }
        };
        if self.tanh_width.is_some() && !matches!(cfg.sliding.switching, Switching::Tanh { .. }) {
            return Err(ConfigError::Invalid("tanh_width is only valid with switching = \"tanh\"".into()));
        }

        let tf0 = self.tf0_kelvin.unwrap_or(DEFAULT_TF0_KELVIN);
        cfg.scenario = match self.scenario.as_deref().unwrap_or("nominal") {
            "nominal" => Scenario::Nominal,
            "disturbed" => Scenario::Disturbed,
            "regulate" => Scenario::Regulate {
                setpoint_kelvin: self.setpoint_kelvin.ok_or_else(|| {
                    ConfigError::Invalid("scenario = \"regulate\" requires setpoint_kelvin".into())
                })?,
                tf0_kelvin: tf0,
            },
            other => {
                return Err(ConfigError::Invalid(format!(
                    "scenario must be one of nominal, disturbed, regulate (got {other:?})"
                )))
            }
        };
        if !matches!(cfg.scenario, Scenario::Regulate { .. }) {
            if self.setpoint_kelvin.is_some() {
                return Err(ConfigError::Invalid("setpoint_kelvin is only valid with scenario = \"regulate\"".into()));
            }
            if self.tf0_kelvin.is_some() {
                return Err(ConfigError::Invalid("tf0_kelvin is only valid with scenario = \"regulate\"".into()));
            }
        }

        cfg.validate()?;
        Ok(cfg)
    }

    /// Fully populated file describing `cfg`.
    pub fn from_resolved(cfg: &SimConfig) -> Self {
        let (scenario, setpoint, tf0) = match cfg.scenario {
            Scenario::Nominal => ("nominal", None, None),
            Scenario::Disturbed => ("disturbed", None, None),
            Scenario::Regulate { setpoint_kelvin, tf0_kelvin } => {
                ("regulate", Some(setpoint_kelvin), Some(tf0_kelvin))
            }
        };
        let (switching, tanh_width) = match cfg.sliding.switching {
            Switching::Sign => ("sign", None),
            Switching::Tanh { width } => ("tanh", Some(width)),
            Switching::Reversed => ("reversed", None),
        };
        let b = cfg.lipschitz_box;
        ConfigFile {
            scenario: Some(scenario.into()),
            setpoint_kelvin: setpoint,
            tf0_kelvin: tf0,
            h: Some(cfg.h),
            t_end: Some(cfg.t_end),
            x0: Some([cfg.x0.x1, cfg.x0.x2]),
            da: Some(cfg.plant.da),
            gamma: Some(cfg.plant.gamma),
            b_rise: Some(cfg.plant.b_rise),
            beta: Some(cfg.plant.beta),
            x2c0: Some(cfg.plant.x2c0),
            d1_amp: Some(cfg.disturbance.d1.amp),
            d1_freq: Some(cfg.disturbance.d1.freq),
            d2_amp: Some(cfg.disturbance.d2.amp),
            d2_freq: Some(cfg.disturbance.d2.freq),
            lambda1: Some(cfg.sliding.lambda1),
            lambda2: Some(cfg.sliding.lambda2),
            mu: Some(cfg.sliding.mu),
            switching: Some(switching.into()),
            tanh_width,
            zeta: Some(cfg.trigger.zeta),
            xi: Some(cfg.trigger.xi),
            psi: Some(cfg.trigger.psi),
            m1: Some(cfg.trigger.m1),
            m2: Some(cfg.trigger.m2),
            varsigma: Some(cfg.trigger.varsigma),
            trigger_indices: Some(cfg.trigger.indices.clone()),
            x1ref: Some(cfg.reference.x1ref),
            x2ss: Some(cfg.reference.x2ss),
            k1: Some(cfg.reference.k1),
            k2: Some(cfg.reference.k2),
            lipschitz_box: Some([b.x1.0, b.x1.1, b.x2.0, b.x2.1]),
            lipschitz_samples: Some(cfg.lipschitz_samples),
            physical: None,
        }
    }
}

/// Serialises a resolved configuration; re-parsing yields an identical `SimConfig`.
pub fn to_toml(cfg: &SimConfig) -> String {
    toml::to_string(&ConfigFile::from_resolved(cfg)).expect("config serialises")
}

pub fn parse_config_str(text: &str, origin: &Path) -> Result<SimConfig, ConfigError> {
    ConfigFile::from_toml(text, origin)?.resolve()
}

/// Reads and validates a configuration file.
pub fn parse_config(path: &Path) -> Result<SimConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    parse_config_str(&text, path)
}
