//! Dynamic event-triggering rule and inter-event analysis.
//!
//! An update fires when
//!
//! ```text
//! delta = max_i |zeta e_i + xi edot_i^2| - psi (m1 + m2 exp(-varsigma t)) >= 0
//! ```
//!
//! The decaying threshold keeps a positive floor `psi * m1`, and the
//! inter-event times admit the lower bound computed by [`zeno_bound`].

use serde::{Deserialize, Serialize};

use crate::controller::{ErrorState, SlidingParams};
use crate::error::{Error, Result};
use crate::plant::{self, DimlessParams, DimlessState, Mat2, StateBox};

/// Inflation applied to the sampled Jacobian norm maximum.
pub const LIPSCHITZ_SAFETY_FACTOR: f64 = 1.1;

/// Default Lipschitz sampling box.
pub const LIPSCHITZ_BOX: StateBox = StateBox { x1: (0.0, 1.0), x2: (0.0, 5.0) };

pub const LIPSCHITZ_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggerParams {
    /// Error weight.
    pub zeta: f64,
    /// Error-rate weight.
    pub xi: f64,
    /// Threshold scale in (0, 1).
    pub psi: f64,
    /// Threshold floor.
    pub m1: f64,
    /// Decaying threshold term.
    pub m2: f64,
    /// Decay rate in (0, 1).
    pub varsigma: f64,
    /// One-based error components monitored by the rule (1 = composition, 2 = temperature).
    pub indices: Vec<usize>,
}

impl Default for TriggerParams {
    fn default() -> Self {
        Self { zeta: 0.8, xi: 0.8, psi: 0.5, m1: 1e-4, m2: 0.2025, varsigma: 0.97, indices: vec![2] }
    }
}

impl TriggerParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        if !(self.zeta > 0.0 && self.zeta.is_finite()) {
            return bad("zeta must be positive");
        }
        if !(self.xi > 0.0 && self.xi.is_finite()) {
            return bad("xi must be positive");
        }
        if !(self.psi > 0.0 && self.psi < 1.0) {
            return bad("psi must lie in (0,1)");
        }
        if !(self.m1 >= 0.0 && self.m1.is_finite()) {
            return bad("m1 must be non-negative");
        }
        if !(self.m2 >= 0.0 && self.m2.is_finite()) {
            return bad("m2 must be non-negative");
        }
        if !(self.m1 + self.m2 > 0.0) {
            return bad("m1 + m2 must be positive");
        }
        if !(self.varsigma > 0.0 && self.varsigma < 1.0) {
            return bad("varsigma must lie in (0,1)");
        }
        if self.indices.is_empty() {
            return bad("indices must not be empty");
        }
        if self.indices.iter().any(|i| !(1..=2).contains(i)) {
            return bad("indices must be drawn from {1, 2}");
        }
        Ok(())
    }
}

/// Tolerance band `psi (m1 + m2 exp(-varsigma t))`.
pub fn threshold(t: f64, tp: &TriggerParams) -> f64 {
    tp.psi * (tp.m1 + tp.m2 * (-tp.varsigma * t).exp())
}

/// Triggering function; the rule fires when it is non-negative.
pub fn delta(e: &ErrorState, t: f64, tp: &TriggerParams) -> f64 {
    let excursion = tp
        .indices
        .iter()
        .map(|&i| {
            let (ei, rate) = e.component(i);
            (tp.zeta * ei + tp.xi * rate * rate).abs()
        })
        .fold(f64::NEG_INFINITY, f64::max);
    excursion - threshold(t, tp)
}

pub fn fires(delta: f64) -> bool {
    delta >= 0.0
}

pub fn should_trigger(e: &ErrorState, t: f64, tp: &TriggerParams) -> bool {
    fires(delta(e, t, tp))
}

/// Record of update instants.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EventLog {
    /// Grid indices of the updates.
    pub steps: Vec<usize>,
    pub instants: Vec<f64>,
    /// `gaps[k] = instants[k + 1] - instants[k]`.
    pub gaps: Vec<f64>,
    /// Theoretical inter-event lower bound evaluated at each update.
    pub bound_at_event: Vec<f64>,
    pub delta_at_event: Vec<f64>,
}

impl EventLog {
    pub fn push(&mut self, step: usize, t: f64, delta: f64) {
        if let Some(&last) = self.instants.last() {
            debug_assert!(t > last);
            self.gaps.push(t - last);
        }
        self.steps.push(step);
        self.instants.push(t);
        self.delta_at_event.push(delta);
    }

    pub fn len(&self) -> usize {
        self.instants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instants.is_empty()
    }

    /// Smallest gap measured in grid steps.
    pub fn min_step_gap(&self) -> Option<usize> {
        self.steps.windows(2).map(|w| w[1] - w[0]).min()
    }
}

/// Lipschitz constant of the drift over a sampled region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEstimate {
    pub l_bar: f64,
    pub region: StateBox,
    pub sample_count: usize,
}

/// Van der Corput radical inverse of `i` in `base`.
fn radical_inverse(mut i: usize, base: usize) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// Point `i` of the two-dimensional Halton sequence (bases 2 and 3).
pub fn halton2(i: usize) -> (f64, f64) {
    (radical_inverse(i, 2), radical_inverse(i, 3))
}

/// Lipschitz estimate for an arbitrary Jacobian field: the maximum spectral
/// norm over `n` Halton points of `region`, times [`LIPSCHITZ_SAFETY_FACTOR`].
/// Points where the Jacobian is undefined are skipped.
pub fn estimate_lipschitz_with<J>(jac: J, region: StateBox, n: usize) -> Result<LipschitzEstimate>
where
    J: Fn(&DimlessState) -> Result<Mat2>,
{
    region.validate()?;
    if n < 100 {
        return Err(Error::InvalidArgument(format!("need at least 100 samples, got {n}")));
    }
    let max_norm = (1..=n)
        .filter_map(|i| {
            let (s1, s2) = halton2(i);
            jac(&region.point(s1, s2)).ok()
        })
        .map(|j| j.spectral_norm())
        .fold(0.0, f64::max);
    if !(max_norm > 0.0 && max_norm.is_finite()) {
        return Err(Error::InvalidArgument("Jacobian norm vanished over the sampling box".into()));
    }
    Ok(LipschitzEstimate { l_bar: LIPSCHITZ_SAFETY_FACTOR * max_norm, region, sample_count: n })
}

/// Lipschitz estimate of the plant drift.
pub fn estimate_lipschitz(p: &DimlessParams, region: StateBox, n: usize) -> Result<LipschitzEstimate> {
    estimate_lipschitz_with(|x| plant::jacobian(x, p), region, n)
}

/// Norm of the gain coupling `B lambda^T / (lambda2 beta)` with `B = (0, beta)^T`.
pub fn coupling_norm(p: &DimlessParams, sp: &SlidingParams) -> f64 {
    let scale = 1.0 / (sp.lambda2 * p.beta);
    Mat2([[0.0, 0.0], [p.beta * sp.lambda1 * scale, p.beta * sp.lambda2 * scale]]).spectral_norm()
}

/// Lower bound on the inter-event time after an update at state `x_k`:
///
/// ```text
/// T_min = ln(L eps / (L (1 + |B l^T/(l2 beta)|) |x_k| + |B| mu) + 1) / L
/// ```
pub fn zeno_bound(
    x_k: &DimlessState,
    eps_max: f64,
    lip: &LipschitzEstimate,
    p: &DimlessParams,
    sp: &SlidingParams,
) -> Result<f64> {
    let l = lip.l_bar;
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::InvalidArgument(format!("Lipschitz constant must be positive, got {l}")));
    }
    if !(eps_max > 0.0 && eps_max.is_finite()) {
        return Err(Error::InvalidArgument(format!("eps_max must be positive, got {eps_max}")));
    }
    let growth = l * (1.0 + coupling_norm(p, sp)) * x_k.norm() + p.beta * sp.mu;
    Ok((l * eps_max / growth).ln_1p() / l)
}
