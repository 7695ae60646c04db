//! Sliding surface and the sliding-mode control laws.
//!
//! The surface is `sigma = l1*e1 + l2*e2` on the tracking errors. The
//! continuous law cancels the drift along the surface normal and adds a
//! switching term `mu * sign(sigma)`; the event-triggered law evaluates the
//! same expression only at update instants and holds it in between.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plant::{self, DimlessParams, DimlessState, Disturbance};

/// Shape of the switching term.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Switching {
    /// `sign(sigma)` with `sign(0) = 0`.
    #[default]
    Sign,
    /// `tanh(sigma / width)` boundary layer.
    Tanh { width: f64 },
    /// `-sign(sigma)`; destabilising on purpose, used to exercise the reachability detector.
    Reversed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlidingParams {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Switching gain.
    pub mu: f64,
    pub switching: Switching,
}

impl Default for SlidingParams {
    fn default() -> Self {
        Self { lambda1: 1.0, lambda2: 2.0, mu: 25.0, switching: Switching::Sign }
    }
}

impl SlidingParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda1.is_finite() && self.lambda2.is_finite()) {
            return Err(Error::InvalidParameter("lambda1, lambda2 must be finite".into()));
        }
        if self.lambda2 == 0.0 {
            return Err(Error::InvalidParameter("lambda2 must be nonzero".into()));
        }
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(Error::InvalidParameter("mu must be positive".into()));
        }
        if let Switching::Tanh { width } = self.switching {
            if !(width.is_finite() && width > 0.0) {
                return Err(Error::InvalidParameter("tanh width must be positive".into()));
            }
        }
        Ok(())
    }

    /// `min(|l1|, |l2|)`, or `|l2|` when `l1` is zero.
    pub fn min_weight(&self) -> f64 {
        if self.lambda1 == 0.0 {
            self.lambda2.abs()
        } else {
            self.lambda1.abs().min(self.lambda2.abs())
        }
    }

    pub fn weight_norm(&self) -> f64 {
        self.lambda1.hypot(self.lambda2)
    }

    fn switching_term(&self, s: f64) -> f64 {
        match self.switching {
            Switching::Sign => sign(s),
            Switching::Tanh { width } => (s / width).tanh(),
            Switching::Reversed => -sign(s),
        }
    }
}

/// Tracking reference: constant composition and the startup temperature profile
/// `x2ss * (1 - k1 exp(-k2 t))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSignal {
    pub x1ref: f64,
    /// Temperature asymptote.
    pub x2ss: f64,
    pub k1: f64,
    pub k2: f64,
}

impl Default for ReferenceSignal {
    fn default() -> Self {
        Self { x1ref: 0.4472, x2ss: 2.6516, k1: 1.0, k2: 1.0 }
    }
}

/// Reference values and their analytic time derivatives at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefPoint {
    pub x1: f64,
    pub x2: f64,
    pub x1dot: f64,
    pub x2dot: f64,
}

impl ReferenceSignal {
    pub fn validate(&self) -> Result<()> {
        if [self.x1ref, self.x2ss, self.k1, self.k2].iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidParameter("reference parameters must be finite".into()))
        }
    }

    pub fn eval(&self, t: f64) -> RefPoint {
        let decay = (-self.k2 * t).exp();
        RefPoint {
            x1: self.x1ref,
            x2: self.x2ss * (1.0 - self.k1 * decay),
            x1dot: 0.0,
            x2dot: self.x2ss * self.k1 * self.k2 * decay,
        }
    }
}

/// Tracking errors and their rates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorState {
    pub e1: f64,
    pub e2: f64,
    pub e1dot: f64,
    pub e2dot: f64,
}

impl ErrorState {
    /// Errors from the state, its actual rate and the reference.
    pub fn new(x: &DimlessState, xdot: &DimlessState, r: &RefPoint) -> Self {
        Self {
            e1: x.x1 - r.x1,
            e2: x.x2 - r.x2,
            e1dot: xdot.x1 - r.x1dot,
            e2dot: xdot.x2 - r.x2dot,
        }
    }

    /// Errors at `t` under actuation `u`; rates come from the plant model.
    pub fn at(
        x: &DimlessState,
        u: f64,
        t: f64,
        p: &DimlessParams,
        d: &Disturbance,
        r: &ReferenceSignal,
    ) -> Result<Self> {
        let xdot = plant::state_derivative(x, u, t, p, d)?;
        Ok(Self::new(x, &xdot, &r.eval(t)))
    }

    /// `(e_i, edot_i)` for a one-based state index.
    pub fn component(&self, index: usize) -> (f64, f64) {
        match index {
            1 => (self.e1, self.e1dot),
            2 => (self.e2, self.e2dot),
            _ => panic!("error index {index} out of range"),
        }
    }
}

/// Control value held between update instants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeldControl {
    pub u: f64,
    /// Update instant.
    pub t_k: f64,
    /// State snapshot at `t_k`.
    pub x_k: DimlessState,
    /// Surface value at `t_k`.
    pub sigma_k: f64,
}

impl HeldControl {
    /// Value applied at `t >= t_k`; constant until the next update.
    pub fn value_at(&self, t: f64) -> f64 {
        debug_assert!(t >= self.t_k, "query at {t} precedes update at {}", self.t_k);
        self.u
    }
}

pub fn sigma(e: &ErrorState, sp: &SlidingParams) -> f64 {
    sp.lambda1 * e.e1 + sp.lambda2 * e.e2
}

/// Signum with `sign(0) = 0`.
pub fn sign(s: f64) -> f64 {
    if s > 0.0 {
        1.0
    } else if s < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Drift of the error dynamics seen by the surface:
/// `(f1 - d2 - x1ref', f2 + d1 - x2ref')`.
pub fn drift_vector(
    x: &DimlessState,
    t: f64,
    p: &DimlessParams,
    d: &Disturbance,
    r: &ReferenceSignal,
) -> Result<DimlessState> {
    let f = plant::state_derivative(x, 0.0, t, p, d)?;
    let rp = r.eval(t);
    Ok(DimlessState::new(f.x1 - rp.x1dot, f.x2 - rp.x2dot))
}

/// Surface rate `l^T F + l2 beta u` for a given drift vector and input.
pub fn sigma_rate(drift: &DimlessState, u: f64, p: &DimlessParams, sp: &SlidingParams) -> f64 {
    sp.lambda1 * drift.x1 + sp.lambda2 * drift.x2 + sp.lambda2 * p.beta * u
}

fn control_law(drift: &DimlessState, s: f64, p: &DimlessParams, sp: &SlidingParams) -> f64 {
    let along_normal = sp.lambda1 * drift.x1 + sp.lambda2 * drift.x2;
    -(along_normal + sp.mu * sp.switching_term(s)) / (sp.lambda2 * p.beta)
}

/// Continuous sliding-mode law evaluated at `(x, t)`.
pub fn continuous_control(
    x: &DimlessState,
    t: f64,
    p: &DimlessParams,
    d: &Disturbance,
    r: &ReferenceSignal,
    sp: &SlidingParams,
) -> Result<f64> {
    let f = drift_vector(x, t, p, d, r)?;
    let rp = r.eval(t);
    let e = ErrorState { e1: x.x1 - rp.x1, e2: x.x2 - rp.x2, ..Default::default() };
    Ok(control_law(&f, sigma(&e, sp), p, sp))
}

/// Recomputes the held control from the snapshot taken at an update instant.
pub fn event_control_update(
    x_k: &DimlessState,
    t_k: f64,
    p: &DimlessParams,
    d: &Disturbance,
    r: &ReferenceSignal,
    sp: &SlidingParams,
) -> Result<HeldControl> {
    let rp = r.eval(t_k);
    let e = ErrorState { e1: x_k.x1 - rp.x1, e2: x_k.x2 - rp.x2, ..Default::default() };
    Ok(HeldControl {
        u: continuous_control(x_k, t_k, p, d, r, sp)?,
        t_k,
        x_k: *x_k,
        sigma_k: sigma(&e, sp),
    })
}
