//! Dimensionless CSTR model.
//!
//! The simulated plant is the two-state dimensionless reactor
//!
//! ```text
//! x1' = -x1 + Da (1 - x1) exp(x2 / (1 + x2/gamma)) - d2(t)
//! x2' = -x2 + B Da (1 - x1) exp(x2 / (1 + x2/gamma)) - beta (x2 - x2c0) + beta u + d1(t)
//! ```
//!
//! with composition `x1`, temperature `x2` and the coolant actuation `u`.
//! The physical layer ([`PhysicalParams`]) only converts and reports; the
//! integrator always runs on the dimensionless form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this magnitude `1 + x2/gamma` is treated as singular.
pub const SINGULAR_EXPONENT_EPS: f64 = 1e-12;

/// Composition above `1 + X1_DIAGNOSTIC_TOL` is flagged as nonphysical.
pub const X1_DIAGNOSTIC_TOL: f64 = 0.1;

/// Search box for [`find_equilibria`]: x1 in `[0, 1]`, x2 in `[0, 6]`.
pub const EQUILIBRIUM_BOX: StateBox = StateBox { x1: (0.0, 1.0), x2: (0.0, 6.0) };

/// Seeds per axis for the Newton search.
pub const EQUILIBRIUM_SEEDS_PER_AXIS: usize = 20;

/// Residual norm a root must reach to be reported.
pub const EQUILIBRIUM_RESIDUAL_TOL: f64 = 1e-10;

/// Dimensionless reactor state.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DimlessState {
    /// Dimensionless composition (conversion of the feed).
    pub x1: f64,
    /// Dimensionless temperature.
    pub x2: f64,
}

impl DimlessState {
    pub const fn new(x1: f64, x2: f64) -> Self {
        Self { x1, x2 }
    }

    pub fn is_finite(&self) -> bool {
        self.x1.is_finite() && self.x2.is_finite()
    }

    /// Euclidean norm.
    pub fn norm(&self) -> f64 {
        self.x1.hypot(self.x2)
    }

    pub fn distance(&self, other: &DimlessState) -> f64 {
        (*self - *other).norm()
    }

    /// True when the composition exceeds the feed by more than the diagnostic tolerance.
    pub fn exceeds_feed(&self) -> bool {
        self.x1 > 1.0 + X1_DIAGNOSTIC_TOL
    }

    /// `self + h * rate`
    pub fn offset(&self, rate: &DimlessState, h: f64) -> DimlessState {
        DimlessState::new(self.x1 + h * rate.x1, self.x2 + h * rate.x2)
    }
}

impl std::ops::Sub for DimlessState {
    type Output = DimlessState;

    fn sub(self, rhs: Self) -> Self::Output {
        DimlessState::new(self.x1 - rhs.x1, self.x2 - rhs.x2)
    }
}

impl std::ops::Add for DimlessState {
    type Output = DimlessState;

    fn add(self, rhs: Self) -> Self::Output {
        DimlessState::new(self.x1 + rhs.x1, self.x2 + rhs.x2)
    }
}

/// Axis-aligned rectangle in state space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateBox {
    pub x1: (f64, f64),
    pub x2: (f64, f64),
}

impl StateBox {
    pub fn validate(&self) -> Result<()> {
        let ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo <= hi;
        if ok(self.x1) && ok(self.x2) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("empty or non-finite state box {self:?}")))
        }
    }

    /// Maps unit-square coordinates onto the box.
    pub fn point(&self, s1: f64, s2: f64) -> DimlessState {
        DimlessState::new(
            self.x1.0 + s1 * (self.x1.1 - self.x1.0),
            self.x2.0 + s2 * (self.x2.1 - self.x2.0),
        )
    }

    pub fn contains(&self, x: &DimlessState, slack: f64) -> bool {
        x.x1 >= self.x1.0 - slack
            && x.x1 <= self.x1.1 + slack
            && x.x2 >= self.x2.0 - slack
            && x.x2 <= self.x2.1 + slack
    }
}

/// Plant constants of the dimensionless model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimlessParams {
    /// Damkohler number.
    pub da: f64,
    /// Activation energy over `R * Tf0`.
    pub gamma: f64,
    /// Adiabatic temperature rise.
    pub b_rise: f64,
    /// Heat transfer coefficient.
    pub beta: f64,
    /// Nominal dimensionless coolant temperature.
    pub x2c0: f64,
}

impl Default for DimlessParams {
    fn default() -> Self {
        Self { da: 0.078, gamma: 20.0, b_rise: 8.0, beta: 0.3, x2c0: 0.0 }
    }
}

impl DimlessParams {
    /// Checks positivity. `da == 0` is accepted as the non-reacting limit.
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("da", self.da),
            ("gamma", self.gamma),
            ("b_rise", self.b_rise),
            ("beta", self.beta),
            ("x2c0", self.x2c0),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("{name} must be finite")));
        }
        if self.da < 0.0 {
            return Err(Error::InvalidParameter("da must be non-negative".into()));
        }
        for (name, v) in &fields[1..4] {
            if *v <= 0.0 {
                return Err(Error::InvalidParameter(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    /// `exp(x2 / (1 + x2/gamma))` and the bracket `1 + x2/gamma`.
    fn arrhenius(&self, x2: f64) -> Result<(f64, f64)> {
        let denom = 1.0 + x2 / self.gamma;
        if denom.abs() < SINGULAR_EXPONENT_EPS {
            return Err(Error::SingularExponent { x2, denom });
        }
        Ok(((x2 / denom).exp(), denom))
    }
}

/// Sinusoidal signal `amp * sin(freq * t)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Sinusoid {
    pub amp: f64,
    pub freq: f64,
}

impl Sinusoid {
    pub const ZERO: Sinusoid = Sinusoid { amp: 0.0, freq: 0.0 };

    pub fn eval(&self, t: f64) -> f64 {
        if self.amp == 0.0 {
            0.0
        } else {
            self.amp * (self.freq * t).sin()
        }
    }
}

/// Measured exogenous disturbances: `d1` on feed temperature, `d2` on feed composition.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Disturbance {
    pub d1: Sinusoid,
    pub d2: Sinusoid,
}

impl Disturbance {
    pub const NONE: Disturbance = Disturbance { d1: Sinusoid::ZERO, d2: Sinusoid::ZERO };

    /// Sinusoidal feed disturbances used by the disturbed scenario.
    pub fn reference_sinusoids() -> Self {
        Self {
            d1: Sinusoid { amp: 0.026, freq: 0.1 },
            d2: Sinusoid { amp: 0.037, freq: 0.1 },
        }
    }

    /// Uniform bound `|d|_inf` over both channels.
    pub fn bound(&self) -> f64 {
        self.d1.amp.abs().max(self.d2.amp.abs())
    }

    /// Returns `(d1(t), d2(t))`.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let d = (self.d1.eval(t), self.d2.eval(t));
        debug_assert!(d.0.abs() <= self.bound() && d.1.abs() <= self.bound());
        d
    }

    pub fn is_zero(&self) -> bool {
        self.d1.amp == 0.0 && self.d2.amp == 0.0
    }
}

/// Undisturbed composition drift `f1(x1, x2)`.
pub fn eval_f1(x: &DimlessState, p: &DimlessParams) -> Result<f64> {
    Ok(drift(x, p)?.x1)
}

/// Undisturbed temperature drift `f2(x1, x2)` without the actuation term.
pub fn eval_f2(x: &DimlessState, p: &DimlessParams) -> Result<f64> {
    Ok(drift(x, p)?.x2)
}

/// Both drift components with a single exponential evaluation.
pub fn drift(x: &DimlessState, p: &DimlessParams) -> Result<DimlessState> {
    let (arr, _) = p.arrhenius(x.x2)?;
    let reaction = p.da * (1.0 - x.x1) * arr;
    Ok(DimlessState::new(
        -x.x1 + reaction,
        -x.x2 + p.b_rise * reaction - p.beta * (x.x2 - p.x2c0),
    ))
}

/// Right-hand side of the disturbed, actuated plant.
pub fn state_derivative(
    x: &DimlessState,
    u: f64,
    t: f64,
    p: &DimlessParams,
    d: &Disturbance,
) -> Result<DimlessState> {
    let f = drift(x, p)?;
    if d.is_zero() {
        return Ok(DimlessState::new(f.x1, f.x2 + p.beta * u));
    }
    let (d1, d2) = d.eval(t);
    Ok(DimlessState::new(f.x1 - d2, f.x2 + p.beta * u + d1))
}

/// 2x2 matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    /// Induced 2-norm (largest singular value).
    pub fn spectral_norm(&self) -> f64 {
        let [[a, b], [c, d]] = self.0;
        // eigenvalues of M^T M
        let p = a * a + c * c;
        let q = a * b + c * d;
        let r = b * b + d * d;
        let half_trace = 0.5 * (p + r);
        let disc = (0.25 * (p - r) * (p - r) + q * q).sqrt();
        (half_trace + disc).max(0.0).sqrt()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Analytic Jacobian of `(f1, f2)` with respect to `(x1, x2)`.
pub fn jacobian(x: &DimlessState, p: &DimlessParams) -> Result<Mat2> {
    let (arr, denom) = p.arrhenius(x.x2)?;
    let dexp = 1.0 / (denom * denom);
    let k = p.da * arr;
    let dr_dx1 = -k;
    let dr_dx2 = k * (1.0 - x.x1) * dexp;
    Ok(Mat2([
        [-1.0 + dr_dx1, dr_dx2],
        [p.b_rise * dr_dx1, -1.0 + p.b_rise * dr_dx2 - p.beta],
    ]))
}

/// Composition at which `f1` vanishes for a given temperature.
pub fn equilibrium_composition(x2: f64, p: &DimlessParams) -> Result<f64> {
    let (arr, _) = p.arrhenius(x2)?;
    let k = p.da * arr;
    Ok(k / (1.0 + k))
}

/// Steady states of the undisturbed plant under constant actuation `u`.
///
/// Newton iterations are seeded on a regular grid over [`EQUILIBRIUM_BOX`];
/// converged roots inside the box are deduplicated. An empty result means no
/// seed converged.
pub fn find_equilibria(p: &DimlessParams, u: f64) -> Result<Vec<DimlessState>> {
    p.validate()?;
    let residual = |x: &DimlessState| -> Result<DimlessState> {
        let f = drift(x, p)?;
        Ok(DimlessState::new(f.x1, f.x2 + p.beta * u))
    };

    let n = EQUILIBRIUM_SEEDS_PER_AXIS;
    let mut roots: Vec<DimlessState> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let seed = EQUILIBRIUM_BOX.point(i as f64 / (n - 1) as f64, j as f64 / (n - 1) as f64);
            let Some(root) = newton(seed, &residual, p) else { continue };
            let Ok(r) = residual(&root) else { continue };
            if r.norm() >= EQUILIBRIUM_RESIDUAL_TOL || !EQUILIBRIUM_BOX.contains(&root, 1e-9) {
                continue;
            }
            if roots.iter().all(|q| q.distance(&root) > 1e-7) {
                roots.push(root);
            }
        }
    }
    roots.sort_by(|a, b| a.x2.total_cmp(&b.x2));
    Ok(roots)
}

fn newton(
    mut x: DimlessState,
    residual: &impl Fn(&DimlessState) -> Result<DimlessState>,
    p: &DimlessParams,
) -> Option<DimlessState> {
    for _ in 0..100 {
        let r = residual(&x).ok()?;
        if r.norm() < 1e-13 {
            return Some(x);
        }
        let Mat2([[a, b], [c, d]]) = jacobian(&x, p).ok()?;
        let det = a * d - b * c;
        if det.abs() < 1e-300 {
            return None;
        }
        let dx1 = (d * r.x1 - b * r.x2) / det;
        let dx2 = (-c * r.x1 + a * r.x2) / det;
        x = DimlessState::new(x.x1 - dx1, x.x2 - dx2);
        if !x.is_finite() || x.x2.abs() > 1e3 {
            return None;
        }
        if dx1.hypot(dx2) < 1e-15 {
            return Some(x);
        }
    }
    residual(&x).ok().filter(|r| r.norm() < EQUILIBRIUM_RESIDUAL_TOL).map(|_| x)
}

/// Physical reactor constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalParams {
    /// Rate constant (1/min).
    pub k0: f64,
    /// Nominal feed concentration (kmol/m^3).
    pub caf0: f64,
    /// Nominal flow (m^3/min).
    pub f0: f64,
    /// Density (g/m^3).
    pub rho: f64,
    /// Specific heat (cal/(degC g)).
    pub cp: f64,
    /// Heat of reaction (cal/kmol), negative when exothermic.
    pub dh: f64,
    pub rhoc: f64,
    pub cpc: f64,
    /// Volume (m^3).
    pub v: f64,
    /// Coolant flow (m^3/min).
    pub fc: f64,
    /// Activation energy (J/mol).
    pub e: f64,
    /// Gas constant (J/(mol K)).
    pub r: f64,
    /// Nominal feed temperature (K).
    pub tf0: f64,
    /// Nominal coolant temperature (K).
    pub tc0: f64,
    /// Heat-transfer model coefficient.
    pub a: f64,
    /// Heat-transfer model exponent.
    pub b: f64,
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("k0", self.k0),
            ("caf0", self.caf0),
            ("f0", self.f0),
            ("rho", self.rho),
            ("cp", self.cp),
            ("rhoc", self.rhoc),
            ("cpc", self.cpc),
            ("v", self.v),
            ("fc", self.fc),
            ("e", self.e),
            ("r", self.r),
            ("tf0", self.tf0),
            ("tc0", self.tc0),
            ("a", self.a),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive")));
            }
        }
        if !(self.dh.is_finite() && self.dh < 0.0) {
            return Err(Error::InvalidParameter("dh must be negative (exothermic)".into()));
        }
        if !self.b.is_finite() {
            return Err(Error::InvalidParameter("b must be finite".into()));
        }
        if !self.gamma().is_finite() {
            return Err(Error::InvalidParameter("gamma = E/(R Tf0) is not finite".into()));
        }
        Ok(())
    }

    pub fn gamma(&self) -> f64 {
        self.e / (self.r * self.tf0)
    }

    /// Heat transfer term `hA = a Fc^(b+1) / (Fc + a Fc^b / (2 rhoc cpc))`.
    pub fn heat_transfer(&self) -> Result<f64> {
        let fcb = self.fc.powf(self.b);
        let denom = self.fc + self.a * fcb / (2.0 * self.rhoc * self.cpc);
        if denom == 0.0 || !denom.is_finite() {
            return Err(Error::InvalidParameter("heat transfer denominator vanishes".into()));
        }
        Ok(self.a * self.fc.powf(self.b + 1.0) / denom)
    }
}

/// Derives the dimensionless plant constants from physical ones.
pub fn physical_to_dimensionless(pp: &PhysicalParams) -> Result<DimlessParams> {
    pp.validate()?;
    let gamma = pp.gamma();
    let params = DimlessParams {
        da: pp.k0 * (-gamma).exp() * pp.v / pp.f0,
        gamma,
        b_rise: -pp.dh * pp.caf0 * gamma / (pp.rho * pp.cp * pp.tf0),
        beta: pp.heat_transfer()? / (pp.rho * pp.cp * pp.f0),
        x2c0: gamma * (pp.tc0 - pp.tf0) / pp.tf0,
    };
    params.validate()?;
    Ok(params)
}

/// Reactor temperature in kelvin to dimensionless temperature.
pub fn kelvin_to_x2(t_kelvin: f64, tf0: f64, gamma: f64) -> Result<f64> {
    if !(tf0 > 0.0) {
        return Err(Error::NonPositiveTemperature(tf0));
    }
    Ok(gamma * (t_kelvin - tf0) / tf0)
}

/// Inverse of [`kelvin_to_x2`].
pub fn x2_to_kelvin(x2: f64, tf0: f64, gamma: f64) -> Result<f64> {
    if !(tf0 > 0.0) {
        return Err(Error::NonPositiveTemperature(tf0));
    }
    Ok(tf0 + x2 * tf0 / gamma)
}

/// Arrhenius rate `k0 exp(-E/(R T)) CA` in kmol/(m^3 min).
pub fn reaction_rate(ca: f64, t_kelvin: f64, pp: &PhysicalParams) -> Result<f64> {
    if !(t_kelvin > 0.0) {
        return Err(Error::NonPositiveTemperature(t_kelvin));
    }
    Ok(pp.k0 * (-pp.e / (pp.r * t_kelvin)).exp() * ca)
}
