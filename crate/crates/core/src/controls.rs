//! Inverse-engineered control protocols.
//!
//! A protocol prescribes the invariant coefficients g(t) and derives the
//! fields (f, J) that make the coefficient ODE hold along it. With
//! s = sin(w t) the outer-block coefficients are
//!
//! g1 = g1(0) h(s),  g2 = g2m sin(2 w t),  g6 = sqrt(lambda3^2 - g1^2 - g2^2)
//!
//! where the profile h depends on the variant and orientation.

use std::f64::consts::PI;

use thiserror::Error;

use crate::invariant::{Drive, Fields, GVector};

pub const DEFAULT_G3: f64 = 1.0;
/// Samples per period for the admissibility scan.
const ADMISSIBILITY_SAMPLES: usize = 4001;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("invalid parameter {name} = {value}: {reason}")]
    Domain { name: &'static str, value: f64, reason: &'static str },
    #[error("inadmissible protocol: g6^2 = {deficit:e} at t = {t} (needs lambda3^2 > g1^2 + g2^2)")]
    Inadmissible { t: f64, deficit: f64 },
    #[error("degenerate fields: f = J = 0")]
    Degenerate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Cos2,
    Sin3,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// g1 = g1(0) (1 - s^p): starts at the prescribed g1(0), ends at 0.
    Forward,
    /// g1 = g1(0) s^p: the mirror profile, starts at 0.
    Reversed,
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct ProtocolParams {
    pub gamma: f64,
    pub delta: f64,
    pub g2m: f64,
    pub omega_e: f64,
    pub g3: f64,
    pub variant: Variant,
    pub orientation: Orientation,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            delta: 0.1f64.sqrt(),
            g2m: 0.02,
            omega_e: 1.0,
            g3: DEFAULT_G3,
            variant: Variant::Cos2,
            orientation: Orientation::Forward,
        }
    }
}

fn domain(name: &'static str, value: f64, reason: &'static str) -> ControlError {
    ControlError::Domain { name, value, reason }
}

impl ProtocolParams {
    pub fn validate(&self) -> Result<(), ControlError> {
        let finite = |name, v: f64| if v.is_finite() { Ok(()) } else { Err(domain(name, v, "must be finite")) };
        finite("gamma", self.gamma)?;
        finite("delta", self.delta)?;
        finite("g2m", self.g2m)?;
        finite("omega_e", self.omega_e)?;
        finite("g3", self.g3)?;
        if self.gamma <= 0.0 {
            return Err(domain("gamma", self.gamma, "must be > 0"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(domain("delta", self.delta, "must lie in (0, 1)"));
        }
        if self.g2m == 0.0 {
            return Err(domain("g2m", self.g2m, "must be nonzero"));
        }
        if self.omega_e <= 0.0 {
            return Err(domain("omega_e", self.omega_e, "must be > 0"));
        }
        if self.g3 <= 0.0 {
            return Err(domain("g3", self.g3, "must be > 0"));
        }
        Ok(())
    }

    /// T = pi / (2 w)
    pub fn period(&self) -> f64 {
        PI / (2.0 * self.omega_e)
    }
}

/// Coefficients at t = 0 and t = T, and lambda3.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Boundary {
    pub start: GVector,
    pub end: GVector,
    pub lambda3: f64,
}

pub fn boundary_g(gamma: f64, delta: f64) -> Result<Boundary, ControlError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(domain("delta", delta, "must lie in (0, 1)"));
    }
    if gamma == 0.0 || !gamma.is_finite() {
        return Err(domain("gamma", gamma, "must be finite and nonzero"));
    }
    let q = 2.0 * delta * (1.0 - delta * delta).sqrt();
    let g10 = (2.0 * delta * delta - 1.0) * gamma / q;
    let l = gamma / q;
    Ok(Boundary {
        start: GVector::new(g10, 0.0, DEFAULT_G3, 0.0, 0.0, gamma),
        end: GVector::new(0.0, 0.0, DEFAULT_G3, 0.0, 0.0, l),
        lambda3: -l,
    })
}

/// A prescribed coefficient trajectory together with its fields.
pub trait Protocol: Drive {
    fn duration(&self) -> f64;
    fn g(&self, t: f64) -> GVector;
    fn g_dot(&self, t: f64) -> GVector;
}

/// Profile h(s) and h'(s)/s; the quotient is a polynomial so the
/// g2 = 0 points of the field formulas need no special casing.
fn profile(variant: Variant, orientation: Orientation, s: f64) -> (f64, f64) {
    match (variant, orientation) {
        (Variant::Cos2, Orientation::Forward) => (1.0 - s * s, -2.0),
        (Variant::Cos2, Orientation::Reversed) => (s * s, 2.0),
        (Variant::Sin3, Orientation::Forward) => (1.0 - s * s * s, -3.0 * s),
        (Variant::Sin3, Orientation::Reversed) => (s * s * s, 3.0 * s),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnsatzProtocol {
    params: ProtocolParams,
    g10: f64,
    lambda3: f64,
}

impl AnsatzProtocol {
    /// Validates parameters and checks that g6 stays real and nonzero.
    pub fn new(params: ProtocolParams) -> Result<Self, ControlError> {
        params.validate()?;
        let b = boundary_g(params.gamma, params.delta)?;
        let p = Self { params, g10: b.start.g1(), lambda3: b.lambda3 };
        p.check_admissibility()?;
        Ok(p)
    }

    pub fn params(&self) -> &ProtocolParams {
        &self.params
    }

    pub fn lambda3(&self) -> f64 {
        self.lambda3
    }

    /// g6^2 as implied by the eigenvalue constraint.
    pub fn g6_squared(&self, t: f64) -> f64 {
        let (g1, g2) = self.g1_g2(t);
        self.lambda3 * self.lambda3 - g1 * g1 - g2 * g2
    }

    fn g1_g2(&self, t: f64) -> (f64, f64) {
        let w = self.params.omega_e;
        let (h, _) = profile(self.params.variant, self.params.orientation, (w * t).sin());
        (self.g10 * h, self.params.g2m * (2.0 * w * t).sin())
    }

    pub fn check_admissibility(&self) -> Result<(), ControlError> {
        let period = self.params.period();
        let mut worst = (0.0, f64::INFINITY);
        for k in 0..ADMISSIBILITY_SAMPLES {
            let t = period * k as f64 / (ADMISSIBILITY_SAMPLES - 1) as f64;
            let d = self.g6_squared(t);
            if d < worst.1 {
                worst = (t, d);
            }
        }
        if worst.1 <= 0.0 {
            return Err(ControlError::Inadmissible { t: worst.0, deficit: worst.1 });
        }
        Ok(())
    }

    pub fn fields_at(&self, t: f64) -> Fields {
        let p = &self.params;
        let w = p.omega_e;
        let s = (w * t).sin();
        let (h, h_over_s) = profile(p.variant, p.orientation, s);
        let g6 = self.g6_squared(t).max(0.0).sqrt();
        let j = self.g10 * w * h_over_s / (4.0 * PI * p.g2m);
        let f =
            w * (self.g10 * self.g10 * h * h_over_s + 4.0 * p.g2m * p.g2m * (2.0 * w * t).cos()) / (8.0 * p.g2m * g6);
        Fields { f, j }
    }
}

impl Drive for AnsatzProtocol {
    fn fields(&self, t: f64) -> Fields {
        self.fields_at(t)
    }
}

impl Protocol for AnsatzProtocol {
    fn duration(&self) -> f64 {
        self.params.period()
    }

    fn g(&self, t: f64) -> GVector {
        let (g1, g2) = self.g1_g2(t);
        let g6 = self.g6_squared(t).max(0.0).sqrt();
        GVector::new(g1, g2, self.params.g3, 0.0, 0.0, g6)
    }

    fn g_dot(&self, t: f64) -> GVector {
        let p = &self.params;
        let w = p.omega_e;
        let (s, cth) = (w * t).sin_cos();
        let (_, h_over_s) = profile(p.variant, p.orientation, s);
        let g = self.g(t);
        let g1d = self.g10 * h_over_s * s * w * cth;
        let g2d = 2.0 * w * p.g2m * (2.0 * w * t).cos();
        let g6d = -(g.g1() * g1d + g.g2() * g2d) / g.g6();
        GVector::new(g1d, g2d, 0.0, 0.0, 0.0, g6d)
    }
}

/// Closed-form coefficient trajectory of the ansatz.
pub fn ansatz_g(params: &ProtocolParams, t: f64) -> Result<GVector, ControlError> {
    let p = AnsatzProtocol::new(*params)?;
    let d = p.g6_squared(t);
    if d < 0.0 {
        return Err(ControlError::Inadmissible { t, deficit: d });
    }
    Ok(p.g(t))
}

/// Control fields f(t), J(t) synthesized for a protocol.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlFields {
    protocol: AnsatzProtocol,
}

impl ControlFields {
    pub fn f(&self, t: f64) -> f64 {
        self.protocol.fields_at(t).f
    }
    pub fn j(&self, t: f64) -> f64 {
        self.protocol.fields_at(t).j
    }
    pub fn protocol(&self) -> &AnsatzProtocol {
        &self.protocol
    }
}

impl Drive for ControlFields {
    fn fields(&self, t: f64) -> Fields {
        self.protocol.fields_at(t)
    }
}

pub fn control_fields(params: &ProtocolParams) -> Result<ControlFields, ControlError> {
    Ok(ControlFields { protocol: AnsatzProtocol::new(*params)? })
}

/// Fields for the cubic profile, whatever variant `params` names.
pub fn control_fields_sin3(params: &ProtocolParams) -> Result<ControlFields, ControlError> {
    control_fields(&ProtocolParams { variant: Variant::Sin3, ..*params })
}

/// The closed-form cos2 forward fields written out in terms of cos(w t),
/// independent of the profile machinery above.
pub fn cos2_reference_fields(params: &ProtocolParams, t: f64) -> Result<Fields, ControlError> {
    params.validate()?;
    let b = boundary_g(params.gamma, params.delta)?;
    let (g10, g60, m, w) = (b.start.g1(), b.start.g6(), params.g2m, params.omega_e);
    let cw = (w * t).cos();
    let radicand = g10 * g10 * (1.0 - cw.powi(4)) - m * m * (2.0 * w * t).sin().powi(2) + g60 * g60;
    if radicand <= 0.0 {
        return Err(ControlError::Inadmissible { t, deficit: radicand });
    }
    Ok(Fields {
        j: -g10 * w / (2.0 * PI * m),
        f: w * (2.0 * m * m * (2.0 * w * t).cos() - g10 * g10 * cw * cw) / (4.0 * m * radicand.sqrt()),
    })
}

/// Time-independent fields with the invariant commuting with H.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantProtocol {
    pub fields: Fields,
    pub g3: f64,
    pub duration: f64,
}

impl ConstantProtocol {
    pub fn new(f: f64, j: f64, duration: f64) -> Result<Self, ControlError> {
        if f == 0.0 && j == 0.0 {
            return Err(ControlError::Degenerate);
        }
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(domain("duration", duration, "must be finite and > 0"));
        }
        Ok(Self { fields: Fields { f, j }, g3: DEFAULT_G3, duration })
    }
}

impl Drive for ConstantProtocol {
    fn fields(&self, _t: f64) -> Fields {
        self.fields
    }
}

impl Protocol for ConstantProtocol {
    fn duration(&self) -> f64 {
        self.duration
    }

    fn g(&self, _t: f64) -> GVector {
        GVector::new(2.0 * self.fields.f, 0.0, self.g3, 0.0, 0.0, PI * self.fields.j)
    }

    fn g_dot(&self, _t: f64) -> GVector {
        GVector::default()
    }
}

fn adiabatic_energy(f: f64, j: f64) -> Result<f64, ControlError> {
    let e = (PI * j).hypot(2.0 * f);
    if e == 0.0 {
        return Err(ControlError::Degenerate);
    }
    Ok(e)
}

/// E - 2f without cancellation for large positive f.
fn energy_minus_2f(f: f64, j: f64, e: f64) -> f64 {
    if f > 0.0 {
        (PI * j).powi(2) / (e + 2.0 * f)
    } else {
        e - 2.0 * f
    }
}

/// Adiabatic eta2 for constant fields (J >= 0 branch, zeta = 0).
pub fn adiabatic_eta2(f: f64, j: f64) -> Result<f64, ControlError> {
    let e = adiabatic_energy(f, j)?;
    let ratio = energy_minus_2f(f, j, e) / e;
    Ok((0.5 * ratio).sqrt().clamp(0.0, 1.0).acos())
}

/// |A23| and |A24| between adiabatic eigenstates (J >= 0 branch).
///
/// At J = 0, f > 0 the expression for xi23 is 0/0; its limit sqrt(2) is returned.
pub fn adiabatic_xi(f: f64, j: f64) -> Result<(f64, f64), ControlError> {
    let e = adiabatic_energy(f, j)?;
    let pj = PI * j;
    let em = energy_minus_2f(f, j, e);
    let ep = if f < 0.0 { pj * pj / (e - 2.0 * f) } else { e + 2.0 * f };
    let xi23 = if em == 0.0 {
        2f64.sqrt()
    } else {
        // pi J + 2f - E = pi J - (E - 2f)
        (pj - em).abs() / (e * em).sqrt()
    };
    let xi24 = if ep == 0.0 {
        2f64.sqrt()
    } else {
        // pi J + 2f + E = pi J + (E + 2f)
        (pj + ep).abs() / (e * ep).sqrt()
    };
    Ok((xi23, xi24))
}

/// (alpha23, alpha24) between adiabatic eigenstates.
pub fn adiabatic_alphas(f: f64, j: f64) -> Result<(f64, f64), ControlError> {
    let e = adiabatic_energy(f, j)?;
    Ok((-(e + PI * j), e - PI * j))
}
