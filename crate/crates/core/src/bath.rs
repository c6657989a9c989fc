//! Reservoir side of the master equation: occupations, Ohmic rates,
//! transition data of the coupling operator A = sx1 + sx2, instantaneous
//! transition frequencies and the zero-temperature Lamb shift.
//!
//! Levels are labelled 1..=4 in the order of the invariant eigenstates.
//! The pair (m, n) denotes the jump |psi_m><psi_n|.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::f64::consts::PI;

use thiserror::Error;

use crate::algebra::{c, pauli, Axis, Operator, Site};
use crate::invariant::{
    angle_rates, eigensystem, g_rhs, half_angle, system_hamiltonian, Fields, GVector, InvariantError, LriEigensystem,
    PhaseAccumulator,
};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
/// Channels with xi^2 at or below this are switched off.
pub const XI_SQ_FLOOR: f64 = 1e-20;
/// Frequencies at or below this magnitude count as a vanished transition.
pub const ALPHA_FLOOR: f64 = 1e-12;
/// Largest argument for which Ei does not overflow.
const EI_MAX_ARG: f64 = 709.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BathError {
    #[error("invalid argument {name} = {value}: {reason}")]
    Domain { name: &'static str, value: f64, reason: &'static str },
    #[error("Lamb shift requested at temperature {0}; only T = 0 is supported")]
    UnsupportedTemperature(f64),
    #[error("closed-form frequencies need g4 = g5 = 0 and g3 > 0 (got g3 = {g3}, g4 = {g4}, g5 = {g5})")]
    UnsupportedSector { g3: f64, g4: f64, g5: f64 },
    #[error(transparent)]
    Invariant(#[from] InvariantError),
}

fn domain(name: &'static str, value: f64, reason: &'static str) -> BathError {
    BathError::Domain { name, value, reason }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct BathParams {
    pub temperature: f64,
    pub s32: f64,
    pub s24: f64,
    /// kappa in omega_c = kappa * alpha.
    pub cutoff_multiplier: f64,
    pub include_lamb_shift: bool,
}

impl Default for BathParams {
    fn default() -> Self {
        Self { temperature: 0.0, s32: 0.1, s24: 0.01, cutoff_multiplier: 10.0, include_lamb_shift: false }
    }
}

impl BathParams {
    pub fn validate(&self) -> Result<(), BathError> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(domain("temperature", self.temperature, "must be finite and >= 0"));
        }
        for (name, s) in [("s32", self.s32), ("s24", self.s24)] {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(domain(name, s, "must be finite and >= 0"));
            }
        }
        if !(self.cutoff_multiplier > 0.0 && self.cutoff_multiplier.is_finite()) {
            return Err(domain("kappa", self.cutoff_multiplier, "must be finite and > 0"));
        }
        if self.include_lamb_shift && self.temperature > 0.0 {
            return Err(BathError::UnsupportedTemperature(self.temperature));
        }
        Ok(())
    }
}

/// Planck occupation 1/(e^{alpha/T} - 1); zero at T = 0.
pub fn planck_n(alpha: f64, temperature: f64) -> Result<f64, BathError> {
    if !(alpha > 0.0) {
        return Err(domain("alpha", alpha, "must be > 0"));
    }
    if !(temperature >= 0.0) {
        return Err(domain("temperature", temperature, "must be >= 0"));
    }
    if temperature == 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 / (alpha / temperature).exp_m1())
}

/// J(alpha) = s alpha exp(-alpha / cutoff)
pub fn spectral_density(alpha: f64, s: f64, cutoff: f64) -> Result<f64, BathError> {
    if !(alpha > 0.0) {
        return Err(domain("alpha", alpha, "must be > 0"));
    }
    if !(cutoff > 0.0) {
        return Err(domain("cutoff", cutoff, "must be > 0"));
    }
    Ok(s * alpha * (-alpha / cutoff).exp())
}

/// 2 pi J(alpha) with the cutoff tied to the frequency, omega_c = kappa alpha.
pub fn gamma0(alpha: f64, s: f64, kappa: f64) -> Result<f64, BathError> {
    if !(kappa > 0.0) {
        return Err(domain("kappa", kappa, "must be > 0"));
    }
    Ok(2.0 * PI * spectral_density(alpha, s, kappa * alpha)?)
}

/// Exponential integral Ei(x) = -PV int_{-x}^inf e^{-t}/t dt.
pub fn exp_integral_ei(x: f64) -> Result<f64, BathError> {
    if x == 0.0 || !x.is_finite() {
        return Err(domain("x", x, "Ei needs a finite nonzero argument"));
    }
    if x > EI_MAX_ARG {
        return Err(domain("x", x, "Ei overflows beyond 709"));
    }
    if x < 0.0 {
        return Ok(-e1(-x));
    }
    if x <= 40.0 {
        let mut term = 1.0;
        let mut sum = 0.0;
        for k in 1..500 {
            term *= x / k as f64;
            let add = term / k as f64;
            sum += add;
            if add < 1e-17 * sum {
                break;
            }
        }
        return Ok(EULER_GAMMA + x.ln() + sum);
    }
    // asymptotic series, truncated at its smallest term
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        let next = term * k as f64 / x;
        if next > term {
            break;
        }
        term = next;
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    Ok(x.exp() / x * sum)
}

/// E1(z) for z > 0.
fn e1(z: f64) -> f64 {
    if z <= 1.0 {
        let mut term = 1.0;
        let mut sum = 0.0;
        for k in 1..200 {
            term *= -z / k as f64;
            let add = term / k as f64;
            sum += add;
            if add.abs() < 1e-17 * sum.abs().max(1e-300) {
                break;
            }
        }
        return -EULER_GAMMA - z.ln() - sum;
    }
    // modified Lentz evaluation of the continued fraction
    let tiny = 1e-300;
    let mut b = z + 1.0;
    let mut cc = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..1000 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        cc = b + an / cc;
        let del = cc * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h * (-z).exp()
}

/// Zero-temperature Lamb shift S(alpha) = PV int_0^inf J(w)/(alpha - w) dw
/// for the Ohmic density with omega_c = kappa alpha.
pub fn lamb_shift_s0(alpha: f64, s: f64, kappa: f64, temperature: f64) -> Result<f64, BathError> {
    if temperature > 0.0 {
        return Err(BathError::UnsupportedTemperature(temperature));
    }
    if !(alpha > 0.0) {
        return Err(domain("alpha", alpha, "must be > 0"));
    }
    if !(kappa > 0.0) {
        return Err(domain("kappa", kappa, "must be > 0"));
    }
    let x = 1.0 / kappa;
    Ok(s * alpha * ((-x).exp() * exp_integral_ei(x)? - kappa))
}

/// Coupling operator A = sx1 + sx2.
pub fn coupling_operator() -> Operator {
    pauli(Axis::X, Site::First) + pauli(Axis::X, Site::Second)
}

/// A_mn = <psi_m|A|psi_n> as a matrix with zero-based indices.
pub fn matrix_elements_a(eig: &LriEigensystem) -> Operator {
    let a = coupling_operator();
    Operator::from_fn(|m, n| eig.states[m].amplitudes().dotc(&(a * eig.states[n].amplitudes())))
}

/// Matrix elements of A together with their phases at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionData {
    pub a: Operator,
    pub phases: PhaseAccumulator,
}

fn index(level: usize) -> usize {
    assert!((1..=4).contains(&level), "levels are labelled 1..=4");
    level - 1
}

impl TransitionData {
    pub fn element(&self, m: usize, n: usize) -> num_complex::Complex64 {
        self.a[(index(m), index(n))]
    }
    /// xi_mn = |A_mn|
    pub fn xi(&self, m: usize, n: usize) -> f64 {
        self.element(m, n).norm()
    }
    /// phi_mn = Arg A_mn
    pub fn phi(&self, m: usize, n: usize) -> f64 {
        self.element(m, n).arg()
    }
    /// theta_mn = alpha_n - alpha_m + phi_mn
    pub fn theta(&self, m: usize, n: usize) -> f64 {
        let al = &self.phases.alphas;
        al[index(n)] - al[index(m)] + self.phi(m, n)
    }
}

pub fn xi_theta(phases: &PhaseAccumulator, a: &Operator) -> TransitionData {
    TransitionData { a: *a, phases: *phases }
}

/// Everything the bath needs to know about the protocol at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProtocolSnapshot {
    pub t: f64,
    pub g: GVector,
    pub g_dot: GVector,
    pub fields: Fields,
}

impl ProtocolSnapshot {
    /// Uses the coefficient equation for dg/dt.
    pub fn new(t: f64, g: GVector, fields: Fields) -> Self {
        Self { t, g, g_dot: g_rhs(&g, fields), fields }
    }
}

/// Instantaneous transition frequencies and squared couplings of the two
/// channels that connect psi2 with psi3 and psi4.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct Frequencies {
    pub alpha23: f64,
    pub alpha24: f64,
    pub xi23_sq: f64,
    pub xi24_sq: f64,
}

impl Frequencies {
    pub fn alpha32(&self) -> f64 {
        -self.alpha23
    }
}

/// alpha_mn = -d theta_mn/dt for the pairs 23 and 24 in closed form.
///
/// Valid when psi2 is the symmetric triplet (g4 = g5 = 0, g3 > 0).
pub fn instantaneous_frequencies(snap: &ProtocolSnapshot) -> Result<Frequencies, BathError> {
    let g = &snap.g;
    let tol = 1e-12 * g.g3().abs();
    if !(g.g3() > 0.0) || g.g4().abs() > tol || g.g5().abs() > tol {
        return Err(BathError::UnsupportedSector { g3: g.g3(), g4: g.g4(), g5: g.g5() });
    }
    let (g1, g2, g6) = (g.g1(), g.g2(), g.g6());
    let rho_sq = g2 * g2 + g6 * g6;
    let l = (g1 * g1 + rho_sq).sqrt();
    if l < crate::invariant::DEGENERACY_TOL {
        return Err(InvariantError::Degenerate { which: 3, value: l }.into());
    }
    let rho = rho_sq.sqrt();
    let (s, cth) = half_angle(g1, rho_sq, l);
    let (s_sq, c_sq) = (s * s, cth * cth);
    let cos2 = -g1 / l;
    let sin_zeta = if rho > 0.0 { -g2 / rho } else { 0.0 };
    let sc = g6 / l; // sin 2 eta cos zeta
    let near = g1 * g1 + g2 * g2;
    // 1 -+ sin 2 eta cos zeta
    let (d23, d24) =
        if g6 >= 0.0 { (near / (l * (l + g6)), (l + g6) / l) } else { ((l - g6) / l, near / (l * (l - g6))) };
    let r = angle_rates(g, &snap.g_dot);
    let (ed, zd) = (r.eta2, r.zeta2);
    let (f, pj) = (snap.fields.f, PI * snap.fields.j);

    let arg23 = if d23 > 0.0 { (2.0 * ed * sin_zeta + zd * (d23 + cos2)) / (2.0 * d23) } else { 0.0 };
    let arg24 = if d24 > 0.0 { (2.0 * ed * sin_zeta + zd * (2.0 * s_sq + sc)) / (2.0 * d24) } else { 0.0 };
    let alpha23 = zd * c_sq + 2.0 * f * cos2 - pj * (sc + 1.0) - arg23;
    let alpha24 = zd * s_sq - 2.0 * f * cos2 + pj * (sc - 1.0) - arg24;
    Ok(Frequencies { alpha23, alpha24, xi23_sq: 2.0 * d23, xi24_sq: 2.0 * d24 })
}

/// The three contributions to alpha_mn whose sum is the frequency.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct FrequencyParts {
    /// -(<H>_m - <H>_n)
    pub energy: f64,
    /// i(<psi_m|d psi_m> - <psi_n|d psi_n>)
    pub geometric: f64,
    /// -d/dt Arg A_mn
    pub coupling_phase: f64,
}

impl FrequencyParts {
    pub fn total(&self) -> f64 {
        self.energy + self.geometric + self.coupling_phase
    }
}

/// General decomposition of alpha_mn from the eigenstates and their rates.
pub fn frequency_decomposition(snap: &ProtocolSnapshot, m: usize, n: usize) -> Result<FrequencyParts, BathError> {
    let (im, inn) = (index(m), index(n));
    let eig = eigensystem(&snap.g)?;
    let d = eig.state_derivatives(&angle_rates(&snap.g, &snap.g_dot));
    let h = system_hamiltonian(snap.fields);
    let a_op = coupling_operator();
    let (pm, pn) = (eig.states[im].amplitudes(), eig.states[inn].amplitudes());
    let energy = -(eig.states[im].expectation(&h).re - eig.states[inn].expectation(&h).re);
    let geo = |p: &crate::algebra::Ket, dp: &crate::algebra::Ket| (c(0.0, 1.0) * p.dotc(dp)).re;
    let geometric = geo(pm, &d[im]) - geo(pn, &d[inn]);
    let a = pm.dotc(&(a_op * pn));
    let a_dot = d[im].dotc(&(a_op * pn)) + pm.dotc(&(a_op * d[inn]));
    let coupling_phase = if a.norm_sqr() > 1e-24 { -(a.conj() * a_dot).im / a.norm_sqr() } else { 0.0 };
    Ok(FrequencyParts { energy, geometric, coupling_phase })
}

/// Pair (m, n) with jump operator |psi_m><psi_n|.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize)]
pub struct Pair {
    pub m: usize,
    pub n: usize,
}

impl Pair {
    pub const P32: Pair = Pair { m: 3, n: 2 };
    pub const P24: Pair = Pair { m: 2, n: 4 };

    pub fn swapped(self) -> Pair {
        Pair { m: self.n, n: self.m }
    }
    pub fn target(&self) -> usize {
        index(self.m)
    }
    pub fn source(&self) -> usize {
        index(self.n)
    }
}

/// One dissipative channel at one instant.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct Channel {
    /// Emission orientation, (3,2) or (2,4).
    pub nominal: Pair,
    /// Orientation used for the jump operator; the swap of `nominal` when
    /// the frequency is negative.
    pub active: Pair,
    /// Signed frequency of the nominal pair.
    pub alpha: f64,
    pub xi_sq: f64,
    /// xi^2 gamma0(|alpha|)
    pub gamma: f64,
    pub n_thermal: f64,
    /// S(|alpha|), zero unless the Lamb shift is enabled.
    pub lamb_shift: f64,
}

impl Channel {
    pub fn reversed(&self) -> bool {
        self.active != self.nominal
    }
    pub fn is_active(&self) -> bool {
        self.gamma > 0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct Rates {
    pub t: f64,
    pub temperature: f64,
    pub include_lamb_shift: bool,
    pub frequencies: Frequencies,
    pub channels: [Channel; 2],
}

impl Rates {
    pub fn gamma32(&self) -> f64 {
        self.channels[0].gamma
    }
    pub fn gamma24(&self) -> f64 {
        self.channels[1].gamma
    }
    pub fn s32(&self) -> f64 {
        self.channels[0].lamb_shift
    }
    pub fn s24(&self) -> f64 {
        self.channels[1].lamb_shift
    }
    /// True if any channel runs against its nominal direction.
    pub fn reversal(&self) -> bool {
        self.channels.iter().any(|c| c.reversed())
    }
}

fn channel(nominal: Pair, alpha: f64, xi_sq: f64, s: f64, bath: &BathParams) -> Result<Channel, BathError> {
    let mut ch = Channel { nominal, active: nominal, alpha, xi_sq, gamma: 0.0, n_thermal: 0.0, lamb_shift: 0.0 };
    if xi_sq <= XI_SQ_FLOOR || alpha.abs() <= ALPHA_FLOOR || s == 0.0 {
        return Ok(ch);
    }
    if alpha < 0.0 {
        ch.active = nominal.swapped();
    }
    let w = alpha.abs();
    ch.gamma = xi_sq * gamma0(w, s, bath.cutoff_multiplier)?;
    ch.n_thermal = planck_n(w, bath.temperature)?;
    if bath.include_lamb_shift {
        ch.lamb_shift = lamb_shift_s0(w, s, bath.cutoff_multiplier, bath.temperature)?;
    }
    Ok(ch)
}

pub fn rates(snap: &ProtocolSnapshot, bath: &BathParams) -> Result<Rates, BathError> {
    bath.validate()?;
    let fr = instantaneous_frequencies(snap)?;
    Ok(Rates {
        t: snap.t,
        temperature: bath.temperature,
        include_lamb_shift: bath.include_lamb_shift,
        frequencies: fr,
        channels: [
            channel(Pair::P32, fr.alpha32(), fr.xi23_sq, bath.s32, bath)?,
            channel(Pair::P24, fr.alpha24, fr.xi24_sq, bath.s24, bath)?,
        ],
    })
}
