//! Lewis-Riesenfeld invariant of the driven two-qubit Hamiltonian
//! H = pi J sx1 sx2 + f (sz1 + sz2).
//!
//! The invariant is I = g1 S1 - g2 S2 + g6 S3 + g3 T1 + g4 T2 - g5 T3 with
//! (S, T) the two generator triples of [`crate::algebra::sigma_generators`].
//! Its eigenstates and phases give the exact propagator.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use thiserror::Error;

use crate::algebra::{c, cr, sigma_generators, Axis, Ket, Operator, PureState, Site, C64};
use crate::ode::{Dopri5, OdeError, Tolerances};

/// Eigenvalue magnitude below which the invariant is treated as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InvariantError {
    #[error("degenerate invariant: |lambda{which}| = {value:e}")]
    Degenerate { which: u8, value: f64 },
    #[error(transparent)]
    Ode(#[from] OdeError),
}

/// Instantaneous control fields: transverse field `f` and coupling `j`.
#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize)]
pub struct Fields {
    pub f: f64,
    pub j: f64,
}

/// Anything that supplies control fields over time.
pub trait Drive: Send + Sync {
    fn fields(&self, t: f64) -> Fields;
}

impl<F> Drive for F
where
    F: Fn(f64) -> Fields + Send + Sync,
{
    fn fields(&self, t: f64) -> Fields {
        self(t)
    }
}

pub fn system_hamiltonian(fields: Fields) -> Operator {
    use crate::algebra::pauli;
    let xx = pauli(Axis::X, Site::First) * pauli(Axis::X, Site::Second);
    let zz = pauli(Axis::Z, Site::First) + pauli(Axis::Z, Site::Second);
    xx * cr(PI * fields.j) + zz * cr(fields.f)
}

/// Invariant coefficients g1..g6, stored zero-based (`g[0]` is g1).
#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize)]
pub struct GVector(pub [f64; 6]);

impl GVector {
    pub fn new(g1: f64, g2: f64, g3: f64, g4: f64, g5: f64, g6: f64) -> Self {
        Self([g1, g2, g3, g4, g5, g6])
    }
    pub fn g1(&self) -> f64 {
        self.0[0]
    }
    pub fn g2(&self) -> f64 {
        self.0[1]
    }
    pub fn g3(&self) -> f64 {
        self.0[2]
    }
    pub fn g4(&self) -> f64 {
        self.0[3]
    }
    pub fn g5(&self) -> f64 {
        self.0[4]
    }
    pub fn g6(&self) -> f64 {
        self.0[5]
    }

    /// |lambda3| = sqrt(g1^2 + g2^2 + g6^2)
    pub fn outer_radius(&self) -> f64 {
        (self.g1().powi(2) + self.g2().powi(2) + self.g6().powi(2)).sqrt()
    }

    /// |lambda1| = sqrt(g3^2 + g4^2 + g5^2)
    pub fn inner_radius(&self) -> f64 {
        (self.g3().powi(2) + self.g4().powi(2) + self.g5().powi(2)).sqrt()
    }

    /// Constant eigenvalues (lambda1, lambda2, lambda3, lambda4).
    pub fn eigenvalues(&self) -> [f64; 4] {
        let (a, b) = (self.inner_radius(), self.outer_radius());
        [-a, a, -b, b]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn max_abs_diff(&self, other: &GVector) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

impl Add for GVector {
    type Output = GVector;
    fn add(self, o: GVector) -> GVector {
        GVector(std::array::from_fn(|i| self.0[i] + o.0[i]))
    }
}

impl Sub for GVector {
    type Output = GVector;
    fn sub(self, o: GVector) -> GVector {
        GVector(std::array::from_fn(|i| self.0[i] - o.0[i]))
    }
}

impl Mul<f64> for GVector {
    type Output = GVector;
    fn mul(self, s: f64) -> GVector {
        GVector(self.0.map(|x| x * s))
    }
}

/// Time derivative of the coefficients under fields (f, J).
pub fn g_rhs(g: &GVector, fields: Fields) -> GVector {
    let (f, w) = (fields.f, 2.0 * PI * fields.j);
    GVector::new(w * g.g2(), 4.0 * f * g.g6() - w * g.g1(), 0.0, w * g.g5(), -w * g.g4(), -4.0 * f * g.g2())
}

pub fn invariant_matrix(g: &GVector) -> Operator {
    let s = sigma_generators();
    s.first[0] * cr(g.g1()) - s.first[1] * cr(g.g2())
        + s.first[2] * cr(g.g6())
        + s.second[0] * cr(g.g3())
        + s.second[1] * cr(g.g4())
        - s.second[2] * cr(g.g5())
}

/// Frobenius norm of i dI/dt - [H, I].
pub fn invariance_residual(g: &GVector, g_dot: &GVector, fields: Fields) -> f64 {
    let i_mat = invariant_matrix(g);
    let i_dot = invariant_matrix(g_dot);
    let h = system_hamiltonian(fields);
    (i_dot * c(0.0, 1.0) - (h * i_mat - i_mat * h)).norm()
}

/// Integrates the coefficient ODE on `grid` starting from `g0` at `grid[0]`.
/// The grid may run backwards.
pub fn integrate_g<D: Drive + ?Sized>(
    g0: &GVector,
    drive: &D,
    grid: &[f64],
    tol: Tolerances,
) -> Result<Vec<GVector>, InvariantError> {
    let mut rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        let g = GVector(std::array::from_fn(|i| y[i]));
        dy.copy_from_slice(&g_rhs(&g, drive.fields(t)).0);
        Ok(())
    };
    let out = Dopri5::with_tolerances(tol).solve(&mut rhs, grid, &g0.0)?;
    Ok(out.into_iter().map(|y| GVector(std::array::from_fn(|i| y[i]))).collect())
}

/// (sin eta, cos eta) for one block with cos 2 eta = -a/L, where `rho_sq`
/// is the squared transverse part of the coefficient vector.
/// Avoids the cancellation in L - |a|.
pub(crate) fn half_angle(a: f64, rho_sq: f64, l: f64) -> (f64, f64) {
    let (plus, minus) = if a >= 0.0 {
        let p = l + a;
        (p, if p > 0.0 { rho_sq / p } else { 0.0 })
    } else {
        let m = l - a;
        (if m > 0.0 { rho_sq / m } else { 0.0 }, m)
    };
    let s = (plus / (2.0 * l)).clamp(0.0, 1.0).sqrt();
    let c = (minus / (2.0 * l)).clamp(0.0, 1.0).sqrt();
    (s, c)
}

/// Eigenstate angles; eta in [0, pi/2], zeta from the two-argument arctangent.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct LriAngles {
    pub eta1: f64,
    pub zeta1: f64,
    pub eta2: f64,
    pub zeta2: f64,
}

pub fn angles(g: &GVector) -> Result<LriAngles, InvariantError> {
    let l1 = g.inner_radius();
    let l3 = g.outer_radius();
    if l1 < DEGENERACY_TOL {
        return Err(InvariantError::Degenerate { which: 1, value: l1 });
    }
    if l3 < DEGENERACY_TOL {
        return Err(InvariantError::Degenerate { which: 3, value: l3 });
    }
    let (s1, c1) = half_angle(g.g4(), g.g3().powi(2) + g.g5().powi(2), l1);
    let (s2, c2) = half_angle(g.g1(), g.g2().powi(2) + g.g6().powi(2), l3);
    Ok(LriAngles {
        eta1: s1.atan2(c1),
        zeta1: (-g.g5()).atan2(g.g3()),
        eta2: s2.atan2(c2),
        zeta2: (-g.g2()).atan2(g.g6()),
    })
}

/// Time derivatives of the angles given g and dg/dt.
#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize)]
pub struct AngleRates {
    pub eta1: f64,
    pub zeta1: f64,
    pub eta2: f64,
    pub zeta2: f64,
}

/// Rates of (eta, zeta) for one block: `a` drives eta, `(x, y)` with
/// zeta = atan2(y, x).
fn block_rates(a: f64, a_dot: f64, x: f64, x_dot: f64, y: f64, y_dot: f64) -> (f64, f64) {
    let rho_sq = x * x + y * y;
    if rho_sq < DEGENERACY_TOL * DEGENERACY_TOL {
        // pole of the Bloch sphere; only reached by stationary protocols
        return (0.0, 0.0);
    }
    let rho = rho_sq.sqrt();
    let l = (a * a + rho_sq).sqrt();
    let l_dot = (a * a_dot + x * x_dot + y * y_dot) / l;
    let eta = (a_dot - a * l_dot / l) / (2.0 * rho);
    let zeta = (x * y_dot - y * x_dot) / rho_sq;
    (eta, zeta)
}

pub fn angle_rates(g: &GVector, g_dot: &GVector) -> AngleRates {
    let (eta1, zeta1) = block_rates(g.g4(), g_dot.g4(), g.g3(), g_dot.g3(), -g.g5(), -g_dot.g5());
    let (eta2, zeta2) = block_rates(g.g1(), g_dot.g1(), g.g6(), g_dot.g6(), -g.g2(), -g_dot.g2());
    AngleRates { eta1, zeta1, eta2, zeta2 }
}

/// Eigenstates of the invariant. `states[k]` belongs to `eigenvalues[k]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LriEigensystem {
    pub states: [PureState; 4],
    pub eigenvalues: [f64; 4],
    pub angles: LriAngles,
}

fn block_states(eta: f64, zeta: f64) -> ((C64, C64), (C64, C64)) {
    let (s, c) = eta.sin_cos();
    let e = C64::from_polar(1.0, zeta);
    // (lower, upper) amplitudes on the block basis
    ((-e * c, cr(s)), (e * s, cr(c)))
}

pub fn states_from_angles(a: &LriAngles) -> [PureState; 4] {
    let o = cr(0.0);
    let ((p1a, p1b), (p2a, p2b)) = block_states(a.eta1, a.zeta1);
    let ((p3a, p3b), (p4a, p4b)) = block_states(a.eta2, a.zeta2);
    [
        PureState::from_normalized(Ket::new(o, p1a, p1b, o)),
        PureState::from_normalized(Ket::new(o, p2a, p2b, o)),
        PureState::from_normalized(Ket::new(p3a, o, o, p3b)),
        PureState::from_normalized(Ket::new(p4a, o, o, p4b)),
    ]
}

pub fn eigensystem(g: &GVector) -> Result<LriEigensystem, InvariantError> {
    let angles = angles(g)?;
    Ok(LriEigensystem { states: states_from_angles(&angles), eigenvalues: g.eigenvalues(), angles })
}

impl LriEigensystem {
    /// d|psi_n>/dt along the angle rates.
    pub fn state_derivatives(&self, rates: &AngleRates) -> [Ket; 4] {
        let o = cr(0.0);
        let i = c(0.0, 1.0);
        let block = |eta: f64, zeta: f64, de: f64, dz: f64| {
            let (s, cth) = eta.sin_cos();
            let e = C64::from_polar(1.0, zeta);
            let lower = (e * s * cr(de) - i * e * cr(cth * dz), cr(cth * de));
            let upper = (e * cr(cth * de) + i * e * cr(s * dz), cr(-s * de));
            (lower, upper)
        };
        let a = &self.angles;
        let ((d1a, d1b), (d2a, d2b)) = block(a.eta1, a.zeta1, rates.eta1, rates.zeta1);
        let ((d3a, d3b), (d4a, d4b)) = block(a.eta2, a.zeta2, rates.eta2, rates.zeta2);
        [Ket::new(o, d1a, d1b, o), Ket::new(o, d2a, d2b, o), Ket::new(d3a, o, o, d3b), Ket::new(d4a, o, o, d4b)]
    }
}

/// d alpha_n / dt = <psi_n| i d/dt - H |psi_n> in closed form.
pub fn lr_phase_rates(angles: &LriAngles, rates: &AngleRates, fields: Fields) -> [f64; 4] {
    let pj = PI * fields.j;
    let f = fields.f;
    let (e1, z1, e2, z2) = (angles.eta1, angles.zeta1, angles.eta2, angles.zeta2);
    let (c1sq, s1sq) = (e1.cos().powi(2), e1.sin().powi(2));
    let (c2sq, s2sq) = (e2.cos().powi(2), e2.sin().powi(2));
    let x1 = pj * (2.0 * e1).sin() * z1.cos();
    let x2 = pj * (2.0 * e2).sin() * z2.cos();
    let w2 = 2.0 * f * (2.0 * e2).cos();
    [
        -(rates.zeta1 * c1sq - x1),
        -(rates.zeta1 * s1sq + x1),
        -(rates.zeta2 * c2sq - x2 + w2),
        -(rates.zeta2 * s2sq + x2 - w2),
    ]
}

/// Accumulated LR phases at time `t`.
#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize)]
pub struct PhaseAccumulator {
    pub t: f64,
    pub alphas: [f64; 4],
}

/// sum_n e^{i alpha_n} |psi_n(t)><psi_n(0)|
pub fn propagator(eig_t: &LriEigensystem, eig_0: &LriEigensystem, phases: &PhaseAccumulator) -> Operator {
    let mut u = Operator::zeros();
    for n in 0..4 {
        u += eig_t.states[n].outer(&eig_0.states[n]) * C64::from_polar(1.0, phases.alphas[n]);
    }
    u
}

/// Point on a co-integrated (g, phases) trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InvariantSample {
    pub g: GVector,
    pub phases: PhaseAccumulator,
}

/// Integrates g together with the four LR phases on one adaptive grid.
pub fn integrate_with_phases<D: Drive + ?Sized>(
    g0: &GVector,
    drive: &D,
    grid: &[f64],
    tol: Tolerances,
) -> Result<Vec<InvariantSample>, InvariantError> {
    let mut rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        let g = GVector(std::array::from_fn(|i| y[i]));
        let fields = drive.fields(t);
        let gd = g_rhs(&g, fields);
        let a = angles(&g).map_err(|e| OdeError::Rhs { t, message: e.to_string() })?;
        let r = angle_rates(&g, &gd);
        dy[..6].copy_from_slice(&gd.0);
        dy[6..10].copy_from_slice(&lr_phase_rates(&a, &r, fields));
        Ok(())
    };
    let mut y0 = [0.0; 10];
    y0[..6].copy_from_slice(&g0.0);
    let out = Dopri5::with_tolerances(tol).solve(&mut rhs, grid, &y0)?;
    Ok(out
        .into_iter()
        .zip(grid)
        .map(|(y, &t)| InvariantSample {
            g: GVector(std::array::from_fn(|i| y[i])),
            phases: PhaseAccumulator { t, alphas: std::array::from_fn(|i| y[6 + i]) },
        })
        .collect())
}

/// Shifts `next` by a multiple of 2 pi so that it is within pi of `prev`.
pub fn unwrap_phase(prev: f64, next: f64) -> f64 {
    let tau = 2.0 * PI;
    next - tau * ((next - prev) / tau).round()
}
