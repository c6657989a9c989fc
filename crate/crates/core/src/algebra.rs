//! Two-qubit operators, states and density matrices.
//!
//! The ordered basis is {|00>, |01>, |10>, |11>} with sigma_z|0> = +|0>.
//! Site 1 is the left tensor factor.

use nalgebra::{Matrix2, Matrix4, Vector4};
use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;
/// Dense 4x4 complex operator on the two-qubit Hilbert space.
pub type Operator = Matrix4<C64>;
pub type Ket = Vector4<C64>;

pub const DIM: usize = 4;
const NORM_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgebraError {
    #[error("state is not normalized: |psi|^2 = {norm_sq}")]
    NotNormalized { norm_sq: f64 },
    #[error("state has zero norm")]
    ZeroNorm,
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
}

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Site {
    First,
    Second,
}

pub fn pauli2(axis: Axis) -> Matrix2<C64> {
    let (o, l, i) = (cr(0.0), cr(1.0), c(0.0, 1.0));
    match axis {
        Axis::X => Matrix2::new(o, l, l, o),
        Axis::Y => Matrix2::new(o, -i, i, o),
        Axis::Z => Matrix2::new(l, o, o, -l),
    }
}

/// Kronecker product of two single-qubit operators.
pub fn kron(a: &Matrix2<C64>, b: &Matrix2<C64>) -> Operator {
    Operator::from_fn(|r, col| a[(r / 2, col / 2)] * b[(r % 2, col % 2)])
}

/// sigma_axis acting on one site, identity on the other.
pub fn pauli(axis: Axis, site: Site) -> Operator {
    let p = pauli2(axis);
    let id = Matrix2::identity();
    match site {
        Site::First => kron(&p, &id),
        Site::Second => kron(&id, &p),
    }
}

pub fn identity() -> Operator {
    Operator::identity()
}

pub fn commutator(a: &Operator, b: &Operator) -> Operator {
    a * b - b * a
}

/// Largest entry modulus of `a - a^dagger`.
pub fn hermiticity_defect(a: &Operator) -> f64 {
    (a - a.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest singular value.
pub fn operator_norm(a: &Operator) -> f64 {
    a.singular_values().max()
}

/// Frobenius distance of `u u^dagger` from the identity.
pub fn unitarity_defect(u: &Operator) -> f64 {
    (u * u.adjoint() - Operator::identity()).norm()
}

/// Eigenvalues of the Hermitian part of `a`, ascending.
pub fn hermitian_eigenvalues(a: &Operator) -> [f64; 4] {
    let h = (a + a.adjoint()) * cr(0.5);
    let eig = h.symmetric_eigen();
    let mut v = [0.0; 4];
    for (k, x) in eig.eigenvalues.iter().enumerate() {
        v[k] = *x;
    }
    v.sort_by(f64::total_cmp);
    v
}

/// The two mutually commuting su(2) generator triples.
///
/// `first` acts on span{|00>, |11>}, `second` on span{|01>, |10>}.
#[derive(Clone, Debug, PartialEq)]
pub struct SigmaGenerators {
    pub first: [Operator; 3],
    pub second: [Operator; 3],
}

pub fn sigma_generators() -> SigmaGenerators {
    let sz = |k: usize| pauli(Axis::Z, if k == 1 { Site::First } else { Site::Second });
    let (x1, x2) = (pauli(Axis::X, Site::First), pauli(Axis::X, Site::Second));
    let (y1, y2) = (pauli(Axis::Y, Site::First), pauli(Axis::Y, Site::Second));
    let half = cr(0.5);
    SigmaGenerators {
        first: [(sz(1) + sz(2)) * half, -(x1 * y2 + y1 * x2) * half, (x1 * x2 - y1 * y2) * half],
        second: [(x1 * x2 + y1 * y2) * half, (sz(1) - sz(2)) * half, (x1 * y2 - y1 * x2) * half],
    }
}

/// Normalized pure state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PureState(Ket);

impl PureState {
    /// Accepts amplitudes whose squared norm is 1 within 1e-12.
    pub fn new(amplitudes: Ket) -> Result<Self, AlgebraError> {
        if amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(AlgebraError::NonFinite("state"));
        }
        let norm_sq = amplitudes.norm_squared();
        if (norm_sq - 1.0).abs() > NORM_TOL {
            return Err(AlgebraError::NotNormalized { norm_sq });
        }
        Ok(Self(amplitudes))
    }

    pub fn normalized(amplitudes: Ket) -> Result<Self, AlgebraError> {
        if amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(AlgebraError::NonFinite("state"));
        }
        let n = amplitudes.norm();
        if n == 0.0 {
            return Err(AlgebraError::ZeroNorm);
        }
        Ok(Self(amplitudes / cr(n)))
    }

    /// For amplitudes that are normalized by construction.
    pub(crate) fn from_normalized(amplitudes: Ket) -> Self {
        debug_assert!((amplitudes.norm_squared() - 1.0).abs() < 1e-10);
        Self(amplitudes)
    }

    pub fn basis(index: usize) -> Self {
        let mut v = Ket::zeros();
        v[index] = cr(1.0);
        Self(v)
    }

    pub fn ket00() -> Self {
        Self::basis(0)
    }

    /// (|00> - |11>)/sqrt(2).
    pub fn bell_minus() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self(Ket::new(cr(h), cr(0.0), cr(0.0), cr(-h)))
    }

    pub fn amplitudes(&self) -> &Ket {
        &self.0
    }

    /// <self|other>
    pub fn inner(&self, other: &PureState) -> C64 {
        self.0.dotc(&other.0)
    }

    /// |self><other|
    pub fn outer(&self, other: &PureState) -> Operator {
        self.0 * other.0.adjoint()
    }

    pub fn projector(&self) -> Operator {
        self.outer(self)
    }

    pub fn with_phase(&self, theta: f64) -> Self {
        Self(self.0 * C64::from_polar(1.0, theta))
    }

    /// <self|op|self>
    pub fn expectation(&self, op: &Operator) -> C64 {
        self.0.dotc(&(op * self.0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Picture {
    Schroedinger,
    Interaction,
}

impl Picture {
    pub fn flipped(self) -> Self {
        match self {
            Picture::Schroedinger => Picture::Interaction,
            Picture::Interaction => Picture::Schroedinger,
        }
    }
}

/// Density matrix tagged with the picture it lives in. Validity is checked
/// on demand with [`check_density`].
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: Operator,
    picture: Picture,
}

impl DensityMatrix {
    pub fn new(matrix: Operator, picture: Picture) -> Self {
        Self { matrix, picture }
    }

    pub fn pure(state: &PureState, picture: Picture) -> Self {
        Self::new(state.projector(), picture)
    }

    pub fn maximally_mixed(picture: Picture) -> Self {
        Self::new(Operator::identity() * cr(0.25), picture)
    }

    pub fn matrix(&self) -> &Operator {
        &self.matrix
    }

    pub fn picture(&self) -> Picture {
        self.picture
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// <psi|rho|psi>
    pub fn population(&self, psi: &PureState) -> f64 {
        psi.expectation(&self.matrix).re
    }

    pub fn diagnostics(&self) -> DensityDiagnostics {
        check_density(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct DensityDiagnostics {
    pub hermiticity_defect: f64,
    pub trace_defect: f64,
    pub min_eigenvalue: f64,
}

impl DensityDiagnostics {
    pub const HERMITICITY_TOL: f64 = 1e-10;
    pub const TRACE_TOL: f64 = 1e-10;
    pub const EIGEN_FLOOR: f64 = -1e-8;

    pub fn within(&self, hermiticity_tol: f64, trace_tol: f64, eigen_floor: f64) -> bool {
        self.hermiticity_defect <= hermiticity_tol
            && self.trace_defect <= trace_tol
            && self.min_eigenvalue >= eigen_floor
    }

    pub fn is_valid(&self) -> bool {
        self.within(Self::HERMITICITY_TOL, Self::TRACE_TOL, Self::EIGEN_FLOOR)
    }
}

pub fn check_density(rho: &DensityMatrix) -> DensityDiagnostics {
    let m = rho.matrix();
    let trace = m.trace();
    DensityDiagnostics {
        hermiticity_defect: hermiticity_defect(m),
        trace_defect: (trace - cr(1.0)).norm(),
        min_eigenvalue: hermitian_eigenvalues(m)[0],
    }
}

/// <target|rho|target>, clamped into [0, 1].
pub fn fidelity(rho: &DensityMatrix, target: &PureState) -> Result<f64, AlgebraError> {
    let norm_sq = target.amplitudes().norm_squared();
    if (norm_sq - 1.0).abs() > NORM_TOL {
        return Err(AlgebraError::NotNormalized { norm_sq });
    }
    Ok(rho.population(target).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ket(v: [f64; 4]) -> Ket {
        Ket::new(cr(v[0]), cr(v[1]), cr(v[2]), cr(v[3]))
    }

    #[test]
    fn pauli_actions() {
        let k00 = PureState::ket00();
        let z = pauli(Axis::Z, Site::First) * k00.amplitudes();
        assert_eq!(z, *k00.amplitudes());
        let flipped = pauli(Axis::X, Site::First) * pauli(Axis::X, Site::Second) * k00.amplitudes();
        assert_eq!(flipped, *PureState::basis(3).amplitudes());
        let x1 = pauli(Axis::X, Site::First);
        assert_eq!(x1 * x1, identity());
    }

    #[test]
    fn site_ordering() {
        // |01>: first qubit 0, second qubit 1
        let z2 = pauli(Axis::Z, Site::Second) * PureState::basis(1).amplitudes();
        assert_eq!(z2, -PureState::basis(1).amplitudes());
    }

    #[test]
    fn sigma_generator_algebra() {
        let s = sigma_generators();
        let two_i = c(0.0, 2.0);
        for set in [&s.first, &s.second] {
            for k in 0..3 {
                let (a, b, cc) = (&set[k], &set[(k + 1) % 3], &set[(k + 2) % 3]);
                assert!((commutator(a, b) - cc * two_i).norm() < 1e-14);
                assert!(hermiticity_defect(a) < 1e-15);
                assert!(a.trace().norm() < 1e-15);
            }
        }
        for a in &s.first {
            for b in &s.second {
                assert!(commutator(a, b).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn sigma_matrix_entries() {
        let s = sigma_generators();
        // first set lives on {|00>, |11>}
        assert_eq!(s.first[0][(0, 0)], cr(1.0));
        assert_eq!(s.first[0][(3, 3)], cr(-1.0));
        assert_eq!(s.first[1][(0, 3)], c(0.0, 1.0));
        assert_eq!(s.first[2][(0, 3)], cr(1.0));
        assert_eq!(s.second[0][(1, 2)], cr(1.0));
        assert_eq!(s.second[1][(1, 1)], cr(1.0));
        assert_eq!(s.second[1][(2, 2)], cr(-1.0));
        assert_eq!(s.second[2][(1, 2)], c(0.0, 1.0));
    }

    #[test]
    fn fidelity_examples() {
        let phi = PureState::bell_minus();
        let rho = DensityMatrix::pure(&phi, Picture::Schroedinger);
        assert!((fidelity(&rho, &phi).unwrap() - 1.0).abs() < 1e-15);
        let mixed = DensityMatrix::maximally_mixed(Picture::Schroedinger);
        assert!((fidelity(&mixed, &phi).unwrap() - 0.25).abs() < 1e-15);
        let k00 = DensityMatrix::pure(&PureState::ket00(), Picture::Schroedinger);
        assert!((fidelity(&k00, &phi).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_unnormalized() {
        assert!(matches!(PureState::new(ket([1.0, 1.0, 0.0, 0.0])), Err(AlgebraError::NotNormalized { .. })));
        assert_eq!(PureState::normalized(Ket::zeros()), Err(AlgebraError::ZeroNorm));
    }

    #[test]
    fn density_checks() {
        let d = check_density(&DensityMatrix::maximally_mixed(Picture::Interaction));
        assert!(d.hermiticity_defect == 0.0 && d.trace_defect < 1e-15);
        assert!((d.min_eigenvalue - 0.25).abs() < 1e-14);

        let eps = 1e-6;
        let mut m = Operator::identity() * cr(0.25);
        m[(0, 1)] += cr(eps);
        let d = check_density(&DensityMatrix::new(m, Picture::Schroedinger));
        assert!((d.hermiticity_defect - eps).abs() < 1e-18);

        let p = DensityMatrix::pure(&PureState::bell_minus(), Picture::Schroedinger);
        assert!(check_density(&p).min_eigenvalue >= -1e-12);
        assert!(check_density(&p).is_valid());
    }

    fn arb_state() -> impl Strategy<Value = PureState> {
        prop::array::uniform8(-1.0f64..1.0)
            .prop_filter("nonzero", |a| a.iter().map(|x| x * x).sum::<f64>() > 1e-3)
            .prop_map(|a| {
                PureState::normalized(Ket::new(c(a[0], a[1]), c(a[2], a[3]), c(a[4], a[5]), c(a[6], a[7]))).unwrap()
            })
    }

    proptest! {
        #[test]
        fn fidelity_phase_invariant(psi in arb_state(), phi in arb_state(), theta in -10.0f64..10.0) {
            let rho = DensityMatrix::pure(&psi, Picture::Schroedinger);
            let a = fidelity(&rho, &phi).unwrap();
            let b = fidelity(&rho, &phi.with_phase(theta)).unwrap();
            prop_assert!((a - b).abs() < 1e-14);
            prop_assert!((0.0..=1.0).contains(&a));
        }

        #[test]
        fn pure_states_are_valid_densities(psi in arb_state()) {
            let d = check_density(&DensityMatrix::pure(&psi, Picture::Schroedinger));
            prop_assert!(d.is_valid());
        }
    }
}
