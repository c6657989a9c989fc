//! Master-equation generators, time evolution in either picture, steady
//! states and the dark-state / decoherence-free-subspace checks.
//!
//! Superoperators act on column-stacked density matrices: entry (i, j)
//! sits at index i + 4 j, and vec(A X B) = (B^T kron A) vec(X).

use nalgebra::{DMatrix, DVector, SMatrix};
use thiserror::Error;

use crate::algebra::{
    check_density, cr, fidelity, unitarity_defect, AlgebraError, DensityDiagnostics, DensityMatrix, Operator, Picture,
    PureState, C64,
};
use crate::bath::{rates, BathError, BathParams, Pair, ProtocolSnapshot, Rates};
use crate::controls::{ConstantProtocol, ControlError, Protocol};
use crate::invariant::{
    angle_rates, eigensystem, g_rhs, lr_phase_rates, propagator, system_hamiltonian, Fields, GVector, InvariantError,
    LriEigensystem, PhaseAccumulator,
};
use crate::ode::{linspace, Dopri5, OdeError, Tolerances};

pub type Superoperator = SMatrix<C64, 16, 16>;

/// Bound on trace drift and negative eigenvalues along a trajectory.
pub const TRAJECTORY_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("negative rate {gamma} for pair ({}, {})", pair.m, pair.n)]
    InconsistentRate { pair: Pair, gamma: f64 },
    #[error("operator is not unitary (defect {defect:e})")]
    NonUnitary { defect: f64 },
    #[error("density matrix left tolerance at t = {t}: trace defect {:e}, min eigenvalue {:e}", diagnostics.trace_defect, diagnostics.min_eigenvalue)]
    ToleranceFailure { t: f64, diagnostics: DensityDiagnostics },
    #[error("steady-state residual {residual:e} exceeds tolerance")]
    SteadyStateResidual { residual: f64 },
    #[error("invalid argument {name} = {value}: {reason}")]
    Domain { name: &'static str, value: f64, reason: &'static str },
    #[error(transparent)]
    Invariant(#[from] InvariantError),
    #[error(transparent)]
    Bath(#[from] BathError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

/// |psi_m><psi_n| in the given frame.
pub fn jump_operator(frame: &[PureState; 4], pair: Pair) -> Operator {
    frame[pair.target()].outer(&frame[pair.source()])
}

/// F32 and F24 in both pictures.
#[derive(Clone, Debug, PartialEq)]
pub struct LindbladOps {
    pub interaction: [Operator; 2],
    pub schroedinger: [Operator; 2],
}

pub fn lindblad_ops(eig0: &LriEigensystem, eig_t: &LriEigensystem, phases: &PhaseAccumulator) -> LindbladOps {
    let u = propagator(eig_t, eig0, phases);
    let interaction = [jump_operator(&eig0.states, Pair::P32), jump_operator(&eig0.states, Pair::P24)];
    let schroedinger = interaction.map(|f| u * f * u.adjoint());
    LindbladOps { interaction, schroedinger }
}

/// Lamb-shift Hamiltonian sum_c S_c xi_c^2 |psi_n><psi_n| with n the source
/// level of each channel.
pub fn lamb_shift_hamiltonian(rates: &Rates, frame: &[PureState; 4]) -> Result<Operator, DynamicsError> {
    if rates.temperature > 0.0 {
        return Err(BathError::UnsupportedTemperature(rates.temperature).into());
    }
    let mut h = Operator::zeros();
    for ch in &rates.channels {
        if ch.lamb_shift != 0.0 && ch.xi_sq > 0.0 {
            h += frame[ch.active.source()].projector() * cr(ch.lamb_shift * ch.xi_sq);
        }
    }
    Ok(h)
}

/// Weighted jump operator.
#[derive(Clone, Debug, PartialEq)]
pub struct Jump {
    pub op: Operator,
    pub rate: f64,
}

/// Hamiltonian plus jumps; the generator is
/// L(X) = -i[H, X] + sum_k r_k (F X F^dag - {F^dag F, X}/2).
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorTerms {
    pub t: f64,
    pub picture: Picture,
    pub hamiltonian: Operator,
    pub jumps: Vec<Jump>,
    pub lamb_shift: bool,
    /// Eigenstates the jump operators are built from.
    pub frame: [PureState; 4],
}

impl GeneratorTerms {
    pub fn apply(&self, x: &Operator) -> Operator {
        let i = C64::new(0.0, 1.0);
        let h = &self.hamiltonian;
        let mut out = (h * x - x * h) * (-i);
        for j in &self.jumps {
            let f = &j.op;
            let fd = f.adjoint();
            let fdf = fd * f;
            out += (f * x * fd - (fdf * x + x * fdf) * cr(0.5)) * cr(j.rate);
        }
        out
    }

    pub fn liouvillian(&self) -> Liouvillian {
        let id = Operator::identity();
        let i = C64::new(0.0, 1.0);
        let h = &self.hamiltonian;
        let mut m = (kron4(&id, h) - kron4(&h.transpose(), &id)) * (-i);
        for j in &self.jumps {
            let f = &j.op;
            let fdf = f.adjoint() * f;
            let d = kron4(&f.conjugate(), f) - (kron4(&id, &fdf) + kron4(&fdf.transpose(), &id)) * cr(0.5);
            m += d * cr(j.rate);
        }
        Liouvillian { matrix: m, t: self.t, picture: self.picture, lamb_shift: self.lamb_shift, frame: self.frame }
    }
}

fn kron4(a: &Operator, b: &Operator) -> Superoperator {
    Superoperator::from_fn(|r, c| a[(r / 4, c / 4)] * b[(r % 4, c % 4)])
}

pub fn vectorize(x: &Operator) -> SMatrix<C64, 16, 1> {
    SMatrix::<C64, 16, 1>::from_fn(|k, _| x[(k % 4, k / 4)])
}

pub fn unvectorize(v: &SMatrix<C64, 16, 1>) -> Operator {
    Operator::from_fn(|i, j| v[i + 4 * j])
}

/// 16x16 generator at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct Liouvillian {
    pub matrix: Superoperator,
    pub t: f64,
    pub picture: Picture,
    pub lamb_shift: bool,
    pub frame: [PureState; 4],
}

impl Liouvillian {
    pub fn apply(&self, x: &Operator) -> Operator {
        unvectorize(&(self.matrix * vectorize(x)))
    }

    /// Norm of Tr o L: the row vector vec(I)^dag L.
    pub fn trace_preservation_defect(&self) -> f64 {
        let tr = vectorize(&Operator::identity()).adjoint();
        (tr * self.matrix).norm()
    }

    /// max over matrix units E of |L(E^dag) - L(E)^dag|.
    pub fn hermiticity_preservation_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..16 {
            let mut e = Operator::zeros();
            e[(k % 4, k / 4)] = cr(1.0);
            let d = self.apply(&e.adjoint()) - self.apply(&e).adjoint();
            worst = worst.max(d.norm());
        }
        worst
    }
}

/// Assembles the generator from rates, the frame states and the coherent
/// part. `system_h` is the driving Hamiltonian in the Schroedinger picture
/// and should be zero in the interaction picture.
pub fn build_generator(
    t: f64,
    rates: &Rates,
    frame: &[PureState; 4],
    system_h: &Operator,
    picture: Picture,
    closed_system: bool,
) -> Result<GeneratorTerms, DynamicsError> {
    let mut terms = GeneratorTerms {
        t,
        picture,
        hamiltonian: *system_h,
        jumps: Vec::new(),
        lamb_shift: rates.include_lamb_shift,
        frame: *frame,
    };
    if closed_system {
        terms.lamb_shift = false;
        return Ok(terms);
    }
    for ch in &rates.channels {
        if ch.gamma < 0.0 || !ch.gamma.is_finite() {
            return Err(DynamicsError::InconsistentRate { pair: ch.active, gamma: ch.gamma });
        }
        if ch.gamma == 0.0 {
            continue;
        }
        let f = jump_operator(frame, ch.active);
        terms.jumps.push(Jump { op: f, rate: ch.gamma * (ch.n_thermal + 1.0) });
        if ch.n_thermal > 0.0 {
            terms.jumps.push(Jump { op: f.adjoint(), rate: ch.gamma * ch.n_thermal });
        }
    }
    if rates.include_lamb_shift {
        terms.hamiltonian += lamb_shift_hamiltonian(rates, frame)?;
    }
    Ok(terms)
}

/// Generator at time t using the protocol's prescribed coefficients.
pub fn instantaneous_generator(
    protocol: &dyn Protocol,
    bath: &BathParams,
    t: f64,
    picture: Picture,
    closed_system: bool,
) -> Result<GeneratorTerms, DynamicsError> {
    let g = protocol.g(t);
    let fields = protocol.fields(t);
    let snap = ProtocolSnapshot { t, g, g_dot: protocol.g_dot(t), fields };
    let r = rates(&snap, bath)?;
    let (frame, h) = match picture {
        Picture::Schroedinger => (eigensystem(&g)?.states, system_hamiltonian(fields)),
        Picture::Interaction => (eigensystem(&protocol.g(0.0))?.states, Operator::zeros()),
    };
    build_generator(t, &r, &frame, &h, picture, closed_system)
}

/// Conjugates by U: interaction -> Schroedinger applies U rho U^dag, the
/// other direction U^dag rho U.
pub fn picture_transform(rho: &DensityMatrix, u: &Operator) -> Result<DensityMatrix, DynamicsError> {
    let defect = unitarity_defect(u);
    if defect > 1e-8 {
        return Err(DynamicsError::NonUnitary { defect });
    }
    let m = rho.matrix();
    let out = match rho.picture() {
        Picture::Interaction => u * m * u.adjoint(),
        Picture::Schroedinger => u.adjoint() * m * u,
    };
    Ok(DensityMatrix::new(out, rho.picture().flipped()))
}

/// What the fidelity column is measured against.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Target {
    Fixed(PureState),
    /// Instantaneous invariant eigenstate, level 1..=4.
    Eigenstate(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionOptions {
    pub picture: Picture,
    pub closed_system: bool,
    pub tolerances: Tolerances,
    /// Output times; must start at 0.
    pub grid: Vec<f64>,
    pub target: Option<Target>,
}

impl EvolutionOptions {
    pub fn new(duration: f64, points: usize) -> Self {
        Self {
            picture: Picture::Schroedinger,
            closed_system: false,
            tolerances: Tolerances::default(),
            grid: linspace(0.0, duration, points),
            target: None,
        }
    }
}

/// Per-row protocol and bath data.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct StepRecord {
    pub t: f64,
    pub fields: Fields,
    pub rates: Rates,
    pub diagnostics: DensityDiagnostics,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct EvolutionWarning {
    pub t: f64,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub picture: Picture,
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub g: Vec<GVector>,
    pub phases: Vec<PhaseAccumulator>,
    pub records: Vec<StepRecord>,
    /// Fidelity to the target, measured in the Schroedinger picture.
    pub fidelity: Option<Vec<f64>>,
    pub warnings: Vec<EvolutionWarning>,
}

impl Trajectory {
    pub fn propagator_at(&self, k: usize) -> Result<Operator, DynamicsError> {
        let e0 = eigensystem(&self.g[0])?;
        let et = eigensystem(&self.g[k])?;
        Ok(propagator(&et, &e0, &self.phases[k]))
    }

    /// States converted to the Schroedinger picture.
    pub fn schroedinger_states(&self) -> Result<Vec<DensityMatrix>, DynamicsError> {
        (0..self.states.len())
            .map(|k| match self.picture {
                Picture::Schroedinger => Ok(self.states[k].clone()),
                Picture::Interaction => picture_transform(&self.states[k], &self.propagator_at(k)?),
            })
            .collect()
    }

    pub fn final_fidelity(&self) -> Option<f64> {
        self.fidelity.as_ref().and_then(|f| f.last().copied())
    }
}

const RHO_LEN: usize = 32;
const STATE_LEN: usize = RHO_LEN + 6 + 4;

fn unpack_rho(y: &[f64]) -> Operator {
    Operator::from_fn(|i, j| {
        let k = i + 4 * j;
        C64::new(y[2 * k], y[2 * k + 1])
    })
}

fn pack_rho(m: &Operator, out: &mut [f64]) {
    for j in 0..4 {
        for i in 0..4 {
            let k = i + 4 * j;
            out[2 * k] = m[(i, j)].re;
            out[2 * k + 1] = m[(i, j)].im;
        }
    }
}

fn unpack_g(y: &[f64]) -> GVector {
    GVector(std::array::from_fn(|i| y[RHO_LEN + i]))
}

fn unpack_phases(t: f64, y: &[f64]) -> PhaseAccumulator {
    PhaseAccumulator { t, alphas: std::array::from_fn(|i| y[RHO_LEN + 6 + i]) }
}

fn rhs_error(t: f64, e: impl std::fmt::Display) -> OdeError {
    OdeError::Rhs { t, message: e.to_string() }
}

/// Integrates the master equation together with g(t) and the LR phases.
pub fn evolve(
    rho0: &DensityMatrix,
    protocol: &dyn Protocol,
    bath: &BathParams,
    options: &EvolutionOptions,
) -> Result<Trajectory, DynamicsError> {
    bath.validate()?;
    let grid = &options.grid;
    if grid.len() < 2 || grid[0] != 0.0 {
        return Err(DynamicsError::Domain {
            name: "grid",
            value: grid.first().copied().unwrap_or(f64::NAN),
            reason: "needs at least two points starting at t = 0",
        });
    }
    let d0 = check_density(rho0);
    if !d0.is_valid() {
        return Err(DynamicsError::ToleranceFailure { t: 0.0, diagnostics: d0 });
    }
    let g0 = protocol.g(0.0);
    let eig0 = eigensystem(&g0)?;
    let picture = options.picture;
    let closed = options.closed_system;

    let mut rhs = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<(), OdeError> {
        let g = unpack_g(y);
        let fields = protocol.fields(t);
        let gd = g_rhs(&g, fields);
        let eig = eigensystem(&g).map_err(|e| rhs_error(t, e))?;
        let ar = angle_rates(&g, &gd);
        dy[RHO_LEN..RHO_LEN + 6].copy_from_slice(&gd.0);
        dy[RHO_LEN + 6..].copy_from_slice(&lr_phase_rates(&eig.angles, &ar, fields));

        let rho = unpack_rho(y);
        let drho = match (picture, closed) {
            (Picture::Interaction, true) => Operator::zeros(),
            (Picture::Schroedinger, true) => {
                let h = system_hamiltonian(fields);
                (h * rho - rho * h) * C64::new(0.0, -1.0)
            }
            _ => {
                let r = rates(&ProtocolSnapshot { t, g, g_dot: gd, fields }, bath).map_err(|e| rhs_error(t, e))?;
                let (frame, h) = match picture {
                    Picture::Schroedinger => (eig.states, system_hamiltonian(fields)),
                    Picture::Interaction => (eig0.states, Operator::zeros()),
                };
                build_generator(t, &r, &frame, &h, picture, false).map_err(|e| rhs_error(t, e))?.apply(&rho)
            }
        };
        pack_rho(&drho, &mut dy[..RHO_LEN]);
        Ok(())
    };

    let mut y0 = vec![0.0; STATE_LEN];
    pack_rho(rho0.matrix(), &mut y0[..RHO_LEN]);
    y0[RHO_LEN..RHO_LEN + 6].copy_from_slice(&g0.0);

    let mut samples: Vec<(f64, Vec<f64>)> = Vec::with_capacity(grid.len());
    Dopri5::with_tolerances(options.tolerances)
        .solve_with(&mut rhs, grid, &y0, |_, t, y| {
            let rho = unpack_rho(y);
            let diag = check_density(&DensityMatrix::new(rho, picture));
            if diag.trace_defect > TRAJECTORY_TOL || diag.min_eigenvalue < -TRAJECTORY_TOL {
                return Err(rhs_error(t, format!("density tolerance: {diag:?}")));
            }
            samples.push((t, y.to_vec()));
            Ok(())
        })
        .map_err(|e| match e {
            OdeError::Rhs { t, ref message } if message.starts_with("density tolerance") => {
                let y = &samples.last().map(|s| s.1.clone()).unwrap_or_default();
                let diagnostics =
                    if y.is_empty() { d0 } else { check_density(&DensityMatrix::new(unpack_rho(y), picture)) };
                DynamicsError::ToleranceFailure { t, diagnostics }
            }
            other => other.into(),
        })?;

    let mut traj = Trajectory {
        picture,
        times: Vec::with_capacity(grid.len()),
        states: Vec::with_capacity(grid.len()),
        g: Vec::with_capacity(grid.len()),
        phases: Vec::with_capacity(grid.len()),
        records: Vec::with_capacity(grid.len()),
        fidelity: options.target.map(|_| Vec::with_capacity(grid.len())),
        warnings: Vec::new(),
    };
    let mut reversed_before = false;
    for (t, y) in samples {
        let rho = DensityMatrix::new(unpack_rho(&y), picture);
        let g = unpack_g(&y);
        let phases = unpack_phases(t, &y);
        let fields = protocol.fields(t);
        let r = rates(&ProtocolSnapshot::new(t, g, fields), bath)?;
        if r.reversal() && !reversed_before {
            traj.warnings.push(EvolutionWarning {
                t,
                message: "transition frequency changed sign; jump direction reversed".into(),
            });
        }
        reversed_before = r.reversal();
        let eig_t = eigensystem(&g)?;
        if let (Some(target), Some(series)) = (options.target, traj.fidelity.as_mut()) {
            let rho_s = match picture {
                Picture::Schroedinger => rho.clone(),
                Picture::Interaction => picture_transform(&rho, &propagator(&eig_t, &eig0, &phases))?,
            };
            let state = match target {
                Target::Fixed(s) => s,
                Target::Eigenstate(level) => eig_t.states[level - 1],
            };
            series.push(fidelity(&rho_s, &state)?);
        }
        traj.records.push(StepRecord { t, fields, rates: r, diagnostics: check_density(&rho) });
        traj.times.push(t);
        traj.states.push(rho);
        traj.g.push(g);
        traj.phases.push(phases);
    }
    Ok(traj)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SteadyState {
    pub rho: DensityMatrix,
    /// Dimension of the generator's null space.
    pub null_space_dim: usize,
    pub residual: f64,
}

/// Null-space element with no weight on the frame's first state,
/// normalized to unit trace and Hermitized.
pub fn steady_state(l: &Liouvillian) -> Result<SteadyState, DynamicsError> {
    let lm = DMatrix::<C64>::from_fn(16, 16, |r, c| l.matrix[(r, c)]);
    let sv = lm.clone().singular_values();
    let smax = sv.max().max(1.0);
    let null_space_dim = sv.iter().filter(|s| **s <= 1e-9 * smax).count();

    let psi1 = l.frame[0].amplitudes();
    let others: Vec<_> = l.frame.iter().map(|s| *s.amplitudes()).collect();
    // rows: L (16), trace (1), <psi1|X|psi_j> for j = 1..4, <psi_j|X|psi1> for j = 2..4
    let rows = 16 + 1 + 4 + 3;
    let mut a = DMatrix::<C64>::zeros(rows, 16);
    let mut b = DVector::<C64>::zeros(rows);
    a.view_mut((0, 0), (16, 16)).copy_from(&lm);
    let trace_row = 16;
    for i in 0..4 {
        a[(trace_row, i + 4 * i)] = cr(smax);
    }
    b[trace_row] = cr(smax);
    let mut r = trace_row + 1;
    let constraint = |bra: &crate::algebra::Ket, ket: &crate::algebra::Ket, r: usize, a: &mut DMatrix<C64>| {
        for i in 0..4 {
            for k in 0..4 {
                a[(r, i + 4 * k)] = bra[i].conj() * ket[k] * cr(smax);
            }
        }
    };
    for ket in &others {
        constraint(psi1, ket, r, &mut a);
        r += 1;
    }
    for ket in others.iter().skip(1) {
        constraint(ket, psi1, r, &mut a);
        r += 1;
    }
    let svd = a.svd(true, true);
    let x = svd.solve(&b, 1e-14).map_err(|_| DynamicsError::SteadyStateResidual { residual: f64::INFINITY })?;
    let m = Operator::from_fn(|i, j| x[i + 4 * j]);
    let herm = (m + m.adjoint()) * cr(0.5);
    let tr = herm.trace();
    let rho = herm / tr;
    let residual = l.apply(&rho).norm();
    if residual > 1e-10 * smax {
        return Err(DynamicsError::SteadyStateResidual { residual });
    }
    Ok(SteadyState { rho: DensityMatrix::new(rho, l.picture), null_space_dim, residual })
}

/// Populations (rho22, rho33, rho44) from detailed balance of the two
/// channels with thermal occupations N32 and N24.
pub fn adiabatic_steady_populations(n32: f64, n24: f64) -> Result<[f64; 3], DynamicsError> {
    for (name, v) in [("N32", n32), ("N24", n24)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(DynamicsError::Domain { name, value: v, reason: "occupation must be finite and >= 0" });
        }
    }
    let d = 3.0 * n24 * n32 + n24 + 2.0 * n32 + 1.0;
    Ok([n32 * (n24 + 1.0) / d, (n24 + 1.0) * (n32 + 1.0) / d, n24 * n32 / d])
}

/// Same numerators with the N24 and N32 coefficients of the denominator
/// exchanged. This variant does not sum to one and is kept only to check
/// against.
pub fn transposed_denominator_populations(n32: f64, n24: f64) -> [f64; 3] {
    let d = 3.0 * n24 * n32 + 2.0 * n24 + n32 + 1.0;
    [n32 * (n24 + 1.0) / d, (n24 + 1.0) * (n32 + 1.0) / d, n24 * n32 / d]
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct DarkStateReport {
    pub is_dark: bool,
    pub lambda: (f64, f64),
    pub jump_eigenvalues: Vec<(f64, f64)>,
    /// |(M - lambda) phi| for M = -iH + sum r F^dag F
    pub drift_residual: f64,
    /// max over jumps of |(F - lambda_k) phi|
    pub jump_residual: f64,
    /// |sum r |lambda_k|^2 - Re lambda|
    pub balance_defect: f64,
}

/// Checks both dark-state conditions for `phi` against the generator.
pub fn dark_state_check(phi: &PureState, terms: &GeneratorTerms) -> DarkStateReport {
    const TOL: f64 = 1e-10;
    let v = phi.amplitudes();
    let i = C64::new(0.0, 1.0);
    let mut m = terms.hamiltonian * (-i);
    for j in &terms.jumps {
        m += j.op.adjoint() * j.op * cr(j.rate);
    }
    let mv = m * v;
    let lambda = v.dotc(&mv);
    let drift_residual = (mv - v * lambda).norm();
    let mut jump_residual: f64 = 0.0;
    let mut balance = 0.0;
    let mut jump_eigenvalues = Vec::new();
    for j in &terms.jumps {
        let w = j.op * v;
        let lk = v.dotc(&w);
        jump_residual = jump_residual.max((w - v * lk).norm());
        balance += j.rate * lk.norm_sqr();
        jump_eigenvalues.push((lk.re, lk.im));
    }
    let balance_defect = (balance - lambda.re).abs();
    DarkStateReport {
        is_dark: drift_residual <= TOL && jump_residual <= TOL && balance_defect <= TOL,
        lambda: (lambda.re, lambda.im),
        jump_eigenvalues,
        drift_residual,
        jump_residual,
        balance_defect,
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct DfsReport {
    /// max_t (1 - fidelity to psi1(t)) starting in psi1(0).
    pub psi1_fidelity_defect: f64,
    /// max_t |p1(t) - p1(0)| from a state with psi1 coherences.
    pub psi1_population_drift: f64,
    /// Leakage out of span{psi1, psi3} for J = 0, f < 0 at zero temperature.
    pub j0_leakage: f64,
    /// max_t |rho(t) - rho(0)| for (|00> - |11>)/sqrt(2) with f = 0.
    pub f0_stationarity_defect: f64,
    pub tolerance: f64,
}

impl DfsReport {
    pub fn passed(&self) -> bool {
        [self.psi1_fidelity_defect, self.psi1_population_drift, self.j0_leakage, self.f0_stationarity_defect]
            .iter()
            .all(|v| *v <= self.tolerance)
    }
}

/// Decoherence-free-subspace checks: the psi1 sector on `protocol`, plus
/// the two constant-field cases over the same duration.
pub fn dfs_check(protocol: &dyn Protocol, bath: &BathParams, points: usize) -> Result<DfsReport, DynamicsError> {
    let duration = protocol.duration();
    let opts = EvolutionOptions { target: Some(Target::Eigenstate(1)), ..EvolutionOptions::new(duration, points) };
    let e0 = eigensystem(&protocol.g(0.0))?;

    let psi1 = DensityMatrix::pure(&e0.states[0], Picture::Schroedinger);
    let tr = evolve(&psi1, protocol, bath, &opts)?;
    let psi1_fidelity_defect = tr.fidelity.unwrap_or_default().iter().map(|f| 1.0 - f).fold(0.0, f64::max);

    let mixed = PureState::normalized(e0.states[0].amplitudes() + PureState::ket00().amplitudes())?;
    let tr = evolve(&DensityMatrix::pure(&mixed, Picture::Schroedinger), protocol, bath, &opts)?;
    let p0 = tr.fidelity.as_ref().map(|f| f[0]).unwrap_or(0.0);
    let psi1_population_drift = tr.fidelity.unwrap_or_default().iter().map(|f| (f - p0).abs()).fold(0.0, f64::max);

    let cold = BathParams { temperature: 0.0, ..*bath };
    let j0 = ConstantProtocol::new(-1.0, 0.0, duration)?;
    let e = eigensystem(&j0.g(0.0))?;
    let tr = evolve(
        &DensityMatrix::pure(&PureState::ket00(), Picture::Schroedinger),
        &j0,
        &cold,
        &EvolutionOptions::new(duration, points),
    )?;
    let j0_leakage = tr
        .states
        .iter()
        .map(|r| (1.0 - r.population(&e.states[0]) - r.population(&e.states[2])).abs())
        .fold(0.0, f64::max);

    let f0 = ConstantProtocol::new(0.0, 1.0 / std::f64::consts::PI, duration)?;
    let start = DensityMatrix::pure(&PureState::bell_minus(), Picture::Schroedinger);
    let tr = evolve(&start, &f0, bath, &EvolutionOptions::new(duration, points))?;
    let f0_stationarity_defect = tr.states.iter().map(|r| (r.matrix() - start.matrix()).norm()).fold(0.0, f64::max);

    Ok(DfsReport { psi1_fidelity_defect, psi1_population_drift, j0_leakage, f0_stationarity_defect, tolerance: 1e-8 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::hermitian_eigenvalues;
    use crate::bath::{Channel, Frequencies};
    use crate::controls::{AnsatzProtocol, ProtocolParams};
    use crate::invariant::Drive;

    fn canonical() -> AnsatzProtocol {
        AnsatzProtocol::new(ProtocolParams::default()).unwrap()
    }

    fn synthetic_rates(g32: f64, g24: f64, n32: f64, n24: f64) -> Rates {
        let ch = |p: Pair, gamma: f64, n: f64| Channel {
            nominal: p,
            active: p,
            alpha: 1.0,
            xi_sq: 1.0,
            gamma,
            n_thermal: n,
            lamb_shift: 0.0,
        };
        Rates {
            t: 0.0,
            temperature: if n32 + n24 > 0.0 { 1.0 } else { 0.0 },
            include_lamb_shift: false,
            frequencies: Frequencies { alpha23: -1.0, alpha24: 1.0, xi23_sq: 1.0, xi24_sq: 1.0 },
            channels: [ch(Pair::P32, g32, n32), ch(Pair::P24, g24, n24)],
        }
    }

    #[test]
    fn jump_operator_actions() {
        let e = eigensystem(&canonical().g(0.0)).unwrap();
        let ops = lindblad_ops(&e, &e, &PhaseAccumulator::default());
        let f32 = ops.interaction[0];
        assert!((f32 * e.states[2].amplitudes()).norm() < 1e-15);
        assert!((ops.interaction[1] * e.states[2].amplitudes()).norm() < 1e-15);
        assert!((f32 * e.states[1].amplitudes() - e.states[2].amplitudes()).norm() < 1e-15);
    }

    #[test]
    fn schroedinger_jumps_keep_norm() {
        let p = canonical();
        let grid = linspace(0.0, p.duration(), 5);
        let traj = crate::invariant::integrate_with_phases(&p.g(0.0), &p, &grid, Tolerances::default()).unwrap();
        let e0 = eigensystem(&traj[0].g).unwrap();
        for s in &traj {
            let ops = lindblad_ops(&e0, &eigensystem(&s.g).unwrap(), &s.phases);
            for k in 0..2 {
                assert!((ops.schroedinger[k].norm() - ops.interaction[k].norm()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn closed_generator_is_commutator() {
        let g =
            instantaneous_generator(&canonical(), &BathParams::default(), 0.3, Picture::Schroedinger, true).unwrap();
        assert!(g.jumps.is_empty());
        let h = system_hamiltonian(canonical().fields(0.3));
        assert!((g.hamiltonian - h).norm() < 1e-15);
    }

    #[test]
    fn liouvillian_structure() {
        for (pic, temp) in [(Picture::Schroedinger, 0.0), (Picture::Interaction, 1.0)] {
            let bath = BathParams { temperature: temp, ..BathParams::default() };
            let terms = instantaneous_generator(&canonical(), &bath, 0.5, pic, false).unwrap();
            assert_eq!(terms.jumps.len(), if temp == 0.0 { 2 } else { 4 });
            let l = terms.liouvillian();
            assert!(l.trace_preservation_defect() < 1e-12);
            assert!(l.hermiticity_preservation_defect() < 1e-12);
            let x = Operator::from_fn(|i, j| C64::new((i + 2 * j) as f64 * 0.1, (i as f64 - j as f64) * 0.3));
            assert!((l.apply(&x) - terms.apply(&x)).norm() < 1e-11);
            assert!(l.apply(&x).trace().norm() < 1e-11);
        }
    }

    #[test]
    fn negative_rate_rejected() {
        let r = synthetic_rates(-1.0, 1.0, 0.0, 0.0);
        let e = eigensystem(&canonical().g(0.0)).unwrap();
        let err = build_generator(0.0, &r, &e.states, &Operator::zeros(), Picture::Interaction, false);
        assert!(matches!(err, Err(DynamicsError::InconsistentRate { .. })));
    }

    #[test]
    fn picture_transform_examples() {
        let rho = DensityMatrix::pure(&PureState::ket00(), Picture::Interaction);
        let same = picture_transform(&rho, &Operator::identity()).unwrap();
        assert_eq!(same.matrix(), rho.matrix());
        assert_eq!(same.picture(), Picture::Schroedinger);
        let e = eigensystem(&canonical().g(0.4)).unwrap();
        let u = propagator(
            &e,
            &eigensystem(&canonical().g(0.0)).unwrap(),
            &PhaseAccumulator { t: 0.4, alphas: [0.3, -1.0, 2.0, 0.1] },
        );
        let mixed = DensityMatrix::new(
            Operator::from_diagonal(&nalgebra::Vector4::new(cr(0.1), cr(0.2), cr(0.3), cr(0.4))),
            Picture::Interaction,
        );
        let out = picture_transform(&mixed, &u).unwrap();
        let (a, b) = (hermitian_eigenvalues(mixed.matrix()), hermitian_eigenvalues(out.matrix()));
        for k in 0..4 {
            assert!((a[k] - b[k]).abs() < 1e-14);
        }
        assert!(matches!(
            picture_transform(&rho, &(Operator::identity() * cr(2.0))),
            Err(DynamicsError::NonUnitary { .. })
        ));
    }

    #[test]
    fn steady_state_zero_temperature_is_psi3() {
        let p = ConstantProtocol::new(0.6, 0.4, 1.0).unwrap();
        let terms = instantaneous_generator(&p, &BathParams::default(), 0.0, Picture::Interaction, false).unwrap();
        let ss = steady_state(&terms.liouvillian()).unwrap();
        let psi3 = terms.frame[2].projector();
        assert!((ss.rho.matrix() - psi3).norm() < 1e-8);
        assert!((ss.rho.trace() - cr(1.0)).norm() < 1e-12);
        assert!(ss.null_space_dim >= 2);
    }

    #[test]
    fn steady_state_matches_detailed_balance() {
        let e = eigensystem(&canonical().g(0.2)).unwrap();
        for (n32, n24) in [(1.0, 0.0), (0.1, 10.0), (10.0, 1.0)] {
            let r = synthetic_rates(0.7, 0.05, n32, n24);
            let terms = build_generator(0.0, &r, &e.states, &Operator::zeros(), Picture::Interaction, false).unwrap();
            let ss = steady_state(&terms.liouvillian()).unwrap();
            let want = adiabatic_steady_populations(n32, n24).unwrap();
            for (k, w) in want.iter().enumerate() {
                assert!((ss.rho.population(&e.states[k + 1]) - w).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn detailed_balance_examples() {
        assert_eq!(adiabatic_steady_populations(0.0, 0.0).unwrap(), [0.0, 1.0, 0.0]);
        let p = adiabatic_steady_populations(1.0, 0.0).unwrap();
        assert!((p[0] - 1.0 / 3.0).abs() < 1e-15 && (p[1] - 2.0 / 3.0).abs() < 1e-15 && p[2] == 0.0);
        let big = adiabatic_steady_populations(1e9, 1e9).unwrap();
        assert!(big.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-8));
        let transposed: f64 = transposed_denominator_populations(1.0, 0.0).iter().sum();
        assert!((transposed - 1.5).abs() < 1e-15);
        assert!(adiabatic_steady_populations(-1.0, 0.0).is_err());
    }

    #[test]
    fn dark_state_examples() {
        let bath = BathParams { include_lamb_shift: true, ..BathParams::default() };
        let terms = instantaneous_generator(&canonical(), &bath, 0.0, Picture::Interaction, false).unwrap();
        let psi = terms.frame;
        let rep = dark_state_check(&psi[2], &terms);
        assert!(rep.is_dark, "{rep:?}");
        assert!(rep.lambda.0.abs() < 1e-12 && rep.lambda.1.abs() < 1e-12);
        assert!(!dark_state_check(&psi[1], &terms).is_dark);
        assert!(!dark_state_check(&psi[3], &terms).is_dark);
        let r = rates(&ProtocolSnapshot::new(0.0, canonical().g(0.0), canonical().fields(0.0)), &bath).unwrap();
        let hls = lamb_shift_hamiltonian(&r, &psi).unwrap();
        assert!((hls * psi[2].amplitudes()).norm() < 1e-13);
        assert!((hls * psi[0].amplitudes()).norm() < 1e-13);
        assert!((hls - hls.adjoint()).norm() < 1e-12);
        assert!(hls.norm() > 0.0);
    }

    #[test]
    fn closed_evolution_from_psi3_reaches_bell_state() {
        let p = canonical();
        let psi3 = eigensystem(&p.g(0.0)).unwrap().states[2];
        let opts = EvolutionOptions {
            closed_system: true,
            target: Some(Target::Fixed(PureState::bell_minus())),
            ..EvolutionOptions::new(p.duration(), 21)
        };
        let tr = evolve(&DensityMatrix::pure(&psi3, Picture::Schroedinger), &p, &BathParams::default(), &opts).unwrap();
        assert!((tr.final_fidelity().unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn tolerance_failure_on_invalid_start() {
        let p = canonical();
        let bad = DensityMatrix::new(Operator::identity(), Picture::Schroedinger);
        let err = evolve(&bad, &p, &BathParams::default(), &EvolutionOptions::new(p.duration(), 3));
        assert!(matches!(err, Err(DynamicsError::ToleranceFailure { .. })));
    }
}
