//! C ABI over `dmme-core`.
//!
//! Every function returns a [`DmmeStatus`]; on failure the message is
//! available from [`dmme_last_error`] on the same thread. Handles are
//! opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use dmme_core::algebra::{c, DensityMatrix, Picture, PureState};
use dmme_core::bath::{exp_integral_ei, BathError, BathParams};
use dmme_core::config::ExperimentConfig;
use dmme_core::controls::{AnsatzProtocol, ControlError, Orientation, Protocol, ProtocolParams, Variant};
use dmme_core::dynamics::{adiabatic_steady_populations, evolve, DynamicsError, EvolutionOptions, Target, Trajectory};
use dmme_core::experiments::{scan_alpha_sign, ExperimentError};
use dmme_core::invariant::Drive;
use nalgebra::Vector4;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DmmeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// The requested controls do not exist (negative g6^2 somewhere).
    Inadmissible = 3,
    /// A valid request outside the supported model, e.g. Lamb shift at T > 0.
    Unsupported = 4,
    Numerical = 5,
    BufferTooSmall = 6,
    NoSignChange = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DmmeVariant {
    Cos2 = 0,
    Sin3 = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DmmeOrientation {
    Forward = 0,
    Reversed = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DmmeProtocolParams {
    pub gamma: f64,
    pub delta: f64,
    pub g2m: f64,
    pub omega_e: f64,
    pub g3: f64,
    pub variant: DmmeVariant,
    pub orientation: DmmeOrientation,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DmmeBathParams {
    pub temperature: f64,
    pub s32: f64,
    pub s24: f64,
    pub kappa: f64,
    pub include_lamb_shift: bool,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DmmeEvolveOptions {
    /// Output points on [0, T], at least 2.
    pub points: usize,
    pub closed_system: bool,
    /// Fidelity target: 1..=4 selects the instantaneous eigenstate, 0 disables.
    pub target_level: u32,
}

/// Opaque protocol handle.
pub struct DmmeProtocol(AnsatzProtocol);

/// Opaque trajectory handle (Schroedinger picture).
pub struct DmmeTrajectory(Trajectory);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(DmmeStatus, String);

impl From<ControlError> for Failure {
    fn from(e: ControlError) -> Self {
        let s = match e {
            ControlError::Inadmissible { .. } => DmmeStatus::Inadmissible,
            _ => DmmeStatus::InvalidArgument,
        };
        Failure(s, e.to_string())
    }
}

impl From<BathError> for Failure {
    fn from(e: BathError) -> Self {
        let s = match e {
            BathError::Domain { .. } => DmmeStatus::InvalidArgument,
            BathError::UnsupportedTemperature(_) | BathError::UnsupportedSector { .. } => DmmeStatus::Unsupported,
            _ => DmmeStatus::Numerical,
        };
        Failure(s, e.to_string())
    }
}

impl From<DynamicsError> for Failure {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::Control(c) => c.into(),
            DynamicsError::Bath(b) => b.into(),
            DynamicsError::Domain { .. } => Failure(DmmeStatus::InvalidArgument, e.to_string()),
            _ => Failure(DmmeStatus::Numerical, e.to_string()),
        }
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Control(c) => c.into(),
            ExperimentError::Bath(b) => b.into(),
            ExperimentError::Dynamics(d) => d.into(),
            ExperimentError::NoSignChange { .. } => Failure(DmmeStatus::NoSignChange, e.to_string()),
            ExperimentError::Config(_) => Failure(DmmeStatus::InvalidArgument, e.to_string()),
            _ => Failure(DmmeStatus::Numerical, e.to_string()),
        }
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(DmmeStatus::InvalidArgument, msg.into())
}

fn null(name: &str) -> Failure {
    Failure(DmmeStatus::NullPointer, format!("{name} is null"))
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DmmeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DmmeStatus::Ok,
        Ok(Err(Failure(s, msg))) => {
            set_error(&msg);
            s
        }
        Err(_) => {
            set_error("internal panic");
            DmmeStatus::Panic
        }
    }
}

unsafe fn read<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn write<T>(p: *mut T, name: &str, value: T) -> Result<(), Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    p.write(value);
    Ok(())
}

impl From<DmmeProtocolParams> for ProtocolParams {
    fn from(p: DmmeProtocolParams) -> Self {
        ProtocolParams {
            gamma: p.gamma,
            delta: p.delta,
            g2m: p.g2m,
            omega_e: p.omega_e,
            g3: p.g3,
            variant: match p.variant {
                DmmeVariant::Cos2 => Variant::Cos2,
                DmmeVariant::Sin3 => Variant::Sin3,
            },
            orientation: match p.orientation {
                DmmeOrientation::Forward => Orientation::Forward,
                DmmeOrientation::Reversed => Orientation::Reversed,
            },
        }
    }
}

impl From<DmmeBathParams> for BathParams {
    fn from(b: DmmeBathParams) -> Self {
        BathParams {
            temperature: b.temperature,
            s32: b.s32,
            s24: b.s24,
            cutoff_multiplier: b.kappa,
            include_lamb_shift: b.include_lamb_shift,
        }
    }
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dmme_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `out` must be null or point to writable memory for one struct.
#[no_mangle]
pub unsafe extern "C" fn dmme_protocol_params_default(out: *mut DmmeProtocolParams) -> DmmeStatus {
    guard(|| {
        let p = ProtocolParams::default();
        let v = DmmeProtocolParams {
            gamma: p.gamma,
            delta: p.delta,
            g2m: p.g2m,
            omega_e: p.omega_e,
            g3: p.g3,
            variant: match p.variant {
                Variant::Cos2 => DmmeVariant::Cos2,
                Variant::Sin3 => DmmeVariant::Sin3,
            },
            orientation: match p.orientation {
                Orientation::Forward => DmmeOrientation::Forward,
                Orientation::Reversed => DmmeOrientation::Reversed,
            },
        };
        write(out, "out", v)
    })
}

/// # Safety
/// `out` must be null or point to writable memory for one struct.
#[no_mangle]
pub unsafe extern "C" fn dmme_bath_params_default(out: *mut DmmeBathParams) -> DmmeStatus {
    guard(|| {
        let b = BathParams::default();
        let v = DmmeBathParams {
            temperature: b.temperature,
            s32: b.s32,
            s24: b.s24,
            kappa: b.cutoff_multiplier,
            include_lamb_shift: b.include_lamb_shift,
        };
        write(out, "out", v)
    })
}

/// Builds a protocol; `*out` receives a handle owned by the caller.
///
/// # Safety
/// `params` must be null or valid; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn dmme_protocol_new(
    params: *const DmmeProtocolParams,
    out: *mut *mut DmmeProtocol,
) -> DmmeStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let p = AnsatzProtocol::new((*read(params, "params")?).into())?;
        *out = Box::into_raw(Box::new(DmmeProtocol(p)));
        Ok(())
    })
}

/// # Safety
/// `p` must be null or a handle from `dmme_protocol_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dmme_protocol_free(p: *mut DmmeProtocol) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// # Safety
/// `p` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dmme_protocol_duration(p: *const DmmeProtocol, out: *mut f64) -> DmmeStatus {
    guard(|| write(out, "out", read(p, "protocol")?.0.duration()))
}

/// Control fields f(t) and J(t).
///
/// # Safety
/// `p` must be a live handle; `f` and `j` writable.
#[no_mangle]
pub unsafe extern "C" fn dmme_protocol_fields(p: *const DmmeProtocol, t: f64, f: *mut f64, j: *mut f64) -> DmmeStatus {
    guard(|| {
        let proto = &read(p, "protocol")?.0;
        if !(0.0..=proto.duration()).contains(&t) {
            return Err(invalid(format!("t = {t} outside [0, {}]", proto.duration())));
        }
        let fl = proto.fields(t);
        write(f, "f", fl.f)?;
        write(j, "j", fl.j)
    })
}

/// Invariant coefficients g1..g6 at `t`, written to `out[0..6]`.
///
/// # Safety
/// `p` must be a live handle; `out` must hold 6 doubles.
#[no_mangle]
pub unsafe extern "C" fn dmme_protocol_g(p: *const DmmeProtocol, t: f64, out: *mut f64) -> DmmeStatus {
    guard(|| {
        let proto = &read(p, "protocol")?.0;
        if !(0.0..=proto.duration()).contains(&t) {
            return Err(invalid(format!("t = {t} outside [0, {}]", proto.duration())));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        ptr::copy_nonoverlapping(proto.g(t).0.as_ptr(), out, 6);
        Ok(())
    })
}

/// Evolves the pure state with amplitudes `(re, im)` pairs in
/// `amplitudes[0..8]` (basis |00>, |01>, |10>, |11>; normalised here).
///
/// # Safety
/// Pointers must be valid as described; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dmme_evolve(
    p: *const DmmeProtocol,
    bath: *const DmmeBathParams,
    amplitudes: *const f64,
    options: *const DmmeEvolveOptions,
    out: *mut *mut DmmeTrajectory,
) -> DmmeStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let proto = &read(p, "protocol")?.0;
        let bath: BathParams = (*read(bath, "bath")?).into();
        let opts = *read(options, "options")?;
        if amplitudes.is_null() {
            return Err(null("amplitudes"));
        }
        let a = std::slice::from_raw_parts(amplitudes, 8);
        let psi = PureState::normalized(Vector4::new(c(a[0], a[1]), c(a[2], a[3]), c(a[4], a[5]), c(a[6], a[7])))
            .map_err(|e| invalid(e.to_string()))?;
        if opts.points < 2 {
            return Err(invalid("points must be at least 2"));
        }
        let target = match opts.target_level {
            0 => None,
            l @ 1..=4 => Some(Target::Eigenstate(l as usize)),
            l => return Err(invalid(format!("target_level must be 0..=4, got {l}"))),
        };
        let eo = EvolutionOptions {
            closed_system: opts.closed_system,
            target,
            ..EvolutionOptions::new(proto.duration(), opts.points)
        };
        let traj = evolve(&DensityMatrix::pure(&psi, Picture::Schroedinger), proto, &bath, &eo)?;
        *out = Box::into_raw(Box::new(DmmeTrajectory(traj)));
        Ok(())
    })
}

/// # Safety
/// `t` must be null or a handle from `dmme_evolve` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dmme_trajectory_free(t: *mut DmmeTrajectory) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// # Safety
/// `t` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dmme_trajectory_len(t: *const DmmeTrajectory, out: *mut usize) -> DmmeStatus {
    guard(|| write(out, "out", read(t, "trajectory")?.0.times.len()))
}

unsafe fn copy_series(src: &[f64], out: *mut f64, len: usize) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    if len < src.len() {
        return Err(Failure(DmmeStatus::BufferTooSmall, format!("buffer holds {len}, need {}", src.len())));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    Ok(())
}

/// Output times; `out` must hold `len >= dmme_trajectory_len` doubles.
///
/// # Safety
/// `t` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dmme_trajectory_times(t: *const DmmeTrajectory, out: *mut f64, len: usize) -> DmmeStatus {
    guard(|| copy_series(&read(t, "trajectory")?.0.times, out, len))
}

/// Fidelity to the requested target at each output time.
///
/// # Safety
/// `t` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dmme_trajectory_fidelity(t: *const DmmeTrajectory, out: *mut f64, len: usize) -> DmmeStatus {
    guard(|| {
        let f = read(t, "trajectory")?.0.fidelity.as_ref().ok_or_else(|| invalid("trajectory has no target"))?;
        copy_series(f, out, len)
    })
}

/// Density matrix at output index `k` as 16 row-major `(re, im)` pairs.
///
/// # Safety
/// `t` must be a live handle; `out` must hold 32 doubles.
#[no_mangle]
pub unsafe extern "C" fn dmme_trajectory_state(t: *const DmmeTrajectory, k: usize, out: *mut f64) -> DmmeStatus {
    guard(|| {
        let traj = &read(t, "trajectory")?.0;
        let rho = traj.states.get(k).ok_or_else(|| invalid(format!("index {k} out of range")))?;
        let mut buf = [0.0; 32];
        for r in 0..4 {
            for col in 0..4 {
                let z = rho.matrix()[(r, col)];
                buf[2 * (4 * r + col)] = z.re;
                buf[2 * (4 * r + col) + 1] = z.im;
            }
        }
        copy_series(&buf, out, 32)
    })
}

/// Exponential integral Ei(x) for finite nonzero x.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dmme_exp_integral_ei(x: f64, out: *mut f64) -> DmmeStatus {
    guard(|| write(out, "out", exp_integral_ei(x)?))
}

/// Steady populations of psi2, psi3, psi4 for thermal occupations n32, n24.
///
/// # Safety
/// `out` must hold 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn dmme_steady_populations(n32: f64, n24: f64, out: *mut f64) -> DmmeStatus {
    guard(|| copy_series(&adiabatic_steady_populations(n32, n24)?, out, 3))
}

/// Smallest g2m in [lo, hi] at which min_t alpha32 reaches zero, other
/// protocol parameters taken from `params`.
///
/// # Safety
/// `params` must be valid; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dmme_threshold_g2m(
    params: *const DmmeProtocolParams,
    lo: f64,
    hi: f64,
    resolution: usize,
    out: *mut f64,
) -> DmmeStatus {
    guard(|| {
        let cfg = ExperimentConfig { protocol: (*read(params, "params")?).into(), ..ExperimentConfig::default() };
        write(out, "out", scan_alpha_sign(&cfg, lo, hi, resolution)?.threshold)
    })
}
