//! C ABI for the dressed-qubit simulator.
//!
//! Conventions:
//! - Every fallible function returns a [`DqStatus`]; results are written
//!   through out-pointers only on success.
//! - Objects are opaque handles created by `*_new`/run functions and
//!   released with the matching `*_free` (which accepts `NULL`).
//! - After a failure, [`dq_last_error`] returns a description that stays
//!   valid until the next call on the same thread.
//! - Panics never cross the boundary; they are reported as
//!   [`DqStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use dressed_qubit::analytics::T2Estimate;
use dressed_qubit::hamiltonians::{SystemParams, Tier};
use dressed_qubit::noise::{DriveNoiseParams, DriveNoiseReading, OUParams};
use dressed_qubit::propagator::presets::{preset_nv_full, preset_tls_dephasing, tls_analytic_t2, NvFullOptions, TlsOptions};
use dressed_qubit::propagator::EnsembleResult;
use dressed_qubit::stark::{
    find_robust_point, numeric_gaps, second_order_shifts, FloquetConfig, FloquetModel, GapModel, RobustSearchConfig,
    SecondOrderModel, StarkShifts,
};
use dressed_qubit::Error;

/// Result codes of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    Resonance = 3,
    AmbiguousSpectrum = 4,
    NoRobustPoint = 5,
    Numerical = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Model tier.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DqTier {
    Lab = 0,
    InteractionPicture = 1,
    Dressed = 2,
}

/// Scalar fields of a system handle (frequencies in rad/μs).
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DqParam {
    Omega0 = 0,
    OmegaB = 1,
    Rabi = 2,
    Delta1 = 3,
    Delta2 = 4,
}

/// How a coherence time was obtained.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DqT2Kind {
    /// No estimate available.
    None = 0,
    /// Threshold crossing.
    Crossing = 1,
    /// No crossing within the horizon; the value is a lower bound.
    LowerBound = 2,
}

/// Dressed-level shifts and gaps (rad/μs).
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DqStarkShifts {
    pub de_b: f64,
    pub de_d: f64,
    pub de_0: f64,
    pub e_bd: f64,
    pub e_0b: f64,
}

/// Opaque system configuration.
pub struct DqSystem {
    params: SystemParams,
}

/// Opaque simulated curve.
pub struct DqCurve {
    result: EnsembleResult,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> DqStatus {
    match e {
        Error::InvalidParameter { .. } | Error::StepSize(_) | Error::NotNormalized { .. } => DqStatus::InvalidParameter,
        Error::Resonance { .. } => DqStatus::Resonance,
        Error::AmbiguousSpectrum(_) => DqStatus::AmbiguousSpectrum,
        Error::NoRobustPoint(_) => DqStatus::NoRobustPoint,
        Error::NotHermitian { .. } | Error::Numerical(_) => DqStatus::Numerical,
    }
}

/// Runs `f`, converting library errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (DqStatus, String)>) -> DqStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            DqStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            DqStatus::Panic
        }
    }
}

fn lib<T>(r: dressed_qubit::Result<T>) -> Result<T, (DqStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), (DqStatus, String)> {
    if p.is_null() {
        Err((DqStatus::NullPointer, format!("`{name}` is NULL")))
    } else {
        Ok(())
    }
}

fn t2_parts(t2: Option<T2Estimate>) -> (f64, DqT2Kind) {
    match t2 {
        Some(T2Estimate::Crossing(v)) => (v, DqT2Kind::Crossing),
        Some(T2Estimate::LowerBound(v)) => (v, DqT2Kind::LowerBound),
        None => (f64::NAN, DqT2Kind::None),
    }
}

fn shifts(s: &StarkShifts) -> DqStarkShifts {
    DqStarkShifts {
        de_b: s.de_b,
        de_d: s.de_d,
        de_0: s.de_0,
        e_bd: s.e_bd,
        e_0b: s.e_0b,
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dq_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version contains NUL"),
    };
    VERSION.as_ptr()
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn dq_status_string(status: DqStatus) -> *const c_char {
    let s: &'static CStr = match status {
        DqStatus::Ok => c"ok",
        DqStatus::NullPointer => c"null pointer argument",
        DqStatus::InvalidParameter => c"invalid parameter",
        DqStatus::Resonance => c"resonant denominator",
        DqStatus::AmbiguousSpectrum => c"ambiguous spectrum",
        DqStatus::NoRobustPoint => c"no robust point",
        DqStatus::Numerical => c"numerical failure",
        DqStatus::BufferTooSmall => c"buffer too small",
        DqStatus::Panic => c"internal panic",
    };
    s.as_ptr()
}

/// Message of the last failed call on this thread (empty after success).
#[no_mangle]
pub extern "C" fn dq_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// New system handle at the reference operating point (dressed tier).
#[no_mangle]
pub extern "C" fn dq_system_new() -> *mut DqSystem {
    Box::into_raw(Box::new(DqSystem {
        params: SystemParams::nv_default(),
    }))
}

/// Releases a system handle.
///
/// # Safety
/// `sys` must be `NULL` or a handle from [`dq_system_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dq_system_free(sys: *mut DqSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// Sets a scalar field. Validation happens when the system is used.
///
/// # Safety
/// `sys` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dq_system_set(sys: *mut DqSystem, param: DqParam, value: f64) -> DqStatus {
    guard(|| {
        non_null(sys, "sys")?;
        let p = &mut (*sys).params;
        match param {
            DqParam::Omega0 => p.omega0 = value,
            DqParam::OmegaB => p.omega_b = value,
            DqParam::Rabi => p.rabi = value,
            DqParam::Delta1 => p.delta1 = value,
            DqParam::Delta2 => p.delta2 = value,
        }
        Ok(())
    })
}

/// Reads a scalar field.
///
/// # Safety
/// `sys` must be a live handle and `out` a writable `double`.
#[no_mangle]
pub unsafe extern "C" fn dq_system_get(sys: *const DqSystem, param: DqParam, out: *mut f64) -> DqStatus {
    guard(|| {
        non_null(sys, "sys")?;
        non_null(out, "out")?;
        let p = &(*sys).params;
        *out = match param {
            DqParam::Omega0 => p.omega0,
            DqParam::OmegaB => p.omega_b,
            DqParam::Rabi => p.rabi,
            DqParam::Delta1 => p.delta1,
            DqParam::Delta2 => p.delta2,
        };
        Ok(())
    })
}

/// Selects the model tier.
///
/// # Safety
/// `sys` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dq_system_set_tier(sys: *mut DqSystem, tier: DqTier) -> DqStatus {
    guard(|| {
        non_null(sys, "sys")?;
        (*sys).params.tier = match tier {
            DqTier::Lab => Tier::LabFrame,
            DqTier::InteractionPicture => Tier::InteractionPicture,
            DqTier::Dressed => Tier::DressedEffective,
        };
        Ok(())
    })
}

/// Second-order dressed-level shifts.
///
/// # Safety
/// `sys` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dq_stark_second_order(sys: *const DqSystem, out: *mut DqStarkShifts) -> DqStatus {
    guard(|| {
        non_null(sys, "sys")?;
        non_null(out, "out")?;
        let p = (*sys).params;
        lib(p.validate())?;
        *out = shifts(&lib(second_order_shifts(&p))?);
        Ok(())
    })
}

/// Numerically exact gaps (Floquet analysis); `de_*` hold the second-order
/// shifts.
///
/// # Safety
/// `sys` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dq_stark_numeric(sys: *const DqSystem, out: *mut DqStarkShifts) -> DqStatus {
    guard(|| {
        non_null(sys, "sys")?;
        non_null(out, "out")?;
        let p = (*sys).params;
        lib(p.validate())?;
        *out = shifts(&lib(numeric_gaps(&p, &FloquetConfig::default()))?);
        Ok(())
    })
}

/// Drive-robust blue detuning `Δ2` for the other parameters of `sys`, with
/// the numeric gap model when `numeric` is non-zero (slow) or the
/// second-order model otherwise.
///
/// # Safety
/// `sys` must be a live handle and `delta2` writable.
#[no_mangle]
pub unsafe extern "C" fn dq_robust_point(sys: *const DqSystem, numeric: i32, delta2: *mut f64) -> DqStatus {
    guard(|| {
        non_null(sys, "sys")?;
        non_null(delta2, "delta2")?;
        let p = (*sys).params;
        let model: Box<dyn GapModel> = if numeric != 0 {
            Box::new(lib(FloquetModel::new(FloquetConfig::default(), 2.0))?)
        } else {
            Box::new(SecondOrderModel)
        };
        *delta2 = lib(find_robust_point(&p, model.as_ref(), &RobustSearchConfig::default()))?.delta2;
        Ok(())
    })
}

/// Closed-form coherence time of the driven two-level system.
///
/// # Safety
/// `t2` and `kind` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dq_analytic_tls_t2(
    t2_star: f64,
    tau: f64,
    rabi: f64,
    t2: *mut f64,
    kind: *mut DqT2Kind,
) -> DqStatus {
    guard(|| {
        non_null(t2, "t2")?;
        non_null(kind, "kind")?;
        let (v, k) = t2_parts(Some(lib(tls_analytic_t2(t2_star, tau, rabi))?));
        *t2 = v;
        *kind = k;
        Ok(())
    })
}

/// Monte Carlo dephasing of the driven two-level system; on success
/// `*curve` receives a new handle.
///
/// # Safety
/// `curve` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dq_tls_dephasing(
    t2_star: f64,
    tau: f64,
    rabi: f64,
    n_trajectories: usize,
    seed: u64,
    curve: *mut *mut DqCurve,
) -> DqStatus {
    guard(|| {
        non_null(curve, "curve")?;
        let result = lib(preset_tls_dephasing(
            t2_star,
            tau,
            rabi,
            n_trajectories,
            seed,
            &TlsOptions::default(),
        ))?;
        *curve = Box::into_raw(Box::new(DqCurve { result }));
        Ok(())
    })
}

/// Full dressed-qubit simulation at the tier of `sys` under magnetic noise
/// `(t2_star, tau)` and relative drive-amplitude noise
/// `(delta_omega, tau_omega)`, with `delta_omega` read as the stationary
/// standard deviation; on success `*curve` receives a new handle.
///
/// # Safety
/// `sys` must be a live handle and `curve` writable.
#[no_mangle]
pub unsafe extern "C" fn dq_nv_full(
    sys: *const DqSystem,
    t2_star: f64,
    tau: f64,
    delta_omega: f64,
    tau_omega: f64,
    n_trajectories: usize,
    seed: u64,
    t_final: f64,
    curve: *mut *mut DqCurve,
) -> DqStatus {
    guard(|| {
        non_null(sys, "sys")?;
        non_null(curve, "curve")?;
        let noise = lib(OUParams::from_t2_star(t2_star, tau))?;
        let drive = lib(DriveNoiseParams::new(delta_omega, tau_omega, DriveNoiseReading::StdDev))?;
        let opts = NvFullOptions {
            n_trajectories,
            base_seed: seed,
            t_final,
            ..NvFullOptions::default()
        };
        let run = lib(preset_nv_full(&(*sys).params, &noise, &drive, &opts))?;
        *curve = Box::into_raw(Box::new(DqCurve { result: run.ensemble }));
        Ok(())
    })
}

/// Number of samples in a curve (0 for `NULL`).
///
/// # Safety
/// `curve` must be `NULL` or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dq_curve_len(curve: *const DqCurve) -> usize {
    if curve.is_null() {
        0
    } else {
        (*curve).result.time_grid.len()
    }
}

/// Copies times, mean probabilities and standard errors into caller
/// buffers of `capacity` elements; any buffer may be `NULL` to skip it.
///
/// # Safety
/// `curve` must be a live handle; non-null buffers must hold `capacity`
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn dq_curve_copy(
    curve: *const DqCurve,
    t_us: *mut f64,
    p_mean: *mut f64,
    p_sem: *mut f64,
    capacity: usize,
) -> DqStatus {
    guard(|| {
        non_null(curve, "curve")?;
        let r = &(*curve).result;
        let n = r.time_grid.len();
        if capacity < n {
            return Err((DqStatus::BufferTooSmall, format!("need {n} elements, got {capacity}")));
        }
        for (src, dst) in [(&r.time_grid, t_us), (&r.p_mean, p_mean), (&r.p_sem, p_sem)] {
            if !dst.is_null() {
                ptr::copy_nonoverlapping(src.as_ptr(), dst, n);
            }
        }
        Ok(())
    })
}

/// Coherence time extracted from a curve.
///
/// # Safety
/// `curve` must be a live handle; `t2` and `kind` writable.
#[no_mangle]
pub unsafe extern "C" fn dq_curve_t2(curve: *const DqCurve, t2: *mut f64, kind: *mut DqT2Kind) -> DqStatus {
    guard(|| {
        non_null(curve, "curve")?;
        non_null(t2, "t2")?;
        non_null(kind, "kind")?;
        let (v, k) = t2_parts((*curve).result.t2_extracted);
        *t2 = v;
        *kind = k;
        Ok(())
    })
}

/// Releases a curve handle.
///
/// # Safety
/// `curve` must be `NULL` or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dq_curve_free(curve: *mut DqCurve) {
    if !curve.is_null() {
        drop(Box::from_raw(curve));
    }
}
