//! C interface to `rldp-core`.
//!
//! Distributions and mechanisms are opaque handles owned by the caller and
//! released with the matching `*_free` function. Every fallible function
//! returns an [`RldpStatus`]; on failure [`rldp_last_error`] describes the
//! most recent error on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use rldp_core::evaluation::{distortion, epsilon_star, Mechanism};
use rldp_core::problems::{solve_problem, ClarabelSolver, DistortionSpec, ProblemSpec, Variant, PRIMAL_TOL};
use rldp_core::simplex::{Alphabet, JointDistribution};
use rldp_core::uncertainty::{radius_b, UncertaintySet};
use rldp_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RldpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    SolverFailure = 3,
    Panic = 4,
}

/// Problem variants accepted by [`rldp_solve`]: nominal or robust utility,
/// nominal or robust privacy.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RldpVariant {
    Nunp = 0,
    Nurp = 1,
    Runp = 2,
    Rurp = 3,
}

/// Joint distribution of the sensitive and useful data.
pub struct RldpDistribution(JointDistribution);

/// Release mechanism `P(y | s, u)`.
pub struct RldpMechanism(Mechanism);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(RldpStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::SolverFailure(_)
            | Error::InfeasibleReported
            | Error::ConvergenceFailure { .. }
            | Error::ExcessiveRepair { .. } => RldpStatus::SolverFailure,
            _ => RldpStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn set_last_error(msg: &str) {
    let text = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> RldpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RldpStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("panic inside rldp");
            RldpStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(RldpStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(RldpStatus::InvalidArgument, msg.into())
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

/// Message of the last failed call on this thread. The pointer stays valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rldp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Distribution over `s_size x u_size` cells from `len` nonnegative weights
/// in row-major `(s, u)` order, normalized to sum to one.
///
/// # Safety
/// `weights` must point to `len` readable doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rldp_distribution_new(
    s_size: usize,
    u_size: usize,
    weights: *const f64,
    len: usize,
    out: *mut *mut RldpDistribution,
) -> RldpStatus {
    guard(|| {
        if weights.is_null() {
            return Err(null("weights"));
        }
        let alphabet = Alphabet::new(s_size, u_size)?;
        if len != alphabet.cells() {
            return Err(invalid(format!("expected {} weights, got {len}", alphabet.cells())));
        }
        let w = std::slice::from_raw_parts(weights, len).to_vec();
        let p = JointDistribution::from_weights(alphabet, w)?;
        write(out, Box::into_raw(Box::new(RldpDistribution(p))), "out")
    })
}

/// Distribution from its JSON form.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rldp_distribution_from_json(json: *const c_char, out: *mut *mut RldpDistribution) -> RldpStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json).to_str().map_err(|e| invalid(e.to_string()))?;
        let p: JointDistribution = serde_json::from_str(text).map_err(Error::from)?;
        write(out, Box::into_raw(Box::new(RldpDistribution(p))), "out")
    })
}

/// # Safety
/// `dist` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rldp_distribution_free(dist: *mut RldpDistribution) {
    if !dist.is_null() {
        drop(Box::from_raw(dist));
    }
}

/// Radius of the confidence set for `n` samples at level `1 - alpha`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rldp_radius(n: u64, alpha: f64, s_size: usize, u_size: usize, out: *mut f64) -> RldpStatus {
    guard(|| {
        let b = radius_b(n, alpha, &Alphabet::new(s_size, u_size)?)?;
        write(out, b, "out")
    })
}

/// Optimal mechanism of `variant` (an [`RldpVariant`] value) for the
/// empirical distribution `phat`, squared distortion, privacy level
/// `epsilon` and confidence-set radius `radius`.
///
/// # Safety
/// `phat` must be a live distribution handle and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rldp_solve(
    phat: *const RldpDistribution,
    variant: u32,
    epsilon: f64,
    radius: f64,
    out: *mut *mut RldpMechanism,
) -> RldpStatus {
    guard(|| {
        let phat = deref(phat, "phat")?;
        let variant = *Variant::ALL.get(variant as usize).ok_or_else(|| invalid(format!("unknown variant {variant}")))?;
        let set = UncertaintySet::with_radius(phat.0.clone(), radius)?;
        let spec = ProblemSpec::new(variant, set, epsilon, DistortionSpec::Squared)?;
        let solved = solve_problem(&spec, &ClarabelSolver::default(), PRIMAL_TOL)?;
        write(out, Box::into_raw(Box::new(RldpMechanism(solved.mechanism))), "out")
    })
}

/// `P(y | s, u)`.
///
/// # Safety
/// `mech` must be a live mechanism handle and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rldp_mechanism_get(
    mech: *const RldpMechanism,
    s: usize,
    u: usize,
    y: usize,
    out: *mut f64,
) -> RldpStatus {
    guard(|| {
        let m = &deref(mech, "mech")?.0;
        let a = m.alphabet();
        if s >= a.s_size() || u >= a.u_size() || y >= a.y_size() {
            return Err(invalid(format!("index ({s}, {u}, {y}) out of range")));
        }
        write(out, m.get(s, u, y), "out")
    })
}

/// Alphabet sizes of a mechanism.
///
/// # Safety
/// `mech` must be a live mechanism handle and the outputs writable.
#[no_mangle]
pub unsafe extern "C" fn rldp_mechanism_dims(
    mech: *const RldpMechanism,
    s_size: *mut usize,
    u_size: *mut usize,
    y_size: *mut usize,
) -> RldpStatus {
    guard(|| {
        let a = deref(mech, "mech")?.0.alphabet().clone();
        if s_size.is_null() || u_size.is_null() || y_size.is_null() {
            return Err(null("output"));
        }
        write(s_size, a.s_size(), "s_size")?;
        write(u_size, a.u_size(), "u_size")?;
        write(y_size, a.y_size(), "y_size")
    })
}

/// JSON form of a mechanism; release it with [`rldp_string_free`].
///
/// # Safety
/// `mech` must be a live mechanism handle and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rldp_mechanism_to_json(mech: *const RldpMechanism, out: *mut *mut c_char) -> RldpStatus {
    guard(|| {
        let m = deref(mech, "mech")?;
        let text = serde_json::to_string(&m.0).map_err(Error::from)?;
        let c = CString::new(text).map_err(|e| invalid(e.to_string()))?;
        write(out, c.into_raw(), "out")
    })
}

/// # Safety
/// `mech` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rldp_mechanism_free(mech: *mut RldpMechanism) {
    if !mech.is_null() {
        drop(Box::from_raw(mech));
    }
}

/// Realized privacy leakage of `mech` under `dist`; may be `+inf`.
///
/// # Safety
/// Both handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rldp_epsilon_star(
    dist: *const RldpDistribution,
    mech: *const RldpMechanism,
    out: *mut f64,
) -> RldpStatus {
    guard(|| {
        let e = epsilon_star(&deref(dist, "dist")?.0, &deref(mech, "mech")?.0)?;
        write(out, e, "out")
    })
}

/// Expected squared distortion of `mech` under `dist`.
///
/// # Safety
/// Both handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rldp_distortion(
    dist: *const RldpDistribution,
    mech: *const RldpMechanism,
    out: *mut f64,
) -> RldpStatus {
    guard(|| {
        let p = &deref(dist, "dist")?.0;
        let d = DistortionSpec::Squared.matrix(p.alphabet())?;
        write(out, distortion(p, &deref(mech, "mech")?.0, &d)?, "out")
    })
}

/// # Safety
/// `s` must be null or a string returned by this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rldp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
