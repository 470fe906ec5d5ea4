//! C ABI over `cone-sobolev`.
//!
//! Objects are opaque heap handles released with their `*_free` function.
//! Every fallible entry point returns a [`CsStatus`]; on failure the message is
//! available from [`cs_last_error_message`] on the same thread.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use cone_sobolev::bernstein::{construct_system, AlmostExtremalSystem};
use cone_sobolev::cone::{ConeSpec, WeightedCone};
use cone_sobolev::lorentz::LorentzParams;
use cone_sobolev::profile::{alvino_profile, RadialProfile};
use cone_sobolev::sobolev::{embedding_norm, quotient};
use cone_sobolev::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Domain = 3,
    Validation = 4,
    Numerical = 5,
    Precondition = 6,
    Infeasible = 7,
    Resource = 8,
    Internal = 9,
    Io = 10,
    Json = 11,
    Panic = 12,
}

pub struct CsCone(Arc<WeightedCone>);
pub struct CsProfile(RadialProfile);
pub struct CsSystem(AlmostExtremalSystem);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CsQuotientReport {
    pub numerator: f64,
    pub denominator: f64,
    pub quotient: f64,
    pub embedding_norm: f64,
    pub ratio: f64,
    pub within_bound: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CsLowerBound {
    pub bound: f64,
    pub empirical_min: f64,
    pub directions: usize,
    pub pass: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> CsStatus {
    match e {
        Error::Domain(_) => CsStatus::Domain,
        Error::Validation(_) => CsStatus::Validation,
        Error::Numerical(_) => CsStatus::Numerical,
        Error::Precondition(_) => CsStatus::Precondition,
        Error::Infeasible(_) => CsStatus::Infeasible,
        Error::Resource(_) => CsStatus::Resource,
        Error::Internal(_) => CsStatus::Internal,
        Error::Io(_) | Error::Csv(_) => CsStatus::Io,
        Error::Json(_) => CsStatus::Json,
    }
}

struct Failure(CsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> CsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            CsStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("panic inside cone-sobolev");
            CsStatus::Panic
        }
    }
}

unsafe fn arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure(CsStatus::NullArgument, format!("`{name}` is null")))
}

unsafe fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure(CsStatus::NullArgument, format!("`{name}` is null")))
}

unsafe fn text<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(CsStatus::NullArgument, format!("`{name}` is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(CsStatus::InvalidUtf8, format!("`{name}` is not UTF-8")))
}

fn params(p: f64, q: f64) -> Result<LorentzParams, Failure> {
    Ok(LorentzParams::new(p, q)?)
}

/// Message of the last failed call on this thread; empty after a success. Owned by the library.
#[no_mangle]
pub extern "C" fn cs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Built-in cone: `halfplane-x1`, `quadrant-x1x2`, `plane` or `space3`.
#[no_mangle]
pub unsafe extern "C" fn cs_cone_new_builtin(name: *const c_char, out_cone: *mut *mut CsCone) -> CsStatus {
    guard(|| {
        let slot = out(out_cone, "out_cone")?;
        let name = text(name, "name")?;
        let cone = WeightedCone::builtin(name)?;
        *slot = Box::into_raw(Box::new(CsCone(Arc::new(cone))));
        Ok(())
    })
}

/// Cone from a JSON specification such as `{"d":2,"exponents":[{"axis":1,"power":1.0}]}`.
#[no_mangle]
pub unsafe extern "C" fn cs_cone_from_json(json: *const c_char, out_cone: *mut *mut CsCone) -> CsStatus {
    guard(|| {
        let slot = out(out_cone, "out_cone")?;
        let spec: ConeSpec = serde_json::from_str(text(json, "json")?).map_err(Error::from)?;
        *slot = Box::into_raw(Box::new(CsCone(Arc::new(WeightedCone::new(spec)?))));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn cs_cone_free(cone: *mut CsCone) {
    if !cone.is_null() {
        drop(Box::from_raw(cone));
    }
}

#[no_mangle]
pub unsafe extern "C" fn cs_cone_dimension(cone: *const CsCone, out_d: *mut usize) -> CsStatus {
    guard(|| {
        *out(out_d, "out_d")? = arg(cone, "cone")?.0.d();
        Ok(())
    })
}

/// `D = d + α`.
#[no_mangle]
pub unsafe extern "C" fn cs_cone_homogeneous_dimension(cone: *const CsCone, out_big_d: *mut f64) -> CsStatus {
    guard(|| {
        *out(out_big_d, "out_big_d")? = arg(cone, "cone")?.0.big_d();
        Ok(())
    })
}

/// Weighted measure of the unit ball, `C_D`.
#[no_mangle]
pub unsafe extern "C" fn cs_cone_ball_constant(cone: *const CsCone, out_c: *mut f64) -> CsStatus {
    guard(|| {
        *out(out_c, "out_c")? = arg(cone, "cone")?.0.c_d();
        Ok(())
    })
}

/// Sharp embedding norm for `1 <= q <= p < D`.
#[no_mangle]
pub unsafe extern "C" fn cs_embedding_norm(cone: *const CsCone, p: f64, q: f64, out_norm: *mut f64) -> CsStatus {
    guard(|| {
        let slot = out(out_norm, "out_norm")?;
        *slot = embedding_norm(&arg(cone, "cone")?.0, params(p, q)?)?;
        Ok(())
    })
}

/// Piecewise-affine radial profile through `(t[i], v[i])`; values nonincreasing, last value 0.
#[no_mangle]
pub unsafe extern "C" fn cs_profile_from_knots(
    cone: *const CsCone,
    t: *const f64,
    v: *const f64,
    len: usize,
    out_profile: *mut *mut CsProfile,
) -> CsStatus {
    guard(|| {
        let slot = out(out_profile, "out_profile")?;
        let cone = arg(cone, "cone")?;
        if len > 0 && (t.is_null() || v.is_null()) {
            return Err(Failure(CsStatus::NullArgument, "knot arrays are null".into()));
        }
        let (ts, vs) = if len == 0 {
            (&[][..], &[][..])
        } else {
            (std::slice::from_raw_parts(t, len), std::slice::from_raw_parts(v, len))
        };
        let knots: Vec<(f64, f64)> = ts.iter().copied().zip(vs.iter().copied()).collect();
        *slot = Box::into_raw(Box::new(CsProfile(RadialProfile::from_knots(cone.0.clone(), &knots)?)));
        Ok(())
    })
}

/// Truncated power profile on `(0, t_max]` with flat head below `t_max / ratio`, for exponents `(p, q)`.
#[no_mangle]
pub unsafe extern "C" fn cs_profile_alvino(
    cone: *const CsCone,
    p: f64,
    q: f64,
    ratio: f64,
    t_max: f64,
    out_profile: *mut *mut CsProfile,
) -> CsStatus {
    guard(|| {
        let slot = out(out_profile, "out_profile")?;
        let cone = arg(cone, "cone")?;
        if !(ratio > 1.0 && ratio.is_finite()) {
            return Err(Failure(CsStatus::Domain, format!("ratio must exceed 1, got {ratio}")));
        }
        let bound = params(p, q)?.bind(&cone.0)?;
        let profile = alvino_profile(cone.0.clone(), bound.p_star, t_max / ratio, t_max)?;
        *slot = Box::into_raw(Box::new(CsProfile(profile)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn cs_profile_free(profile: *mut CsProfile) {
    if !profile.is_null() {
        drop(Box::from_raw(profile));
    }
}

/// Sobolev quotient of a profile.
#[no_mangle]
pub unsafe extern "C" fn cs_quotient(
    profile: *const CsProfile,
    p: f64,
    q: f64,
    out_report: *mut CsQuotientReport,
) -> CsStatus {
    guard(|| {
        let slot = out(out_report, "out_report")?;
        let r = quotient(&arg(profile, "profile")?.0, params(p, q)?)?;
        *slot = CsQuotientReport {
            numerator: r.numerator,
            denominator: r.denominator,
            quotient: r.quotient,
            embedding_norm: r.embedding_norm,
            ratio: r.ratio,
            within_bound: r.within_bound,
        };
        Ok(())
    })
}

/// Almost-extremal system of `m` shells with `λ = lambda_frac · ‖E‖`.
#[no_mangle]
pub unsafe extern "C" fn cs_system_construct(
    cone: *const CsCone,
    p: f64,
    q: f64,
    m: usize,
    lambda_frac: f64,
    eps1: f64,
    eps2: f64,
    out_system: *mut *mut CsSystem,
) -> CsStatus {
    guard(|| {
        let slot = out(out_system, "out_system")?;
        let cone = arg(cone, "cone")?;
        let par = params(p, q)?;
        let norm = embedding_norm(&cone.0, par)?;
        let sys = construct_system(cone.0.clone(), par, m, lambda_frac * norm, eps1, eps2)?;
        *slot = Box::into_raw(Box::new(CsSystem(sys)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn cs_system_free(system: *mut CsSystem) {
    if !system.is_null() {
        drop(Box::from_raw(system));
    }
}

#[no_mangle]
pub unsafe extern "C" fn cs_system_shell_count(system: *const CsSystem, out_m: *mut usize) -> CsStatus {
    guard(|| {
        *out(out_m, "out_m")? = arg(system, "system")?.0.m();
        Ok(())
    })
}

/// Certified bound and the smallest quotient over `directions` random span directions.
#[no_mangle]
pub unsafe extern "C" fn cs_system_lower_bound(
    system: *const CsSystem,
    directions: usize,
    seed: u64,
    out_bound: *mut CsLowerBound,
) -> CsStatus {
    guard(|| {
        let slot = out(out_bound, "out_bound")?;
        let r = arg(system, "system")?.0.bernstein_lower_bound(directions, seed)?;
        *slot = CsLowerBound { bound: r.bound, empirical_min: r.empirical_min, directions: r.directions, pass: r.pass };
        Ok(())
    })
}

/// System as JSON; release the string with [`cs_string_free`].
#[no_mangle]
pub unsafe extern "C" fn cs_system_to_json(system: *const CsSystem, out_json: *mut *mut c_char) -> CsStatus {
    guard(|| {
        let slot = out(out_json, "out_json")?;
        let s = serde_json::to_string(&arg(system, "system")?.0.to_json()).map_err(Error::from)?;
        *slot = CString::new(s).map_err(|e| Failure(CsStatus::Internal, e.to_string()))?.into_raw();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn cs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
