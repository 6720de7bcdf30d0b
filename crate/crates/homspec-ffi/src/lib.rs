//! C ABI over the solver suite: opaque problem handles built from TOML
//! configuration text, integer status codes, and JSON result strings.
//!
//! Conventions:
//! - Every function returns a status code from the `HOMSPEC_*` family;
//!   result strings come back through out-pointers.
//! - Strings returned through out-pointers are NUL-terminated, owned by
//!   the library, and must be released with `homspec_string_free`.
//! - On failure, `homspec_last_error` returns a thread-local message
//!   describing the most recent error on the calling thread.
//! - Handles are not thread-safe; use one handle per thread or add
//!   external locking.

use homspec::config::RunConfig;
use homspec::direct::{solve_direct, DirectProblem, POINTS_PER_PERIOD};
use homspec::error::Error;
use homspec::oscillator::{solve_oscillator, TruncatedDomain};
use homspec::regions::{classify, scaling};
use serde_json::json;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

/// Success.
pub const HOMSPEC_OK: i32 = 0;
/// A null pointer was passed where a value was required.
pub const HOMSPEC_ERR_NULL: i32 = 1;
/// Input text was not valid UTF-8 or not a valid configuration.
pub const HOMSPEC_ERR_CONFIG: i32 = 2;
/// The solver rejected the problem (unsupported region, failed
/// coercivity, non-convergence, ...).
pub const HOMSPEC_ERR_SOLVE: i32 = 3;
/// A panic was caught at the boundary; the handle may be unusable.
pub const HOMSPEC_ERR_PANIC: i32 = 4;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized: String = msg.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|e| {
        *e.borrow_mut() = CString::new(sanitized).expect("NUL-free by construction");
    });
}

fn code_for(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Io(_) => HOMSPEC_ERR_CONFIG,
        _ => HOMSPEC_ERR_SOLVE,
    }
}

/// Opaque problem handle: parsed configuration plus derived inputs.
pub struct HomspecProblem {
    config: RunConfig,
}

fn write_out(json: serde_json::Value, out: *mut *mut c_char) -> i32 {
    let text = serde_json::to_string(&json!({
        "schema_version": 1u64,
        "report": json,
    }))
    .expect("serializable report");
    match CString::new(text) {
        Ok(c) => {
            unsafe { *out = c.into_raw() };
            HOMSPEC_OK
        }
        Err(_) => {
            set_error("interior NUL in report");
            HOMSPEC_ERR_PANIC
        }
    }
}

fn guarded<F: FnOnce() -> i32>(f: F) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(code) => code,
        Err(_) => {
            set_error("internal panic caught at FFI boundary");
            HOMSPEC_ERR_PANIC
        }
    }
}

/// Most recent error message on this thread, or an empty string.
/// The pointer stays valid until the next failing call on the thread.
#[no_mangle]
pub extern "C" fn homspec_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Build a problem handle from TOML configuration text.
///
/// # Safety
/// `config_toml` must point to a NUL-terminated string and `out` to a
/// writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn homspec_problem_new(
    config_toml: *const c_char,
    out: *mut *mut HomspecProblem,
) -> i32 {
    if config_toml.is_null() || out.is_null() {
        set_error("null pointer argument");
        return HOMSPEC_ERR_NULL;
    }
    guarded(|| {
        let text = match unsafe { CStr::from_ptr(config_toml) }.to_str() {
            Ok(t) => t,
            Err(_) => {
                set_error("configuration text is not valid UTF-8");
                return HOMSPEC_ERR_CONFIG;
            }
        };
        match RunConfig::parse(text) {
            Ok(config) => {
                // validate eagerly so later calls cannot fail on parsing
                if let Err(e) = config.coefficient_spec() {
                    set_error(&e.to_string());
                    return code_for(&e);
                }
                if let Err(e) = config.parameter_point() {
                    set_error(&e.to_string());
                    return code_for(&e);
                }
                unsafe { *out = Box::into_raw(Box::new(HomspecProblem { config })) };
                HOMSPEC_OK
            }
            Err(e) => {
                set_error(&e.to_string());
                code_for(&e)
            }
        }
    })
}

/// Release a handle created by `homspec_problem_new`. Null is a no-op.
///
/// # Safety
/// `handle` must be null or a pointer previously returned by
/// `homspec_problem_new` that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn homspec_problem_free(handle: *mut HomspecProblem) {
    if !handle.is_null() {
        drop(unsafe { Box::from_raw(handle) });
    }
}

/// Release a string returned through any `json_out` parameter.
///
/// # Safety
/// `text` must be null or a pointer previously returned by this
/// library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn homspec_string_free(text: *mut c_char) {
    if !text.is_null() {
        drop(unsafe { CString::from_raw(text) });
    }
}

unsafe fn with_handle<F>(handle: *const HomspecProblem, out: *mut *mut c_char, f: F) -> i32
where
    F: FnOnce(&HomspecProblem) -> Result<serde_json::Value, Error>,
{
    if handle.is_null() || out.is_null() {
        set_error("null pointer argument");
        return HOMSPEC_ERR_NULL;
    }
    let problem = unsafe { &*handle };
    guarded(|| match f(problem) {
        Ok(v) => write_out(v, out),
        Err(e) => {
            set_error(&e.to_string());
            code_for(&e)
        }
    })
}

/// Classify the configured parameter point; the JSON report carries the
/// region label and, when supported, the scaling exponents.
///
/// # Safety
/// `handle` must be a live handle and `json_out` a writable slot.
#[no_mangle]
pub unsafe extern "C" fn homspec_classify(
    handle: *const HomspecProblem,
    json_out: *mut *mut c_char,
) -> i32 {
    unsafe {
        with_handle(handle, json_out, |p| {
            let point = p.config.parameter_point()?;
            let region = classify(point);
            if !region.is_supported() {
                return Ok(json!({
                    "alpha": point.alpha,
                    "beta": point.beta,
                    "region": region,
                    "supported": false,
                }));
            }
            let s = scaling(point, p.config.problem.dimension)?;
            Ok(json!({
                "alpha": point.alpha,
                "beta": point.beta,
                "region": region,
                "supported": true,
                "scaling": s,
            }))
        })
    }
}

/// Solve the cell problems and assemble the effective operator with
/// coercivity certificates.
///
/// # Safety
/// `handle` must be a live handle and `json_out` a writable slot.
#[no_mangle]
pub unsafe extern "C" fn homspec_effective(
    handle: *const HomspecProblem,
    json_out: *mut *mut c_char,
) -> i32 {
    unsafe {
        with_handle(handle, json_out, |p| {
            let spec = p.config.coefficient_spec()?;
            let point = p.config.parameter_point()?;
            let (reg, op) = homspec::asymptotics::effective_pipeline(
                &spec,
                point,
                p.config.solver.cell_modes,
            )?;
            Ok(json!({ "scaling": reg, "operator": op }))
        })
    }
}

/// Solve the truncated effective spectral problem for the lowest `k`
/// eigenvalues.
///
/// # Safety
/// `handle` must be a live handle and `json_out` a writable slot.
#[no_mangle]
pub unsafe extern "C" fn homspec_spectrum(
    handle: *const HomspecProblem,
    k: usize,
    json_out: *mut *mut c_char,
) -> i32 {
    unsafe {
        with_handle(handle, json_out, |p| {
            let spec = p.config.coefficient_spec()?;
            let point = p.config.parameter_point()?;
            let (_, op) = homspec::asymptotics::effective_pipeline(
                &spec,
                point,
                p.config.solver.cell_modes,
            )?;
            let dom = TruncatedDomain::new(
                p.config.solver.box_half_width,
                p.config.solver.box_points,
            )?;
            let s = solve_oscillator(&op, dom, k, p.config.stencil_order()?)?;
            Ok(json!({
                "eigenvalues": s.values,
                "residuals": s.residuals,
                "iterations": s.iterations,
                "domain": s.domain,
                "order": s.order,
            }))
        })
    }
}

/// Solve the original eps-dependent problem directly for the lowest `k`
/// eigenvalues at the minimal admissible resolution.
///
/// # Safety
/// `handle` must be a live handle and `json_out` a writable slot.
#[no_mangle]
pub unsafe extern "C" fn homspec_direct(
    handle: *const HomspecProblem,
    epsilon: f64,
    k: usize,
    json_out: *mut *mut c_char,
) -> i32 {
    unsafe {
        with_handle(handle, json_out, |p| {
            let spec = p.config.coefficient_spec()?;
            let point = p.config.parameter_point()?;
            let needed =
                (POINTS_PER_PERIOD * spec.domain.diameter() / epsilon).ceil() as usize;
            let prob = DirectProblem::new(&spec, point, epsilon, needed)?;
            let sol = solve_direct(&prob, k)?;
            Ok(json!({
                "epsilon": epsilon,
                "resolution": prob.resolution,
                "eigenvalues": sol.values,
                "shift": sol.shift,
                "residuals": sol.residuals,
                "iterations": sol.iterations,
            }))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    const CONFIG: &str = r#"
[problem]
dimension = 1
alpha = "1/3"
beta = 1.0
domain_lower = [-1.0]
domain_upper = [1.0]

[coefficients]
c = "4 + 8*x1^2 + 0.5*sin(2*pi*y1)^2"

[coefficients.a]
"1111" = "0.01*(2 + sin(2*pi*y1))"

[coefficients.b]
"11" = "0.5*(2 + sin(2*pi*y1))"

[solver]
cell_modes = 32
box_points = 512
"#;

    fn make() -> *mut HomspecProblem {
        let text = CString::new(CONFIG).unwrap();
        let mut handle = ptr::null_mut();
        let code = unsafe { homspec_problem_new(text.as_ptr(), &mut handle) };
        assert_eq!(code, HOMSPEC_OK);
        assert!(!handle.is_null());
        handle
    }

    fn take(out: *mut c_char) -> serde_json::Value {
        assert!(!out.is_null());
        let text = unsafe { CStr::from_ptr(out) }.to_str().unwrap().to_string();
        unsafe { homspec_string_free(out) };
        serde_json::from_str(&text).unwrap()
    }

    #[test]
    fn classify_round_trip() {
        let h = make();
        let mut out = ptr::null_mut();
        let code = unsafe { homspec_classify(h, &mut out) };
        assert_eq!(code, HOMSPEC_OK);
        let v = take(out);
        assert_eq!(v["schema_version"], 1);
        assert_eq!(v["report"]["region"], "R2");
        assert_eq!(v["report"]["supported"], true);
        unsafe { homspec_problem_free(h) };
    }

    #[test]
    fn effective_and_spectrum() {
        let h = make();
        let mut out = ptr::null_mut();
        assert_eq!(unsafe { homspec_effective(h, &mut out) }, HOMSPEC_OK);
        let v = take(out);
        let c0 = v["report"]["operator"]["tensors"]["c0"].as_f64().unwrap();
        assert!((c0 - 4.25).abs() < 1e-10);

        let mut out = ptr::null_mut();
        assert_eq!(unsafe { homspec_spectrum(h, 2, &mut out) }, HOMSPEC_OK);
        let v = take(out);
        let vals = v["report"]["eigenvalues"].as_array().unwrap();
        assert_eq!(vals.len(), 2);
        assert!(vals[0].as_f64().unwrap() > 0.0);
        unsafe { homspec_problem_free(h) };
    }

    #[test]
    fn direct_solve() {
        let h = make();
        let mut out = ptr::null_mut();
        assert_eq!(unsafe { homspec_direct(h, 0.05, 1, &mut out) }, HOMSPEC_OK);
        let v = take(out);
        assert_eq!(v["report"]["resolution"], 640);
        assert!(v["report"]["eigenvalues"][0].as_f64().unwrap() > 0.0);
        unsafe { homspec_problem_free(h) };
    }

    #[test]
    fn bad_config_reports_error() {
        let text = CString::new("not toml at all [").unwrap();
        let mut handle = ptr::null_mut();
        let code = unsafe { homspec_problem_new(text.as_ptr(), &mut handle) };
        assert_eq!(code, HOMSPEC_ERR_CONFIG);
        assert!(handle.is_null());
        let msg = unsafe { CStr::from_ptr(homspec_last_error()) };
        assert!(!msg.to_str().unwrap().is_empty());
    }

    #[test]
    fn unsupported_region_is_reported_not_fatal() {
        let text = CString::new(CONFIG.replace("alpha = \"1/3\"", "alpha = 1.0")).unwrap();
        let mut handle = ptr::null_mut();
        assert_eq!(
            unsafe { homspec_problem_new(text.as_ptr(), &mut handle) },
            HOMSPEC_OK
        );
        let mut out = ptr::null_mut();
        assert_eq!(unsafe { homspec_classify(handle, &mut out) }, HOMSPEC_OK);
        let v = take(out);
        assert_eq!(v["report"]["supported"], false);
        // solving in an unsupported region fails with a solve error
        let mut out = ptr::null_mut();
        assert_eq!(
            unsafe { homspec_effective(handle, &mut out) },
            HOMSPEC_ERR_SOLVE
        );
        unsafe { homspec_problem_free(handle) };
    }

    #[test]
    fn null_arguments_rejected() {
        let mut out = ptr::null_mut();
        assert_eq!(
            unsafe { homspec_classify(ptr::null(), &mut out) },
            HOMSPEC_ERR_NULL
        );
        let h = make();
        assert_eq!(
            unsafe { homspec_classify(h, ptr::null_mut()) },
            HOMSPEC_ERR_NULL
        );
        unsafe { homspec_problem_free(h) };
        unsafe { homspec_problem_free(ptr::null_mut()) };
        unsafe { homspec_string_free(ptr::null_mut()) };
    }
}
