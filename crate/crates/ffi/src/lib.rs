//! C interface to the two-phase flow simulator.
//!
//! Objects are opaque handles created by `*_new`/`*_from_json` functions and
//! released with the matching `*_free`. Every fallible call returns an
//! [`LsStatus`]; on failure, [`ls_last_error_message`] describes the cause.
//! Handles are not thread-safe; the last-error slot is per thread.

use std::cell::RefCell;
use std::ffi::{CStr, CString, c_char};
use std::panic::{AssertUnwindSafe, catch_unwind};
use std::ptr;

use lscheme_core::Error;
use lscheme_core::cli::{RunConfig, cmd_check_tau};
use lscheme_core::stepper::{IterationHistory, Simulator, TimeGrid, TwoPhaseState};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidConfig = 3,
    SolverFailure = 4,
    IoFailure = 5,
    Finished = 6,
    Panic = 7,
}

/// Cell field selectors for [`ls_simulator_get_field`], which takes them as `int32_t`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LsField {
    Saturation = 0,
    Theta = 1,
    Pressure = 2,
}

/// Time-step admissibility of the L-scheme.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsTauReport {
    pub admissible: bool,
    /// Largest admissible step; infinite when unrestricted.
    pub tau_max: f64,
    pub c1: f64,
    pub c3: f64,
}

/// A parsed run configuration.
pub struct LsConfig {
    inner: RunConfig,
}

/// A simulation advanced one backward Euler step at a time.
pub struct LsSimulator {
    sim: Simulator,
    time: TimeGrid,
    state: TwoPhaseState,
    step: usize,
    last: Option<IterationHistory>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> LsStatus {
    match err {
        Error::SingularSystem(_)
        | Error::MaxItersExceeded { .. }
        | Error::QuadratureFailure(_)
        | Error::NonPositiveWeight { .. } => LsStatus::SolverFailure,
        Error::IoFailure { .. } => LsStatus::IoFailure,
        Error::IndexOutOfRange { .. } | Error::LengthMismatch { .. } => LsStatus::InvalidArgument,
        _ => LsStatus::InvalidConfig,
    }
}

fn fail(status: LsStatus, msg: impl Into<String>) -> LsStatus {
    set_last_error(msg);
    status
}

/// Runs `body`, converting core errors and panics into status codes.
fn guard(body: impl FnOnce() -> Result<LsStatus, LsStatus>) -> LsStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(status)) | Ok(Err(status)) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(LsStatus::Panic, format!("panic: {msg}"))
        }
    }
}

fn core<T>(r: lscheme_core::Result<T>) -> Result<T, LsStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), LsStatus> {
    if p.is_null() {
        Err(fail(LsStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

/// Message of the most recent failure on this thread, or null if none.
/// The pointer stays valid until the next failing call on the same thread.
#[unsafe(no_mangle)]
pub extern "C" fn ls_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[unsafe(no_mangle)]
pub extern "C" fn ls_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a JSON run configuration. Unknown keys are rejected.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable pointer.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn ls_config_from_json(
    json: *const c_char,
    out: *mut *mut LsConfig,
) -> LsStatus {
    guard(|| {
        non_null(json, "json")?;
        non_null(out, "out")?;
        // SAFETY: checked non-null; the caller guarantees NUL termination.
        let text = unsafe { CStr::from_ptr(json) }
            .to_str()
            .map_err(|e| fail(LsStatus::InvalidArgument, format!("json is not UTF-8: {e}")))?;
        let inner = core(RunConfig::from_json_str(text))?;
        // SAFETY: checked non-null above.
        unsafe { *out = Box::into_raw(Box::new(LsConfig { inner })) };
        Ok(LsStatus::Ok)
    })
}

/// # Safety
/// `cfg` must be null or a handle from [`ls_config_from_json`] not yet freed.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn ls_config_free(cfg: *mut LsConfig) {
    if !cfg.is_null() {
        // SAFETY: the caller passes a pointer obtained from Box::into_raw.
        drop(unsafe { Box::from_raw(cfg) });
    }
}

/// Evaluates the time-step restriction for the configured problem. A pilot
/// pressure solve estimates the flux bound when the configuration has none.
///
/// # Safety
/// `cfg` must be a live config handle and `out` a writable pointer.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn ls_check_tau(cfg: *const LsConfig, out: *mut LsTauReport) -> LsStatus {
    guard(|| {
        non_null(cfg, "cfg")?;
        non_null(out, "out")?;
        // SAFETY: checked non-null; the caller guarantees a live handle.
        let cfg = unsafe { &*cfg };
        let r = core(cmd_check_tau(&cfg.inner))?.report;
        // SAFETY: checked non-null above.
        unsafe {
            *out = LsTauReport {
                admissible: r.admissible,
                tau_max: r.tau_max,
                c1: r.c1,
                c3: r.c3,
            };
        }
        Ok(LsStatus::Ok)
    })
}

/// Builds a simulator at its initial state. The configuration may be freed afterwards.
///
/// # Safety
/// `cfg` must be a live config handle and `out` a writable pointer.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn ls_simulator_new(
    cfg: *const LsConfig,
    out: *mut *mut LsSimulator,
) -> LsStatus {
    guard(|| {
        non_null(cfg, "cfg")?;
        non_null(out, "out")?;
        // SAFETY: checked non-null; the caller guarantees a live handle.
        let cfg = unsafe { &*cfg };
        let run = core(cfg.inner.resolve())?;
        let sim = core(Simulator::new(
            run.grid,
            run.problem,
            run.lscheme,
            run.time.tau,
            run.options,
        ))?;
        let state = core(sim.initial_state())?;
        let handle = LsSimulator {
            sim,
            time: run.time,
            state,
            step: 0,
            last: None,
        };
        // SAFETY: checked non-null above.
        unsafe { *out = Box::into_raw(Box::new(handle)) };
        Ok(LsStatus::Ok)
    })
}

/// # Safety
/// `sim` must be null or a handle from [`ls_simulator_new`] not yet freed.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn ls_simulator_free(sim: *mut LsSimulator) {
    if !sim.is_null() {
        // SAFETY: the caller passes a pointer obtained from Box::into_raw.
        drop(unsafe { Box::from_raw(sim) });
    }
}

/// Writes the number of cells, the number of time steps and the current step.
/// Any output pointer may be null.
///
/// # Safety
/// `sim` must be a live simulator handle; non-null outputs must be writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn ls_simulator_info(
    sim: *const LsSimulator,
    num_cells: *mut usize,
    num_steps: *mut usize,
    current_step: *mut usize,
) -> LsStatus {
    guard(|| {
        non_null(sim, "sim")?;
        // SAFETY: checked non-null; the caller guarantees a live handle.
        let s = unsafe { &*sim };
        for (p, v) in [
            (num_cells, s.sim.grid().num_cells()),
            (num_steps, s.time.n_steps),
            (current_step, s.step),
        ] {
            if !p.is_null() {
                // SAFETY: non-null outputs are writable by contract.
                unsafe { *p = v };
            }
        }
        Ok(LsStatus::Ok)
    })
}

/// Advances one time step. Returns `LS_STATUS_FINISHED` once the final time
/// is reached. `iterations` (may be null) receives the L-scheme iteration count.
///
/// # Safety
/// `sim` must be a live simulator handle; `iterations` null or writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn ls_simulator_step(
    sim: *mut LsSimulator,
    iterations: *mut usize,
) -> LsStatus {
    guard(|| {
        non_null(sim, "sim")?;
        // SAFETY: checked non-null; the caller guarantees exclusive access.
        let s = unsafe { &mut *sim };
        if s.step >= s.time.n_steps {
            return Err(fail(LsStatus::Finished, "final time reached"));
        }
        let n = s.step + 1;
        let (mut next, hist) = core(s.sim.l_scheme_solve(&s.state, n))?;
        next.t = s.time.t(n);
        if !iterations.is_null() {
            // SAFETY: non-null output is writable by contract.
            unsafe { *iterations = hist.iterations() };
        }
        s.state = next;
        s.step = n;
        s.last = Some(hist);
        Ok(LsStatus::Ok)
    })
}

/// Copies a cell field of the current state into `buf`, which must hold
/// exactly `len` = number of cells values.
///
/// # Safety
/// `sim` must be a live simulator handle and `buf` writable for `len` doubles.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn ls_simulator_get_field(
    sim: *const LsSimulator,
    field: i32,
    buf: *mut f64,
    len: usize,
) -> LsStatus {
    guard(|| {
        non_null(sim, "sim")?;
        non_null(buf, "buf")?;
        // SAFETY: checked non-null; the caller guarantees a live handle.
        let s = unsafe { &*sim };
        let values = match field {
            f if f == LsField::Saturation as i32 => &s.state.sat.values,
            f if f == LsField::Theta as i32 => &s.state.theta.values,
            f if f == LsField::Pressure as i32 => &s.state.p.values,
            other => {
                return Err(fail(
                    LsStatus::InvalidArgument,
                    format!("unknown field {other}"),
                ));
            }
        };
        if len != values.len() {
            return Err(fail(
                LsStatus::InvalidArgument,
                format!("buffer holds {len} values, field has {}", values.len()),
            ));
        }
        // SAFETY: buf is writable for len == values.len() doubles.
        unsafe { ptr::copy_nonoverlapping(values.as_ptr(), buf, len) };
        Ok(LsStatus::Ok)
    })
}

/// Copies the complementary-pressure increments of the last step's L-scheme
/// iterations into `buf` (capacity `cap`) and writes their count to `written`.
/// Fails with `LS_STATUS_INVALID_ARGUMENT` if `cap` is too small; `written`
/// then holds the required size.
///
/// # Safety
/// `sim` must be a live simulator handle, `buf` writable for `cap` doubles
/// (or null when `cap` is 0) and `written` writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn ls_simulator_last_increments(
    sim: *const LsSimulator,
    buf: *mut f64,
    cap: usize,
    written: *mut usize,
) -> LsStatus {
    guard(|| {
        non_null(sim, "sim")?;
        non_null(written, "written")?;
        // SAFETY: checked non-null; the caller guarantees a live handle.
        let s = unsafe { &*sim };
        let incs: Vec<f64> = s
            .last
            .iter()
            .flat_map(|h| h.records.iter().map(|r| r.inc_theta))
            .collect();
        // SAFETY: checked non-null above.
        unsafe { *written = incs.len() };
        if incs.len() > cap {
            return Err(fail(
                LsStatus::InvalidArgument,
                format!("need room for {} increments", incs.len()),
            ));
        }
        if !incs.is_empty() {
            non_null(buf, "buf")?;
            // SAFETY: buf is writable for cap >= incs.len() doubles.
            unsafe { ptr::copy_nonoverlapping(incs.as_ptr(), buf, incs.len()) };
        }
        Ok(LsStatus::Ok)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_mapping() {
        assert_eq!(
            status_of(&Error::SingularSystem("x".into())),
            LsStatus::SolverFailure
        );
        assert_eq!(
            status_of(&Error::InvalidConfig("x".into())),
            LsStatus::InvalidConfig
        );
        assert_eq!(
            status_of(&Error::LengthMismatch {
                what: "x",
                expected: 1,
                got: 2
            }),
            LsStatus::InvalidArgument
        );
    }

    #[test]
    fn panics_become_status_codes() {
        let status = guard(|| panic!("boom"));
        assert_eq!(status, LsStatus::Panic);
        let msg = unsafe { CStr::from_ptr(ls_last_error_message()) }
            .to_str()
            .unwrap();
        assert!(msg.contains("boom"));
    }
}
