//! C ABI over `warpmass`.
//!
//! Every fallible function returns a [`WmStatus`] and writes its result through
//! an out-pointer. Handles are opaque and must be released with the matching
//! `*_free` function. The message of the most recent failure on the calling
//! thread is available from [`wm_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use warpmass::conditions::evaluate_conditions;
use warpmass::geometry::ModelSpace;
use warpmass::green::{assemble_green, fit_mass_term, GreenModeTable, ShellSpec};
use warpmass::ode::fit::default_window;
use warpmass::ode::{build_scalar_mode_system, decaying_solution, fit_decay_rate};
use warpmass::yamabe::q_star_sphere;
use warpmass::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    HypothesisViolated = 3,
    TruncationError = 4,
    NumericalFailure = 5,
    Panic = 6,
}

/// Warped-product model `S^n(R) x S^k x (0, inf)` with `f = sinh(c r)/c`.
pub struct WmModel(ModelSpace);

/// Green function mode table built from a model.
pub struct WmGreenTable(GreenModeTable);

/// Hypothesis checks of a model; margins are NaN when they cannot be evaluated.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WmConditions {
    pub cond_main_1: bool,
    pub cond_main_1_margin: f64,
    pub d: f64,
    pub vgl: bool,
    pub vgl_margin: f64,
    pub cond_main: bool,
    pub cond_main_margin: f64,
    pub alpha_plus: f64,
    pub alpha_minus: f64,
    pub beta: f64,
    pub all_hypotheses: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn set_last_error(message: &str) {
    LAST_ERROR.with(|e| {
        let mut buf = e.borrow_mut();
        buf.clear();
        buf.extend(message.bytes().filter(|b| *b != 0));
    });
}

fn status_of(e: &Error) -> WmStatus {
    match e {
        Error::HypothesisViolated(_)
        | Error::MassNotPositive { .. }
        | Error::ModeSelectionViolation { .. } => WmStatus::HypothesisViolated,
        Error::TruncationError(_) | Error::TruncationExceeded { .. } => WmStatus::TruncationError,
        Error::StepSizeUnderflow { .. }
        | Error::NonFiniteState { .. }
        | Error::ZeroNormOnWindow
        | Error::WindowTooSmall { .. }
        | Error::DegenerateSpectrum(_)
        | Error::MatchingFailure(_)
        | Error::ExtrapolationUnstable(_)
        | Error::QuadratureNotConverged(_)
        | Error::GluingMismatch(_) => WmStatus::NumericalFailure,
        _ => WmStatus::InvalidInput,
    }
}

/// Runs `body`, recording errors and converting panics into [`WmStatus::Panic`].
fn guard(body: impl FnOnce() -> Result<(), (WmStatus, String)>) -> WmStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => WmStatus::Ok,
        Ok(Err((status, message))) => {
            set_last_error(&message);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            WmStatus::Panic
        }
    }
}

fn lift<T>(r: warpmass::Result<T>) -> Result<T, (WmStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (WmStatus, String) {
    (WmStatus::NullPointer, format!("{what} is null"))
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len - 1` bytes) and returns its full length without the NUL.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn wm_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn wm_version() -> *const c_char {
    static VERSION: &CStr =
        match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
            Ok(v) => v,
            Err(_) => panic!("version contains NUL"),
        };
    VERSION.as_ptr()
}

/// Creates `S^n(radius) x H_c^{k+1}`; `n = 0` gives a point factor.
///
/// # Safety
/// `out` must be a valid pointer; on success it receives a handle owned by the caller.
#[no_mangle]
pub unsafe extern "C" fn wm_model_sphere_hyperbolic(
    n: usize,
    radius: f64,
    k: usize,
    c: f64,
    out: *mut *mut WmModel,
) -> WmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let model = lift(ModelSpace::sphere_times_hyperbolic(n, radius, k, c))?;
        *out = Box::into_raw(Box::new(WmModel(model)));
        Ok(())
    })
}

/// Releases a model; null is ignored.
///
/// # Safety
/// `model` must be null or a handle from [`wm_model_sphere_hyperbolic`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wm_model_free(model: *mut WmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Total dimension `m = n + k + 1`, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wm_model_dimension(model: *const WmModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.m())
}

/// Evaluates the decay and positivity hypotheses with slack `epsilon`.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wm_conditions(
    model: *const WmModel,
    epsilon: f64,
    out: *mut WmConditions,
) -> WmStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let r = lift(evaluate_conditions(&model.0, epsilon))?;
        *out = WmConditions {
            cond_main_1: r.cond_main_1.holds,
            cond_main_1_margin: r.cond_main_1.margin.unwrap_or(f64::NAN),
            d: r.spectrum_bottom_d.unwrap_or(f64::NAN),
            vgl: r.vgl.holds,
            vgl_margin: r.vgl.margin.unwrap_or(f64::NAN),
            cond_main: r.cond_main.holds,
            cond_main_margin: r.cond_main.margin.unwrap_or(f64::NAN),
            alpha_plus: r.exponents.alpha_plus,
            alpha_minus: r.exponents.alpha_minus,
            beta: r.exponents.beta,
            all_hypotheses: r.all_hypotheses,
        };
        Ok(())
    })
}

/// Predicted and fitted decay rate of the scalar mode with `Delta^N u = mu u`,
/// integrated to `t_far` and fitted on `[0.5, 0.9] t_far`.
///
/// # Safety
/// `model` must be a live handle; `predicted` and `fitted` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn wm_scalar_decay_rate(
    model: *const WmModel,
    mu: f64,
    t_far: f64,
    predicted: *mut f64,
    fitted: *mut f64,
) -> WmStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        if predicted.is_null() || fitted.is_null() {
            return Err(null("output"));
        }
        let system = lift(build_scalar_mode_system(
            &model.0,
            mu,
            0.0,
            warpmass::geometry::ScalBound::Inf,
        ))?;
        let traj = lift(decaying_solution(&system, t_far))?;
        let fit = lift(fit_decay_rate(&traj, default_window(t_far)))?;
        *predicted = system.predicted_rates()[0];
        *fitted = fit.rate;
        Ok(())
    })
}

/// Builds the Green mode table with modes `0..=truncation`.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wm_green_table_build(
    model: *const WmModel,
    truncation: usize,
    out: *mut *mut WmGreenTable,
) -> WmStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let table = lift(GreenModeTable::build(&model.0, truncation, &[0.2]))?;
        *out = Box::into_raw(Box::new(WmGreenTable(table)));
        Ok(())
    })
}

/// Releases a table; null is ignored.
///
/// # Safety
/// `table` must be null or a handle from [`wm_green_table_build`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wm_green_table_free(table: *mut WmGreenTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// `Gamma` at `count` points `(theta[i], r[i])`: angle from the pole on `S^n`
/// and fiber distance.
///
/// # Safety
/// `theta`, `r` and `out` must each point to `count` elements.
#[no_mangle]
pub unsafe extern "C" fn wm_green_evaluate(
    table: *const WmGreenTable,
    theta: *const f64,
    r: *const f64,
    count: usize,
    out: *mut f64,
) -> WmStatus {
    guard(|| {
        let table = table.as_ref().ok_or_else(|| null("table"))?;
        if count == 0 {
            return Ok(());
        }
        if theta.is_null() || r.is_null() || out.is_null() {
            return Err(null("array"));
        }
        let points: Vec<(f64, f64)> = slice::from_raw_parts(theta, count)
            .iter()
            .copied()
            .zip(slice::from_raw_parts(r, count).iter().copied())
            .collect();
        let values = lift(assemble_green(&table.0, &points))?;
        slice::from_raw_parts_mut(out, count).copy_from_slice(&values);
        Ok(())
    })
}

/// Constant term at the pole fitted on `count` radii in `[rho_min, rho_max]`.
///
/// # Safety
/// `table` must be a live handle; `mass` and `uncertainty` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn wm_mass_term(
    table: *const WmGreenTable,
    rho_min: f64,
    rho_max: f64,
    count: usize,
    mass: *mut f64,
    uncertainty: *mut f64,
) -> WmStatus {
    guard(|| {
        let table = table.as_ref().ok_or_else(|| null("table"))?;
        if mass.is_null() || uncertainty.is_null() {
            return Err(null("output"));
        }
        let est = lift(fit_mass_term(
            &table.0,
            &ShellSpec {
                rho_min,
                rho_max,
                count,
            },
        ))?;
        *mass = est.mass_term;
        *uncertainty = est.uncertainty;
        Ok(())
    })
}

/// `Q*(S^m)`, the Yamabe constant of the round sphere.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wm_q_star_sphere(m: usize, out: *mut f64) -> WmStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = lift(q_star_sphere(m))?;
        Ok(())
    })
}
