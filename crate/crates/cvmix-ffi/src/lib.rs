//! C ABI over the `cvmix` simulator.
//!
//! States are opaque heap handles. Every fallible call returns a
//! [`CvmixStatus`]; on failure the message is available from
//! [`cvmix_last_error_message`] on the same thread. Strings returned through
//! `char **` belong to the caller and are released with [`cvmix_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cvmix::analysis::{fock_fidelity, state_overlap, wigner_grid, GridSpec};
use cvmix::channels::{apply_channel, apply_symplectic, beamsplitter, displacement, loss, rotation, squeeze_symplectic};
use cvmix::gates::{pauli_readout_probability, PauliAxis};
use cvmix::io::{state_from_json, state_to_json};
use cvmix::measurement::{condition_on_generaldyne, sample_generaldyne, GeneralDyne};
use cvmix::scenarios::{run_scenario, ScenarioError, ScenarioOptions};
use cvmix::states::{self, CatParams, GkpParams};
use cvmix::{Error, State, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Opaque simulator state.
pub struct CvmixState(State);

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CvmixStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Invalid JSON or unknown scenario.
    Schema = 3,
    Simulation = 4,
    ZeroProbability = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CvmixPauli {
    X = 0,
    Z = 1,
    /// Homodyne along q − p.
    YMinus = 2,
    /// Homodyne along q + p.
    YPlus = 3,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CvmixStatus {
    match e {
        Error::ZeroProbabilityOutcome(_) => CvmixStatus::ZeroProbability,
        Error::InvalidParameter(_) | Error::InvalidModes(_) | Error::DimensionMismatch(_) | Error::Unphysical(_) => {
            CvmixStatus::InvalidArgument
        }
        Error::Serialization(_) => CvmixStatus::Schema,
        _ => CvmixStatus::Simulation,
    }
}

struct Fail(CvmixStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CvmixStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CvmixStatus::Ok,
        Ok(Err(Fail(s, m))) => {
            set_error(m);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            CvmixStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(CvmixStatus::NullPointer, format!("{what} is null"))
}

unsafe fn state_ref<'a>(p: *const CvmixState) -> Result<&'a State, Fail> {
    p.as_ref().map(|s| &s.0).ok_or_else(|| null("state"))
}

unsafe fn state_mut<'a>(p: *mut CvmixState) -> Result<&'a mut State, Fail> {
    p.as_mut().map(|s| &mut s.0).ok_or_else(|| null("state"))
}

unsafe fn put_state(out: *mut *mut CvmixState, st: State) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(CvmixState(st)));
    Ok(())
}

unsafe fn put<T>(out: *mut T, v: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = v;
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out"));
    }
    let c = CString::new(s).map_err(|e| Fail(CvmixStatus::Simulation, e.to_string()))?;
    *out = c.into_raw();
    Ok(())
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Fail(CvmixStatus::InvalidArgument, format!("{what}: {e}")))
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cvmix_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn cvmix_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `state` must come from this library or be null; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn cvmix_state_free(state: *mut CvmixState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cvmix_state_vacuum(num_modes: u32, hbar: f64, out: *mut *mut CvmixState) -> CvmixStatus {
    guard(|| put_state(out, states::vacuum(num_modes as usize, hbar)?))
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cvmix_state_coherent(re: f64, im: f64, hbar: f64, out: *mut *mut CvmixState) -> CvmixStatus {
    guard(|| put_state(out, states::coherent(C64::new(re, im), hbar)?))
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cvmix_state_squeezed(r: f64, phi: f64, hbar: f64, out: *mut *mut CvmixState) -> CvmixStatus {
    guard(|| put_state(out, states::squeezed(r, phi, hbar)?))
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cvmix_state_fock(n: u32, r: f64, hbar: f64, out: *mut *mut CvmixState) -> CvmixStatus {
    guard(|| put_state(out, states::fock(n as usize, r, hbar)?))
}

/// Cat state in the complex-weight representation; `parity` 0 is even.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cvmix_state_cat(re: f64, im: f64, parity: u8, hbar: f64, out: *mut *mut CvmixState) -> CvmixStatus {
    guard(|| {
        if parity > 1 {
            return Err(Fail(CvmixStatus::InvalidArgument, format!("parity {parity}")));
        }
        put_state(out, states::cat(&CatParams::new(C64::new(re, im), parity), hbar)?)
    })
}

/// Finite-energy GKP state cos(θ/2)|0⟩ + e^{−iφ} sin(θ/2)|1⟩.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cvmix_state_gkp(theta: f64, phi: f64, epsilon: f64, hbar: f64, out: *mut *mut CvmixState) -> CvmixStatus {
    guard(|| put_state(out, states::gkp(&GkpParams::new(theta, phi, epsilon), hbar)?))
}

/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cvmix_state_from_json(json: *const c_char, out: *mut *mut CvmixState) -> CvmixStatus {
    guard(|| put_state(out, state_from_json(read_str(json, "json")?)?))
}

/// # Safety
/// `state` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cvmix_state_to_json(state: *const CvmixState, out: *mut *mut c_char) -> CvmixStatus {
    guard(|| put_string(out, state_to_json(state_ref(state)?)?))
}

/// # Safety
/// `state` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cvmix_state_clone(state: *const CvmixState, out: *mut *mut CvmixState) -> CvmixStatus {
    guard(|| put_state(out, state_ref(state)?.clone()))
}

/// # Safety
/// Both handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cvmix_state_tensor(a: *const CvmixState, b: *const CvmixState, out: *mut *mut CvmixState) -> CvmixStatus {
    guard(|| put_state(out, state_ref(a)?.tensor(state_ref(b)?)?))
}

/// Reduced state of the listed modes.
///
/// # Safety
/// `state` must be live, `modes` must hold `len` entries, `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cvmix_state_partial_trace(
    state: *const CvmixState,
    modes: *const u32,
    len: usize,
    out: *mut *mut CvmixState,
) -> CvmixStatus {
    guard(|| {
        if modes.is_null() {
            return Err(null("modes"));
        }
        let keep: Vec<usize> = std::slice::from_raw_parts(modes, len).iter().map(|&m| m as usize).collect();
        put_state(out, state_ref(state)?.partial_trace(&keep)?)
    })
}

/// # Safety
/// `state` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cvmix_state_num_modes(state: *const CvmixState, out: *mut u32) -> CvmixStatus {
    guard(|| put(out, state_ref(state)?.num_modes() as u32))
}

/// # Safety
/// `state` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cvmix_state_num_peaks(state: *const CvmixState, out: *mut usize) -> CvmixStatus {
    guard(|| put(out, state_ref(state)?.num_peaks()))
}

/// W at a phase-space point with 2N coordinates.
///
/// # Safety
/// `point` must hold `len` values; `re` and `im` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cvmix_wigner(state: *const CvmixState, point: *const f64, len: usize, re: *mut f64, im: *mut f64) -> CvmixStatus {
    guard(|| {
        if point.is_null() {
            return Err(null("point"));
        }
        let w = state_ref(state)?.wigner(std::slice::from_raw_parts(point, len))?;
        put(re, w.re)?;
        put(im, w.im)
    })
}

/// Real part of a single-mode Wigner function on a grid given in units of
/// √ħ. `out` receives `q_points * p_points` values, q-major.
///
/// # Safety
/// `out` must hold `q_points * p_points` values; `reality` may be null.
#[no_mangle]
pub unsafe extern "C" fn cvmix_wigner_grid(
    state: *const CvmixState,
    q_min: f64,
    q_max: f64,
    q_points: usize,
    p_min: f64,
    p_max: f64,
    p_points: usize,
    out: *mut f64,
    reality: *mut f64,
) -> CvmixStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let g = GridSpec::new((q_min, q_max, q_points), (p_min, p_max, p_points))?;
        let w = wigner_grid(state_ref(state)?, &g)?;
        let dst = std::slice::from_raw_parts_mut(out, q_points * p_points);
        for (d, v) in dst.iter_mut().zip(w.values.iter().flatten()) {
            *d = *v;
        }
        if !reality.is_null() {
            *reality = w.reality;
        }
        Ok(())
    })
}

fn check_mode(st: &State, m: u32) -> Result<usize, Fail> {
    if (m as usize) < st.num_modes() {
        Ok(m as usize)
    } else {
        Err(Fail(CvmixStatus::InvalidArgument, format!("mode {m} out of range")))
    }
}

/// # Safety
/// `state` must be live.
#[no_mangle]
pub unsafe extern "C" fn cvmix_apply_loss(state: *mut CvmixState, mode: u32, eta: f64) -> CvmixStatus {
    guard(|| {
        let st = state_mut(state)?;
        let m = check_mode(st, mode)?;
        *st = apply_channel(st, &loss(eta, st.hbar())?, &[m])?;
        Ok(())
    })
}

/// # Safety
/// `state` must be live.
#[no_mangle]
pub unsafe extern "C" fn cvmix_apply_rotation(state: *mut CvmixState, mode: u32, theta: f64) -> CvmixStatus {
    guard(|| {
        let st = state_mut(state)?;
        let m = check_mode(st, mode)?;
        *st = apply_symplectic(st, &rotation(theta), &[m])?;
        Ok(())
    })
}

/// S(r) = diag(e^{−r}, e^{r}).
///
/// # Safety
/// `state` must be live.
#[no_mangle]
pub unsafe extern "C" fn cvmix_apply_squeeze(state: *mut CvmixState, mode: u32, r: f64) -> CvmixStatus {
    guard(|| {
        let st = state_mut(state)?;
        let m = check_mode(st, mode)?;
        *st = apply_symplectic(st, &squeeze_symplectic(r), &[m])?;
        Ok(())
    })
}

/// # Safety
/// `state` must be live.
#[no_mangle]
pub unsafe extern "C" fn cvmix_apply_displacement(state: *mut CvmixState, mode: u32, re: f64, im: f64) -> CvmixStatus {
    guard(|| {
        let st = state_mut(state)?;
        let m = check_mode(st, mode)?;
        *st = apply_symplectic(st, &displacement(C64::new(re, im), st.hbar()), &[m])?;
        Ok(())
    })
}

/// # Safety
/// `state` must be live.
#[no_mangle]
pub unsafe extern "C" fn cvmix_apply_beamsplitter(state: *mut CvmixState, mode_a: u32, mode_b: u32, theta: f64) -> CvmixStatus {
    guard(|| {
        let st = state_mut(state)?;
        let (a, b) = (check_mode(st, mode_a)?, check_mode(st, mode_b)?);
        *st = apply_symplectic(st, &beamsplitter(theta), &[a, b])?;
        Ok(())
    })
}

/// Sample x_θ on `mode` with the given seed.
///
/// # Safety
/// `state` must be live; `outcome` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cvmix_homodyne_sample(state: *const CvmixState, mode: u32, angle: f64, seed: u64, outcome: *mut f64) -> CvmixStatus {
    guard(|| {
        let st = state_ref(state)?;
        let m = check_mode(st, mode)?;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let s = sample_generaldyne(st, &GeneralDyne::homodyne(vec![m], vec![angle])?, &mut rng)?;
        put(outcome, s.outcome[0])
    })
}

/// Condition on x_θ = `outcome`; `out` receives the state of the other
/// modes and `density` the outcome density.
///
/// # Safety
/// `state` must be live; `density` may be null; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cvmix_homodyne_condition(
    state: *const CvmixState,
    mode: u32,
    angle: f64,
    outcome: f64,
    density: *mut f64,
    out: *mut *mut CvmixState,
) -> CvmixStatus {
    guard(|| {
        let st = state_ref(state)?;
        let m = check_mode(st, mode)?;
        let c = condition_on_generaldyne(st, &GeneralDyne::homodyne(vec![m], vec![angle])?, &[outcome])?;
        if !density.is_null() {
            *density = c.probability;
        }
        put_state(out, c.state)
    })
}

/// Probability of logical 0 for a single-mode GKP-encoded state.
///
/// # Safety
/// `state` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cvmix_pauli_readout(state: *const CvmixState, axis: CvmixPauli, out: *mut f64) -> CvmixStatus {
    guard(|| {
        let ax = match axis {
            CvmixPauli::X => PauliAxis::X,
            CvmixPauli::Z => PauliAxis::Z,
            CvmixPauli::YMinus => PauliAxis::YMinus,
            CvmixPauli::YPlus => PauliAxis::YPlus,
        };
        put(out, pauli_readout_probability(state_ref(state)?, ax)?)
    })
}

/// tr(ρ_a ρ_b).
///
/// # Safety
/// Both handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cvmix_state_overlap(a: *const CvmixState, b: *const CvmixState, out: *mut f64) -> CvmixStatus {
    guard(|| put(out, state_overlap(state_ref(a)?, state_ref(b)?)?))
}

/// ⟨n|ρ|n⟩ for a single-mode state.
///
/// # Safety
/// `state` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cvmix_fock_fidelity(state: *const CvmixState, n: u32, out: *mut f64) -> CvmixStatus {
    guard(|| put(out, fock_fidelity(state_ref(state)?, n as usize)?))
}

/// Run a built-in scenario; `params_json` may be null for defaults. The
/// result JSON is written to `out`.
///
/// # Safety
/// String arguments must be nul-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cvmix_run_scenario(
    name: *const c_char,
    params_json: *const c_char,
    seed: u64,
    prune_tol: f64,
    out: *mut *mut c_char,
) -> CvmixStatus {
    guard(|| {
        let name = read_str(name, "name")?;
        let params = if params_json.is_null() {
            serde_json::Value::Null
        } else {
            serde_json::from_str(read_str(params_json, "params_json")?)
                .map_err(|e| Fail(CvmixStatus::Schema, e.to_string()))?
        };
        let r = run_scenario(name, &params, &ScenarioOptions { seed, prune_tol }).map_err(|e| match e {
            ScenarioError::Unknown(_) | ScenarioError::Params(_) => Fail(CvmixStatus::Schema, e.to_string()),
            ScenarioError::Sim(ref s) | ScenarioError::Run { source: ref s, .. } => Fail(status_of(s), e.to_string()),
        })?;
        put_string(out, serde_json::to_string(&r).map_err(|e| Fail(CvmixStatus::Simulation, e.to_string()))?)
    })
}
