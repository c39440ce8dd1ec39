//! C ABI over the `spinchaos` core.
//!
//! Objects cross the boundary as opaque handles created by `*_new`
//! functions and released by the matching `*_free`. Every fallible call
//! returns a [`SpinchaosStatus`]; on failure a description is available
//! from [`spinchaos_last_error`] on the same thread. Panics are caught and
//! reported as `SPINCHAOS_STATUS_PANIC`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use spinchaos::bessel::bessel_j;
use spinchaos::dynamics::{energy_static, Integrator, Propagator};
use spinchaos::ensemble::{make_ensemble, randomization_run, RandomizationConfig};
use spinchaos::haar::{sample_haar, RngSeed};
use spinchaos::lyapunov::{benettin_lle, LleConfig};
use spinchaos::params::{Direction, DriveSpec, Hamiltonian, SystemParams};
use spinchaos::rotating::predict_dips;
use spinchaos::scan::parse_point;
use spinchaos::spin::{PhasePoint, SpinorState};
use spinchaos::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpinchaosStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    OutOfRange = 3,
    Numerical = 4,
    Io = 5,
    Parse = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Static energies and drive: `q/h`, `ε_s/h`, `Ω/2π` in Hz, drive amplitude
/// `ħD/ε_s`, modulation frequency in Hz, drive direction and step.
pub struct SpinchaosSystem {
    params: SystemParams,
    drive: DriveSpec,
    integ: Integrator,
}

/// A normalized spin-1 spinor `(ζ₁, ζ₀, ζ₋₁)` and its clock.
pub struct SpinchaosState {
    state: SpinorState,
    t: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> SpinchaosStatus {
    match e {
        _ if e.is_numerical() => SpinchaosStatus::Numerical,
        Error::OutOfRange { .. } => SpinchaosStatus::OutOfRange,
        Error::Io { .. } => SpinchaosStatus::Io,
        Error::Parse(_) => SpinchaosStatus::Parse,
        _ => SpinchaosStatus::InvalidArgument,
    }
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (SpinchaosStatus, String)>) -> SpinchaosStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SpinchaosStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            SpinchaosStatus::Panic
        }
    }
}

trait IntoFfi<T> {
    fn ffi(self) -> Result<T, (SpinchaosStatus, String)>;
}

impl<T> IntoFfi<T> for spinchaos::Result<T> {
    fn ffi(self) -> Result<T, (SpinchaosStatus, String)> {
        self.map_err(|e| (status_of(&e), e.to_string()))
    }
}

fn null(what: &str) -> (SpinchaosStatus, String) {
    (SpinchaosStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (SpinchaosStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (SpinchaosStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn spinchaos_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to fit) and returns the full message length in bytes.
#[no_mangle]
pub unsafe extern "C" fn spinchaos_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Creates a system. `dir` points to three components of the drive
/// direction (normalized here); `dt` is the integrator step in seconds.
#[no_mangle]
pub unsafe extern "C" fn spinchaos_system_new(
    q_hz: f64,
    eps_hz: f64,
    rabi_hz: f64,
    drive_amp: f64,
    drive_freq_hz: f64,
    dir: *const f64,
    dt: f64,
    out: *mut *mut SpinchaosSystem,
) -> SpinchaosStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        let d = std::slice::from_raw_parts(deref(dir, "dir")?, 3);
        let params = SystemParams { q_over_h: q_hz, eps_s_over_h: eps_hz, omega_rabi: rabi_hz };
        params.validate().ffi()?;
        let drive = DriveSpec::along(drive_amp, drive_freq_hz, Direction::new([d[0], d[1], d[2]]).ffi()?);
        drive.validate().ffi()?;
        let integ = Integrator::new(dt).ffi()?;
        *out = Box::into_raw(Box::new(SpinchaosSystem { params, drive, integ }));
        Ok(())
    })
}

/// Creates a system with the default parameters and no drive.
#[no_mangle]
pub unsafe extern "C" fn spinchaos_system_default(out: *mut *mut SpinchaosSystem) -> SpinchaosStatus {
    guard(|| {
        *deref_mut(out, "out")? = Box::into_raw(Box::new(SpinchaosSystem {
            params: SystemParams::default(),
            drive: DriveSpec::none(),
            integ: Integrator::default(),
        }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn spinchaos_system_free(sys: *mut SpinchaosSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// `τ_s = h/ε_s` in seconds.
#[no_mangle]
pub unsafe extern "C" fn spinchaos_system_tau_s(sys: *const SpinchaosSystem, out: *mut f64) -> SpinchaosStatus {
    guard(|| {
        *deref_mut(out, "out")? = deref(sys, "sys")?.params.tau_s();
        Ok(())
    })
}

/// State from phase-space coordinates `(ρ₀, m, θ_s, θ_m)` (angles in radians).
#[no_mangle]
pub unsafe extern "C" fn spinchaos_state_from_phase(
    rho0: f64,
    m: f64,
    theta_s: f64,
    theta_m: f64,
    out: *mut *mut SpinchaosState,
) -> SpinchaosStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        let p = PhasePoint::new(rho0, m, theta_s, theta_m);
        if !p.is_physical() {
            return Err((SpinchaosStatus::OutOfRange, format!("({rho0}, {m}) is outside |m| <= 1 - rho0, 0 <= rho0 <= 1")));
        }
        *out = Box::into_raw(Box::new(SpinchaosState { state: p.to_spinor(), t: 0.0 }));
        Ok(())
    })
}

/// State from a name (`xR`, `xC`, `polar`) or `"rho0,m,ts,tm"` with angles
/// in units of π.
#[no_mangle]
pub unsafe extern "C" fn spinchaos_state_from_name(name: *const c_char, out: *mut *mut SpinchaosState) -> SpinchaosStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        if name.is_null() {
            return Err(null("name"));
        }
        let text = CStr::from_ptr(name).to_str().map_err(|_| (SpinchaosStatus::Parse, "name is not UTF-8".into()))?;
        *out = Box::into_raw(Box::new(SpinchaosState { state: parse_point(text).ffi()?, t: 0.0 }));
        Ok(())
    })
}

/// Haar-random state from `(seed, stream)`.
#[no_mangle]
pub unsafe extern "C" fn spinchaos_state_haar(seed: u64, stream: u64, out: *mut *mut SpinchaosState) -> SpinchaosStatus {
    guard(|| {
        let mut rng = RngSeed::new(seed, stream).rng();
        *deref_mut(out, "out")? = Box::into_raw(Box::new(SpinchaosState { state: sample_haar(&mut rng), t: 0.0 }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn spinchaos_state_free(state: *mut SpinchaosState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Writes `(ρ₀, m, θ_s, θ_m)` to `out[0..4]`.
#[no_mangle]
pub unsafe extern "C" fn spinchaos_state_phase(state: *const SpinchaosState, out: *mut f64) -> SpinchaosStatus {
    guard(|| {
        let s = deref(state, "state")?;
        let o = std::slice::from_raw_parts_mut(deref_mut(out, "out")?, 4);
        let p = s.state.to_phase();
        o.copy_from_slice(&[p.rho0, p.m, p.theta_s, p.theta_m]);
        Ok(())
    })
}

/// Writes interleaved real and imaginary parts of `(ζ₁, ζ₀, ζ₋₁)` to
/// `out[0..6]`.
#[no_mangle]
pub unsafe extern "C" fn spinchaos_state_amplitudes(state: *const SpinchaosState, out: *mut f64) -> SpinchaosStatus {
    guard(|| {
        let s = deref(state, "state")?;
        let o = std::slice::from_raw_parts_mut(deref_mut(out, "out")?, 6);
        for (k, z) in s.state.amps().iter().enumerate() {
            o[2 * k] = z.re;
            o[2 * k + 1] = z.im;
        }
        Ok(())
    })
}

/// Time of the state in seconds.
#[no_mangle]
pub unsafe extern "C" fn spinchaos_state_time(state: *const SpinchaosState, out: *mut f64) -> SpinchaosStatus {
    guard(|| {
        *deref_mut(out, "out")? = deref(state, "state")?.t;
        Ok(())
    })
}

/// Static energy `E/ε_s`.
#[no_mangle]
pub unsafe extern "C" fn spinchaos_energy(
    sys: *const SpinchaosSystem,
    state: *const SpinchaosState,
    out: *mut f64,
) -> SpinchaosStatus {
    guard(|| {
        *deref_mut(out, "out")? = energy_static(&deref(state, "state")?.state, &deref(sys, "sys")?.params);
        Ok(())
    })
}

/// Advances `state` in place by `n_steps` integrator steps.
#[no_mangle]
pub unsafe extern "C" fn spinchaos_evolve(
    sys: *const SpinchaosSystem,
    state: *mut SpinchaosState,
    n_steps: u64,
) -> SpinchaosStatus {
    guard(|| {
        let sys = deref(sys, "sys")?;
        let s = deref_mut(state, "state")?;
        let ham = Hamiltonian::new(&sys.params, &sys.drive);
        let mut prop = Propagator::new(ham, sys.integ, s.t, s.state);
        prop.advance(n_steps).ffi()?;
        s.state = prop.state;
        s.t = prop.time();
        Ok(())
    })
}

/// Largest Lyapunov exponent in units of `1/τ_s`, with its standard error.
#[no_mangle]
pub unsafe extern "C" fn spinchaos_lle(
    sys: *const SpinchaosSystem,
    state: *const SpinchaosState,
    d0: f64,
    reset_interval: f64,
    iterations: usize,
    seed: u64,
    lambda: *mut f64,
    stderr: *mut f64,
) -> SpinchaosStatus {
    guard(|| {
        let sys = deref(sys, "sys")?;
        let s = deref(state, "state")?;
        let (lambda, stderr) = (deref_mut(lambda, "lambda")?, deref_mut(stderr, "stderr")?);
        let cfg = LleConfig { d0, reset_interval, iterations };
        let r = benettin_lle(&s.state, &sys.params, &sys.drive, sys.integ, &cfg, RngSeed::new(seed, 0)).ffi()?;
        *lambda = r.lambda;
        *stderr = r.stderr;
        Ok(())
    })
}

/// Ensemble randomization around `center`. Writes the finite-size floor,
/// `R` and `τ_r/τ_s` (`INFINITY` when the floor is never reached).
#[no_mangle]
pub unsafe extern "C" fn spinchaos_randomize(
    sys: *const SpinchaosSystem,
    center: *const SpinchaosState,
    n_ens: usize,
    d_i: f64,
    t_final_tau: f64,
    seed: u64,
    floor: *mut f64,
    r: *mut f64,
    tau_r_over_tau_s: *mut f64,
) -> SpinchaosStatus {
    guard(|| {
        let sys = deref(sys, "sys")?;
        let c = deref(center, "center")?;
        let (floor, r, tau) = (deref_mut(floor, "floor")?, deref_mut(r, "r")?, deref_mut(tau_r_over_tau_s, "tau_r_over_tau_s")?);
        let cfg = RandomizationConfig { n_ens, d_i, t_final_tau, ..RandomizationConfig::default() };
        let ens = make_ensemble(&c.state, n_ens, d_i, RngSeed::new(seed, 0)).ffi()?;
        let res = randomization_run(&ens, &sys.params, &sys.drive, sys.integ, &cfg).ffi()?;
        *floor = res.floor;
        *r = res.r;
        *tau = res.tau_r_over_tau_s().unwrap_or(f64::INFINITY);
        Ok(())
    })
}

/// Drive amplitudes `ħD/ε_s` of the first `count` predicted dips for the
/// system's modulation frequency. `out` must hold `count` values.
#[no_mangle]
pub unsafe extern "C" fn spinchaos_predict_dips(sys: *const SpinchaosSystem, count: usize, out: *mut f64) -> SpinchaosStatus {
    guard(|| {
        let sys = deref(sys, "sys")?;
        if count == 0 {
            return Ok(());
        }
        let o = std::slice::from_raw_parts_mut(deref_mut(out, "out")?, count);
        for (slot, d) in o.iter_mut().zip(predict_dips(&sys.params, sys.drive.freq_hz, count).ffi()?) {
            *slot = d.hbar_d_over_eps;
        }
        Ok(())
    })
}

/// `J_n(x)` for `n ≤ 100`, `0 ≤ x ≤ 50`.
#[no_mangle]
pub unsafe extern "C" fn spinchaos_bessel_j(n: u32, x: f64, out: *mut f64) -> SpinchaosStatus {
    guard(|| {
        *deref_mut(out, "out")? = bessel_j(n as usize, x).ffi()?;
        Ok(())
    })
}
