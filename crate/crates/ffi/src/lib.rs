//! C ABI for nvforge.
//!
//! Every function returns an `NvStatus`; on failure a message is available
//! from `nv_last_error` on the same thread. Objects are opaque handles that
//! must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nvforge::fit::{FitModel, FitResult, ModelKind};
use nvforge::implant::{BeamConfig, Species};
use nvforge::magnetometry::{self, EnsembleSpot};
use nvforge::sequence::{self, build_default, CurveMeta, DecayCurve, NoiseModel, SequenceKind};
use nvforge::spin::{self, MagneticField, NvAxis, SpinParams};
use nvforge::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NvStatus {
    Ok = 0,
    InvalidArgument = 1,
    Precondition = 2,
    OutOfRange = 3,
    Infeasible = 4,
    Numerical = 5,
    NotConverged = 6,
    Parse = 7,
    Io = 8,
    NullPointer = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NvSequence {
    Ramsey = 0,
    Hahn = 1,
    /// Uses the `n_pulses` argument.
    Cpmg = 2,
    Xy4 = 3,
    Xy8 = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NvModel {
    /// a·exp(−t/T₂*) + c
    Exp = 0,
    /// a·exp(−(t/T₂)^p) + c
    Stretched = 1,
    /// a·exp(−(t/T₁)^q) + c
    T1 = 2,
    /// Hyperfine-beat FID envelope
    Fid = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NvSpecies {
    Atomic = 0,
    Molecular = 1,
}

/// Ornstein–Uhlenbeck bath parameters.
pub struct NvNoise(NoiseModel);

/// Sampled coherence curve.
pub struct NvCurve(DecayCurve);

/// Fitted parameters with standard errors.
pub struct NvFit(FitResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> NvStatus {
    match e {
        Error::InvalidArgument(_) => NvStatus::InvalidArgument,
        Error::Precondition(_) => NvStatus::Precondition,
        Error::OutOfRange(_) => NvStatus::OutOfRange,
        Error::Infeasible(_) => NvStatus::Infeasible,
        Error::Numerical(_) | Error::RankDeficient(_) => NvStatus::Numerical,
        Error::NotConverged { .. } => NvStatus::NotConverged,
        Error::FitAtN { source, .. } => status_of(source),
        Error::Parse(_) | Error::Json(_) => NvStatus::Parse,
        Error::Io(_) => NvStatus::Io,
    }
}

enum Fail {
    Core(Error),
    Null(&'static str),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> NvStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NvStatus::Ok,
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer passed for {what}"));
            NvStatus::NullPointer
        }
        Err(_) => {
            set_error("internal panic".into());
            NvStatus::Panic
        }
    }
}

fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    unsafe { p.as_mut() }.ok_or(Fail::Null(what))
}

fn obj<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    unsafe { p.as_ref() }.ok_or(Fail::Null(what))
}

fn slice<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

fn boxed<T>(slot: *mut *mut T, value: T) -> Result<(), Fail> {
    let s = out(slot, "output handle")?;
    *s = Box::into_raw(Box::new(value));
    Ok(())
}

fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(unsafe { Box::from_raw(p) });
    }
}

fn kind_of(seq: NvSequence, n_pulses: u32) -> SequenceKind {
    match seq {
        NvSequence::Ramsey => SequenceKind::Ramsey,
        NvSequence::Hahn => SequenceKind::Hahn,
        NvSequence::Cpmg => SequenceKind::Cpmg { n: n_pulses },
        NvSequence::Xy4 => SequenceKind::Xy4,
        NvSequence::Xy8 => SequenceKind::Xy8,
    }
}

/// Message of the last failure on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn nv_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn nv_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Secular transition frequencies `D ∓ γ|B∥|` in Hz.
#[no_mangle]
pub extern "C" fn nv_transition_frequencies(
    zfs_hz: f64,
    gyromag_hz_per_t: f64,
    b_parallel_t: f64,
    f_minus_hz: *mut f64,
    f_plus_hz: *mut f64,
) -> NvStatus {
    guard(|| {
        let params = SpinParams { zfs_hz, gyromag_hz_per_t, ..SpinParams::default() };
        params.validate()?;
        if !b_parallel_t.is_finite() {
            return Err(Error::InvalidArgument("field must be finite".into()).into());
        }
        let (lo, hi) = spin::transition_frequencies(&params, b_parallel_t);
        *out(f_minus_hz, "f_minus_hz")? = lo;
        *out(f_plus_hz, "f_plus_hz")? = hi;
        Ok(())
    })
}

/// Exact transition frequencies of one NV axis (0..=3) in an arbitrary field.
#[no_mangle]
pub extern "C" fn nv_exact_frequencies(
    bx_t: f64,
    by_t: f64,
    bz_t: f64,
    axis: u32,
    f_low_hz: *mut f64,
    f_high_hz: *mut f64,
) -> NvStatus {
    guard(|| {
        let field = MagneticField::new(bx_t, by_t, bz_t)?;
        let axis = NvAxis::new(axis as usize)?;
        let (lo, hi) = spin::full_hamiltonian_frequencies(&SpinParams::default(), &field, axis);
        *out(f_low_hz, "f_low_hz")? = lo;
        *out(f_high_hz, "f_high_hz")? = hi;
        Ok(())
    })
}

/// OU bath with noise amplitude `b` (rad/s) and correlation time `tau_c` (s).
#[no_mangle]
pub extern "C" fn nv_noise_ou(b_rad_s: f64, tau_c_s: f64, noise: *mut *mut NvNoise) -> NvStatus {
    guard(|| {
        let n = NoiseModel::ou(b_rad_s, tau_c_s);
        n.validate()?;
        boxed(noise, NvNoise(n))
    })
}

/// Named bath preset, e.g. "paper-like".
#[no_mangle]
pub extern "C" fn nv_noise_preset(name: *const c_char, noise: *mut *mut NvNoise) -> NvStatus {
    guard(|| {
        if name.is_null() {
            return Err(Fail::Null("name"));
        }
        let name = unsafe { CStr::from_ptr(name) }
            .to_str()
            .map_err(|_| Error::InvalidArgument("preset name is not UTF-8".into()))?;
        boxed(noise, NvNoise(sequence::preset(name)?))
    })
}

/// Add a stretched T₁ channel `exp(−(t/T₁)^q)`.
#[no_mangle]
pub extern "C" fn nv_noise_set_t1(noise: *mut NvNoise, t1_s: f64, q: f64) -> NvStatus {
    guard(|| {
        let n = out(noise, "noise")?;
        let updated = n.0.with_t1(t1_s, q);
        updated.validate()?;
        n.0 = updated;
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn nv_noise_free(noise: *mut NvNoise) {
    free(noise)
}

/// Closed-form ensemble coherence at `n_times` total free-evolution times.
#[no_mangle]
pub extern "C" fn nv_simulate_analytic(
    sequence: NvSequence,
    n_pulses: u32,
    noise: *const NvNoise,
    times_s: *const f64,
    n_times: usize,
    curve: *mut *mut NvCurve,
) -> NvStatus {
    guard(|| {
        let seq = build_default(kind_of(sequence, n_pulses), 1e-6)?;
        let c = sequence::simulate_analytic(&seq, &obj(noise, "noise")?.0, slice(times_s, n_times, "times_s")?)?;
        boxed(curve, NvCurve(c))
    })
}

/// Monte-Carlo estimate; identical for a given seed at any thread count.
#[no_mangle]
pub extern "C" fn nv_simulate_mc(
    sequence: NvSequence,
    n_pulses: u32,
    noise: *const NvNoise,
    times_s: *const f64,
    n_times: usize,
    n_traj: usize,
    seed: u64,
    curve: *mut *mut NvCurve,
) -> NvStatus {
    guard(|| {
        let seq = build_default(kind_of(sequence, n_pulses), 1e-6)?;
        let times = slice(times_s, n_times, "times_s")?;
        let c = sequence::simulate_mc(&seq, &obj(noise, "noise")?.0, times, n_traj, seed)?;
        boxed(curve, NvCurve(c))
    })
}

/// Curve from caller-owned arrays; the data are copied.
#[no_mangle]
pub extern "C" fn nv_curve_new(
    times_s: *const f64,
    signal: *const f64,
    len: usize,
    curve: *mut *mut NvCurve,
) -> NvStatus {
    guard(|| {
        let t = slice(times_s, len, "times_s")?.to_vec();
        let s = slice(signal, len, "signal")?.to_vec();
        boxed(curve, NvCurve(DecayCurve::new(t, s, CurveMeta::default())?))
    })
}

#[no_mangle]
pub extern "C" fn nv_curve_len(curve: *const NvCurve, len: *mut usize) -> NvStatus {
    guard(|| {
        *out(len, "len")? = obj(curve, "curve")?.0.len();
        Ok(())
    })
}

/// Copy up to `cap` samples of times and signal into caller buffers.
#[no_mangle]
pub extern "C" fn nv_curve_data(
    curve: *const NvCurve,
    times_s: *mut f64,
    signal: *mut f64,
    cap: usize,
) -> NvStatus {
    guard(|| {
        let c = &obj(curve, "curve")?.0;
        let n = c.len().min(cap);
        if n == 0 {
            return Ok(());
        }
        if times_s.is_null() || signal.is_null() {
            return Err(Fail::Null("output buffers"));
        }
        unsafe {
            ptr::copy_nonoverlapping(c.times_s.as_ptr(), times_s, n);
            ptr::copy_nonoverlapping(c.signal.as_ptr(), signal, n);
        }
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn nv_curve_free(curve: *mut NvCurve) {
    free(curve)
}

/// Least-squares fit of `model`. A fit that runs out of iterations returns
/// `NotConverged` and still hands back its best parameters in `result`.
#[no_mangle]
pub extern "C" fn nv_fit(curve: *const NvCurve, model: NvModel, pin_offset: bool, result: *mut *mut NvFit) -> NvStatus {
    let mut best: Option<FitResult> = None;
    let status = guard(|| {
        let kind = match model {
            NvModel::Exp => ModelKind::ExpT2Star,
            NvModel::Stretched => ModelKind::StretchedExp,
            NvModel::T1 => ModelKind::T1Stretched,
            NvModel::Fid => ModelKind::FidBeats,
        };
        let mut m = FitModel::new(kind);
        if pin_offset {
            m = m.pinned_offset();
        }
        out(result, "result")?;
        match nvforge::fit::fit(&obj(curve, "curve")?.0, &m, None) {
            Ok(r) => {
                best = Some(r);
                Ok(())
            }
            Err(Error::NotConverged { iterations, best: b }) => {
                best = Some((*b).clone());
                Err(Error::NotConverged { iterations, best: b }.into())
            }
            Err(e) => Err(e.into()),
        }
    });
    if let (Some(r), Some(slot)) = (best, unsafe { result.as_mut() }) {
        *slot = Box::into_raw(Box::new(NvFit(r)));
    }
    status
}

/// Value and standard error of a named parameter ("t2", "p", "t2_star", ...).
#[no_mangle]
pub extern "C" fn nv_fit_param(fit: *const NvFit, name: *const c_char, value: *mut f64, stderr: *mut f64) -> NvStatus {
    guard(|| {
        let f = &obj(fit, "fit")?.0;
        if name.is_null() {
            return Err(Fail::Null("name"));
        }
        let key = unsafe { CStr::from_ptr(name) }.to_string_lossy();
        let v = f
            .params
            .get(key.as_ref())
            .ok_or_else(|| Error::InvalidArgument(format!("no parameter '{key}' in a {} fit", f.model)))?;
        *out(value, "value")? = *v;
        if let Some(e) = unsafe { stderr.as_mut() } {
            *e = f.stderr.get(key.as_ref()).copied().unwrap_or(f64::NAN);
        }
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn nv_fit_residual_rms(fit: *const NvFit, rms: *mut f64) -> NvStatus {
    guard(|| {
        *out(rms, "rms")? = obj(fit, "fit")?.0.residual_rms;
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn nv_fit_free(fit: *mut NvFit) {
    free(fit)
}

/// Van der Pauw sheet resistance in ohm per square.
#[no_mangle]
pub extern "C" fn nv_van_der_pauw(ra_ohm: f64, rb_ohm: f64, rs_ohm_sq: *mut f64) -> NvStatus {
    guard(|| {
        *out(rs_ohm_sq, "rs_ohm_sq")? = nvforge::scan::van_der_pauw(ra_ohm, rb_ohm)?.sheet_resistance_ohm_sq;
        Ok(())
    })
}

/// Exposure time for a fluence, and the whole chopper pulses needed when
/// `chopper_pulse_s > 0` (otherwise `pulses` is set to 0).
#[no_mangle]
pub extern "C" fn nv_dose_to_time(
    energy_ev: f64,
    current_a: f64,
    diameter_m: f64,
    chopper_pulse_s: f64,
    species: NvSpecies,
    dose_cm2: f64,
    duration_s: *mut f64,
    pulses: *mut u64,
) -> NvStatus {
    guard(|| {
        let beam = BeamConfig {
            energy_ev,
            current_a,
            diameter_m,
            chopper_pulse_s: (chopper_pulse_s > 0.0).then_some(chopper_pulse_s),
            species: match species {
                NvSpecies::Atomic => Species::N15Atomic,
                NvSpecies::Molecular => Species::N15Molecular,
            },
        };
        let e = nvforge::implant::dose_to_time(&beam, dose_cm2)?;
        *out(duration_s, "duration_s")? = e.duration_s;
        if let Some(p) = unsafe { pulses.as_mut() } {
            *p = e.pulses.unwrap_or(0);
        }
        Ok(())
    })
}

/// DC and AC shot-noise sensitivities in T/√Hz.
#[no_mangle]
pub extern "C" fn nv_sensitivity(
    concentration_ppm: f64,
    detection_volume_m3: f64,
    photon_rate_per_center_hz: f64,
    contrast: f64,
    t2_star_s: f64,
    t2_dd_s: f64,
    eta_dc: *mut f64,
    eta_ac: *mut f64,
) -> NvStatus {
    guard(|| {
        let spot = EnsembleSpot { concentration_ppm, detection_volume_m3, photon_rate_per_center_hz, contrast };
        let r = magnetometry::sensitivity_report(&spot, t2_star_s, t2_dd_s)?;
        *out(eta_dc, "eta_dc")? = r.eta_dc_t_per_rthz;
        *out(eta_ac, "eta_ac")? = r.eta_ac_t_per_rthz;
        Ok(())
    })
}
