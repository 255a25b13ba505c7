//! C ABI over `sqdrive`.
//!
//! Objects are opaque handles created by `sqd_*_new`-style calls and released
//! with the matching `*_free`. Every fallible call returns an [`SqdStatus`];
//! on failure [`sqd_last_error`] describes the error until the next call on
//! the same thread. Array arguments are caller-owned and must hold the stated
//! number of elements. Panics are caught and reported as `SQD_STATUS_PANIC`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ndarray::Array2;
use sqdrive::inference::{self, SsimConfig, SsimWindow};
use sqdrive::lindblad::DecoherenceParams;
use sqdrive::mbvd::{self, ComplexSpectrum, FitOptions, MbvdParams};
use sqdrive::measured::Measured;
use sqdrive::spectro::{self, EnsembleSpec, RabiSpectrogram, SimulationOptions};
use sqdrive::spin::{CouplingRatios, Transition};
use sqdrive::stress::{self, StiffnessConstants, SusceptibilitySet};
use sqdrive::Error;

/// Call outcome. Values 2-4 match the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SqdStatus {
    Ok = 0,
    NullPointer = 1,
    Validation = 2,
    Convergence = 3,
    Io = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SqdMode {
    Ghz3132 = 0,
    Ghz2732 = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SqdTransition {
    Plus = 0,
    Minus = 1,
}

/// Complex drive fields at one frequency, MHz.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SqdFields {
    pub magnetic_re: f64,
    pub magnetic_im: f64,
    pub acoustic_re: f64,
    pub acoustic_im: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqdSimParams {
    pub alpha: f64,
    pub beta: f64,
    pub phi_rad: f64,
    pub wavelength_um: f64,
    pub n_nv: u32,
    pub transition: SqdTransition,
    pub t2_us: f64,
}

/// Circuit parameters.
pub struct SqdCircuit {
    inner: MbvdParams,
}

/// Ensemble `rho_00`, pulse duration by drive frequency.
pub struct SqdSpectrogram {
    inner: RabiSpectrogram,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SqdStatus {
    match e.exit_code() {
        2 => SqdStatus::Validation,
        3 => SqdStatus::Convergence,
        4 => SqdStatus::Io,
        _ => SqdStatus::Validation,
    }
}

fn guard(f: impl FnOnce() -> Result<(), SqdStatus>) -> SqdStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SqdStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            SqdStatus::Panic
        }
    }
}

fn fail(e: Error) -> SqdStatus {
    set_error(e.to_string());
    status_of(&e)
}

fn null(what: &str) -> SqdStatus {
    set_error(format!("null pointer: {what}"));
    SqdStatus::NullPointer
}

unsafe fn slice<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], SqdStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

/// Library version, static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sqd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or NULL. Valid until the
/// next call.
#[no_mangle]
pub extern "C" fn sqd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// `params`: A (MHz/S), B (kHz/V), Rm (ohm), Lm (uH), Cm (fF), R0 (ohm),
/// C0 (pF), Rs (ohm).
#[no_mangle]
pub unsafe extern "C" fn sqd_circuit_new(params: *const f64, out: *mut *mut SqdCircuit) -> SqdStatus {
    guard(|| {
        let p = slice(params, 8, "params")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = MbvdParams::from_array(std::array::from_fn(|i| p[i]));
        inner.validate().map_err(fail)?;
        *out = Box::into_raw(Box::new(SqdCircuit { inner }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sqd_circuit_preset(mode: SqdMode, out: *mut *mut SqdCircuit) -> SqdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = match mode {
            SqdMode::Ghz3132 => MbvdParams::mode_3132(),
            SqdMode::Ghz2732 => MbvdParams::mode_2732(),
        };
        *out = Box::into_raw(Box::new(SqdCircuit { inner }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sqd_circuit_free(c: *mut SqdCircuit) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Copy the eight parameters into `out`.
#[no_mangle]
pub unsafe extern "C" fn sqd_circuit_params(c: *const SqdCircuit, out: *mut f64) -> SqdStatus {
    guard(|| {
        let c = c.as_ref().ok_or_else(|| null("circuit"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let v = c.inner.to_array();
        ptr::copy_nonoverlapping(v.as_ptr(), out, 8);
        Ok(())
    })
}

/// Closed-form resonance (GHz) and quality factor. Either output may be NULL.
#[no_mangle]
pub unsafe extern "C" fn sqd_circuit_resonance(
    c: *const SqdCircuit,
    f_r_ghz: *mut f64,
    q: *mut f64,
) -> SqdStatus {
    guard(|| {
        let c = c.as_ref().ok_or_else(|| null("circuit"))?;
        if let Some(f) = f_r_ghz.as_mut() {
            *f = c.inner.resonance_ghz();
        }
        if let Some(q) = q.as_mut() {
            *q = c.inner.quality_factor();
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sqd_circuit_fields(
    c: *const SqdCircuit,
    f_ghz: f64,
    out: *mut SqdFields,
) -> SqdStatus {
    guard(|| {
        let c = c.as_ref().ok_or_else(|| null("circuit"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let b = mbvd::magnetic_rabi(&c.inner, f_ghz).map_err(fail)?;
        let s = mbvd::acoustic_rabi(&c.inner, f_ghz).map_err(fail)?;
        *out = SqdFields {
            magnetic_re: b.re,
            magnetic_im: b.im,
            acoustic_re: s.re,
            acoustic_im: s.im,
        };
        Ok(())
    })
}

/// Fit both spectra sampled on the shared grid `freq_ghz[n]`. Phase arrays
/// may be NULL. `relative_residual` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn sqd_circuit_fit(
    freq_ghz: *const f64,
    magnetic_mhz: *const f64,
    magnetic_phase: *const f64,
    acoustic_mhz: *const f64,
    acoustic_phase: *const f64,
    n: usize,
    out: *mut *mut SqdCircuit,
    relative_residual: *mut f64,
) -> SqdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let f = slice(freq_ghz, n, "freq_ghz")?.to_vec();
        let spectrum = |amp: *const f64, phase: *const f64, what| -> Result<ComplexSpectrum, SqdStatus> {
            Ok(ComplexSpectrum {
                freq_ghz: f.clone(),
                amplitude_mhz: slice(amp, n, what)?.to_vec(),
                phase_rad: if phase.is_null() {
                    None
                } else {
                    Some(std::slice::from_raw_parts(phase, n).to_vec())
                },
            })
        };
        let b = spectrum(magnetic_mhz, magnetic_phase, "magnetic_mhz")?;
        let s = spectrum(acoustic_mhz, acoustic_phase, "acoustic_mhz")?;
        let fit = mbvd::fit(&b, &s, None, &FitOptions::default()).map_err(fail)?;
        if let Some(r) = relative_residual.as_mut() {
            *r = fit.relative_residual;
        }
        *out = Box::into_raw(Box::new(SqdCircuit { inner: fit.params }));
        Ok(())
    })
}

/// On-resonance ensemble spectrogram over `freq_ghz[n_freq]` x `tau_us[n_tau]`.
#[no_mangle]
pub unsafe extern "C" fn sqd_simulate(
    c: *const SqdCircuit,
    p: *const SqdSimParams,
    freq_ghz: *const f64,
    n_freq: usize,
    tau_us: *const f64,
    n_tau: usize,
    out: *mut *mut SqdSpectrogram,
) -> SqdStatus {
    guard(|| {
        let c = c.as_ref().ok_or_else(|| null("circuit"))?;
        let p = p.as_ref().ok_or_else(|| null("params"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let f = slice(freq_ghz, n_freq, "freq_ghz")?;
        let t = slice(tau_us, n_tau, "tau_us")?;
        let ratios = CouplingRatios::new(p.alpha, p.beta, p.phi_rad).map_err(fail)?;
        let ensemble = EnsembleSpec::new(p.n_nv as usize, p.wavelength_um).map_err(fail)?;
        let transition = match p.transition {
            SqdTransition::Plus => Transition::Plus,
            SqdTransition::Minus => Transition::Minus,
        };
        let opts = SimulationOptions {
            decoherence: DecoherenceParams::from_t2(p.t2_us).map_err(fail)?,
            ..Default::default()
        };
        let s = spectro::simulate_spectrogram(&c.inner, &ratios, &ensemble, transition, f, t, &opts)
            .map_err(fail)?;
        *out = Box::into_raw(Box::new(SqdSpectrogram { inner: s }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sqd_spectrogram_shape(
    s: *const SqdSpectrogram,
    n_tau: *mut usize,
    n_freq: *mut usize,
) -> SqdStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("spectrogram"))?;
        let (r, c) = s.inner.signal.dim();
        if let Some(v) = n_tau.as_mut() {
            *v = r;
        }
        if let Some(v) = n_freq.as_mut() {
            *v = c;
        }
        Ok(())
    })
}

/// Copy the signal row-major (tau rows, frequency columns) into `buf[len]`;
/// `len` must equal `n_tau * n_freq`.
#[no_mangle]
pub unsafe extern "C" fn sqd_spectrogram_copy(
    s: *const SqdSpectrogram,
    buf: *mut f64,
    len: usize,
) -> SqdStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("spectrogram"))?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let (r, c) = s.inner.signal.dim();
        if len != r * c {
            return Err(fail(Error::Validation(format!(
                "buffer holds {len} values, spectrogram has {}",
                r * c
            ))));
        }
        let out = std::slice::from_raw_parts_mut(buf, len);
        for ((i, j), v) in s.inner.signal.indexed_iter() {
            out[i * c + j] = *v;
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sqd_spectrogram_free(s: *mut SqdSpectrogram) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// SSIM of two row-major `rows x cols` images after min-max rescaling.
/// `gaussian` selects the 11x11, sigma 1.5 window; otherwise one global
/// window.
#[no_mangle]
pub unsafe extern "C" fn sqd_ssim(
    x: *const f64,
    y: *const f64,
    rows: usize,
    cols: usize,
    gaussian: bool,
    out: *mut f64,
) -> SqdStatus {
    guard(|| {
        let n = rows.checked_mul(cols).ok_or_else(|| fail(Error::Validation("size overflow".into())))?;
        let a = slice(x, n, "x")?;
        let b = slice(y, n, "y")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let to = |v: &[f64]| Array2::from_shape_vec((rows, cols), v.to_vec());
        let (a, b) = match (to(a), to(b)) {
            (Ok(a), Ok(b)) => (a, b),
            _ => return Err(fail(Error::Validation("bad image shape".into()))),
        };
        let cfg = SsimConfig {
            window: if gaussian {
                SsimWindow::gaussian_default()
            } else {
                SsimWindow::Global
            },
            ..Default::default()
        };
        *out = inference::ssim(&a, &b, &cfg).map_err(fail)?;
        Ok(())
    })
}

/// Stress susceptibilities `{a1, a2, b, c, b', c'}` (MHz/GPa) to strain
/// susceptibilities `{lambda_a1, ..., lambda_c'}` (GHz/strain) with the
/// default stiffness constants. NaN marks an absent coefficient in either
/// direction; pairs must be both present or both absent.
#[no_mangle]
pub unsafe extern "C" fn sqd_strain_susceptibility(stress_mhz_gpa: *const f64, out: *mut f64) -> SqdStatus {
    guard(|| {
        let s = slice(stress_mhz_gpa, 6, "stress_mhz_gpa")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let m = |v: f64| (!v.is_nan()).then(|| Measured::exact(v));
        let set = SusceptibilitySet {
            source: "ffi".into(),
            a1: m(s[0]),
            a2: m(s[1]),
            b: m(s[2]),
            c: m(s[3]),
            b_prime: m(s[4]),
            c_prime: m(s[5]),
        };
        let l = stress::stress_to_strain_susceptibility(&set, &StiffnessConstants::default())
            .map_err(fail)?;
        let vals = [
            l.lambda_a1,
            l.lambda_a2,
            l.lambda_b,
            l.lambda_c,
            l.lambda_b_prime,
            l.lambda_c_prime,
        ];
        let o = std::slice::from_raw_parts_mut(out, 6);
        for (o, v) in o.iter_mut().zip(vals) {
            *o = v.map_or(f64::NAN, |m| m.value);
        }
        Ok(())
    })
}
