use std::ffi::CStr;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use sqdrive::mbvd::{self, MbvdParams};
use sqdrive_ffi::*;

fn preset(mode: SqdMode) -> *mut SqdCircuit {
    let mut c = ptr::null_mut();
    assert_eq!(unsafe { sqd_circuit_preset(mode, &mut c) }, SqdStatus::Ok);
    c
}

fn last_error() -> String {
    let p = sqd_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn version_is_package_version() {
    let v = unsafe { CStr::from_ptr(sqd_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn circuit_round_trip_and_resonance() {
    let c = preset(SqdMode::Ghz3132);
    let mut p = [0.0; 8];
    assert_eq!(unsafe { sqd_circuit_params(c, p.as_mut_ptr()) }, SqdStatus::Ok);
    assert_eq!(p, MbvdParams::mode_3132().to_array());
    let (mut f, mut q) = (0.0, 0.0);
    assert_eq!(unsafe { sqd_circuit_resonance(c, &mut f, &mut q) }, SqdStatus::Ok);
    assert_eq!(f, MbvdParams::mode_3132().resonance_ghz());
    assert_eq!(q, MbvdParams::mode_3132().quality_factor());
    let mut fields = SqdFields::default();
    assert_eq!(unsafe { sqd_circuit_fields(c, f, &mut fields) }, SqdStatus::Ok);
    let b = mbvd::magnetic_rabi(&MbvdParams::mode_3132(), f).unwrap();
    assert_eq!((fields.magnetic_re, fields.magnetic_im), (b.re, b.im));
    unsafe { sqd_circuit_free(c) };
}

#[test]
fn invalid_parameters_report_validation() {
    let bad = [1.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0];
    let mut c = ptr::null_mut();
    assert_eq!(unsafe { sqd_circuit_new(bad.as_ptr(), &mut c) }, SqdStatus::Validation);
    assert!(c.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn null_arguments_are_refused() {
    let mut c = ptr::null_mut();
    assert_eq!(unsafe { sqd_circuit_new(ptr::null(), &mut c) }, SqdStatus::NullPointer);
    assert!(last_error().contains("params"));
    assert_eq!(
        unsafe { sqd_circuit_resonance(ptr::null(), ptr::null_mut(), ptr::null_mut()) },
        SqdStatus::NullPointer
    );
    unsafe { sqd_circuit_free(ptr::null_mut()) };
    unsafe { sqd_spectrogram_free(ptr::null_mut()) };
}

#[test]
fn error_is_cleared_by_next_success() {
    let mut c = ptr::null_mut();
    unsafe { sqd_circuit_new(ptr::null(), &mut c) };
    assert!(!sqd_last_error().is_null());
    let c = preset(SqdMode::Ghz2732);
    assert!(sqd_last_error().is_null());
    unsafe { sqd_circuit_free(c) };
}

#[test]
fn fit_through_abi_recovers_resonance() {
    let truth = MbvdParams::mode_2732();
    let fr = truth.resonance_ghz();
    let f: Vec<f64> = (0..121).map(|i| fr - 0.03 + 0.06 * i as f64 / 120.0).collect();
    let b: Vec<_> = f.iter().map(|&x| mbvd::magnetic_rabi(&truth, x).unwrap()).collect();
    let s: Vec<_> = f.iter().map(|&x| mbvd::acoustic_rabi(&truth, x).unwrap()).collect();
    let (ba, bp): (Vec<f64>, Vec<f64>) = b.iter().map(|z| (z.norm(), z.arg())).unzip();
    let (sa, sp): (Vec<f64>, Vec<f64>) = s.iter().map(|z| (z.norm(), z.arg())).unzip();
    let mut out = ptr::null_mut();
    let mut rel = f64::NAN;
    let st = unsafe {
        sqd_circuit_fit(
            f.as_ptr(),
            ba.as_ptr(),
            bp.as_ptr(),
            sa.as_ptr(),
            sp.as_ptr(),
            f.len(),
            &mut out,
            &mut rel,
        )
    };
    assert_eq!(st, SqdStatus::Ok, "{}", last_error());
    let mut got = 0.0;
    unsafe { sqd_circuit_resonance(out, &mut got, ptr::null_mut()) };
    assert!((got / fr - 1.0).abs() < 1e-6, "{got} vs {fr}");
    assert!(rel < 1e-6);
    unsafe { sqd_circuit_free(out) };
}

#[test]
fn spectrogram_copy_checks_length() {
    let c = preset(SqdMode::Ghz3132);
    let fr = MbvdParams::mode_3132().resonance_ghz();
    let f = [fr - 0.001, fr + 0.001];
    let tau: Vec<f64> = (0..21).map(|i| 0.1 * i as f64).collect();
    let p = SqdSimParams {
        alpha: 0.0,
        beta: 1.3,
        phi_rad: 0.0,
        wavelength_um: 5.7,
        n_nv: 6,
        transition: SqdTransition::Plus,
        t2_us: 2.0,
    };
    let mut s = ptr::null_mut();
    let st = unsafe { sqd_simulate(c, &p, f.as_ptr(), 2, tau.as_ptr(), 21, &mut s) };
    assert_eq!(st, SqdStatus::Ok, "{}", last_error());
    let (mut nt, mut nf) = (0, 0);
    unsafe { sqd_spectrogram_shape(s, &mut nt, &mut nf) };
    assert_eq!((nt, nf), (21, 2));
    let mut buf = vec![0.0; 42];
    assert_eq!(unsafe { sqd_spectrogram_copy(s, buf.as_mut_ptr(), 41) }, SqdStatus::Validation);
    assert_eq!(unsafe { sqd_spectrogram_copy(s, buf.as_mut_ptr(), 42) }, SqdStatus::Ok);
    assert!((buf[0] - 1.0).abs() < 1e-12 && (buf[1] - 1.0).abs() < 1e-12);
    assert!(buf.iter().all(|v| (-1e-9..=1.0 + 1e-9).contains(v)));
    unsafe {
        sqd_spectrogram_free(s);
        sqd_circuit_free(c);
    }
}

#[test]
fn ssim_identity_and_bad_alpha() {
    let x: Vec<f64> = (0..30).map(|i| (i as f64 * 0.7).sin()).collect();
    let mut v = 0.0;
    assert_eq!(unsafe { sqd_ssim(x.as_ptr(), x.as_ptr(), 5, 6, false, &mut v) }, SqdStatus::Ok);
    assert!((v - 1.0).abs() < 1e-12);
    let c = preset(SqdMode::Ghz3132);
    let p = SqdSimParams {
        alpha: 2.0,
        beta: 1.3,
        phi_rad: 0.0,
        wavelength_um: 5.7,
        n_nv: 6,
        transition: SqdTransition::Plus,
        t2_us: 2.0,
    };
    let f = [3.12];
    let t = [0.0, 0.1];
    let mut s = ptr::null_mut();
    assert_eq!(
        unsafe { sqd_simulate(c, &p, f.as_ptr(), 1, t.as_ptr(), 2, &mut s) },
        SqdStatus::Validation
    );
    assert!(last_error().contains("alpha"));
    unsafe { sqd_circuit_free(c) };
}

#[test]
fn strain_mapping_matches_core() {
    let nan = f64::NAN;
    let input = [nan, nan, nan, nan, -0.12, 0.66];
    let mut out = [0.0; 6];
    assert_eq!(
        unsafe { sqd_strain_susceptibility(input.as_ptr(), out.as_mut_ptr()) },
        SqdStatus::Ok
    );
    assert!(out[..4].iter().all(|v| v.is_nan()));
    assert!((out[4] - 0.65).abs() < 0.02 && (out[5] + 0.707).abs() < 0.018);
    let half = [nan, nan, nan, nan, -0.12, nan];
    assert_eq!(
        unsafe { sqd_strain_susceptibility(half.as_ptr(), out.as_mut_ptr()) },
        SqdStatus::Validation
    );
    assert!(last_error().contains("c_prime"));
}

fn header_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include")
}

#[test]
fn header_declares_every_export() {
    let h = std::fs::read_to_string(header_dir().join("sqdrive.h")).unwrap();
    for name in [
        "sqd_version",
        "sqd_last_error",
        "sqd_circuit_new",
        "sqd_circuit_preset",
        "sqd_circuit_free",
        "sqd_circuit_params",
        "sqd_circuit_resonance",
        "sqd_circuit_fields",
        "sqd_circuit_fit",
        "sqd_simulate",
        "sqd_spectrogram_shape",
        "sqd_spectrogram_copy",
        "sqd_spectrogram_free",
        "sqd_ssim",
        "sqd_strain_susceptibility",
        "typedef struct SqdCircuit SqdCircuit;",
        "SQD_STATUS_CONVERGENCE = 3",
    ] {
        assert!(h.contains(name), "header lacks {name}");
    }
}

/// Compile the C smoke program against the header and the static library.
#[test]
fn c_program_links_and_runs() {
    let exe_dir = std::env::current_exe().unwrap();
    let target = exe_dir.parent().unwrap().parent().unwrap();
    let lib = target.join("libsqdrive_ffi.a");
    assert!(lib.exists(), "static library not found at {}", lib.display());
    let tmp = tempfile::tempdir().unwrap();
    let bin = tmp.path().join("smoke");
    let src = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/c/smoke.c");
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(header_dir())
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .expect("cc not available");
    assert!(status.success(), "C compile/link failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "smoke program exited {:?}", out.status.code());
    let fr: f64 = String::from_utf8_lossy(&out.stdout).trim().parse().unwrap();
    assert!((fr - MbvdParams::mode_3132().resonance_ghz()).abs() < 1e-6);
}
