use std::f64::consts::PI;

use nalgebra::{Matrix4, Vector4};
use sqdrive::mbvd::{self, ComplexSpectrum, FitOptions, MbvdParams};
use sqdrive::rng::NoiseSource;
use sqdrive::spin::C64;

/// Nodal analysis of the circuit with a 1 V source at node 1.
/// Nodes: 2 after Rs, 3 between Rm and Lm, 4 between Lm and Cm, 5 between
/// R0 and C0. Returns (input current, voltage across Cm).
fn nodal(p: &MbvdParams, f_ghz: f64) -> (C64, C64) {
    let w = 2.0 * PI * f_ghz * 1e9;
    let j = C64::new(0.0, 1.0);
    let g_rs = C64::from(1.0 / p.rs_ohm);
    let g_rm = C64::from(1.0 / p.rm_ohm);
    let g_lm = 1.0 / (j * w * p.lm_uh * 1e-6);
    let g_cm = j * w * p.cm_ff * 1e-15;
    let g_r0 = C64::from(1.0 / p.r0_ohm);
    let g_c0 = j * w * p.c0_pf * 1e-12;
    let z = C64::from(0.0);
    // unknowns V2..V5
    let a = Matrix4::new(
        g_rs + g_rm + g_r0, -g_rm, z, -g_r0,
        -g_rm, g_rm + g_lm, -g_lm, z,
        z, -g_lm, g_lm + g_cm, z,
        -g_r0, z, z, g_r0 + g_c0,
    );
    let b = Vector4::new(g_rs, z, z, z);
    let v = a.lu().solve(&b).expect("nonsingular");
    ((C64::from(1.0) - v[0]) * g_rs, v[2])
}

#[test]
fn closed_forms_match_nodal_analysis() {
    for p in [MbvdParams::mode_3132(), MbvdParams::mode_2732()] {
        let fr = p.resonance_ghz();
        for k in -40..=40 {
            let f = fr * (1.0 + 0.0005 * k as f64);
            let (i, v_cm) = nodal(&p, f);
            let y = mbvd::admittance(&p, f).unwrap();
            let v = mbvd::motional_voltage(&p, f, 1.0).unwrap();
            assert!((y - i).norm() <= 1e-10 * i.norm(), "Y at {f}");
            assert!((v - v_cm).norm() <= 1e-10 * v_cm.norm(), "V at {f}");
            let b = mbvd::magnetic_rabi(&p, f).unwrap();
            assert!((b - i * p.a_mhz_per_s).norm() <= 1e-10 * b.norm());
            let s = mbvd::acoustic_rabi(&p, f).unwrap();
            assert!((s - v_cm * p.b_khz_per_v * 1e-3).norm() <= 1e-10 * s.norm());
        }
    }
}

fn noisy_spectra(p: &MbvdParams, seed: u64, level: f64) -> (ComplexSpectrum, ComplexSpectrum) {
    let fr = p.resonance_ghz();
    let f: Vec<f64> = (0..121).map(|i| fr - 0.03 + 0.06 * i as f64 / 120.0).collect();
    let mut rng = NoiseSource::new(seed);
    sqdrive::pipeline::synth_spectra(p, &f, level, &mut rng).unwrap()
}

fn rms_rel(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = a.iter().map(|x| x * x).sum();
    (num / den).sqrt()
}

#[test]
fn fit_recovers_curves_with_one_percent_noise() {
    for p in [MbvdParams::mode_3132(), MbvdParams::mode_2732()] {
        for seed in 0..3 {
            let (b, s) = noisy_spectra(&p, seed, 0.01);
            let fit = mbvd::fit(&b, &s, None, &FitOptions::default()).unwrap();
            let q = fit.params;
            assert!((q.resonance_ghz() / p.resonance_ghz() - 1.0).abs() < 1e-3);
            let f = &b.freq_ghz;
            let curve = |pp: &MbvdParams, g: fn(&MbvdParams, f64) -> sqdrive::Result<C64>| {
                f.iter().map(|&x| g(pp, x).unwrap()).collect::<Vec<C64>>()
            };
            for g in [mbvd::magnetic_rabi, mbvd::acoustic_rabi] {
                let (t, m) = (curve(&p, g), curve(&q, g));
                let ta: Vec<f64> = t.iter().map(|z| z.norm()).collect();
                let ma: Vec<f64> = m.iter().map(|z| z.norm()).collect();
                assert!(rms_rel(&ta, &ma) < 0.01);
                let dphi = t
                    .iter()
                    .zip(&m)
                    .map(|(x, y)| (y / x).arg().powi(2))
                    .sum::<f64>()
                    / t.len() as f64;
                assert!(dphi.sqrt() < 0.01, "phase rms {}", dphi.sqrt());
            }
            // parameters within a few reported sigma, away from the gauge
            let sig = fit.param_sigma();
            let (tv, qv) = (p.to_array(), q.to_array());
            let gauge: Vec<f64> = fit.gauge_direction.clone();
            let d: Vec<f64> = (0..8).map(|i| qv[i].ln() - tv[i].ln()).collect();
            let along: f64 = d.iter().zip(&gauge).map(|(a, b)| a * b).sum();
            for i in 0..8 {
                let off_gauge = d[i] - along * gauge[i];
                let rel_sigma = sig[i] / qv[i];
                assert!(off_gauge.abs() < 5.0 * rel_sigma + 1e-9, "param {i}: {off_gauge} vs {rel_sigma}");
            }
        }
    }
}

#[test]
fn amplitude_only_fit_still_finds_resonance() {
    let p = MbvdParams::mode_3132();
    let (mut b, mut s) = noisy_spectra(&p, 7, 0.0);
    b.phase_rad = None;
    s.phase_rad = None;
    let fit = mbvd::fit(&b, &s, None, &FitOptions::default()).unwrap();
    assert!((fit.params.resonance_ghz() / p.resonance_ghz() - 1.0).abs() < 1e-3);
    assert!(fit.phase_residuals_b.is_none());
}

#[test]
fn window_without_resonance_is_refused() {
    let p = MbvdParams::mode_3132();
    let (b, s) = noisy_spectra(&p, 1, 0.0);
    let fr = p.resonance_ghz();
    let (bw, sw) = (b.window(fr + 0.005, fr + 0.03), s.window(fr + 0.005, fr + 0.03));
    match mbvd::fit(&bw, &sw, None, &FitOptions::default()) {
        Err(sqdrive::Error::Validation(m)) => assert!(m.contains("window"), "{m}"),
        other => panic!("expected refusal, got {other:?}"),
    }
}
