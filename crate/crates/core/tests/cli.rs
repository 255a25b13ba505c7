use std::path::Path;
use std::process::{Command, Output};

use sqdrive::io;

fn sqdrive(out_dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sqdrive"))
        .arg("--out-dir")
        .arg(out_dir)
        .args(args)
        .env_remove("SQDRIVE_CONFIG")
        .env_remove("SQDRIVE_MODE")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap()
}

#[test]
fn missing_input_names_the_file() {
    let d = tempfile::tempdir().unwrap();
    let o = sqdrive(
        d.path(),
        &["fit-mbvd", "--lead-sq", "no_such_lead.csv", "--resonator-dq", "x.csv"],
    );
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("no_such_lead.csv"), "{}", stderr(&o));
}

#[test]
fn synth_then_fit_round_trips() {
    let d = tempfile::tempdir().unwrap();
    let o = sqdrive(d.path(), &["--seed", "5", "synth", "--alpha", "0.5", "--phi", "10", "--noise", "0.01"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let lead = d.path().join("lead_sq.csv");
    let dq = d.path().join("resonator_dq.csv");
    let o = sqdrive(
        d.path(),
        &["fit-mbvd", "--lead-sq", lead.to_str().unwrap(), "--resonator-dq", dq.to_str().unwrap()],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let p = io::read_params(&d.path().join("mbvd_params.json")).unwrap();
    let truth = sqdrive::mbvd::MbvdParams::mode_3132().resonance_ghz();
    assert!((p.resonance_ghz() / truth - 1.0).abs() < 1e-3);
    for f in ["mbvd_model_amplitude.csv", "mbvd_model_phase.csv", "fit_report.json", "plots.json"] {
        assert!(d.path().join(f).exists(), "{f}");
    }

    let o = sqdrive(d.path(), &["plot"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let svg = std::fs::read_to_string(d.path().join("mbvd_amplitude.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("polyline"));
    assert!(d.path().join("spectrogram.svg").exists());
}

#[test]
fn window_excluding_resonance_is_refused() {
    let d = tempfile::tempdir().unwrap();
    assert!(sqdrive(d.path(), &["synth", "--alpha", "0", "--phi", "0"]).status.success());
    let lead = d.path().join("lead_sq.csv");
    let dq = d.path().join("resonator_dq.csv");
    let o = sqdrive(
        d.path(),
        &[
            "fit-mbvd",
            "--lead-sq",
            lead.to_str().unwrap(),
            "--resonator-dq",
            dq.to_str().unwrap(),
            "--window",
            "3.125",
            "3.15",
        ],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("window"), "{}", stderr(&o));
    let report: serde_json::Value = io::read_json(&d.path().join("fit_report.json")).unwrap();
    assert_eq!(report["status"], "failed");
}

#[test]
fn unfittable_spectra_exit_with_convergence_code() {
    let d = tempfile::tempdir().unwrap();
    let mut rng = sqdrive::rng::NoiseSource::new(11);
    let f: Vec<f64> = (0..60).map(|i| 3.10 + 0.001 * i as f64).collect();
    let mut amp: Vec<f64> = f.iter().map(|_| 1.0 + rng.uniform()).collect();
    amp[30] = 3.0;
    let s = sqdrive::mbvd::ComplexSpectrum::amplitude_only(f, amp).unwrap();
    let p = d.path().join("noise.csv");
    io::write_spectrum(&p, &s).unwrap();
    let o = sqdrive(
        d.path(),
        &["fit-mbvd", "--lead-sq", p.to_str().unwrap(), "--resonator-dq", p.to_str().unwrap(), "--window", "3.0", "3.2"],
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn synth_is_reproducible_per_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    let args = |seed: &'static str| ["--seed", seed, "--mode", "2.732GHz", "synth", "--alpha", "0.5", "--phi", "-20", "--noise", "0.02"];
    assert!(sqdrive(a.path(), &args("9")).status.success());
    assert!(sqdrive(b.path(), &args("9")).status.success());
    assert!(sqdrive(c.path(), &args("10")).status.success());
    for f in ["lead_sq.csv", "resonator_dq.csv", "spectrogram.csv", "truth.json"] {
        assert_eq!(read(&a.path().join(f)), read(&b.path().join(f)), "{f}");
    }
    assert_ne!(read(&a.path().join("spectrogram.csv")), read(&c.path().join("spectrogram.csv")));
}

#[test]
fn simulate_is_deterministic_and_csvs_round_trip() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = sqdrive(d.path(), &["simulate", "--alpha", "0.5", "--phi", "-60"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["spectrogram.csv", "fft.csv"] {
        assert_eq!(read(&a.path().join(f)), read(&b.path().join(f)), "{f}");
    }
    let s = io::read_spectrogram(&a.path().join("spectrogram.csv")).unwrap();
    let again = a.path().join("again.csv");
    io::write_spectrogram(&again, &s).unwrap();
    assert_eq!(read(&again), read(&a.path().join("spectrogram.csv")));
    let f = io::read_fft(&a.path().join("fft.csv")).unwrap();
    io::write_fft(&again, &f).unwrap();
    assert_eq!(read(&again), read(&a.path().join("fft.csv")));
}

#[test]
fn noiseless_scan_on_a_coarse_grid_hits_the_truth() {
    let d = tempfile::tempdir().unwrap();
    assert!(sqdrive(d.path(), &["synth", "--alpha", "0.5", "--phi", "0"]).status.success());
    let data = d.path().join("spectrogram.csv");
    let truth = d.path().join("truth.json");
    let o = sqdrive(
        d.path(),
        &[
            "scan",
            "--data",
            data.to_str().unwrap(),
            "--params",
            truth.to_str().unwrap(),
            "--alpha-steps",
            "7",
            "--phi-steps",
            "9",
            "--no-refine",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let r: serde_json::Value = io::read_json(&d.path().join("scan_report.json")).unwrap();
    assert_eq!(r["peak"]["alpha"], 0.5);
    assert_eq!(r["peak"]["phi_deg"], 0.0);
    assert!(stdout(&o).contains("b' = sqrt(2)"));
    io::read_matrix(&d.path().join("ssim_map.csv"), io::SSIM_CORNER).unwrap();
}

#[test]
fn single_point_alpha_grid_is_refused() {
    let d = tempfile::tempdir().unwrap();
    assert!(sqdrive(d.path(), &["synth", "--alpha", "0.5", "--phi", "0"]).status.success());
    let data = d.path().join("spectrogram.csv");
    let o = sqdrive(d.path(), &["scan", "--data", data.to_str().unwrap(), "--alpha-steps", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("two points"), "{}", stderr(&o));
}

#[test]
fn map_strain_theory_row() {
    let d = tempfile::tempdir().unwrap();
    let o = sqdrive(d.path(), &["map-strain", "--row", "theory"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("lambda_b_prime") && out.contains("0.648"), "{out}");
    assert!(out.contains("-0.702"), "{out}");
    assert!(out.contains("warning: sign convention"), "{out}");
    let r: sqdrive::pipeline::StrainReport = io::read_json(&d.path().join("strain_coefficients.json")).unwrap();
    let bp = r.comparison.iter().find(|c| c.name == "lambda_b_prime").unwrap();
    assert!(!bp.sign_mismatch);
    assert!(r.comparison.iter().any(|c| c.name == "lambda_b" && c.sign_mismatch));
}

#[test]
fn map_strain_zero_set_and_missing_coefficient() {
    let d = tempfile::tempdir().unwrap();
    let zero = d.path().join("zero.json");
    std::fs::write(
        &zero,
        r#"{"source": "zero", "a1": {"value": 0, "sigma": 0}, "a2": {"value": 0, "sigma": 0},
            "b": {"value": 0, "sigma": 0}, "c": {"value": 0, "sigma": 0}}"#,
    )
    .unwrap();
    let o = sqdrive(d.path(), &["map-strain", "--input", zero.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r: sqdrive::pipeline::StrainReport = io::read_json(&d.path().join("strain_coefficients.json")).unwrap();
    assert_eq!(r.comparison.len(), 4);
    assert!(r.comparison.iter().all(|c| c.computed.value == 0.0));

    let half = d.path().join("half.json");
    std::fs::write(&half, r#"{"source": "x", "b_prime": {"value": -0.12, "sigma": 0.01}}"#).unwrap();
    let o = sqdrive(d.path(), &["map-strain", "--input", half.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("c_prime"), "{}", stderr(&o));
}

#[test]
fn config_file_and_environment() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("cfg.json");
    let params = d.path().join("params.json");
    io::write_json(&params, &sqdrive::mbvd::MbvdParams::mode_3132()).unwrap();
    std::fs::write(&cfg, r#"{"mode": "custom", "transition": "plus"}"#).unwrap();
    let o = sqdrive(
        d.path(),
        &["--config", cfg.to_str().unwrap(), "simulate", "--params", params.to_str().unwrap(), "--alpha", "0", "--phi", "0"],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("wavelength"), "{}", stderr(&o));

    std::fs::write(&cfg, r#"{"mode": "3.132GHz", "wavelenght_um": 5.7}"#).unwrap();
    let o = sqdrive(d.path(), &["--config", cfg.to_str().unwrap(), "map-strain", "--row", "theory"]);
    assert_eq!(o.status.code(), Some(2));

    let out = d.path().join("from_env");
    let o = Command::new(env!("CARGO_BIN_EXE_sqdrive"))
        .args(["map-strain", "--row", "barson"])
        .env("SQDRIVE_OUT_DIR", &out)
        .env_remove("SQDRIVE_CONFIG")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("strain_coefficients.json").exists());
}
