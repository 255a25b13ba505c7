//! The subcommands behind the `sqdrive` binary. Each one reads its inputs,
//! writes its artifacts into the output directory, re-reads what it wrote and
//! returns a short text report.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{self, ScanPeak, ScanResult, ScanUncertainty, SsimGrid};
use crate::io::{
    self, Figure, GridSpec, Matrix, Mode, PlotKind, PlotManifest, RunConfig, Table,
};
use crate::mbvd::{self, FitOptions, ComplexSpectrum, MbvdParams, PARAM_NAMES};
use crate::measured::Measured;
use crate::rng::NoiseSource;
use crate::spectro::{self, QEstimate, SimulationOptions, Tracking};
use crate::spin::{CouplingRatios, SpinConstants, Transition};
use crate::stress::{self, StiffnessConstants, StrainSusceptibilities, SusceptibilitySet};

pub const LEAD_SQ_FILE: &str = "lead_sq.csv";
pub const RESONATOR_DQ_FILE: &str = "resonator_dq.csv";
pub const SPECTROGRAM_FILE: &str = "spectrogram.csv";
pub const FFT_FILE: &str = "fft.csv";
pub const PARAMS_FILE: &str = "mbvd_params.json";
pub const FIT_REPORT_FILE: &str = "fit_report.json";
pub const SCAN_FILE: &str = "scan.json";
pub const SCAN_REPORT_FILE: &str = "scan_report.json";
pub const TRUTH_FILE: &str = "truth.json";
pub const STRAIN_FILE: &str = "strain_coefficients.json";

/// Samples per synthetic field spectrum.
const SYNTH_SPECTRUM_POINTS: usize = 121;
/// Samples per emitted model curve.
const MODEL_CURVE_POINTS: usize = 401;

pub struct Context {
    pub config: RunConfig,
    pub out_dir: PathBuf,
}

impl Context {
    fn out(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn sim_options(&self) -> Result<SimulationOptions> {
        Ok(SimulationOptions {
            constants: SpinConstants::default(),
            decoherence: self.config.decoherence()?,
            tracking: Tracking::OnResonance,
            propagation: self.config.propagation,
            ..Default::default()
        })
    }

    /// Explicit path, then config path, then the mode preset.
    fn circuit(&self, explicit: Option<&Path>) -> Result<MbvdParams> {
        match explicit.or(self.config.paths.params.as_deref()) {
            Some(p) => io::read_params(p),
            None => self.config.circuit_preset().ok_or_else(|| {
                Error::validation("custom mode needs circuit parameters (--params)")
            }),
        }
    }
}

fn required<'a>(explicit: Option<&'a Path>, fallback: Option<&'a Path>, what: &str) -> Result<&'a Path> {
    explicit
        .or(fallback)
        .ok_or_else(|| Error::validation(format!("no {what} file given")))
}

fn line(id: &str, file: &str, x: &str, y: &str) -> Figure {
    Figure {
        id: id.into(),
        data_file: file.into(),
        kind: PlotKind::Line,
        x_label: x.into(),
        y_label: y.into(),
        z_label: None,
    }
}

fn heatmap(id: &str, file: &str, x: &str, y: &str, z: &str) -> Figure {
    Figure {
        id: id.into(),
        data_file: file.into(),
        kind: PlotKind::Heatmap,
        x_label: x.into(),
        y_label: y.into(),
        z_label: Some(z.into()),
    }
}

// fit-mbvd

#[derive(Debug, Clone, Default)]
pub struct FitArgs {
    pub lead_sq: Option<PathBuf>,
    pub resonator_dq: Option<PathBuf>,
    pub window_ghz: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub window_ghz: [f64; 2],
    pub samples: [usize; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<MbvdParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param_sigma: Option<Vec<(String, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_r_ghz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_a_ghz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_circuit: Option<f64>,
    /// Lorentzian linewidth of the DQ spectrum.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_linewidth: Option<QEstimate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<mbvd::MbvdFit>,
}

pub fn cmd_fit_mbvd(ctx: &Context, args: &FitArgs) -> Result<String> {
    let cfg = &ctx.config;
    let lead_path = required(args.lead_sq.as_deref(), cfg.paths.lead_sq.as_deref(), "lead-SQ spectrum")?;
    let dq_path = required(
        args.resonator_dq.as_deref(),
        cfg.paths.resonator_dq.as_deref(),
        "resonator-DQ spectrum",
    )?;
    let lead = io::read_spectrum(lead_path)?;
    let dq = io::read_spectrum(dq_path)?;
    let window = match args.window_ghz {
        Some(w) if w[1] > w[0] => w,
        Some(w) => return Err(Error::validation(format!("fit window [{}, {}] is empty", w[0], w[1]))),
        None => cfg.fit_window()?,
    };
    let lead_w = lead.window(window[0], window[1]);
    let dq_w = dq.window(window[0], window[1]);

    let mut report = FitReport {
        status: "failed".into(),
        error: None,
        window_ghz: window,
        samples: [lead_w.len(), dq_w.len()],
        params: None,
        param_sigma: None,
        f_r_ghz: None,
        f_a_ghz: None,
        q_circuit: None,
        q_linewidth: spectro::q_from_linewidth(&dq_w).ok(),
        fit: None,
    };
    let outcome = mbvd::fit(&lead_w, &dq_w, None, &FitOptions::default()).and_then(|f| {
        let fr = f.params.resonance_ghz();
        if fr < window[0] || fr > window[1] {
            return Err(Error::Convergence {
                what: "mBVD fit",
                detail: format!("fitted resonance {fr} GHz lies outside the window"),
            });
        }
        Ok(f)
    });
    let fit = match outcome {
        Ok(f) => f,
        Err(e) => {
            report.error = Some(e.to_string());
            io::write_json(&ctx.out(FIT_REPORT_FILE), &report)?;
            return Err(e);
        }
    };
    let derived = mbvd::derived_quantities(&fit.params).ok();
    report.status = "ok".into();
    report.params = Some(fit.params);
    report.param_sigma = Some(
        PARAM_NAMES
            .iter()
            .zip(fit.param_sigma())
            .map(|(n, s)| (n.to_string(), s))
            .collect(),
    );
    report.f_r_ghz = Some(fit.params.resonance_ghz());
    report.f_a_ghz = derived.map(|d| d.f_a_ghz);
    report.q_circuit = Some(fit.params.quality_factor());
    report.fit = Some(fit.clone());

    io::write_json(&ctx.out(PARAMS_FILE), &fit.params)?;
    io::write_json(&ctx.out(FIT_REPORT_FILE), &report)?;

    let f = inference::linspace(window[0], window[1], MODEL_CURVE_POINTS);
    let mut amp = Vec::with_capacity(f.len());
    let mut phase = Vec::with_capacity(f.len());
    let (mut pb, mut ps) = (Vec::new(), Vec::new());
    for &x in &f {
        let b = mbvd::magnetic_rabi(&fit.params, x)?;
        let s = mbvd::acoustic_rabi(&fit.params, x)?;
        amp.push(vec![x, b.norm(), s.norm()]);
        pb.push(b.arg());
        ps.push(s.arg());
    }
    let (pb, ps) = (mbvd::unwrap_phase(&pb), mbvd::unwrap_phase(&ps));
    for (i, &x) in f.iter().enumerate() {
        phase.push(vec![x, pb[i], ps[i]]);
    }
    io::write_table(
        &ctx.out("mbvd_model_amplitude.csv"),
        &Table {
            header: vec!["freq_GHz".into(), "lead_sq_MHz".into(), "resonator_dq_MHz".into()],
            rows: amp,
        },
    )?;
    io::write_table(
        &ctx.out("mbvd_model_phase.csv"),
        &Table {
            header: vec!["freq_GHz".into(), "lead_sq_rad".into(), "resonator_dq_rad".into()],
            rows: phase,
        },
    )?;
    io::write_table(
        &ctx.out("mbvd_residuals.csv"),
        &Table {
            header: vec!["freq_GHz".into(), "lead_sq_MHz".into(), "resonator_dq_MHz".into()],
            rows: (0..lead_w.len().min(dq_w.len()))
                .filter(|&i| lead_w.freq_ghz[i] == dq_w.freq_ghz[i])
                .map(|i| vec![lead_w.freq_ghz[i], fit.residuals_b[i], fit.residuals_sigma[i]])
                .collect(),
        },
    )?;
    PlotManifest::update(
        &ctx.out_dir,
        vec![
            line("mbvd_amplitude", "mbvd_model_amplitude.csv", "freq_GHz", "Rabi field (MHz)"),
            line("mbvd_phase", "mbvd_model_phase.csv", "freq_GHz", "phase (rad)"),
            line("mbvd_residuals", "mbvd_residuals.csv", "freq_GHz", "model - data (MHz)"),
        ],
    )?;
    io::read_params(&ctx.out(PARAMS_FILE))?;

    let mut text = format!(
        "f_r = {:.6} GHz, Q = {:.0}, relative residual {:.2}%\n",
        fit.params.resonance_ghz(),
        fit.params.quality_factor(),
        100.0 * fit.relative_residual
    );
    if let Some(q) = report.q_linewidth {
        text.push_str(&format!("DQ linewidth: Q = {:.0} (FWHM {:.3} MHz)\n", q.q, 1e3 * q.fwhm_ghz));
    }
    for (n, (v, s)) in PARAM_NAMES
        .iter()
        .zip(fit.params.to_array().iter().zip(fit.param_sigma()))
    {
        text.push_str(&format!("  {n:12} {v:.6e} ± {s:.1e}\n"));
    }
    Ok(text)
}

// simulate

#[derive(Debug, Clone, Default)]
pub struct SimulateArgs {
    pub params: Option<PathBuf>,
    pub alpha: f64,
    pub phi_deg: f64,
}

pub fn simulate_with(
    ctx: &Context,
    circuit: &MbvdParams,
    alpha: f64,
    phi_deg: f64,
) -> Result<spectro::RabiSpectrogram> {
    let cfg = &ctx.config;
    let ratios = CouplingRatios::new(alpha, cfg.beta, phi_deg.to_radians())?;
    spectro::simulate_spectrogram(
        circuit,
        &ratios,
        &cfg.ensemble()?,
        cfg.transition()?,
        &cfg.freq_grid(circuit)?,
        &cfg.tau_grid()?,
        &ctx.sim_options()?,
    )
}

pub fn cmd_simulate(ctx: &Context, args: &SimulateArgs) -> Result<String> {
    let circuit = ctx.circuit(args.params.as_deref())?;
    let s = simulate_with(ctx, &circuit, args.alpha, args.phi_deg)?;
    let fft = spectro::fft_spectrum(&s, ctx.config.taper)?;
    io::write_spectrogram(&ctx.out(SPECTROGRAM_FILE), &s)?;
    io::write_fft(&ctx.out(FFT_FILE), &fft)?;
    PlotManifest::update(
        &ctx.out_dir,
        vec![
            heatmap("spectrogram", SPECTROGRAM_FILE, "freq_GHz", "tau_us", "rho_00"),
            heatmap("fft", FFT_FILE, "freq_GHz", "rabi_MHz", "|FFT|"),
        ],
    )?;
    io::read_spectrogram(&ctx.out(SPECTROGRAM_FILE))?;

    let j = acoustic_peak_column(&circuit, &s.freq_ghz)?;
    let col: Vec<f64> = fft.magnitude.column(j).to_vec();
    let peaks = spectro::spectral_peaks(&col, 0.25, 2);
    let comps: Vec<String> = peaks.iter().map(|&k| format!("{:.3}", fft.rabi_mhz[k])).collect();
    Ok(format!(
        "spectrogram {} tau x {} freq written; at {:.4} GHz the FFT has {} component(s): [{}] MHz\n",
        s.tau_us.len(),
        s.freq_ghz.len(),
        s.freq_ghz[j],
        peaks.len(),
        comps.join(", ")
    ))
}

/// Column nearest the maximum of the acoustic drive amplitude.
pub fn acoustic_peak_column(circuit: &MbvdParams, freq_ghz: &[f64]) -> Result<usize> {
    let mut best = (0, f64::NEG_INFINITY);
    for (j, &f) in freq_ghz.iter().enumerate() {
        let a = mbvd::acoustic_rabi(circuit, f)?.norm();
        if a > best.1 {
            best = (j, a);
        }
    }
    Ok(best.0)
}

// scan

#[derive(Debug, Clone, Default)]
pub struct ScanArgs {
    pub data: Option<PathBuf>,
    pub params: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanReport {
    pub peak: ScanPeak,
    pub uncertainty: ScanUncertainty,
    pub alpha: Measured,
    pub phi_deg: Measured,
    pub b_mhz_per_gpa: Measured,
    pub b_prime_mhz_per_gpa: Measured,
    pub ratio_text: String,
    pub failed_cells: usize,
    pub total_cells: usize,
}

fn ssim_matrix(g: &SsimGrid) -> Matrix {
    Matrix {
        corner: io::SSIM_CORNER.into(),
        row_coords: g.alpha_grid.clone(),
        col_coords: g.phi_grid_deg.clone(),
        values: Array2::from_shape_fn((g.alpha_grid.len(), g.phi_grid_deg.len()), |(i, j)| {
            g.ssim_map[i][j].unwrap_or(f64::NAN)
        }),
    }
}

pub fn cmd_scan(ctx: &Context, args: &ScanArgs) -> Result<String> {
    let cfg = &ctx.config;
    let data_path = required(args.data.as_deref(), cfg.paths.spectrogram.as_deref(), "spectrogram")?;
    let data = io::read_spectrogram(data_path)?;
    let circuit = ctx.circuit(args.params.as_deref())?;
    let result: ScanResult = inference::scan(
        &data,
        &circuit,
        &cfg.ensemble()?,
        cfg.transition()?,
        cfg.beta,
        &ctx.sim_options()?,
        &cfg.scan,
    )?;
    let alpha = Measured::new(result.peak.alpha, result.uncertainty.d_alpha);
    let phi = Measured::new(result.peak.phi_deg, result.uncertainty.d_phi_deg);
    let bp = inference::extract_bprime(alpha, cfg.b_mhz_per_gpa)?;
    let total = result.coarse.alpha_grid.len() * result.coarse.phi_grid_deg.len()
        + result
            .refined
            .as_ref()
            .map_or(0, |r| r.alpha_grid.len() * r.phi_grid_deg.len());
    let report = ScanReport {
        peak: result.peak,
        uncertainty: result.uncertainty,
        alpha,
        phi_deg: phi,
        b_mhz_per_gpa: cfg.b_mhz_per_gpa,
        b_prime_mhz_per_gpa: bp.b_prime,
        ratio_text: bp.ratio_text.clone(),
        failed_cells: result.failed_cells.len(),
        total_cells: total,
    };
    io::write_json(&ctx.out(SCAN_FILE), &result)?;
    io::write_json(&ctx.out(SCAN_REPORT_FILE), &report)?;
    io::write_matrix(&ctx.out("ssim_map.csv"), &ssim_matrix(&result.coarse))?;
    PlotManifest::update(
        &ctx.out_dir,
        vec![heatmap("ssim_map", "ssim_map.csv", "phi_deg", "alpha", "SSIM")],
    )?;

    let mut text = format!(
        "peak SSIM {:.4} at alpha = {:.3} ± {:.3}{}, phi = {:.1} ± {:.1} deg{}\n{}\n",
        result.peak.ssim,
        alpha.value,
        alpha.sigma,
        if result.uncertainty.alpha_one_sided { " (one-sided)" } else { "" },
        phi.value,
        phi.sigma,
        if result.uncertainty.phi_one_sided { " (one-sided)" } else { "" },
        bp.ratio_text
    );
    if !result.failed_cells.is_empty() {
        text.push_str(&format!(
            "{} of {} cells failed; first: {}\n",
            result.failed_cells.len(),
            total,
            result.failed_cells[0].error
        ));
    }
    Ok(text)
}

// synth

#[derive(Debug, Clone, Default)]
pub struct SynthArgs {
    pub params: Option<PathBuf>,
    pub alpha: f64,
    pub phi_deg: f64,
    /// Relative amplitude noise; phases get the same level in rad.
    pub noise: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Truth {
    pub params: MbvdParams,
    pub alpha: f64,
    pub phi_deg: f64,
    pub beta: f64,
    pub noise: f64,
    pub seed: u64,
    pub mode: Mode,
    pub transition: Transition,
    pub wavelength_um: f64,
    pub n_nv: usize,
}

/// Lead-SQ and resonator-DQ spectra with seeded noise. Draw order: lead
/// amplitudes, lead phases, DQ amplitudes, DQ phases.
pub fn synth_spectra(
    circuit: &MbvdParams,
    freq_ghz: &[f64],
    noise: f64,
    rng: &mut NoiseSource,
) -> Result<(ComplexSpectrum, ComplexSpectrum)> {
    let mut one = |field: fn(&MbvdParams, f64) -> Result<crate::spin::C64>| -> Result<ComplexSpectrum> {
        let v: Vec<_> = freq_ghz.iter().map(|&f| field(circuit, f)).collect::<Result<_>>()?;
        let amp: Vec<f64> = v.iter().map(|z| rng.multiplicative(z.norm(), noise).abs()).collect();
        let phase: Vec<f64> = v
            .iter()
            .map(|z| if noise > 0.0 { z.arg() + noise * rng.gaussian() } else { z.arg() })
            .collect();
        let s = ComplexSpectrum {
            freq_ghz: freq_ghz.to_vec(),
            amplitude_mhz: amp,
            phase_rad: Some(phase),
        };
        s.validate()?;
        Ok(s)
    };
    let lead = one(mbvd::magnetic_rabi)?;
    let dq = one(mbvd::acoustic_rabi)?;
    Ok((lead, dq))
}

pub fn cmd_synth(ctx: &Context, args: &SynthArgs) -> Result<String> {
    let cfg = &ctx.config;
    if !(args.noise >= 0.0 && args.noise.is_finite()) {
        return Err(Error::validation(format!("noise level {} must be >= 0", args.noise)));
    }
    let circuit = ctx.circuit(args.params.as_deref())?;
    circuit.validate()?;
    let window = cfg.fit_window_ghz.unwrap_or_else(|| {
        let f = circuit.resonance_ghz();
        let half = 10.0 * f / circuit.quality_factor();
        [f - half, f + half]
    });
    let mut rng = NoiseSource::new(cfg.seed);
    let f = GridSpec {
        start: window[0],
        stop: window[1],
        points: SYNTH_SPECTRUM_POINTS,
    }
    .values()?;
    let (lead, dq) = synth_spectra(&circuit, &f, args.noise, &mut rng)?;
    let mut s = simulate_with(ctx, &circuit, args.alpha, args.phi_deg)?;
    s.signal.mapv_inplace(|v| rng.multiplicative(v, args.noise));

    let truth = Truth {
        params: circuit,
        alpha: args.alpha,
        phi_deg: args.phi_deg,
        beta: cfg.beta,
        noise: args.noise,
        seed: cfg.seed,
        mode: cfg.mode,
        transition: cfg.transition()?,
        wavelength_um: cfg.wavelength()?,
        n_nv: cfg.n_nv,
    };
    io::write_spectrum(&ctx.out(LEAD_SQ_FILE), &lead)?;
    io::write_spectrum(&ctx.out(RESONATOR_DQ_FILE), &dq)?;
    io::write_spectrogram(&ctx.out(SPECTROGRAM_FILE), &s)?;
    io::write_json(&ctx.out(TRUTH_FILE), &truth)?;
    PlotManifest::update(
        &ctx.out_dir,
        vec![
            line("lead_sq", LEAD_SQ_FILE, "freq_GHz", "lead SQ Rabi field (MHz)"),
            line("resonator_dq", RESONATOR_DQ_FILE, "freq_GHz", "DQ Rabi field (MHz)"),
            heatmap("spectrogram", SPECTROGRAM_FILE, "freq_GHz", "tau_us", "rho_00"),
        ],
    )?;
    io::read_spectrum(&ctx.out(LEAD_SQ_FILE))?;
    io::read_spectrum(&ctx.out(RESONATOR_DQ_FILE))?;
    io::read_spectrogram(&ctx.out(SPECTROGRAM_FILE))?;
    Ok(format!(
        "synthetic dataset at alpha = {}, phi = {} deg, noise = {}, seed = {} written to {}\n",
        args.alpha,
        args.phi_deg,
        args.noise,
        cfg.seed,
        ctx.out_dir.display()
    ))
}

// map-strain

#[derive(Debug, Clone, Default)]
pub struct MapStrainArgs {
    /// SusceptibilitySet JSON.
    pub input: Option<PathBuf>,
    /// Catalog stress row to use instead of a file.
    pub row: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LambdaComparison {
    pub name: String,
    pub computed: Measured,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog: Option<Measured>,
    pub sign_mismatch: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StrainReport {
    pub input: SusceptibilitySet,
    pub stiffness: StiffnessConstants,
    pub lambdas: StrainSusceptibilities,
    pub catalog_source: Option<String>,
    pub comparison: Vec<LambdaComparison>,
    pub warnings: Vec<String>,
}

fn lambda_list(l: &StrainSusceptibilities) -> [(&'static str, Option<Measured>); 6] {
    [
        ("lambda_a1", l.lambda_a1),
        ("lambda_a2", l.lambda_a2),
        ("lambda_b", l.lambda_b),
        ("lambda_c", l.lambda_c),
        ("lambda_b_prime", l.lambda_b_prime),
        ("lambda_c_prime", l.lambda_c_prime),
    ]
}

pub fn map_strain(sus: &SusceptibilitySet) -> Result<StrainReport> {
    let stiffness = StiffnessConstants::default();
    let lambdas = stress::stress_to_strain_susceptibility(sus, &stiffness)?;
    let catalog = stress::susceptibility_catalog();
    let row = catalog.strain_row(&sus.source);
    let reference = row.map(|r| lambda_list(&r.lambdas));
    let mut comparison = Vec::new();
    let mut mismatched = Vec::new();
    for (k, (name, v)) in lambda_list(&lambdas).into_iter().enumerate() {
        let Some(v) = v else { continue };
        let cat = reference.and_then(|r| r[k].1);
        let sign_mismatch = cat.is_some_and(|c| c.value * v.value < 0.0);
        if sign_mismatch {
            mismatched.push(name);
        }
        comparison.push(LambdaComparison {
            name: name.into(),
            computed: v,
            catalog: cat,
            sign_mismatch,
        });
    }
    let mut warnings = Vec::new();
    if !mismatched.is_empty() {
        warnings.push(format!(
            "sign convention: {} differ in sign from the catalog values while magnitudes are compared as printed",
            mismatched.join(", ")
        ));
    }
    Ok(StrainReport {
        input: sus.clone(),
        stiffness,
        lambdas,
        catalog_source: row.map(|r| r.source.clone()),
        comparison,
        warnings,
    })
}

pub fn cmd_map_strain(ctx: &Context, args: &MapStrainArgs) -> Result<String> {
    let sus: SusceptibilitySet = match (&args.input, &args.row) {
        (Some(p), None) => io::read_json(p)?,
        (None, Some(r)) => stress::susceptibility_catalog()
            .stress_row(r)
            .cloned()
            .ok_or_else(|| Error::validation(format!("no catalog row `{r}`")))?,
        (Some(_), Some(_)) => return Err(Error::validation("give either an input file or a row, not both")),
        (None, None) => return Err(Error::validation("no susceptibility input given")),
    };
    let report = map_strain(&sus)?;
    io::write_json(&ctx.out(STRAIN_FILE), &report)?;

    let mut text = format!("{:16} {:>22} {:>22}\n", "GHz/strain", "computed", "catalog");
    for c in &report.comparison {
        let cat = c.catalog.map_or("-".to_string(), |m| format!("{m:.3}"));
        text.push_str(&format!(
            "{:16} {:>22} {:>22}{}\n",
            c.name,
            format!("{:.3}", c.computed),
            cat,
            if c.sign_mismatch { "  sign differs" } else { "" }
        ));
    }
    for w in &report.warnings {
        text.push_str(&format!("warning: {w}\n"));
    }
    Ok(text)
}

// plot

pub fn cmd_plot(ctx: &Context, manifest: Option<&Path>) -> Result<String> {
    let path = manifest
        .map(Path::to_path_buf)
        .unwrap_or_else(|| ctx.out(io::MANIFEST_NAME));
    let m: PlotManifest = io::read_json(&path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    m.validate(dir)?;
    let mut text = String::new();
    for f in &m.figures {
        let svg = crate::plot::render(f, dir)?;
        let target = ctx.out(&format!("{}.svg", f.id));
        io::write_atomic(&target, svg.as_bytes())?;
        text.push_str(&format!("{}\n", target.display()));
    }
    Ok(text)
}
