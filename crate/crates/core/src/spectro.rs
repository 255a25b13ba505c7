//! Ensemble Rabi spectrograms and the spectroscopy estimators used on them.
//!
//! A spectrogram column is the average `rho_00(tau)` of `n_nv` centers spread
//! evenly from an acoustic anti-node (`z = 0`) to a node (`z = lambda/4`).
//! Each center sees the circuit-predicted lead field, scaled by `beta` and
//! rotated by `phi`, plus the local standing-wave acoustic field.

use std::f64::consts::PI;

use ndarray::Array2;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lindblad::{self, DecoherenceParams, InitialState, StaticPropagator, TimeTrace};
use crate::lm::{self, LmConfig, Residuals};
use crate::mbvd::{self, ComplexSpectrum, MbvdParams};
use crate::spin::{
    rwa_hamiltonian, CouplingRatios, DriveFields, SpinConstants, StressState, Transition, C64,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub n_nv: usize,
    /// Acoustic wavelength, um.
    pub wavelength_um: f64,
}

impl EnsembleSpec {
    pub fn new(n_nv: usize, wavelength_um: f64) -> Result<Self> {
        let e = Self { n_nv, wavelength_um };
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_nv == 0 {
            return Err(Error::validation("ensemble needs at least one NV"));
        }
        if !(self.wavelength_um > 0.0 && self.wavelength_um.is_finite()) {
            return Err(Error::validation(format!(
                "wavelength {} um must be > 0",
                self.wavelength_um
            )));
        }
        Ok(())
    }

    /// Depths in um, evenly spaced on `[0, lambda/4]` with both endpoints.
    pub fn positions(&self) -> Vec<f64> {
        let quarter = self.wavelength_um / 4.0;
        if self.n_nv == 1 {
            return vec![0.0];
        }
        (0..self.n_nv)
            .map(|k| quarter * k as f64 / (self.n_nv - 1) as f64)
            .collect()
    }
}

/// How the axial field follows the drive frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tracking {
    /// `B_par` set per column so the chosen transition is resonant.
    OnResonance,
    /// Fixed axial field, G: columns sweep the detuning.
    FixedField { b_parallel_g: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Propagation {
    /// Exact exponential of the rotating-frame generator without the DQ term,
    /// which oscillates at the drive frequency there.
    Secular,
    /// RK4 on the full rotating-frame Hamiltonian.
    Rk4,
}

#[derive(Debug, Clone, Copy)]
pub struct SimulationOptions {
    pub constants: SpinConstants,
    pub decoherence: DecoherenceParams,
    pub tracking: Tracking,
    pub propagation: Propagation,
    pub initial: InitialState,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self {
            constants: SpinConstants::default(),
            decoherence: DecoherenceParams::default(),
            tracking: Tracking::OnResonance,
            propagation: Propagation::Secular,
            initial: InitialState::Ground,
        }
    }
}

/// Pulse duration (rows) by drive frequency (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct RabiSpectrogram {
    pub tau_us: Vec<f64>,
    pub freq_ghz: Vec<f64>,
    pub signal: Array2<f64>,
}

impl RabiSpectrogram {
    pub fn new(tau_us: Vec<f64>, freq_ghz: Vec<f64>, signal: Array2<f64>) -> Result<Self> {
        let s = Self {
            tau_us,
            freq_ghz,
            signal,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tau_us.is_empty() || self.freq_ghz.is_empty() {
            return Err(Error::validation("spectrogram grids must be non-empty"));
        }
        if self.signal.dim() != (self.tau_us.len(), self.freq_ghz.len()) {
            return Err(Error::validation(format!(
                "signal is {:?}, grids are {} x {}",
                self.signal.dim(),
                self.tau_us.len(),
                self.freq_ghz.len()
            )));
        }
        if self.signal.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("spectrogram contains non-finite values"));
        }
        Ok(())
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.signal.column(j).to_vec()
    }
}

/// Single-NV drive fields at drive frequency `f_ghz` and depth `z_um`.
pub fn nv_drive(
    circuit: &MbvdParams,
    ratios: &CouplingRatios,
    wavelength_um: f64,
    f_ghz: f64,
    z_um: f64,
    b_parallel_g: f64,
) -> Result<DriveFields> {
    let lead = mbvd::magnetic_rabi(circuit, f_ghz)?;
    let sigma2 = mbvd::acoustic_rabi(circuit, f_ghz)?;
    let standing = (2.0 * PI * z_um / wavelength_um).cos();
    Ok(DriveFields {
        b_parallel_g,
        omega_b: lead * ratios.beta * C64::from_polar(1.0, ratios.phi),
        omega_sigma2: sigma2 * standing,
        drive_freq_ghz: f_ghz,
    })
}

/// Axial field that puts `transition` on resonance with `f_ghz`.
pub fn resonant_field_g(constants: &SpinConstants, transition: Transition, f_ghz: f64) -> f64 {
    transition.sign() * (f_ghz * 1e3 - constants.zfs_mhz()) / constants.gamma_e_mhz_per_g
}

/// `rho_00(tau)` of one NV.
#[allow(clippy::too_many_arguments)]
pub fn nv_trace(
    circuit: &MbvdParams,
    ratios: &CouplingRatios,
    transition: Transition,
    wavelength_um: f64,
    f_ghz: f64,
    z_um: f64,
    tau_us: &[f64],
    opts: &SimulationOptions,
) -> Result<TimeTrace> {
    let b_par = match opts.tracking {
        Tracking::OnResonance => resonant_field_g(&opts.constants, transition, f_ghz),
        Tracking::FixedField { b_parallel_g } => b_parallel_g,
    };
    let fields = nv_drive(circuit, ratios, wavelength_um, f_ghz, z_um, b_par)?;
    let h = rwa_hamiltonian(&opts.constants, &fields, &StressState::default(), ratios)?.rotating();
    let rho0 = lindblad::prepare_state(opts.initial)?;
    match opts.propagation {
        Propagation::Secular => {
            StaticPropagator::new(&h.secular, &opts.decoherence)?.evolve(&rho0, tau_us)
        }
        Propagation::Rk4 => lindblad::evolve(&rho0, &h, &opts.decoherence, tau_us),
    }
}

fn validate_tau(tau_us: &[f64]) -> Result<()> {
    if tau_us.is_empty() {
        return Err(Error::validation("empty tau grid"));
    }
    Ok(())
}

/// Ensemble-averaged `rho_00` spectrogram. Columns run in parallel and are
/// assembled in frequency order, so the result does not depend on scheduling.
pub fn simulate_spectrogram(
    circuit: &MbvdParams,
    ratios: &CouplingRatios,
    ensemble: &EnsembleSpec,
    transition: Transition,
    freq_ghz: &[f64],
    tau_us: &[f64],
    opts: &SimulationOptions,
) -> Result<RabiSpectrogram> {
    circuit.validate()?;
    ratios.validate()?;
    ensemble.validate()?;
    validate_tau(tau_us)?;
    if freq_ghz.is_empty() {
        return Err(Error::validation("empty frequency grid"));
    }
    let positions = ensemble.positions();
    let columns: Vec<Result<Vec<f64>>> = freq_ghz
        .par_iter()
        .map(|&f| {
            let mut acc = vec![0.0; tau_us.len()];
            for &z in &positions {
                let trace = nv_trace(
                    circuit,
                    ratios,
                    transition,
                    ensemble.wavelength_um,
                    f,
                    z,
                    tau_us,
                    opts,
                )
                .map_err(|e| Error::Simulation {
                    freq_ghz: f,
                    z_um: z,
                    source: Box::new(e),
                })?;
                for (a, p) in acc.iter_mut().zip(&trace.population) {
                    *a += p;
                }
            }
            let n = positions.len() as f64;
            Ok(acc.into_iter().map(|a| a / n).collect())
        })
        .collect();
    let mut signal = Array2::zeros((tau_us.len(), freq_ghz.len()));
    for (j, col) in columns.into_iter().enumerate() {
        for (i, v) in col?.into_iter().enumerate() {
            signal[(i, j)] = v;
        }
    }
    RabiSpectrogram::new(tau_us.to_vec(), freq_ghz.to_vec(), signal)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Taper {
    #[default]
    Rectangular,
    Hann,
}

/// Column-wise magnitude spectrum: Rabi frequency (rows, DC removed) by drive
/// frequency (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct FftSpectrum {
    pub rabi_mhz: Vec<f64>,
    pub freq_ghz: Vec<f64>,
    pub magnitude: Array2<f64>,
}

/// Grid spacing of a uniform grid; rejects anything else.
pub fn uniform_step(grid: &[f64]) -> Result<f64> {
    if grid.len() < 2 {
        return Err(Error::validation("grid needs at least two points"));
    }
    let dt = (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64;
    if !(dt > 0.0) {
        return Err(Error::validation("grid must be increasing"));
    }
    for (i, t) in grid.iter().enumerate() {
        if (t - (grid[0] + i as f64 * dt)).abs() > 1e-6 * dt {
            return Err(Error::validation(format!(
                "non-uniform grid at index {i}: {t} vs {}",
                grid[0] + i as f64 * dt
            )));
        }
    }
    Ok(dt)
}

/// Full complex DFT of a mean-subtracted, optionally tapered series.
pub fn column_dft(x: &[f64], taper: Taper) -> Vec<C64> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<C64> = x
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let w = match taper {
                Taper::Rectangular => 1.0,
                Taper::Hann => 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos(),
            };
            C64::new((v - mean) * w, 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf
}

/// Bins `1..=n/2` of the one-sided magnitude spectrum and their frequencies.
fn one_sided(x: &[f64], dt: f64, taper: Taper) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let spec = column_dft(x, taper);
    let df = 1.0 / (n as f64 * dt);
    (1..=n / 2).map(|k| (k as f64 * df, spec[k].norm())).unzip()
}

pub fn fft_spectrum(s: &RabiSpectrogram, taper: Taper) -> Result<FftSpectrum> {
    s.validate()?;
    let dt = uniform_step(&s.tau_us)?;
    let n_bins = s.tau_us.len() / 2;
    if n_bins == 0 {
        return Err(Error::validation("too few tau samples for a spectrum"));
    }
    let mut magnitude = Array2::zeros((n_bins, s.freq_ghz.len()));
    let mut rabi = Vec::new();
    for j in 0..s.freq_ghz.len() {
        let (f, m) = one_sided(&s.column(j), dt, taper);
        for (i, v) in m.into_iter().enumerate() {
            magnitude[(i, j)] = v;
        }
        rabi = f;
    }
    Ok(FftSpectrum {
        rabi_mhz: rabi,
        freq_ghz: s.freq_ghz.clone(),
        magnitude,
    })
}

/// Local maxima of a magnitude column above `rel_threshold * max`, merged when
/// closer than `min_separation` bins. Returns peak bin indices.
pub fn spectral_peaks(column: &[f64], rel_threshold: f64, min_separation: usize) -> Vec<usize> {
    let max = column.iter().cloned().fold(0.0, f64::max);
    if !(max > 0.0) {
        return Vec::new();
    }
    let n = column.len();
    let mut peaks: Vec<usize> = (0..n)
        .filter(|&i| {
            let left = if i == 0 { 0.0 } else { column[i - 1] };
            let right = if i + 1 == n { 0.0 } else { column[i + 1] };
            column[i] >= rel_threshold * max && column[i] > left && column[i] >= right
        })
        .collect();
    // keep the taller of any two peaks that sit too close together
    let mut merged: Vec<usize> = Vec::new();
    peaks.sort_by(|a, b| column[*b].partial_cmp(&column[*a]).unwrap());
    for p in peaks {
        if merged.iter().all(|&q| p.abs_diff(q) >= min_separation) {
            merged.push(p);
        }
    }
    merged.sort_unstable();
    merged
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RabiMethod {
    FftPeak,
    DampedCosFit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RabiEstimate {
    pub omega_mhz: f64,
    pub uncertainty_mhz: f64,
    /// Set when the damped-cosine model leaves a large residual, e.g. for a
    /// trace with several Rabi components.
    pub poor_fit: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RabiOutcome {
    Oscillation(RabiEstimate),
    NoOscillation,
}

/// Peak must exceed this multiple of the median bin magnitude.
const PEAK_OVER_MEDIAN: f64 = 5.0;
const POOR_FIT_RESIDUAL: f64 = 0.1;

fn quadratic_offset(a: f64, b: f64, c: f64) -> f64 {
    let denom = a - 2.0 * b + c;
    if denom.abs() < 1e-300 {
        0.0
    } else {
        (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
    }
}

struct DampedCos<'a> {
    t: &'a [f64],
    y: &'a [f64],
}

impl Residuals for DampedCos<'_> {
    fn n_residuals(&self) -> usize {
        self.t.len()
    }

    // p = [offset, amplitude, decay 1/us, frequency MHz, phase]
    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        for (i, (t, y)) in self.t.iter().zip(self.y).enumerate() {
            out[i] = p[0] + p[1] * (-p[2] * t).exp() * (2.0 * PI * p[3] * t + p[4]).cos() - y;
        }
    }
}

pub fn extract_rabi(trace: &TimeTrace, method: RabiMethod) -> Result<RabiOutcome> {
    let t = &trace.tau_us;
    let y = &trace.population;
    if t.len() != y.len() {
        return Err(Error::validation("trace arrays differ in length"));
    }
    if t.len() < 8 {
        return Err(Error::validation(format!(
            "{} samples; at least 8 are needed",
            t.len()
        )));
    }
    let dt = uniform_step(t)?;
    let n = t.len();
    let spec = column_dft(y, Taper::Rectangular);
    let mags: Vec<f64> = (1..=n / 2).map(|k| spec[k].norm()).collect();
    let spread = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - y.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut sorted = mags.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = sorted[sorted.len() / 2];
    let (ipk, &peak) = mags
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap();
    if spread < 1e-9 || peak < PEAK_OVER_MEDIAN * median {
        return Ok(RabiOutcome::NoOscillation);
    }
    let df = 1.0 / (n as f64 * dt);
    let offset = if ipk > 0 && ipk + 1 < mags.len() {
        quadratic_offset(mags[ipk - 1], mags[ipk], mags[ipk + 1])
    } else {
        0.0
    };
    let f_peak = (ipk as f64 + 1.0 + offset) * df;
    match method {
        RabiMethod::FftPeak => Ok(RabiOutcome::Oscillation(RabiEstimate {
            omega_mhz: f_peak,
            uncertainty_mhz: 0.5 * df,
            poor_fit: false,
        })),
        RabiMethod::DampedCosFit => {
            let mean = y.iter().sum::<f64>() / n as f64;
            let bin = spec[ipk + 1];
            let t0 = t[0];
            let shifted: Vec<f64> = t.iter().map(|v| v - t0).collect();
            let problem = DampedCos { t: &shifted, y };
            let x0 = [mean, 2.0 * bin.norm() / n as f64, 0.1, f_peak, bin.arg()];
            let rep = lm::minimize(&problem, &x0, &LmConfig::default())?;
            let (cov, _) = lm::covariance(&rep.jacobian, &rep.residuals, &[], 1e-12);
            let rms = (rep.residuals.iter().map(|r| r * r).sum::<f64>() / n as f64).sqrt();
            let amp = rep.params[1].abs();
            Ok(RabiOutcome::Oscillation(RabiEstimate {
                omega_mhz: rep.params[3].abs(),
                uncertainty_mhz: cov[(3, 3)].max(0.0).sqrt(),
                poor_fit: !rep.converged || !(rms <= POOR_FIT_RESIDUAL * amp),
            }))
        }
    }
}

/// `beta`: ratio of resonator to lead SQ Rabi frequencies measured off the
/// mechanical resonance.
pub fn compute_beta(omega_lead_offres_mhz: f64, omega_resonator_offres_mhz: f64) -> Result<f64> {
    if !(omega_lead_offres_mhz.abs() > 1e-12) || !omega_lead_offres_mhz.is_finite() {
        return Err(Error::validation(format!(
            "lead Rabi frequency {omega_lead_offres_mhz} MHz is too small to divide by"
        )));
    }
    if !omega_resonator_offres_mhz.is_finite() {
        return Err(Error::validation("non-finite resonator Rabi frequency"));
    }
    Ok(omega_resonator_offres_mhz / omega_lead_offres_mhz)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QEstimate {
    pub q: f64,
    pub f_r_ghz: f64,
    pub fwhm_ghz: f64,
}

struct Lorentzian<'a> {
    x: &'a [f64],
    y: &'a [f64],
}

impl Residuals for Lorentzian<'_> {
    fn n_residuals(&self) -> usize {
        self.x.len()
    }

    // p = [height, center, half width, baseline] in scaled units
    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        for (i, (x, y)) in self.x.iter().zip(self.y).enumerate() {
            let u = (x - p[1]) / p[2];
            out[i] = p[0] / (1.0 + u * u) + p[3] - y;
        }
    }
}

/// Lorentzian fit of an amplitude spectrum; `Q = f_r / FWHM`.
pub fn q_from_linewidth(spec: &ComplexSpectrum) -> Result<QEstimate> {
    spec.validate()?;
    let n = spec.len();
    if n < 8 {
        return Err(Error::validation(format!("{n} samples; at least 8 are needed")));
    }
    let f = &spec.freq_ghz;
    let a = &spec.amplitude_mhz;
    let amax = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let amin = a.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(amax > amin) {
        return Err(Error::validation("flat spectrum has no linewidth"));
    }
    let half = amin + 0.5 * (amax - amin);
    let above: Vec<bool> = a.iter().map(|v| *v >= half).collect();
    let regions = above.windows(2).filter(|w| w[1] && !w[0]).count() + usize::from(above[0]);
    if regions != 1 {
        return Err(Error::validation(format!(
            "spectrum has {regions} separate peaks above half maximum; one is required"
        )));
    }
    let first = above.iter().position(|v| *v).unwrap();
    let last = above.iter().rposition(|v| *v).unwrap();
    let ipk = (first..=last)
        .max_by(|i, j| a[*i].partial_cmp(&a[*j]).unwrap())
        .unwrap();

    // work in units of the sample span centred on the window
    let mid = 0.5 * (f[0] + f[n - 1]);
    let scale = f[n - 1] - f[0];
    let x: Vec<f64> = f.iter().map(|v| (v - mid) / scale).collect();
    let y: Vec<f64> = a.iter().map(|v| v / amax).collect();
    let hw0 = (0.5 * (f[last] - f[first]) / scale).max(0.5 / n as f64);
    let x0 = [(amax - amin) / amax, x[ipk], hw0, amin / amax];
    let problem = Lorentzian { x: &x, y: &y };
    let rep = lm::minimize(&problem, &x0, &LmConfig::default())?;
    let ss_res: f64 = rep.residuals.iter().map(|r| r * r).sum();
    let ymean = y.iter().sum::<f64>() / n as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - ymean).powi(2)).sum();
    let r2 = 1.0 - ss_res / ss_tot;
    if !rep.converged || !(r2 > 0.9) {
        return Err(Error::Convergence {
            what: "Lorentzian linewidth fit",
            detail: format!("coefficient of determination {r2:.3}"),
        });
    }
    let f_r = mid + rep.params[1] * scale;
    let fwhm = 2.0 * rep.params[2].abs() * scale;
    if !(f_r > f[0] && f_r < f[n - 1]) {
        return Err(Error::Convergence {
            what: "Lorentzian linewidth fit",
            detail: format!("centre {f_r} GHz left the sampled window"),
        });
    }
    Ok(QEstimate {
        q: f_r / fwhm,
        f_r_ghz: f_r,
        fwhm_ghz: fwhm,
    })
}

/// Scale each column to `[0, 1]`; constant columns become zero.
pub fn normalize_columns(signal: &Array2<f64>) -> Array2<f64> {
    let mut out = signal.clone();
    for mut col in out.columns_mut() {
        let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        col.mapv_inplace(|v| if span > 0.0 { (v - lo) / span } else { 0.0 });
    }
    out
}
