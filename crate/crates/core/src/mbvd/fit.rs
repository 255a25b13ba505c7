//! Joint least-squares fit of the circuit to the lead magnetic and DQ acoustic
//! Rabi-field spectra. Amplitudes enter relative to each spectrum's maximum;
//! phases, when a spectrum carries them, enter as wrapped differences in rad.
//!
//! Parameters are fitted as logarithms. The amplitude data are invariant under
//! scaling every impedance by `s` while `A` scales by `s`
//! ([`GAUGE_DIRECTION`]); that direction is projected out of the covariance
//! and reported, never regularized away. Any further rank loss is an error.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{acoustic_rabi, magnetic_rabi, ComplexSpectrum, MbvdParams, PARAM_NAMES};
use crate::error::{Error, Result};
use crate::lm::{self, LmConfig, Residuals};

/// Log-space direction along which both amplitude spectra are unchanged.
pub const GAUGE_DIRECTION: [f64; 8] = [1.0, 0.0, 1.0, 1.0, -1.0, 1.0, -1.0, 1.0];

const MIN_SAMPLES: usize = 20;

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub max_iter: usize,
    /// Number of starts when no initial guess is supplied.
    pub starts: usize,
    /// Refuse results whose relative residual norm exceeds this.
    pub max_relative_residual: f64,
    /// Singular values below `rank_tol * s_max` count as rank loss.
    pub rank_tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            starts: 8,
            max_relative_residual: 0.30,
            rank_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MbvdFit {
    pub params: MbvdParams,
    /// Covariance of the natural-log parameters, in [`PARAM_NAMES`] order,
    /// excluding the gauge direction.
    pub log_covariance: Vec<Vec<f64>>,
    /// Unit vector of the unidentifiable log-space direction.
    pub gauge_direction: Vec<f64>,
    /// Model minus data, MHz.
    pub residuals_b: Vec<f64>,
    pub residuals_sigma: Vec<f64>,
    /// Wrapped model minus data phase, rad, for spectra that carry phase.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_residuals_b: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_residuals_sigma: Option<Vec<f64>>,
    /// `|r| / |data|` over both spectra, each normalized to its maximum.
    pub relative_residual: f64,
    pub iterations: usize,
    pub starts_tried: usize,
}

impl MbvdFit {
    /// One-sigma absolute uncertainty of each parameter (first order).
    pub fn param_sigma(&self) -> [f64; 8] {
        let v = self.params.to_array();
        std::array::from_fn(|i| v[i] * self.log_covariance[i][i].max(0.0).sqrt())
    }
}

struct JointProblem<'a> {
    b: &'a ComplexSpectrum,
    s: &'a ComplexSpectrum,
    b_scale: f64,
    s_scale: f64,
}

impl JointProblem<'_> {
    fn params(x: &[f64]) -> MbvdParams {
        MbvdParams::from_array(std::array::from_fn(|i| x[i].exp()))
    }

    fn n_amplitude(&self) -> usize {
        self.b.len() + self.s.len()
    }
}

fn wrap_pi(x: f64) -> f64 {
    let w = (x + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

impl Residuals for JointProblem<'_> {
    fn n_residuals(&self) -> usize {
        self.n_amplitude()
            + self.b.phase_rad.as_ref().map_or(0, |v| v.len())
            + self.s.phase_rad.as_ref().map_or(0, |v| v.len())
    }

    fn residuals(&self, x: &[f64], out: &mut [f64]) {
        let p = Self::params(x);
        let nb = self.b.len();
        for i in 0..nb {
            let m = magnetic_rabi(&p, self.b.freq_ghz[i]).map(|v| v.norm());
            out[i] = match m {
                Ok(m) => (m - self.b.amplitude_mhz[i]) / self.b_scale,
                Err(_) => f64::NAN,
            };
        }
        for i in 0..self.s.len() {
            let m = acoustic_rabi(&p, self.s.freq_ghz[i]).map(|v| v.norm());
            out[nb + i] = match m {
                Ok(m) => (m - self.s.amplitude_mhz[i]) / self.s_scale,
                Err(_) => f64::NAN,
            };
        }
        let mut k = self.n_amplitude();
        if let Some(ph) = &self.b.phase_rad {
            for (f, d) in self.b.freq_ghz.iter().zip(ph) {
                out[k] = magnetic_rabi(&p, *f).map_or(f64::NAN, |v| wrap_pi(v.arg() - d));
                k += 1;
            }
        }
        if let Some(ph) = &self.s.phase_rad {
            for (f, d) in self.s.freq_ghz.iter().zip(ph) {
                out[k] = acoustic_rabi(&p, *f).map_or(f64::NAN, |v| wrap_pi(v.arg() - d));
                k += 1;
            }
        }
    }
}

fn log_bounds() -> (Vec<f64>, Vec<f64>) {
    // A, B, Rm, Lm, Cm, R0, C0, Rs
    let lo = [1e-3, 1e-6, 1e-3, 1e-5, 1e-6, 1e-3, 1e-5, 1e-3];
    let hi = [1e8, 1e6, 1e7, 1e5, 1e4, 1e7, 1e5, 1e7];
    (
        lo.iter().map(|v: &f64| v.ln()).collect(),
        hi.iter().map(|v: &f64| v.ln()).collect(),
    )
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Full width at half maximum of a single peak by linear interpolation; a
/// missing side is mirrored from the other.
fn half_max_width(f: &[f64], a: &[f64], peak: usize) -> Option<f64> {
    let half = 0.5 * a[peak];
    let left = (1..=peak).rev().find(|&i| a[i - 1] < half).map(|i| {
        let t = (half - a[i - 1]) / (a[i] - a[i - 1]);
        f[i - 1] + t * (f[i] - f[i - 1])
    });
    let right = (peak..a.len() - 1).find(|&i| a[i + 1] < half).map(|i| {
        let t = (a[i] - half) / (a[i] - a[i + 1]);
        f[i] + t * (f[i + 1] - f[i])
    });
    match (left, right) {
        (Some(l), Some(r)) => Some(r - l),
        (Some(l), None) => Some(2.0 * (f[peak] - l)),
        (None, Some(r)) => Some(2.0 * (r - f[peak])),
        (None, None) => None,
    }
}

fn check_inputs(spec_b: &ComplexSpectrum, spec_sigma: &ComplexSpectrum) -> Result<usize> {
    spec_b.validate()?;
    spec_sigma.validate()?;
    if spec_b.len() < MIN_SAMPLES || spec_sigma.len() < MIN_SAMPLES {
        return Err(Error::validation(format!(
            "fit needs at least {MIN_SAMPLES} samples per spectrum (got {} and {})",
            spec_b.len(),
            spec_sigma.len()
        )));
    }
    let peak = argmax(&spec_sigma.amplitude_mhz);
    if peak == 0 || peak == spec_sigma.len() - 1 {
        return Err(Error::validation(format!(
            "the acoustic spectrum peaks at the window edge ({} GHz); the fit window must contain the resonance",
            spec_sigma.freq_ghz[peak]
        )));
    }
    Ok(peak)
}

fn scale_to_data(p: &mut MbvdParams, spec_b: &ComplexSpectrum, spec_sigma: &ComplexSpectrum) {
    p.a_mhz_per_s = 1.0;
    p.b_khz_per_v = 1.0;
    let max_y = spec_b
        .freq_ghz
        .iter()
        .filter_map(|&f| magnetic_rabi(p, f).ok())
        .map(|v| v.norm())
        .fold(0.0, f64::max);
    let max_v = spec_sigma
        .freq_ghz
        .iter()
        .filter_map(|&f| acoustic_rabi(p, f).ok())
        .map(|v| v.norm())
        .fold(0.0, f64::max);
    let db = spec_b.amplitude_mhz.iter().cloned().fold(0.0, f64::max);
    let ds = spec_sigma.amplitude_mhz.iter().cloned().fold(0.0, f64::max);
    p.a_mhz_per_s = (db / max_y).max(1e-3);
    p.b_khz_per_v = (ds / max_v).max(1e-6);
}

/// Starting points derived from the spectra: resonance and linewidth from the
/// acoustic peak, anti-resonance from the magnetic dip above it.
fn auto_starts(
    spec_b: &ComplexSpectrum,
    spec_sigma: &ComplexSpectrum,
    peak: usize,
    count: usize,
) -> Vec<MbvdParams> {
    let f0 = spec_sigma.freq_ghz[peak];
    let span = spec_sigma.freq_ghz[spec_sigma.len() - 1] - spec_sigma.freq_ghz[0];
    let width = half_max_width(&spec_sigma.freq_ghz, &spec_sigma.amplitude_mhz, peak)
        .filter(|w| *w > 0.0)
        .unwrap_or(span / 10.0);
    let q0 = (3f64.sqrt() * f0 / width).clamp(10.0, 1e6);

    let above: Vec<usize> = (1..spec_b.len().saturating_sub(1))
        .filter(|&i| spec_b.freq_ghz[i] > f0)
        .filter(|&i| {
            spec_b.amplitude_mhz[i] <= spec_b.amplitude_mhz[i - 1]
                && spec_b.amplitude_mhz[i] <= spec_b.amplitude_mhz[i + 1]
        })
        .collect();
    let fa = above
        .iter()
        .min_by(|&&a, &&b| spec_b.amplitude_mhz[a].total_cmp(&spec_b.amplitude_mhz[b]))
        .map(|&i| spec_b.freq_ghz[i])
        .filter(|fa| *fa > f0)
        .unwrap_or(f0 + 0.5 * width);

    let rm = 100.0;
    let designs: [(f64, f64, f64); 8] = [
        (1.0, 0.3, 1.0),
        (1.0, 1.0, 1.0),
        (1.0, 3.0, 1.0),
        (1.0, 0.3, 5.0),
        (1.0, 1.0, 5.0),
        (1.0, 3.0, 5.0),
        (0.6, 1.0, 2.0),
        (1.6, 1.0, 2.0),
    ];
    designs
        .iter()
        .cycle()
        .take(count.max(1))
        .map(|&(qmul, r0_ratio, rs_ratio)| {
            let w = 2.0 * std::f64::consts::PI * f0 * 1e9;
            let lm = qmul * q0 * rm / w;
            let cm = 1.0 / (w * w * lm);
            let c0 = cm * f0 / (2.0 * (fa - f0));
            let mut p = MbvdParams {
                a_mhz_per_s: 1.0,
                b_khz_per_v: 1.0,
                rm_ohm: rm,
                lm_uh: lm * 1e6,
                cm_ff: cm * 1e15,
                r0_ohm: r0_ratio * rm,
                c0_pf: c0 * 1e12,
                rs_ohm: rs_ratio * rm,
            };
            scale_to_data(&mut p, spec_b, spec_sigma);
            p
        })
        .collect()
}

/// Fit both amplitude spectra with one shared circuit.
pub fn fit(
    spec_b: &ComplexSpectrum,
    spec_sigma: &ComplexSpectrum,
    init: Option<&MbvdParams>,
    opts: &FitOptions,
) -> Result<MbvdFit> {
    let peak = check_inputs(spec_b, spec_sigma)?;
    let b_scale = spec_b.amplitude_mhz.iter().cloned().fold(0.0, f64::max);
    let s_scale = spec_sigma.amplitude_mhz.iter().cloned().fold(0.0, f64::max);
    if !(b_scale > 0.0 && s_scale > 0.0) {
        return Err(Error::validation("spectra must contain non-zero amplitudes"));
    }
    let problem = JointProblem {
        b: spec_b,
        s: spec_sigma,
        b_scale,
        s_scale,
    };
    let starts = match init {
        Some(p) => {
            p.validate()?;
            vec![*p]
        }
        None => auto_starts(spec_b, spec_sigma, peak, opts.starts),
    };
    let (lower, upper) = log_bounds();
    let cfg = LmConfig {
        max_iter: opts.max_iter,
        lower: Some(lower),
        upper: Some(upper),
        ..Default::default()
    };

    let mut best: Option<lm::LmReport> = None;
    for start in &starts {
        let x0: Vec<f64> = start.to_array().iter().map(|v| v.ln()).collect();
        let report = match lm::minimize(&problem, &x0, &cfg) {
            Ok(r) => r,
            Err(_) => continue,
        };
        if best.as_ref().is_none_or(|b| report.cost < b.cost) {
            best = Some(report);
        }
    }
    let best = best.ok_or_else(|| Error::Convergence {
        what: "mBVD fit",
        detail: "every start failed to evaluate".into(),
    })?;
    if !best.converged {
        return Err(Error::Convergence {
            what: "mBVD fit",
            detail: format!("no convergence within {} iterations", opts.max_iter),
        });
    }

    let data_norm = (spec_b.amplitude_mhz.iter().map(|a| (a / b_scale).powi(2)).sum::<f64>()
        + spec_sigma
            .amplitude_mhz
            .iter()
            .map(|a| (a / s_scale).powi(2))
            .sum::<f64>())
    .sqrt();
    let na = problem.n_amplitude();
    let relative_residual = best.residuals[..na].iter().map(|r| r * r).sum::<f64>().sqrt() / data_norm;
    if relative_residual > opts.max_relative_residual {
        return Err(Error::Convergence {
            what: "mBVD fit",
            detail: format!(
                "relative residual {:.1}% exceeds {:.0}%",
                100.0 * relative_residual,
                100.0 * opts.max_relative_residual
            ),
        });
    }

    let gauge = DVector::from_column_slice(&GAUGE_DIRECTION).normalize();
    let (cov, rank) = lm::covariance(
        &best.jacobian,
        &best.residuals,
        std::slice::from_ref(&gauge),
        opts.rank_tol,
    );
    if rank < PARAM_NAMES.len() - 1 {
        return Err(Error::RankDeficient {
            what: "mBVD fit",
            rank,
            expected: PARAM_NAMES.len() - 1,
        });
    }

    let params = JointProblem::params(&best.params);
    let nb = spec_b.len();
    let mut k = na;
    let mut take = |present: bool, n: usize| {
        present.then(|| {
            let v = best.residuals[k..k + n].to_vec();
            k += n;
            v
        })
    };
    let phase_residuals_b = take(spec_b.phase_rad.is_some(), nb);
    let phase_residuals_sigma = take(spec_sigma.phase_rad.is_some(), spec_sigma.len());
    Ok(MbvdFit {
        params,
        log_covariance: to_rows(&cov),
        gauge_direction: gauge.iter().cloned().collect(),
        residuals_b: best.residuals[..nb].iter().map(|r| r * b_scale).collect(),
        residuals_sigma: best.residuals[nb..na].iter().map(|r| r * s_scale).collect(),
        phase_residuals_b,
        phase_residuals_sigma,
        relative_residual,
        iterations: best.iterations,
        starts_tried: starts.len(),
    })
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mbvd::derived_quantities;

    fn synth(p: &MbvdParams, n: usize, half_span_fw: f64) -> (ComplexSpectrum, ComplexSpectrum) {
        let d = derived_quantities(p).unwrap();
        let fw = d.f_r_ghz / d.q;
        let f: Vec<f64> = (0..n)
            .map(|i| d.f_r_ghz - half_span_fw * fw + 2.0 * half_span_fw * fw * i as f64 / (n - 1) as f64)
            .collect();
        let b = f.iter().map(|&f| magnetic_rabi(p, f).unwrap().norm()).collect();
        let s = f.iter().map(|&f| acoustic_rabi(p, f).unwrap().norm()).collect();
        (
            ComplexSpectrum::amplitude_only(f.clone(), b).unwrap(),
            ComplexSpectrum::amplitude_only(f, s).unwrap(),
        )
    }

    #[test]
    fn truth_is_a_fixed_point() {
        let p = MbvdParams::mode_3132();
        let (b, s) = synth(&p, 101, 10.0);
        let fit = fit(&b, &s, Some(&p), &FitOptions::default()).unwrap();
        assert!(fit.relative_residual < 1e-9, "{}", fit.relative_residual);
        for (a, t) in fit.params.to_array().iter().zip(p.to_array()) {
            assert!(((a - t) / t).abs() < 1e-9);
        }
    }

    #[test]
    fn gauge_direction_leaves_amplitudes_unchanged() {
        let p = MbvdParams::mode_2732();
        let s = 1.7f64;
        let scaled = MbvdParams::from_array(std::array::from_fn(|i| {
            p.to_array()[i] * s.powf(GAUGE_DIRECTION[i])
        }));
        for f in [2.75, 2.77, 2.771, 2.79] {
            let a = magnetic_rabi(&p, f).unwrap().norm();
            let b = magnetic_rabi(&scaled, f).unwrap().norm();
            assert!(((a - b) / a).abs() < 1e-12);
            let a = acoustic_rabi(&p, f).unwrap();
            let b = acoustic_rabi(&scaled, f).unwrap();
            assert!(((a - b).norm() / a.norm()) < 1e-12);
        }
    }

    #[test]
    fn too_few_samples_rejected() {
        let p = MbvdParams::mode_3132();
        let (b, s) = synth(&p, 10, 10.0);
        assert!(matches!(
            fit(&b, &s, None, &FitOptions::default()),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn window_without_resonance_rejected() {
        let p = MbvdParams::mode_3132();
        let (b, s) = synth(&p, 201, 10.0);
        let hi = s.freq_ghz[s.len() / 2] - 1e-4;
        let b = b.window(0.0, hi);
        let s = s.window(0.0, hi);
        assert!(matches!(
            fit(&b, &s, None, &FitOptions::default()),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn half_max_width_of_triangle() {
        let f: Vec<f64> = (0..11).map(|i| i as f64).collect();
        let a: Vec<f64> = f.iter().map(|x: &f64| 5.0 - (x - 5.0).abs()).collect();
        assert!((half_max_width(&f, &a, 5).unwrap() - 5.0).abs() < 1e-12);
    }
}
