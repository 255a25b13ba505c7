//! SSIM scoring of spectrograms, the `{alpha, phi}` grid scan, and the
//! resulting single-quantum susceptibility `b'`.

use std::f64::consts::SQRT_2;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mbvd::MbvdParams;
use crate::measured::Measured;
use crate::spectro::{self, EnsembleSpec, RabiSpectrogram, SimulationOptions};
use crate::spin::{CouplingRatios, Transition};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SsimWindow {
    /// One evaluation over the whole image.
    Global,
    /// Gaussian-weighted local statistics on every fully contained window,
    /// mean-pooled.
    Gaussian { size: usize, sigma: f64 },
}

impl SsimWindow {
    pub fn gaussian_default() -> Self {
        SsimWindow::Gaussian {
            size: 11,
            sigma: 1.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsimConfig {
    pub dynamic_range: f64,
    pub window: SsimWindow,
    /// Min-max rescale each image to `[0, L]` first.
    pub rescale: bool,
}

impl Default for SsimConfig {
    fn default() -> Self {
        Self {
            dynamic_range: 255.0,
            window: SsimWindow::Global,
            rescale: true,
        }
    }
}

impl SsimConfig {
    pub fn c1(&self) -> f64 {
        (0.01 * self.dynamic_range).powi(2)
    }

    pub fn c2(&self) -> f64 {
        9.0 * self.c1()
    }
}

/// Min-max rescale to `[0, l]`; a constant image maps to zero.
pub fn rescale(img: &Array2<f64>, l: f64) -> Array2<f64> {
    let lo = img.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = img.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    img.mapv(|v| if span > 0.0 { l * (v - lo) / span } else { 0.0 })
}

fn ssim_stats(mx: f64, my: f64, vx: f64, vy: f64, cxy: f64, c1: f64, c2: f64) -> f64 {
    ((2.0 * (mx * my) + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
}

fn global_ssim(x: &Array2<f64>, y: &Array2<f64>, c1: f64, c2: f64) -> f64 {
    let n = x.len() as f64;
    let mx = x.sum() / n;
    let my = y.sum() / n;
    let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y.iter()) {
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
        cxy += (a - mx) * (b - my);
    }
    ssim_stats(mx, my, vx / n, vy / n, cxy / n, c1, c2)
}

fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let w: Vec<f64> = (0..size)
        .map(|i| (-(i as f64 - c).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

fn windowed_ssim(
    x: &Array2<f64>,
    y: &Array2<f64>,
    size: usize,
    sigma: f64,
    c1: f64,
    c2: f64,
) -> Result<f64> {
    let (rows, cols) = x.dim();
    if size == 0 || !(sigma > 0.0) {
        return Err(Error::validation("Gaussian window needs size >= 1 and sigma > 0"));
    }
    if rows < size || cols < size {
        return Err(Error::validation(format!(
            "{rows} x {cols} image is smaller than the {size} x {size} window"
        )));
    }
    let k = gaussian_kernel(size, sigma);
    let mut total = 0.0;
    let mut count = 0usize;
    for r0 in 0..=rows - size {
        for c0 in 0..=cols - size {
            let (mut mx, mut my) = (0.0, 0.0);
            for i in 0..size {
                for j in 0..size {
                    let w = k[i] * k[j];
                    mx += w * x[(r0 + i, c0 + j)];
                    my += w * y[(r0 + i, c0 + j)];
                }
            }
            let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
            for i in 0..size {
                for j in 0..size {
                    let w = k[i] * k[j];
                    let a = x[(r0 + i, c0 + j)] - mx;
                    let b = y[(r0 + i, c0 + j)] - my;
                    vx += w * a * a;
                    vy += w * b * b;
                    cxy += w * (a * b);
                }
            }
            total += ssim_stats(mx, my, vx, vy, cxy, c1, c2);
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// SSIM on the images exactly as given.
pub fn ssim_raw(x: &Array2<f64>, y: &Array2<f64>, cfg: &SsimConfig) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(Error::validation(format!(
            "image dimensions differ: {:?} vs {:?}",
            x.dim(),
            y.dim()
        )));
    }
    if x.is_empty() {
        return Err(Error::validation("empty image"));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::validation("images must be finite"));
    }
    let (c1, c2) = (cfg.c1(), cfg.c2());
    match cfg.window {
        SsimWindow::Global => Ok(global_ssim(x, y, c1, c2)),
        SsimWindow::Gaussian { size, sigma } => windowed_ssim(x, y, size, sigma, c1, c2),
    }
}

pub fn ssim(x: &Array2<f64>, y: &Array2<f64>, cfg: &SsimConfig) -> Result<f64> {
    if cfg.rescale && x.dim() == y.dim() {
        let l = cfg.dynamic_range;
        ssim_raw(&rescale(x, l), &rescale(y, l), cfg)
    } else {
        ssim_raw(x, y, cfg)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanConfig {
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub alpha_steps: usize,
    pub phi_min_deg: f64,
    pub phi_max_deg: f64,
    pub phi_steps: usize,
    /// Re-scan a half-spacing 5 x 5 patch around the coarse peak.
    pub refine: bool,
    pub ssim: SsimConfig,
    /// Min-max normalize each column of data and simulation before scoring.
    pub normalize_columns: bool,
    /// Abort when more than this fraction of cells fail.
    pub max_failed_fraction: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            alpha_min: 0.0,
            alpha_max: 1.5,
            alpha_steps: 31,
            phi_min_deg: -180.0,
            phi_max_deg: 180.0,
            phi_steps: 37,
            refine: true,
            ssim: SsimConfig::default(),
            normalize_columns: true,
            max_failed_fraction: 0.05,
        }
    }
}

impl ScanConfig {
    fn validate(&self) -> Result<()> {
        if self.alpha_steps < 2 || self.phi_steps < 2 {
            return Err(Error::validation(
                "alpha and phi grids need at least two points each to bracket a half maximum",
            ));
        }
        if !(self.alpha_min >= 0.0 && self.alpha_max > self.alpha_min && self.alpha_max <= 1.5) {
            return Err(Error::validation(format!(
                "alpha range [{}, {}] must lie within [0, 1.5]",
                self.alpha_min, self.alpha_max
            )));
        }
        if !(self.phi_max_deg > self.phi_min_deg && self.phi_max_deg - self.phi_min_deg <= 360.0)
        {
            return Err(Error::validation("phi range must be increasing and span <= 360 deg"));
        }
        Ok(())
    }

    pub fn alpha_grid(&self) -> Vec<f64> {
        linspace(self.alpha_min, self.alpha_max, self.alpha_steps)
    }

    pub fn phi_grid_deg(&self) -> Vec<f64> {
        linspace(self.phi_min_deg, self.phi_max_deg, self.phi_steps)
    }

    /// A full-circle phi grid is treated as periodic by the HWHM search.
    fn phi_periodic(&self) -> bool {
        let step = (self.phi_max_deg - self.phi_min_deg) / (self.phi_steps - 1) as f64;
        self.phi_max_deg - self.phi_min_deg + step >= 360.0 - 1e-9
    }
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Wrap an angle in degrees into `(-180, 180]`.
pub fn wrap_deg(phi: f64) -> f64 {
    let w = (phi + 180.0).rem_euclid(360.0) - 180.0;
    if w <= -180.0 {
        w + 360.0
    } else {
        w
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FailedCell {
    pub alpha: f64,
    pub phi_deg: f64,
    pub error: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SsimGrid {
    pub alpha_grid: Vec<f64>,
    pub phi_grid_deg: Vec<f64>,
    /// `ssim_map[i][j]` at `(alpha_grid[i], phi_grid_deg[j])`; `None` marks a
    /// failed cell.
    pub ssim_map: Vec<Vec<Option<f64>>>,
}

impl SsimGrid {
    fn argmax(&self) -> Option<(usize, usize, f64)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for (i, row) in self.ssim_map.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if let Some(v) = v {
                    if best.is_none_or(|b| *v > b.2) {
                        best = Some((i, j, *v));
                    }
                }
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPeak {
    pub alpha: f64,
    pub phi_deg: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanUncertainty {
    pub d_alpha: f64,
    pub d_phi_deg: f64,
    /// The line cut crossed half maximum on one side only.
    pub alpha_one_sided: bool,
    pub phi_one_sided: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanResult {
    #[serde(flatten)]
    pub coarse: SsimGrid,
    pub refined: Option<SsimGrid>,
    pub peak: ScanPeak,
    pub uncertainty: ScanUncertainty,
    pub failed_cells: Vec<FailedCell>,
}

/// Half width at half maximum of a min-max normalized line cut through
/// `peak`, in grid units. Crossings are linearly interpolated; the flag is set
/// when only one side (or neither) crosses.
pub fn hwhm(values: &[f64], peak: usize, periodic: bool) -> (f64, bool) {
    let n = values.len();
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) || n < 2 {
        return (0.5 * (n.max(2) - 1) as f64, true);
    }
    let norm: Vec<f64> = values.iter().map(|v| (v - lo) / (hi - lo)).collect();
    let at = |k: isize| -> Option<f64> {
        if periodic {
            Some(norm[k.rem_euclid(n as isize) as usize])
        } else if k < 0 || k >= n as isize {
            None
        } else {
            Some(norm[k as usize])
        }
    };
    let limit = if periodic { n as isize - 1 } else { n as isize };
    let crossing = |dir: isize| -> Option<f64> {
        let mut prev = norm[peak];
        for s in 1..=limit {
            let v = at(peak as isize + dir * s)?;
            if v < 0.5 {
                return Some((s - 1) as f64 + (prev - 0.5) / (prev - v));
            }
            prev = v;
        }
        None
    };
    match (crossing(-1), crossing(1)) {
        (Some(l), Some(r)) => (0.5 * (l + r), false),
        (Some(d), None) | (None, Some(d)) => (d, true),
        (None, None) => (0.5 * (n - 1) as f64, true),
    }
}

struct Scorer<'a> {
    data: Array2<f64>,
    reference: &'a RabiSpectrogram,
    circuit: &'a MbvdParams,
    ensemble: &'a EnsembleSpec,
    transition: Transition,
    beta: f64,
    opts: &'a SimulationOptions,
    cfg: &'a ScanConfig,
}

impl Scorer<'_> {
    fn prepare(&self, signal: &Array2<f64>) -> Array2<f64> {
        if self.cfg.normalize_columns {
            spectro::normalize_columns(signal)
        } else {
            signal.clone()
        }
    }

    fn score(&self, alpha: f64, phi_deg: f64) -> Result<f64> {
        let ratios = CouplingRatios::new(alpha, self.beta, wrap_deg(phi_deg).to_radians())?;
        let sim = spectro::simulate_spectrogram(
            self.circuit,
            &ratios,
            self.ensemble,
            self.transition,
            &self.reference.freq_ghz,
            &self.reference.tau_us,
            self.opts,
        )?;
        ssim(&self.prepare(&sim.signal), &self.data, &self.cfg.ssim)
    }

    fn grid(&self, alphas: &[f64], phis: &[f64], failed: &mut Vec<FailedCell>) -> SsimGrid {
        let cells: Vec<(usize, usize)> = (0..alphas.len())
            .flat_map(|i| (0..phis.len()).map(move |j| (i, j)))
            .collect();
        let scores: Vec<Result<f64>> = cells
            .par_iter()
            .map(|&(i, j)| self.score(alphas[i], phis[j]))
            .collect();
        let mut map = vec![vec![None; phis.len()]; alphas.len()];
        for (&(i, j), s) in cells.iter().zip(scores) {
            match s {
                Ok(v) => map[i][j] = Some(v),
                Err(e) => failed.push(FailedCell {
                    alpha: alphas[i],
                    phi_deg: phis[j],
                    error: e.to_string(),
                }),
            }
        }
        SsimGrid {
            alpha_grid: alphas.to_vec(),
            phi_grid_deg: phis.to_vec(),
            ssim_map: map,
        }
    }
}

/// Grid search over `{alpha, phi}` scoring simulated spectrograms against
/// `data` with SSIM.
pub fn scan(
    data: &RabiSpectrogram,
    circuit: &MbvdParams,
    ensemble: &EnsembleSpec,
    transition: Transition,
    beta: f64,
    opts: &SimulationOptions,
    cfg: &ScanConfig,
) -> Result<ScanResult> {
    cfg.validate()?;
    data.validate()?;
    circuit.validate()?;
    ensemble.validate()?;
    let scorer = Scorer {
        data: if cfg.normalize_columns {
            spectro::normalize_columns(&data.signal)
        } else {
            data.signal.clone()
        },
        reference: data,
        circuit,
        ensemble,
        transition,
        beta,
        opts,
        cfg,
    };
    let alphas = cfg.alpha_grid();
    let phis = cfg.phi_grid_deg();
    let mut failed = Vec::new();
    let coarse = scorer.grid(&alphas, &phis, &mut failed);
    let total = alphas.len() * phis.len();
    if failed.len() as f64 > cfg.max_failed_fraction * total as f64 {
        return Err(Error::Convergence {
            what: "SSIM scan",
            detail: format!(
                "{} of {total} cells failed; first: {}",
                failed.len(),
                failed[0].error
            ),
        });
    }
    let (ia, ip, best) = coarse.argmax().ok_or_else(|| Error::Convergence {
        what: "SSIM scan",
        detail: "no cell produced a score".into(),
    })?;

    let cut_alpha: Vec<f64> = coarse.ssim_map.iter().map(|r| r[ip].unwrap_or(f64::MIN)).collect();
    let mut cut_phi: Vec<f64> = coarse.ssim_map[ia].iter().map(|v| v.unwrap_or(f64::MIN)).collect();
    let periodic = cfg.phi_periodic();
    // a closed circle lists -180 and 180 twice; drop the duplicate
    let duplicate_end = periodic && (cfg.phi_max_deg - cfg.phi_min_deg - 360.0).abs() < 1e-9;
    if duplicate_end {
        cut_phi.pop();
    }
    let phi_peak_idx = if duplicate_end && ip == phis.len() - 1 { 0 } else { ip };
    let replace_min = |cut: &mut Vec<f64>| {
        let lo = cut.iter().cloned().filter(|v| *v > f64::MIN).fold(f64::INFINITY, f64::min);
        cut.iter_mut().for_each(|v| {
            if *v == f64::MIN {
                *v = lo
            }
        });
    };
    let mut cut_alpha = cut_alpha;
    replace_min(&mut cut_alpha);
    replace_min(&mut cut_phi);
    let d_alpha_step = alphas[1] - alphas[0];
    let d_phi_step = phis[1] - phis[0];
    let (wa, one_a) = hwhm(&cut_alpha, ia, false);
    let (wp, one_p) = hwhm(&cut_phi, phi_peak_idx, periodic);

    let mut peak = ScanPeak {
        alpha: alphas[ia],
        phi_deg: wrap_deg(phis[ip]),
        ssim: best,
    };
    let refined = if cfg.refine {
        let fa: Vec<f64> = (-2..=2)
            .map(|k| alphas[ia] + 0.5 * k as f64 * d_alpha_step)
            .filter(|a| *a >= cfg.alpha_min - 1e-12 && *a <= cfg.alpha_max + 1e-12)
            .collect();
        let fp: Vec<f64> = (-2..=2)
            .map(|k| phis[ip] + 0.5 * k as f64 * d_phi_step)
            .filter(|p| periodic || (*p >= cfg.phi_min_deg - 1e-9 && *p <= cfg.phi_max_deg + 1e-9))
            .map(wrap_deg)
            .collect();
        let mut refine_failed = Vec::new();
        let fine = scorer.grid(&fa, &fp, &mut refine_failed);
        failed.extend(refine_failed);
        if let Some((i, j, v)) = fine.argmax() {
            if v > peak.ssim {
                peak = ScanPeak {
                    alpha: fa[i],
                    phi_deg: fp[j],
                    ssim: v,
                };
            }
        }
        Some(fine)
    } else {
        None
    };

    Ok(ScanResult {
        coarse,
        refined,
        peak,
        uncertainty: ScanUncertainty {
            d_alpha: wa * d_alpha_step,
            d_phi_deg: wp * d_phi_step,
            alpha_one_sided: one_a,
            phi_one_sided: one_p,
        },
        failed_cells: failed,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BPrime {
    /// MHz/GPa
    pub b_prime: Measured,
    pub ratio_text: String,
}

/// `b' = sqrt(2) alpha b` with linear error propagation.
pub fn extract_bprime(alpha: Measured, b: Measured) -> Result<BPrime> {
    if b.value == 0.0 || !b.value.is_finite() {
        return Err(Error::validation("b must be finite and non-zero"));
    }
    let value = SQRT_2 * alpha.value * b.value;
    let sigma = SQRT_2 * ((b.value * alpha.sigma).powi(2) + (alpha.value * b.sigma).powi(2)).sqrt();
    let b_prime = Measured::new(value, sigma);
    let ratio_text = format!(
        "b' = sqrt(2) ({:.2} ± {:.2}) b = {:.2} ± {:.2} MHz/GPa",
        alpha.value, alpha.sigma, value, sigma
    );
    Ok(BPrime { b_prime, ratio_text })
}
